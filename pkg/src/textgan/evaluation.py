"""Quantitative evaluation: text decoding, BLEU-N, and n-gram JSD.

BLEU here follows the no-brevity-penalty protocol: BP is fixed to 1, n-gram
precisions use standard clipping against the full reference set, weights are
uniform (1/N) by default, candidates are scored individually and
macro-averaged, and a candidate with any zero precision scores 0 (no
smoothing). Tokenization is word-level by whitespace by default; a flag
switches to character level.

The Jensen-Shannon divergence is computed between empirical character n-gram
distributions in nats, so its maximum is ln 2.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import torch

from .corpus import PAD_CHAR, Vocabulary
from .errors import DegenerateCorpusError, EmptyInputError
from .gan import Generator, sample_noise

# Default seed for the sample-generation protocol; recorded in every report.
EVAL_SEED = 7781


def decode_text(probs: np.ndarray | torch.Tensor, vocab: Vocabulary) -> str:
    """Per-row argmax mapped through the vocabulary, trailing pads stripped.

    Ties resolve to the lowest index.
    """
    if isinstance(probs, torch.Tensor):
        probs = probs.detach().cpu().numpy()
    ids = np.argmax(probs, axis=-1)
    return "".join(vocab.chars[i] for i in ids).rstrip(PAD_CHAR)


def generate_samples(
    generator: Generator,
    vocab: Vocabulary,
    num_batches: int = 10,
    batch_size: int = 64,
    seed: int = EVAL_SEED,
) -> list[str]:
    """Decode ``num_batches * batch_size`` generator samples.

    The noise stream is seeded independently of training so candidate sets
    are reproducible; the default protocol yields 640 sentences.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    texts: list[str] = []
    dtype = generator.input_proj.weight.dtype
    with torch.no_grad():
        for _ in range(num_batches):
            z = sample_noise(batch_size, generator.noise_dim, rng, dtype=dtype)
            probs = generator(z)
            texts.extend(decode_text(p, vocab) for p in probs)
    return texts


def _ngrams(tokens, n: int) -> list[tuple]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def bleu_n(
    candidates: list[str],
    references: list[str],
    max_order: int,
    literal_weights: bool = False,
    char_level: bool = False,
) -> float:
    """Macro-averaged BLEU up to ``max_order`` with BP = 1.

    ``literal_weights`` switches the exponent weights from the standard
    uniform 1/N to 1/n per order. ``char_level`` tokenizes into characters
    instead of whitespace-separated words.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    if not candidates or not references:
        raise EmptyInputError("empty-input: need at least one candidate and one reference")
    tokenize = (lambda s: list(s)) if char_level else (lambda s: s.split())
    ref_tokens = [tokenize(r) for r in references]
    # Clipping cap: the maximum count of each n-gram in any single reference.
    max_ref_counts: list[dict[tuple, int]] = []
    for n in range(1, max_order + 1):
        caps: dict[tuple, int] = {}
        for toks in ref_tokens:
            for gram, cnt in Counter(_ngrams(toks, n)).items():
                if cnt > caps.get(gram, 0):
                    caps[gram] = cnt
        max_ref_counts.append(caps)
    if literal_weights:
        weights = [1.0 / n for n in range(1, max_order + 1)]
    else:
        weights = [1.0 / max_order] * max_order

    total = 0.0
    for cand in candidates:
        toks = tokenize(cand)
        log_sum = 0.0
        zero = False
        for n in range(1, max_order + 1):
            grams = Counter(_ngrams(toks, n))
            denom = sum(grams.values())
            caps = max_ref_counts[n - 1]
            clipped = sum(min(cnt, caps.get(g, 0)) for g, cnt in grams.items())
            if denom == 0 or clipped == 0:
                zero = True
                break
            log_sum += weights[n - 1] * math.log(clipped / denom)
        total += 0.0 if zero else math.exp(log_sum)
    return total / len(candidates)


def _char_ngram_counts(lines: list[str], n: int) -> Counter:
    counts: Counter = Counter()
    for line in lines:
        for i in range(len(line) - n + 1):
            counts[line[i : i + n]] += 1
    return counts


def ngram_jsd(generated: list[str], training: list[str], n: int) -> float:
    """Jensen-Shannon divergence between character n-gram distributions, in nats.

    Both empirical distributions live on the union support; 0*log(0/x) is 0.
    Exactly symmetric in its two corpus arguments.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not generated or not training:
        raise EmptyInputError("empty-input: both corpora must be non-empty")
    p_counts = _char_ngram_counts(generated, n)
    q_counts = _char_ngram_counts(training, n)
    if not p_counts or not q_counts:
        raise DegenerateCorpusError(f"degenerate-corpus: no {n}-grams in one corpus")
    p_total = sum(p_counts.values())
    q_total = sum(q_counts.values())
    jsd = 0.0
    for gram in sorted(set(p_counts) | set(q_counts)):
        p = p_counts.get(gram, 0) / p_total
        q = q_counts.get(gram, 0) / q_total
        m = 0.5 * (p + q)
        term = 0.0
        if p > 0.0:
            term += 0.5 * p * math.log(p / m)
        if q > 0.0:
            term += 0.5 * q * math.log(q / m)
        jsd += term
    return jsd


@dataclass
class MetricReport:
    """BLEU/JSD values plus the protocol metadata that produced them."""

    bleu: dict[int, float]
    jsd: dict[int, float]
    num_candidates: int
    reference_size: int
    sentence_len: int
    mode: str
    iteration: int
    eval_seed: int
    bleu_tokenization: str = "word"
    bleu_weighting: str = "uniform"
    jsd_log_base: str = "e"
    notes: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "bleu": {str(k): v for k, v in sorted(self.bleu.items())},
            "jsd": {str(k): v for k, v in sorted(self.jsd.items())},
            "num_candidates": self.num_candidates,
            "reference_size": self.reference_size,
            "sentence_len": self.sentence_len,
            "mode": self.mode,
            "iteration": self.iteration,
            "eval_seed": self.eval_seed,
            "bleu_tokenization": self.bleu_tokenization,
            "bleu_weighting": self.bleu_weighting,
            "jsd_log_base": self.jsd_log_base,
            "notes": self.notes,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def write(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")


def evaluate(
    generator: Generator,
    vocab: Vocabulary,
    references: list[str],
    mode: str,
    iteration: int,
    num_batches: int = 10,
    batch_size: int = 64,
    eval_seed: int = EVAL_SEED,
    bleu_orders: tuple[int, ...] = (2, 3, 4),
    jsd_orders: tuple[int, ...] = (1, 2, 3, 4),
    char_level_bleu: bool = False,
) -> MetricReport:
    """Generate candidates and score them against a reference corpus.

    The reference corpus serves both as the BLEU reference set and as the
    comparison corpus for the n-gram JSD.
    """
    if not references:
        raise EmptyInputError("empty-input: reference corpus is empty")
    candidates = generate_samples(generator, vocab, num_batches, batch_size, eval_seed)
    bleu = {n: bleu_n(candidates, references, n, char_level=char_level_bleu)
            for n in bleu_orders}
    jsd = {n: ngram_jsd(candidates, references, n) for n in jsd_orders}
    return MetricReport(
        bleu=bleu,
        jsd=jsd,
        num_candidates=len(candidates),
        reference_size=len(references),
        sentence_len=generator.sentence_len,
        mode=mode,
        iteration=iteration,
        eval_seed=eval_seed,
        bleu_tokenization="char" if char_level_bleu else "word",
    )


def evaluate_checkpoint(
    checkpoint_path: str,
    references: list[str],
    num_batches: int = 10,
    batch_size: int = 64,
    eval_seed: int | None = None,
    candidates_out: str | None = None,
) -> MetricReport:
    """Load a training checkpoint and evaluate its generator."""
    from .training import load_state  # local import to avoid a module cycle

    state = load_state(checkpoint_path)
    seed = state.config.eval_seed if eval_seed is None else eval_seed
    report = evaluate(
        state.generator,
        state.vocab,
        references,
        mode=state.config.mode,
        iteration=state.iteration,
        num_batches=num_batches,
        batch_size=batch_size,
        eval_seed=seed,
    )
    if candidates_out:
        candidates = generate_samples(
            state.generator, state.vocab, num_batches, batch_size, seed
        )
        with open(candidates_out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(candidates) + "\n")
    return report
