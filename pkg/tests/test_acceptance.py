"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``. The end-to-end trend
check is marked ``slow`` (it trains both modes for 2000 iterations) but runs
by default.
"""

import math
import os
import time

import numpy as np
import pytest
import torch
from torch import nn

from textgan import (
    Adam,
    AuditConfig,
    SeparabilityConfig,
    SequenceAutoencoder,
    TrainConfig,
    ae_train_step,
    bleu_n,
    build_vocab,
    encode_corpus,
    grad_audit,
    gradient_penalty,
    identical_distribution_control,
    init_ae_params,
    init_gan_params,
    interpolate,
    ngram_jsd,
    one_hot,
    reconstruction_accuracy,
    softened_bayes_accuracy,
    train,
    two_word_experiment,
)
from textgan.gan import Critic, Generator, sample_noise
from textgan.training import named_params

from conftest import sample_grammar_sentences
from oracles import bf_bleu, bf_jsd

torch.set_num_threads(1)


def _report(criterion: str, passed: bool, detail: str):
    print(f"[{criterion}] {'PASS' if passed else 'FAIL'}: {detail}")
    assert passed, f"{criterion}: {detail}"


def _random_corpus(rng, max_sentences=20, vocab_size=10, min_len=1, max_len=12):
    alphabet = "abcdefghij"[:vocab_size]
    count = int(rng.integers(1, max_sentences + 1))
    out = []
    for _ in range(count):
        length = int(rng.integers(min_len, max_len))
        out.append("".join(alphabet[i] for i in rng.integers(0, vocab_size, length)))
    return out


# -- criterion 1: metric oracle equivalence ----------------------------------


def test_criterion_1_metric_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(2024))
    worst = 0.0
    for _ in range(100):
        cands = _random_corpus(rng, min_len=2)
        refs = _random_corpus(rng, min_len=2)
        for order in (1, 2, 3):
            got = bleu_n(cands, refs, order)
            want = bf_bleu(cands, refs, order)
            worst = max(worst, abs(got - want))
        for n in (1, 2):
            got = ngram_jsd(cands, refs, n)
            want = bf_jsd(cands, refs, n)
            worst = max(worst, abs(got - want))
    hand_bleu = abs(bleu_n(["a b c"], ["a b d"], 2) - math.sqrt(1.0 / 3.0))
    hand_ln2 = abs(ngram_jsd(["aaaa"], ["bbbb"], 2) - math.log(2.0))
    p, q = ["ab", "ab", "cd"], ["ab", "cd", "cd"]
    expected = 2 / 3 * math.log(4 / 3) + 1 / 3 * math.log(2 / 3)
    hand_jsd = abs(ngram_jsd(p, q, 2) - expected)
    elapsed = time.perf_counter() - start
    ok = (worst < 1e-12 and hand_bleu < 1e-12 and hand_ln2 < 1e-12
          and hand_jsd < 1e-12 and elapsed < 10.0)
    _report(
        "criterion-1 metric-oracles", ok,
        f"max |impl - oracle| = {worst:.2e} over 100 corpora; hand cases "
        f"{hand_bleu:.1e}/{hand_ln2:.1e}/{hand_jsd:.1e}; {elapsed:.1f}s (< 10s)",
    )


# -- criterion 2: gradient audit ----------------------------------------------


def test_criterion_2_gradient_audit():
    start = time.perf_counter()
    report = grad_audit(AuditConfig())  # T=4, V=5, H=8, C=8, Z=8, m=4, 64-bit
    elapsed = time.perf_counter() - start
    ok = report.passed and report.max_rel_err < 1e-4 and elapsed < 120.0
    _report(
        "criterion-2 gradient-audit", ok,
        f"max relative error {report.max_rel_err:.2e} over "
        f"{len(report.entries)} parameter groups x 3 losses; "
        f"{elapsed:.1f}s (< 120s)",
    )


# -- criterion 3: structural invariants, 10,000 randomized cases ---------------


def test_criterion_3_structural_invariants():
    start = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(31337))
    cases = 0
    failures = []

    # one-hot round trips: 2000 cases
    for _ in range(2000):
        length = int(rng.integers(1, 20))
        vocab_size = int(rng.integers(2, 12))
        ids = rng.integers(0, vocab_size, size=length)
        matrix = one_hot(ids, vocab_size)
        cases += 1
        if not (matrix.argmax(axis=-1) == ids).all() or \
           not (matrix.sum(axis=-1) == 1.0).all():
            failures.append("one-hot round trip")

    # interpolation endpoints: 1500 cases
    for _ in range(1500):
        shape = (int(rng.integers(1, 4)), int(rng.integers(1, 6)), int(rng.integers(2, 6)))
        a = torch.as_tensor(rng.uniform(size=shape))
        b = torch.as_tensor(rng.uniform(size=shape))
        cases += 1
        if not torch.equal(interpolate(a, b, 1.0), a) or \
           not torch.equal(interpolate(a, b, 0.0), b):
            failures.append("interpolation endpoints")

    # generator/decoder row normalization: 1500 cases (one per sequence)
    gen_rows = 0
    while gen_rows < 1000:
        gen = Generator(8, int(rng.integers(2, 8)), int(rng.integers(2, 8)),
                        8, blocks=1, kernel=3)
        init_gan_params(gen, rng)
        with torch.no_grad():
            probs = gen(sample_noise(50, 8, rng))
        for seq in probs:
            if gen_rows >= 1000:
                break
            gen_rows += 1
            cases += 1
            if float((seq.sum(dim=-1) - 1.0).abs().max()) > 1e-5 or float(seq.min()) < 0:
                failures.append("generator row normalization")
    ae_rows = 0
    while ae_rows < 500:
        vocab_size = int(rng.integers(2, 8))
        ae = SequenceAutoencoder(vocab_size, 8, pad_id=0)
        init_ae_params(ae, rng)
        ids = rng.integers(0, vocab_size, size=(25, int(rng.integers(1, 8))))
        with torch.no_grad():
            recon = ae.reconstruct(torch.as_tensor(one_hot(ids, vocab_size)))
        for seq in recon:
            if ae_rows >= 500:
                break
            ae_rows += 1
            cases += 1
            if float((seq.sum(dim=-1) - 1.0).abs().max()) > 1e-5 or float(seq.min()) < 0:
                failures.append("decoder row normalization")

    # gradient-penalty nonnegativity: 800 cases
    for _ in range(800):
        critic = Critic(2, 3, 4, blocks=1, kernel=3)
        init_gan_params(critic, rng)
        x = torch.as_tensor(rng.uniform(size=(2, 2, 3)), dtype=torch.float32)
        cases += 1
        if gradient_penalty(x, critic, 10.0).item() < 0.0:
            failures.append("penalty nonnegativity")

    # gradient-penalty zero at unit input-gradient norm: 700 cases
    class _FixedLinear(nn.Module):
        def __init__(self, direction):
            super().__init__()
            self.direction = direction

        def forward(self, x):
            return (x * self.direction).sum(dim=(1, 2))

    for _ in range(700):
        direction = torch.as_tensor(rng.standard_normal((1, 2, 3)))
        direction = direction / direction.flatten().norm()
        x = torch.as_tensor(rng.uniform(size=(3, 2, 3)), dtype=torch.float64)
        cases += 1
        if gradient_penalty(x, _FixedLinear(direction), 10.0).item() > 1e-10:
            failures.append("penalty zero at unit norm")

    # BLEU range bounds: 1200 cases
    for _ in range(1200):
        cands = _random_corpus(rng, max_sentences=6)
        refs = _random_corpus(rng, max_sentences=6)
        order = int(rng.integers(1, 5))
        score = bleu_n(cands, refs, order)
        cases += 1
        if not 0.0 <= score <= 1.0:
            failures.append("bleu range")

    # JSD range bounds: 1200 cases
    for _ in range(1200):
        a = _random_corpus(rng, max_sentences=6, min_len=2)
        b = _random_corpus(rng, max_sentences=6, min_len=2)
        value = ngram_jsd(a, b, int(rng.integers(1, 3)))
        cases += 1
        if not 0.0 <= value <= math.log(2.0) + 1e-12:
            failures.append("jsd range")

    # JSD exact symmetry: 1100 cases
    for _ in range(1100):
        a = _random_corpus(rng, max_sentences=6, min_len=2)
        b = _random_corpus(rng, max_sentences=6, min_len=2)
        n = int(rng.integers(1, 3))
        cases += 1
        if ngram_jsd(a, b, n) != ngram_jsd(b, a, n):
            failures.append("jsd symmetry")

    elapsed = time.perf_counter() - start
    ok = cases == 10000 and not failures and elapsed < 60.0
    _report(
        "criterion-3 structural-invariants", ok,
        f"{cases} randomized cases, {len(failures)} failures"
        f"{(' (' + failures[0] + ', ...)') if failures else ''}; "
        f"{elapsed:.1f}s (< 60s)",
    )


# -- criterion 4: autoencoder overfit ------------------------------------------


OVERFIT_LINES = [
    "the cat sat", "a dog ran fast", "birds fly high", "fish swim deep",
    "suns rise east", "rain falls down", "wind blows cold", "snow is white",
    "moons glow dim", "stars shine far",
]


def test_criterion_4_autoencoder_overfit():
    start = time.perf_counter()
    vocab = build_vocab(OVERFIT_LINES, 100)
    ids = encode_corpus(OVERFIT_LINES, vocab, 16)
    batch = torch.as_tensor(one_hot(ids, vocab.size))
    model = SequenceAutoencoder(vocab.size, 64, pad_id=vocab.pad_id)
    init_ae_params(model, np.random.Generator(np.random.PCG64(7)))
    opt = Adam(named_params(model, "ae"), lr=1e-3, beta1=0.9, beta2=0.9)
    reached = None
    accuracy = 0.0
    for step in range(1, 5001):
        ae_train_step(batch, model, opt)
        if step % 100 == 0:
            accuracy = reconstruction_accuracy(model, batch)
            if accuracy >= 0.99:
                reached = step
                break
    elapsed = time.perf_counter() - start
    ok = reached is not None and elapsed < 300.0
    _report(
        "criterion-4 ae-overfit", ok,
        f"greedy reconstruction accuracy {accuracy:.4f} at step "
        f"{reached if reached else '>5000'} (T=16, H=64, 10 sentences); "
        f"{elapsed:.0f}s (< 300s)",
    )


# -- criterion 5: end-to-end desk-scale training trend --------------------------


def _desk_train_config(mode: str) -> TrainConfig:
    return TrainConfig(
        mode=mode,
        sentence_len=16,
        batch_size=64,
        critic_steps=5,
        iterations=2000,
        ae_hidden=64,
        noise_dim=32,
        channels=64,
        resblocks=2,
        kernel=5,
        max_chars=10,
        seed=13,
        eval_every=1000,
        eval_batches=10,
        threads=1,
    )


@pytest.mark.slow
def test_criterion_5_end_to_end_trend(tmp_path):
    start = time.perf_counter()
    lines = sample_grammar_sentences(2000, 16, seed=11)
    results = {}
    finite = {}
    for mode in ("textkd", "iwgan"):
        state = train(_desk_train_config(mode), lines, str(tmp_path / mode))
        history = state.metric_history
        results[mode] = (history[0]["jsd1"], history[-1]["jsd1"])
        rows = open(tmp_path / mode / "metrics.csv").read().strip().split("\n")[1:]
        losses = []
        for row in rows:
            _, l_ae, l_d, l_g, _ = row.split(",")
            losses.extend([l_d, l_g] + ([l_ae] if mode == "textkd" else []))
        finite[mode] = all(np.isfinite(float(v)) for v in losses)
    elapsed = time.perf_counter() - start
    drops = {m: (first - last) / first for m, (first, last) in results.items()}
    ok = all(d >= 0.5 for d in drops.values()) and all(finite.values()) \
        and elapsed < 1800.0
    final_textkd = results["textkd"][1]
    final_iwgan = results["iwgan"][1]
    comparison = ("textkd < iwgan" if final_textkd < final_iwgan
                  else "iwgan <= textkd")
    _report(
        "criterion-5 e2e-trend", ok,
        f"JSD-1 textkd {results['textkd'][0]:.4f}->{final_textkd:.4f} "
        f"({drops['textkd']:.0%} drop), iwgan {results['iwgan'][0]:.4f}->"
        f"{final_iwgan:.4f} ({drops['iwgan']:.0%} drop); losses finite: "
        f"{finite}; final-JSD comparison (recorded, not asserted): {comparison}; "
        f"{elapsed/60:.1f} min (< 30 min)",
    )


# -- criterion 6: determinism and resume ----------------------------------------


def _determinism_config(**overrides) -> TrainConfig:
    base = dict(
        sentence_len=16,
        batch_size=32,
        critic_steps=5,
        iterations=100,
        ae_hidden=32,
        noise_dim=16,
        channels=32,
        resblocks=2,
        kernel=5,
        max_chars=10,
        seed=13,
        threads=1,
    )
    base.update(overrides)
    return TrainConfig(**base)


def _dir_bytes(path):
    out = {}
    for name in sorted(os.listdir(path)):
        with open(os.path.join(path, name), "rb") as fh:
            out[name] = fh.read()
    return out


def test_criterion_6_determinism_and_resume(tmp_path):
    start = time.perf_counter()
    lines = sample_grammar_sentences(500, 16, seed=21)

    train(_determinism_config(), lines, str(tmp_path / "a"))
    train(_determinism_config(), lines, str(tmp_path / "b"))
    identical = _dir_bytes(tmp_path / "a" / "ckpt-100") == \
        _dir_bytes(tmp_path / "b" / "ckpt-100")

    train(_determinism_config(iterations=50), lines, str(tmp_path / "head"))
    train(_determinism_config(iterations=100,
                              resume=str(tmp_path / "head" / "ckpt-50")),
          lines, str(tmp_path / "tail"))
    resumed_identical = _dir_bytes(tmp_path / "a" / "ckpt-100") == \
        _dir_bytes(tmp_path / "tail" / "ckpt-100")

    elapsed = time.perf_counter() - start
    ok = identical and resumed_identical and elapsed < 300.0
    _report(
        "criterion-6 determinism-resume", ok,
        f"repeat-run checkpoints bit-identical: {identical}; "
        f"resume(50)+50 equals straight 100: {resumed_identical}; "
        f"{elapsed:.0f}s (< 300s)",
    )


# -- criterion 7: two-word diagnostic --------------------------------------------


def test_criterion_7_two_word_diagnostic():
    start = time.perf_counter()
    cfg = SeparabilityConfig()
    one_hot_rep, soft_rep = two_word_experiment(cfg)
    control = identical_distribution_control(cfg)
    bayes = softened_bayes_accuracy(cfg.softening_radius)
    elapsed = time.perf_counter() - start
    ok = (abs(one_hot_rep.accuracy - 1.0) <= 0.01
          and abs(soft_rep.accuracy - bayes) <= 0.05
          and abs(control.accuracy - 0.5) <= 0.05
          and elapsed < 120.0)
    _report(
        "criterion-7 two-word", ok,
        f"one-hot {one_hot_rep.accuracy:.4f} (target 1.0±0.01), softened "
        f"{soft_rep.accuracy:.4f} vs Bayes {bayes:.4f} (±0.05), control "
        f"{control.accuracy:.4f} (0.5±0.05); {elapsed:.0f}s (< 120s)",
    )
