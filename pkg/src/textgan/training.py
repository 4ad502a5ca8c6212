"""Training loop: simultaneous autoencoder training, k critic updates per
iteration, one generator update, with checkpointing and divergence detection.

Per iteration the update order is fixed: autoencoder step (skipped in iwgan
mode), then ``critic_steps`` critic updates each on a fresh real batch and
fresh noise, then one generator update. In textkd mode the critic's real
input is the softened autoencoder reconstruction; in iwgan mode it is the
one-hot batch itself. The same loss code paths serve both modes.

All randomness flows through numpy PCG64 streams derived from the master
seed (autoencoder init +1, generator +2, critic +3, data order +4, noise +5),
which is what makes checkpoints bit-reproducible and resumable.
"""

from __future__ import annotations

import json
import logging
import os
import queue
import threading
import time
from dataclasses import dataclass, field, replace

import numpy as np
import torch

from .autoencoder import SequenceAutoencoder, ae_train_step, init_ae_params
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig, format_config, parse_config_text
from .corpus import (
    BatchStream,
    Vocabulary,
    build_vocab,
    encode_corpus,
    load_vocab,
    save_vocab,
)
from .errors import ConfigError, DivergenceError
from .gan import Critic, Generator, critic_loss, generator_loss, init_gan_params, sample_noise
from .optim import Adam

logger = logging.getLogger("textgan")

SEED_AE, SEED_GEN, SEED_CRITIC, SEED_DATA, SEED_NOISE = 1, 2, 3, 4, 5

VOCAB_FILE = "vocab.txt"
METRICS_FILE = "metrics.csv"
EFFECTIVE_CONFIG_FILE = "effective.cfg"


def named_params(module: torch.nn.Module, prefix: str) -> dict[str, torch.Tensor]:
    return {f"{prefix}.{name}": p for name, p in module.named_parameters()}


class MetricWriter:
    """Append-only CSV emitter that never blocks the training loop.

    Rows go through a bounded queue drained by a daemon thread; on overflow
    the row is dropped and counted instead of stalling the loop.
    """

    HEADER = "iteration,L_AE,L_D,L_G,wall_ms"

    def __init__(self, path: str, capacity: int = 1024):
        self.path = path
        self.dropped = 0
        self._queue: queue.Queue = queue.Queue(maxsize=capacity)
        write_header = not (os.path.exists(path) and os.path.getsize(path) > 0)
        self._fh = open(path, "a", encoding="utf-8")
        if write_header:
            self._fh.write(self.HEADER + "\n")
        self._thread = threading.Thread(target=self._drain, daemon=True)
        self._thread.start()

    def _drain(self):
        while True:
            row = self._queue.get()
            if row is None:
                return
            self._fh.write(row + "\n")

    def emit(self, iteration: int, l_ae: float, l_d: float, l_g: float, wall_ms: float):
        row = f"{iteration},{l_ae:.6g},{l_d:.6g},{l_g:.6g},{wall_ms:.3f}"
        try:
            self._queue.put_nowait(row)
        except queue.Full:
            self.dropped += 1

    def close(self):
        self._queue.put(None)
        self._thread.join()
        self._fh.flush()
        self._fh.close()


@dataclass
class TrainState:
    config: TrainConfig
    vocab: Vocabulary
    iteration: int
    ae: SequenceAutoencoder
    generator: Generator
    critic: Critic
    ae_opt: Adam
    critic_opt: Adam
    gen_opt: Adam
    noise_rng: np.random.Generator
    data_stream: BatchStream | None
    metric_history: list[dict] = field(default_factory=list)


def build_models(
    config: TrainConfig, vocab: Vocabulary, dtype: torch.dtype = torch.float32
) -> tuple[SequenceAutoencoder, Generator, Critic]:
    ae = SequenceAutoencoder(vocab.size, config.ae_hidden, vocab.pad_id, dtype)
    gen = Generator(
        config.noise_dim, config.sentence_len, vocab.size, config.channels,
        config.resblocks, config.kernel, config.res_scale, dtype,
    )
    critic = Critic(
        config.sentence_len, vocab.size, config.channels,
        config.resblocks, config.kernel, config.res_scale, dtype,
    )
    return ae, gen, critic


def _make_opts(config: TrainConfig, ae, gen, critic) -> tuple[Adam, Adam, Adam]:
    ae_opt = Adam(named_params(ae, "ae"), config.ae_lr, config.ae_beta1,
                  config.ae_beta2, config.adam_eps)
    critic_opt = Adam(named_params(critic, "critic"), config.gan_lr,
                      config.gan_beta1, config.gan_beta2, config.adam_eps)
    gen_opt = Adam(named_params(gen, "gen"), config.gan_lr, config.gan_beta1,
                   config.gan_beta2, config.adam_eps)
    return ae_opt, critic_opt, gen_opt


def init_state(config: TrainConfig, data_ids: np.ndarray, vocab: Vocabulary) -> TrainState:
    """Fresh state with component seeds split off the master seed."""
    ae, gen, critic = build_models(config, vocab)
    init_ae_params(ae, np.random.Generator(np.random.PCG64(config.seed + SEED_AE)))
    init_gan_params(gen, np.random.Generator(np.random.PCG64(config.seed + SEED_GEN)))
    init_gan_params(critic, np.random.Generator(np.random.PCG64(config.seed + SEED_CRITIC)))
    ae_opt, critic_opt, gen_opt = _make_opts(config, ae, gen, critic)
    return TrainState(
        config=config,
        vocab=vocab,
        iteration=0,
        ae=ae,
        generator=gen,
        critic=critic,
        ae_opt=ae_opt,
        critic_opt=critic_opt,
        gen_opt=gen_opt,
        noise_rng=np.random.Generator(np.random.PCG64(config.seed + SEED_NOISE)),
        data_stream=BatchStream(data_ids, config.batch_size, vocab.size,
                                config.seed + SEED_DATA),
    )


def _all_arrays(state: TrainState) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {}
    for module, prefix in ((state.ae, "ae"), (state.generator, "gen"),
                           (state.critic, "critic")):
        for name, p in named_params(module, prefix).items():
            arrays[name] = p.detach().cpu().numpy()
    for opt, prefix in ((state.ae_opt, "ae"), (state.critic_opt, "critic"),
                        (state.gen_opt, "gen")):
        for name, t in opt.state_arrays().items():
            arrays[f"opt.{prefix}.{name}"] = t.detach().cpu().numpy()
    return arrays


def save_state(state: TrainState, path: str):
    """Write a full training checkpoint directory at ``path``."""
    manifest: dict[str, str] = {
        "mode": state.config.mode,
        "iteration": str(state.iteration),
        "rng.noise": json.dumps(state.noise_rng.bit_generator.state, sort_keys=True),
        "metric_history": json.dumps(state.metric_history, sort_keys=True),
        "opt.ae.t": str(state.ae_opt.t),
        "opt.critic.t": str(state.critic_opt.t),
        "opt.gen.t": str(state.gen_opt.t),
    }
    if state.data_stream is not None:
        manifest["rng.data"] = json.dumps(state.data_stream.get_state(), sort_keys=True)
    # the snapshot records the training configuration, not run provenance:
    # a resumed run's checkpoints must be byte-identical to an uninterrupted
    # run's, so the transient resume path is normalized away
    snapshot = replace(state.config, resume="")
    for line in format_config(snapshot).strip().split("\n"):
        key, _, value = line.partition("=")
        manifest[f"config.{key}"] = value
    save_checkpoint(path, _all_arrays(state), manifest)
    save_vocab(state.vocab, os.path.join(path, VOCAB_FILE))


def load_state(path: str, data_ids: np.ndarray | None = None) -> TrainState:
    """Rebuild a TrainState from a checkpoint directory.

    ``data_ids`` must be supplied (and match the original dataset) to restore
    the batch stream for resumed training; without it the state is usable for
    generation and evaluation only.
    """
    arrays, manifest = load_checkpoint(path)
    config_lines = [
        f"{key[len('config.'):]}={value}"
        for key, value in manifest.items()
        if key.startswith("config.")
    ]
    config = parse_config_text("\n".join(config_lines), source=path)
    vocab = load_vocab(os.path.join(path, VOCAB_FILE))
    ae, gen, critic = build_models(config, vocab)
    ae_opt, critic_opt, gen_opt = _make_opts(config, ae, gen, critic)
    with torch.no_grad():
        for module, prefix in ((ae, "ae"), (gen, "gen"), (critic, "critic")):
            for name, p in named_params(module, prefix).items():
                p.copy_(torch.from_numpy(arrays[name]).view(p.shape))
    for opt, prefix in ((ae_opt, "ae"), (critic_opt, "critic"), (gen_opt, "gen")):
        opt.t = int(manifest[f"opt.{prefix}.t"])
        flat = {
            name: torch.from_numpy(arrays[f"opt.{prefix}.{name}"]).view(
                opt.params[name.split(".", 1)[1]].shape
            )
            for name in opt.state_arrays()
        }
        opt.load_state_arrays(flat)
    noise_rng = np.random.Generator(np.random.PCG64())
    noise_rng.bit_generator.state = json.loads(manifest["rng.noise"])
    data_stream = None
    if data_ids is not None and "rng.data" in manifest:
        data_stream = BatchStream(data_ids, config.batch_size, vocab.size, 0)
        data_stream.set_state(json.loads(manifest["rng.data"]))
    return TrainState(
        config=config,
        vocab=vocab,
        iteration=int(manifest["iteration"]),
        ae=ae,
        generator=gen,
        critic=critic,
        ae_opt=ae_opt,
        critic_opt=critic_opt,
        gen_opt=gen_opt,
        noise_rng=noise_rng,
        data_stream=data_stream,
        metric_history=json.loads(manifest.get("metric_history", "[]")),
    )


def _run_eval(state: TrainState, train_lines: list[str]):
    """Record generated-vs-training JSD for n = 1..4 in the metric history."""
    from .evaluation import generate_samples, ngram_jsd
    from .errors import DegenerateCorpusError

    candidates = generate_samples(
        state.generator, state.vocab,
        num_batches=state.config.eval_batches,
        batch_size=state.config.batch_size,
        seed=state.config.eval_seed,
    )
    entry: dict = {"iteration": state.iteration}
    for n in (1, 2, 3, 4):
        try:
            entry[f"jsd{n}"] = ngram_jsd(candidates, train_lines, n)
        except DegenerateCorpusError:
            entry[f"jsd{n}"] = float("nan")
    state.metric_history.append(entry)
    logger.info("eval @ %d: %s", state.iteration,
                ", ".join(f"jsd{n}={entry[f'jsd{n}']:.4f}" for n in (1, 2, 3, 4)))


def _critic_real_input(state: TrainState, real: torch.Tensor) -> torch.Tensor:
    if state.config.mode == "textkd":
        with torch.no_grad():
            return state.ae.reconstruct(real)
    return real


def train_iteration(state: TrainState) -> tuple[float, float, float]:
    """One full update: AE step, k critic steps, one generator step.

    Returns (L_AE, mean L_D over the k steps, L_G). L_AE is NaN in iwgan
    mode, where the autoencoder is neither read nor written.
    """
    config = state.config
    stream = state.data_stream
    dtype = state.generator.input_proj.weight.dtype

    if config.mode == "textkd":
        batch = torch.as_tensor(stream.next_batch(), dtype=dtype)
        l_ae = ae_train_step(batch, state.ae, state.ae_opt,
                             teacher_forcing=config.teacher_forcing)
    else:
        l_ae = float("nan")

    d_losses = []
    for _ in range(config.critic_steps):
        real = torch.as_tensor(stream.next_batch(), dtype=dtype)
        z = sample_noise(config.batch_size, config.noise_dim, state.noise_rng, dtype)
        real_in = _critic_real_input(state, real)
        with torch.no_grad():
            gen_x = state.generator(z)
        alpha = torch.as_tensor(
            state.noise_rng.uniform(size=config.batch_size), dtype=dtype
        )
        loss_d = critic_loss(state.critic, real_in, gen_x, config.gp_weight,
                             alpha, finite_diff=config.gp_finite_diff)
        grads = torch.autograd.grad(loss_d, list(state.critic_opt.params.values()))
        state.critic_opt.step(dict(zip(state.critic_opt.params.keys(), grads)))
        d_losses.append(float(loss_d.detach()))

    # Algorithm step symmetry: a real batch is drawn here too, even though the
    # generator objective never touches it, so the data stream stays aligned.
    stream.next_batch()
    z = sample_noise(config.batch_size, config.noise_dim, state.noise_rng, dtype)
    gen_x = state.generator(z)
    loss_g = generator_loss(state.critic, gen_x)
    grads = torch.autograd.grad(loss_g, list(state.gen_opt.params.values()))
    state.gen_opt.step(dict(zip(state.gen_opt.params.keys(), grads)))

    return l_ae, float(np.mean(d_losses)), float(loss_g.detach())


# Fields that must match between a checkpoint and the resuming config: they
# determine array shapes, the batch-stream geometry, or which nets train.
_RESUME_LOCKED = ("mode", "sentence_len", "batch_size", "ae_hidden",
                  "noise_dim", "channels", "resblocks", "kernel", "res_scale")


def _check_resume_compatible(loaded: TrainConfig, requested: TrainConfig, path: str):
    for key in _RESUME_LOCKED:
        if getattr(loaded, key) != getattr(requested, key):
            raise ConfigError(
                f"resume: {key}={getattr(requested, key)} does not match "
                f"{key}={getattr(loaded, key)} in checkpoint {path}"
            )


def _apply_opt_hparams(state: TrainState, config: TrainConfig):
    for opt, lr, b1, b2 in (
        (state.ae_opt, config.ae_lr, config.ae_beta1, config.ae_beta2),
        (state.critic_opt, config.gan_lr, config.gan_beta1, config.gan_beta2),
        (state.gen_opt, config.gan_lr, config.gan_beta1, config.gan_beta2),
    ):
        opt.lr, opt.beta1, opt.beta2, opt.eps = lr, b1, b2, config.adam_eps


def train(
    config: TrainConfig,
    lines: list[str],
    out_dir: str,
    max_bad_iterations: int = 10,
) -> TrainState:
    """Run the full training loop and return the final state.

    Writes into ``out_dir``: the effective config echo, the vocabulary file,
    an append-only metrics CSV, periodic checkpoints (``checkpoint_every``),
    and a final checkpoint ``ckpt-<iterations>``. Set ``config.resume`` to a
    checkpoint path to continue an earlier run on the same corpus.
    """
    torch.set_num_threads(config.threads)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, EFFECTIVE_CONFIG_FILE), "w", encoding="utf-8") as fh:
        fh.write(format_config(config))

    if config.resume:
        vocab = load_vocab(os.path.join(config.resume, VOCAB_FILE))
        data_ids = encode_corpus(lines, vocab, config.sentence_len)
        state = load_state(config.resume, data_ids)
        _check_resume_compatible(state.config, config, config.resume)
        state.config = config
        _apply_opt_hparams(state, config)
        logger.info("resumed from %s at iteration %d", config.resume, state.iteration)
    else:
        vocab = build_vocab(lines, config.max_chars)
        data_ids = encode_corpus(lines, vocab, config.sentence_len)
        state = init_state(config, data_ids, vocab)
    save_vocab(vocab, os.path.join(out_dir, VOCAB_FILE))

    metrics = MetricWriter(os.path.join(out_dir, METRICS_FILE))
    log_every = max(1, min(200, config.iterations // 10 or 1))
    bad_iterations = 0
    try:
        while state.iteration < config.iterations:
            if (config.eval_every > 0
                    and state.iteration % config.eval_every == 0
                    and not any(h["iteration"] == state.iteration
                                for h in state.metric_history)):
                _run_eval(state, lines)
            start = time.perf_counter()
            try:
                l_ae, l_d, l_g = train_iteration(state)
            except DivergenceError:
                l_ae, l_d, l_g = float("nan"), float("nan"), float("nan")
            wall_ms = (time.perf_counter() - start) * 1000.0
            state.iteration += 1
            metrics.emit(state.iteration, l_ae, l_d, l_g, wall_ms)

            finite = np.isfinite(l_d) and np.isfinite(l_g) and (
                config.mode != "textkd" or np.isfinite(l_ae)
            )
            bad_iterations = 0 if finite else bad_iterations + 1
            if bad_iterations >= max_bad_iterations:
                raise DivergenceError(
                    f"divergence: non-finite losses for {max_bad_iterations} "
                    f"consecutive iterations, last at iteration {state.iteration}",
                    iteration=state.iteration,
                )

            if state.iteration % log_every == 0:
                logger.info("iter %d: L_AE=%.4g L_D=%.4g L_G=%.4g",
                            state.iteration, l_ae, l_d, l_g)
            if (config.checkpoint_every > 0
                    and state.iteration % config.checkpoint_every == 0):
                save_state(state, os.path.join(out_dir, f"ckpt-{state.iteration}"))

        if config.eval_every > 0 and not any(
            h["iteration"] == state.iteration for h in state.metric_history
        ):
            _run_eval(state, lines)
    finally:
        metrics.close()

    save_state(state, os.path.join(out_dir, f"ckpt-{state.iteration}"))
    return state
