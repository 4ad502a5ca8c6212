"""Run configuration: one validated record holding every training knob.

Config files are flat ``key=value`` lines (UTF-8, '#' comments). Every key
has a matching CLI flag; omitted keys take the defaults below. The effective
configuration of a run is echoed verbatim into its output directory so runs
are self-describing.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import ConfigError

MODES = ("textkd", "iwgan")


@dataclass
class TrainConfig:
    # discrimination input: softened reconstructions vs one-hot real text
    mode: str = "textkd"
    sentence_len: int = 32
    batch_size: int = 64
    critic_steps: int = 5
    iterations: int = 200000
    gp_weight: float = 10.0
    # autoencoder optimizer
    ae_lr: float = 0.001
    ae_beta1: float = 0.9
    ae_beta2: float = 0.9
    # generator/critic optimizer
    gan_lr: float = 0.0001
    gan_beta1: float = 0.5
    gan_beta2: float = 0.9
    adam_eps: float = 1e-8
    # architecture
    ae_hidden: int = 512
    noise_dim: int = 128
    channels: int = 512
    resblocks: int = 5
    kernel: int = 5
    res_scale: float = 0.3
    # corpus
    max_chars: int = 100
    lowercase: bool = False
    # run control
    seed: int = 0
    threads: int = 1
    checkpoint_every: int = 0
    eval_every: int = 0
    eval_batches: int = 10
    eval_seed: int = 7781
    teacher_forcing: bool = False
    gp_finite_diff: bool = False
    resume: str = ""


_FIELDS = {f.name: f.type for f in dataclasses.fields(TrainConfig)}


def _parse_value(key: str, raw: str, lineno: int):
    kind = _FIELDS[key]
    try:
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw.strip())
        if kind == "float":
            return float(raw.strip())
        return raw.strip()
    except ValueError:
        raise ConfigError(
            f"line {lineno}: cannot parse value {raw.strip()!r} for key {key!r}"
        ) from None


def validate_config(config: TrainConfig, lines: dict[str, int] | None = None):
    """Raise ConfigError on any invariant violation, naming the source line
    when the value came from a file."""

    def where(key: str) -> str:
        if lines and key in lines:
            return f"line {lines[key]}: "
        return ""

    def require(cond: bool, key: str, message: str):
        if not cond:
            raise ConfigError(f"{where(key)}{message}")

    c = config
    require(c.mode in MODES, "mode",
            f"unknown mode {c.mode!r}; valid modes: {', '.join(MODES)}")
    require(c.sentence_len >= 1, "sentence_len", "sentence_len must be >= 1")
    require(c.batch_size >= 1, "batch_size", "batch_size must be >= 1")
    require(c.critic_steps >= 1, "critic_steps", "critic_steps must be >= 1")
    require(c.iterations >= 0, "iterations", "iterations must be >= 0")
    require(c.gp_weight >= 0, "gp_weight", "gp_weight must be >= 0")
    for key in ("ae_lr", "gan_lr"):
        require(getattr(c, key) > 0, key, f"{key} must be > 0")
    for key in ("ae_beta1", "ae_beta2", "gan_beta1", "gan_beta2"):
        require(0 <= getattr(c, key) < 1, key, f"{key} must lie in [0, 1)")
    require(c.adam_eps > 0, "adam_eps", "adam_eps must be > 0")
    for key in ("ae_hidden", "noise_dim", "channels", "resblocks", "threads",
                "eval_batches"):
        require(getattr(c, key) >= 1, key, f"{key} must be >= 1")
    require(c.kernel >= 1 and c.kernel % 2 == 1, "kernel", "kernel must be odd and >= 1")
    require(c.max_chars >= 1, "max_chars", "max_chars must be >= 1")
    require(c.checkpoint_every >= 0, "checkpoint_every", "checkpoint_every must be >= 0")
    require(c.eval_every >= 0, "eval_every", "eval_every must be >= 0")


def parse_config_text(text: str, source: str = "<config>") -> TrainConfig:
    values: dict[str, object] = {}
    line_of: dict[str, int] = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"{source}: line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, value, lineno)
        line_of[key] = lineno
    config = TrainConfig(**values)
    try:
        validate_config(config, line_of)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return config


def parse_config(path: str) -> TrainConfig:
    """Parse and validate a key=value config file; errors name the line."""
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=path)


def format_config(config: TrainConfig) -> str:
    """Render a config as parse_config input (the effective-config echo)."""
    out = []
    for f in dataclasses.fields(TrainConfig):
        value = getattr(config, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        out.append(f"{f.name}={value}")
    return "\n".join(out) + "\n"
