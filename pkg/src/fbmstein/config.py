"""Experiment configuration files and run manifests.

Config format: flat ``key = value`` lines with ``#`` comments; nested
structure uses dotted keys (``estimator.a = 1.0``). Unknown keys are
rejected by name with their line number. Configs round-trip losslessly
through to_text()/parse (floats via repr).
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone

from .shrinkage import ESTIMATOR_LABELS, R_FUNCTIONS
from .simulate import METHODS

TOOL_VERSION = "fbmstein 0.1.0"


class ConfigError(ValueError):
    """Malformed configuration; message carries the line and key."""


def _parse_float_list(text: str):
    text = text.strip()
    if not text:
        return ()
    return tuple(float(tok) for tok in text.split(","))


def _format_float(x: float) -> str:
    return repr(float(x))


def _format_float_list(xs) -> str:
    return ", ".join(_format_float(x) for x in xs)


@dataclass(frozen=True)
class ExperimentConfig:
    d: int = 3
    hurst: float = 0.25
    T: float = 1.0
    n: int = 256
    method: str = "circulant"
    n_reps: int = 50000
    seed: int = 20260810
    out: str = "runs"
    estimator_label: str = "mle"
    estimator_a: float = 1.0
    estimator_r: str = "one"
    drift_label: str = "zero"
    drift_c: float = 1.0
    sweep_a: tuple = (0.5, 1.0, 1.5)
    stein_t: float = 1.0
    stein_theta: tuple = ()

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.estimator_label not in ESTIMATOR_LABELS:
            raise ConfigError(
                f"unknown estimator label {self.estimator_label!r}; "
                f"expected one of {ESTIMATOR_LABELS}"
            )
        if self.estimator_r not in R_FUNCTIONS:
            raise ConfigError(
                f"unknown shrinkage profile {self.estimator_r!r}; "
                f"expected one of {tuple(R_FUNCTIONS)}"
            )
        if self.n_reps < 1:
            raise ConfigError(f"n_reps must be positive, got {self.n_reps}")

    def to_text(self) -> str:
        lines = [
            "# fbmstein experiment configuration",
            f"d = {self.d}",
            f"hurst = {_format_float(self.hurst)}",
            f"T = {_format_float(self.T)}",
            f"n = {self.n}",
            f"method = {self.method}",
            f"n_reps = {self.n_reps}",
            f"seed = {self.seed}",
            f"out = {self.out}",
            f"estimator.label = {self.estimator_label}",
            f"estimator.a = {_format_float(self.estimator_a)}",
            f"estimator.r = {self.estimator_r}",
            f"drift.label = {self.drift_label}",
            f"drift.c = {_format_float(self.drift_c)}",
            f"sweep.a = {_format_float_list(self.sweep_a)}",
            f"stein.t = {_format_float(self.stein_t)}",
            f"stein.theta = {_format_float_list(self.stein_theta)}",
        ]
        return "\n".join(lines) + "\n"


_KEY_SPEC = {
    "d": ("d", int),
    "hurst": ("hurst", float),
    "T": ("T", float),
    "n": ("n", int),
    "method": ("method", str),
    "n_reps": ("n_reps", int),
    "seed": ("seed", int),
    "out": ("out", str),
    "estimator.label": ("estimator_label", str),
    "estimator.a": ("estimator_a", float),
    "estimator.r": ("estimator_r", str),
    "drift.label": ("drift_label", str),
    "drift.c": ("drift_c", float),
    "sweep.a": ("sweep_a", _parse_float_list),
    "stein.t": ("stein_t", float),
    "stein.theta": ("stein_theta", _parse_float_list),
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse config text; raises ConfigError naming the offending line/key."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _KEY_SPEC:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        attr, conv = _KEY_SPEC[key]
        if attr in values:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        try:
            values[attr] = conv(val)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for key '{key}': {exc}") from None
    try:
        return ExperimentConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def apply_overrides(config: ExperimentConfig, seed=None, n_reps=None, out=None) -> ExperimentConfig:
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if n_reps is not None:
        updates["n_reps"] = n_reps
    if out is not None:
        updates["out"] = out
    return replace(config, **updates) if updates else config


# ---------------------------------------------------------------------------
# run manifests
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    subcommand: str
    config: ExperimentConfig
    started_utc: str = ""
    finished_utc: str = ""
    results: list = field(default_factory=list)  # (filename, row_count)

    def start(self):
        self.started_utc = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")

    def finish(self):
        self.finished_utc = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")

    def add_result(self, filename: str, rows: int):
        self.results.append((filename, rows))

    def to_text(self) -> str:
        lines = [
            "# fbmstein run manifest",
            f"tool_version = {TOOL_VERSION}",
            f"subcommand = {self.subcommand}",
            f"started_utc = {self.started_utc}",
            f"finished_utc = {self.finished_utc}",
            "",
            "[config]",
            self.config.to_text().rstrip("\n"),
            "",
            "[results]",
        ]
        lines += [f"{name} rows={rows}" for name, rows in self.results]
        return "\n".join(lines) + "\n"


def config_from_manifest(text: str) -> ExperimentConfig:
    """Recover the verbatim config section of a manifest (for reruns)."""
    lines = text.splitlines()
    try:
        start = lines.index("[config]") + 1
    except ValueError:
        raise ConfigError("manifest has no [config] section") from None
    body = []
    for line in lines[start:]:
        if line.startswith("["):
            break
        body.append(line)
    return parse_config("\n".join(body))


def write_manifest(directory, manifest: RunManifest) -> str:
    """Write manifest.txt atomically (temp file + rename); returns the path."""
    os.makedirs(directory, exist_ok=True)
    target = os.path.join(directory, "manifest.txt")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".manifest-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(manifest.to_text())
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return target
