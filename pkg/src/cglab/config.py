"""Run configuration, records and checkpointing.

Configs are flat ``key = value`` text files (diff-friendly provenance);
complex parameters are split into _re/_im pairs.  Unknown keys are
rejected, and every constraint violation is reported with the offending
key.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field as dc_field, fields as dc_fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, SnapshotFormatError

CHECKPOINT_MAGIC = "cglab-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class RunConfig:
    """Everything a run needs; defaults give a small d=3 smoke run."""

    dim: int = 3
    n: int = 16
    mu: float = 1.0
    nu_re: float = 1.0
    nu_im: float = 0.0
    lambda_re: float = 0.0
    lambda_im: float = 0.0
    c: float = 0.0
    kappa: float = 0.02
    kappa_prime: float = 0.04
    eps: float = 0.3
    mollifier: str = "gaussian"
    seed: int = 1
    dt: float = 1e-3
    T: float = 0.1
    mode: str = "paracontrolled"
    out: str = "runs/latest"
    eps_list: tuple[float, ...] = ()
    record_every: int = 10
    burn: float = 6.0

    @property
    def nu(self) -> complex:
        return complex(self.nu_re, self.nu_im)

    @property
    def lam(self) -> complex:
        return complex(self.lambda_re, self.lambda_im)

    def validate(self) -> list[str]:
        """Return constraint-violation messages (empty when valid)."""
        bad = []
        if self.dim not in (1, 2, 3):
            bad.append(f"dim: must be 1, 2 or 3 (got {self.dim})")
        if self.n < 8 or self.n % 2:
            bad.append(f"n: must be even and >= 8 (got {self.n})")
        if self.mu <= 0:
            bad.append(f"mu: must satisfy mu > 0 (got {self.mu})")
        if self.nu_re <= 0:
            bad.append(f"nu_re: must satisfy Re nu > 0 (got {self.nu_re})")
        if self.c < 0:
            bad.append(f"c: must satisfy c >= 0 (got {self.c})")
        if not (0 < self.kappa < self.kappa_prime < 1.0 / 18.0):
            bad.append(
                "kappa/kappa_prime: need 0 < kappa < kappa_prime < 1/18 "
                f"(got {self.kappa}, {self.kappa_prime})"
            )
        if self.eps <= 0:
            bad.append(f"eps: must satisfy eps > 0 (got {self.eps})")
        if self.mollifier not in ("gaussian", "sharp"):
            bad.append(f"mollifier: must be gaussian or sharp (got {self.mollifier!r})")
        if self.dt <= 0:
            bad.append(f"dt: must satisfy dt > 0 (got {self.dt})")
        if self.T <= 0:
            bad.append(f"T: must satisfy T > 0 (got {self.T})")
        if self.mode not in ("paracontrolled", "direct", "coupled"):
            bad.append(f"mode: unknown mode {self.mode!r}")
        if self.record_every < 1:
            bad.append(f"record_every: must be >= 1 (got {self.record_every})")
        if any(e <= 0 for e in self.eps_list):
            bad.append("eps_list: entries must be positive")
        return bad

    def require_valid(self):
        bad = self.validate()
        if bad:
            raise ConfigError("invalid configuration: " + "; ".join(bad))

    def to_dict(self) -> dict:
        out = {}
        for f in dc_fields(self):
            val = getattr(self, f.name)
            out[f.name] = list(val) if isinstance(val, tuple) else val
        return out


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key == "eps_list":
        if not raw:
            return ()
        return tuple(float(tok) for tok in raw.split(","))
    if key in ("mollifier", "mode", "out"):
        return raw
    if key in ("dim", "n", "seed", "record_every"):
        try:
            return int(raw)
        except ValueError as err:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from err
    try:
        return float(raw)
    except ValueError as err:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from err


def load_config(path) -> RunConfig:
    """Parse and validate a key=value config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    known = {f.name for f in dc_fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    cfg = RunConfig(**values)
    cfg.require_valid()
    return cfg


def save_config(cfg: RunConfig, path) -> None:
    lines = []
    for f in dc_fields(RunConfig):
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            val = ",".join(repr(v) for v in val)
        lines.append(f"{f.name} = {val}")
    Path(path).write_text("\n".join(lines) + "\n")


def config_hash(cfg: RunConfig) -> str:
    """Order-independent digest of the configuration."""
    canon = sorted(f"{k}={v!r}" for k, v in cfg.to_dict().items())
    return hashlib.sha256("\n".join(canon).encode()).hexdigest()[:16]


@dataclass
class RunRecord:
    """Provenance of one run: inputs, outputs, status."""

    config_digest: str
    seed: int
    started: str = ""
    finished: str = ""
    exit_status: int = 0
    emitted: list[str] = dc_field(default_factory=list)
    renorm: dict = dc_field(default_factory=dict)

    def start(self):
        self.started = time.strftime("%Y-%m-%dT%H:%M:%S")

    def finish(self, status: int):
        self.finished = time.strftime("%Y-%m-%dT%H:%M:%S")
        self.exit_status = status

    def register(self, path) -> str:
        self.emitted.append(str(path))
        return str(path)

    def write(self, path) -> None:
        payload = {
            "config_digest": self.config_digest,
            "seed": self.seed,
            "started": self.started,
            "finished": self.finished,
            "exit_status": self.exit_status,
            "emitted": self.emitted,
            "renorm": self.renorm,
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")


# -- checkpointing -------------------------------------------------------


def save_checkpoint(path, *, config_digest: str, step: int, t: float,
                    arrays: dict[str, np.ndarray], rng_state: dict) -> None:
    """Snapshot of a run's full reproducibility state."""
    meta = {
        "magic": CHECKPOINT_MAGIC,
        "version": CHECKPOINT_VERSION,
        "config_digest": config_digest,
        "step": step,
        "t": t,
        "rng_state": rng_state,
    }
    np.savez(
        path,
        __meta__=np.frombuffer(json.dumps(meta, default=int).encode(), dtype=np.uint8),
        **arrays,
    )


def load_checkpoint(path, config_digest: str | None = None):
    """Read a checkpoint; refuses bad magic, version or config mismatch."""
    with np.load(path) as data:
        if "__meta__" not in data:
            raise SnapshotFormatError("not a checkpoint file (missing metadata)")
        meta = json.loads(bytes(data["__meta__"].tobytes()).decode())
        if meta.get("magic") != CHECKPOINT_MAGIC:
            raise SnapshotFormatError(f"bad checkpoint magic {meta.get('magic')!r}")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise SnapshotFormatError(
                f"unsupported checkpoint version {meta.get('version')}"
            )
        if config_digest is not None and meta["config_digest"] != config_digest:
            raise SnapshotFormatError(
                "checkpoint belongs to a different configuration "
                f"({meta['config_digest']} != {config_digest})"
            )
        arrays = {k: data[k] for k in data.files if k != "__meta__"}
    return meta, arrays
