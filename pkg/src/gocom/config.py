"""Experiment configuration: flat text files with [section] headers.

Strict parsing: unknown sections or keys are rejected with the offending
line number, values are converted and validated before any compute starts.
CLI flags override individual keys after the file is read.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional


class ConfigError(ValueError):
    pass


def _to_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("on", "true", "yes", "1"):
        return True
    if v in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {s!r}")


def _to_snr_grid(s: str) -> list[float]:
    vals = [float(v) for v in s.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty SNR grid")
    return vals


def _to_rate(s: str) -> Fraction:
    r = Fraction(s)
    if not (0 < r <= 1):
        raise ValueError(f"rate must lie in (0, 1], got {s}")
    return r


# section -> key -> (converter, default)
_SCHEMA = {
    "experiment": {
        "task": (str, "classify"),
        "system": (str, "gocom"),
        "seed": (int, 0),
        "run_id": (str, ""),
    },
    "data": {
        "source": (str, "synth"),
        "n_train": (int, 2000),
        "n_test": (int, 500),
        "classes": (int, 8),
        "noise": (float, 0.02),
        "train_images": (str, ""),
        "train_labels": (str, ""),
        "test_images": (str, ""),
        "test_labels": (str, ""),
        "limit_train": (int, 0),
        "limit_test": (int, 0),
    },
    "model": {
        "rate": (_to_rate, Fraction(1, 6)),
        "arch": (str, "conv"),
        "snr_gate": (_to_bool, True),
        "task_hidden": (int, 128),
    },
    "channel": {
        "kind": (str, "awgn"),
        "train_snr": (str, "range:-2:20"),
        "test_snrs": (_to_snr_grid, [float(v) for v in range(-2, 21, 2)]),
    },
    "train": {
        "alpha": (float, 0.1),
        "lr": (float, 1e-4),
        "batch": (int, 32),
        "epochs": (int, 25),
        "pretrain_epochs": (int, 10),
        "pretrain_lr": (float, 1e-3),
        "freeze_task": (_to_bool, False),
        "repeats": (int, 10),
    },
    "rl": {
        "gamma": (float, 0.99),
        "eps_start": (float, 1.0),
        "eps_end": (float, 0.05),
        "eps_decay_steps": (int, 50_000),
        "sync_period": (int, 1_000),
        "capacity": (int, 50_000),
        "batch": (int, 32),
        "lr": (float, 1e-4),
        "alpha": (float, 0.0),
        "total_steps": (int, 200_000),
        "pretrain_steps": (int, 25_000),
        "pretrain_lr": (float, 1e-3),
        "eval_episodes": (int, 100),
        "warmup": (int, 500),
        "train_every": (int, 1),
        "freeze_task": (_to_bool, False),
    },
}

_CHOICES = {
    ("experiment", "task"): ("classify", "rl"),
    ("experiment", "system"): ("gocom", "jscc", "upper", "random"),
    ("data", "source"): ("synth", "idx"),
    ("model", "arch"): ("conv", "dense"),
    ("channel", "kind"): ("awgn", "slow_fading", "rayleigh"),
}


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key: tuple[str, str]):
        return self.values[key]

    def get(self, section: str, key: str):
        return self.values[(section, key)]

    def set(self, section: str, key: str, raw: str, where: str = "override") -> None:
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"{where}: unknown key [{section}] {key}")
        conv = _SCHEMA[section][key][0]
        try:
            val = conv(raw)
        except (ValueError, ZeroDivisionError) as e:
            raise ConfigError(f"{where}: bad value for [{section}] {key}: {e}") from e
        choices = _CHOICES.get((section, key))
        if choices and val not in choices:
            raise ConfigError(f"{where}: [{section}] {key} must be one of {choices}, got {val!r}")
        if (section, key) == ("channel", "kind") and val == "rayleigh":
            val = "slow_fading"
        self.values[(section, key)] = val

    @property
    def task(self) -> str:
        return self.get("experiment", "task")

    @property
    def system(self) -> str:
        return self.get("experiment", "system")

    @property
    def seed(self) -> int:
        return self.get("experiment", "seed")

    def run_id(self) -> str:
        rid = self.get("experiment", "run_id")
        if rid:
            return rid
        alpha = self.get("train", "alpha") if self.task == "classify" else self.get("rl", "alpha")
        return f"{self.task}-{self.system}-a{alpha:g}-s{self.seed}"


def default_config() -> ExperimentConfig:
    cfg = ExperimentConfig()
    for section, keys in _SCHEMA.items():
        for key, (_conv, default) in keys.items():
            cfg.values[(section, key)] = default
    return cfg


def parse_config_text(text: str, where: str = "<config>") -> ExperimentConfig:
    cfg = default_config()
    section: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        loc = f"{where}:{lineno}"
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"{loc}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{loc}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ConfigError(f"{loc}: key outside of any [section]")
        key, _, value = line.partition("=")
        cfg.set(section, key.strip(), value.strip(), where=loc)
    _validate(cfg, where)
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        return parse_config_text(f.read(), where=str(path))


def _validate(cfg: ExperimentConfig, where: str) -> None:
    if cfg.get("data", "source") == "idx" and cfg.task == "classify":
        for k in ("train_images", "train_labels", "test_images", "test_labels"):
            if not cfg.get("data", k):
                raise ConfigError(f"{where}: [data] {k} is required when source = idx")
    for sec, key in (("train", "alpha"), ("rl", "alpha")):
        a = cfg.get(sec, key)
        if not (0.0 <= a <= 1.0):
            raise ConfigError(f"{where}: [{sec}] {key} must lie in [0, 1], got {a}")
    if cfg.get("train", "batch") < 1 or cfg.get("rl", "batch") < 1:
        raise ConfigError(f"{where}: batch size must be >= 1")
    g = cfg.get("rl", "gamma")
    if not (0.0 <= g <= 1.0):
        raise ConfigError(f"{where}: [rl] gamma must lie in [0, 1], got {g}")
