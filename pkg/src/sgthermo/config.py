"""Experiment configuration: JSON documents with per-experiment defaults and overrides."""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .integrators import KINDS

EXPERIMENTS = ("doublewell", "order-check", "logreg", "mlp")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    experiment: str
    kinds: list = field(default_factory=list)
    h_values: list = field(default_factory=list)
    d_values: list = field(default_factory=lambda: [0.0])
    total_steps: int = 1000
    burn_in: int = 0
    thinning: int = 1
    batch_size: int = 1
    seed: int = 0
    out_dir: str = "out"
    figures: bool = True
    model: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


_DEFAULTS: dict[str, dict] = {
    "doublewell": {
        "kinds": ["msgnht-euler", "msgnht-split", "sghmc-euler", "sghmc-split"],
        "h_values": [1e-3, 5e-3, 0.05, 0.1, 0.2, 0.3],
        "d_values": [0.0],
        "total_steps": 1_000_000,
        "burn_in": 0,
        "thinning": 1,
        "seed": 1,
        "model": {
            "noise_scale": 1.0,
            "bins": 200,
            "range": [-6.0, 5.0],
            "xi_subsample": 1000,
            "init": [0.0, 1.0, 0.0],
        },
    },
    "order-check": {
        "kinds": ["msgnht-euler", "msgnht-split"],
        "h_values": [0.04, 0.09, 0.15, 0.25, 0.4],
        "d_values": [1.0],
        "total_steps": 400_000,
        "burn_in": 40_000,
        "thinning": 5,
        "seed": 1,
        "model": {"dim": 10, "replicates": 4},
    },
    "logreg": {
        "kinds": ["msgnht-euler", "msgnht-split", "sghmc-euler", "sghmc-split"],
        "h_values": [1e-3, 1e-4, 1e-5],
        "d_values": [1.0, 5.0, 10.0],
        "total_steps": 3000,
        "burn_in": 300,
        "thinning": 50,
        "batch_size": 10,
        "seed": 1,
        "model": {
            "prior_variance": 10.0,
            "train_path": None,
            "test_path": None,
            "expected_dim": 123,
            "synthetic_kind": "two-gaussians",
            "synthetic_n_train": 2000,
            "synthetic_n_test": 1000,
            "synthetic_h_values": [0.05, 0.01],
            "synthetic_d_values": [1.0],
        },
    },
    "mlp": {
        "kinds": ["msgnht-euler", "msgnht-split"],
        "h_values": [0.02, 0.1],
        "d_values": [5.0],
        "batch_size": 64,
        "seed": 1,
        "model": {
            "layer_sizes": [2, 16, 2],
            "activation": "relu",
            "prior_variance": 1.0,
            "dataset": "xor-quadrants",
            "n_train": 1024,
            "n_test": 512,
            "epochs": 40,
            "halve_at_epoch": 20,
            "init_scale": 0.1,
            "thin_per_epoch": 4,
            "image_paths": None,
        },
    },
}


def default_config(experiment: str) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
    return ExperimentConfig(experiment=experiment, **copy.deepcopy(_DEFAULTS[experiment]))


def parse_set_overrides(pairs: "list[str] | None") -> dict:
    """Parse --set key=value flags; values are JSON, falling back to bare strings.

    Dotted keys (model.bins=100) address nested fields.
    """
    tree: dict = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = tree
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set key {key!r} conflicts with an earlier override")
        node[parts[-1]] = value
    return tree


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(
    experiment: str,
    path: "str | Path | None" = None,
    overrides: "dict | None" = None,
    seed: "int | None" = None,
    out_dir: "str | None" = None,
    figures: "bool | None" = None,
) -> ExperimentConfig:
    """Defaults <- JSON file <- --set overrides <- explicit flags, then validate."""
    merged = _merge({"experiment": experiment}, copy.deepcopy(_DEFAULTS.get(experiment, {})))
    if path is not None:
        try:
            with open(path) as fh:
                document = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file {path} is not valid JSON: {err}") from None
        if not isinstance(document, dict):
            raise ConfigError("config document must be a JSON object")
        merged = _merge(merged, document)
    if overrides:
        merged = _merge(merged, overrides)
    if seed is not None:
        merged["seed"] = seed
    if out_dir is not None:
        merged["out_dir"] = str(out_dir)
    if figures is not None:
        merged["figures"] = figures

    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(merged) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    config = ExperimentConfig(**merged)
    validate_config(config)
    return config


def validate_config(config: ExperimentConfig) -> None:
    """Reject impossible combinations before any compute starts."""
    if config.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {config.experiment!r}")
    if not config.kinds:
        raise ConfigError("kinds must be a nonempty list")
    for kind in config.kinds:
        if kind not in KINDS:
            raise ConfigError(f"unknown integrator kind {kind!r}")
    if not config.h_values:
        raise ConfigError("h list must be nonempty")
    if any(h <= 0 for h in config.h_values):
        raise ConfigError("stepsizes must be positive")
    if not config.d_values or any(d < 0 for d in config.d_values):
        raise ConfigError("d_values must be nonempty and nonnegative")
    if config.burn_in < 0 or config.total_steps < config.burn_in:
        raise ConfigError("need total_steps >= burn_in >= 0")
    if config.thinning < 1:
        raise ConfigError("thinning must be >= 1")
    if config.batch_size < 1:
        raise ConfigError("batch_size must be >= 1")

    model = config.model
    if config.experiment == "logreg":
        if (config.total_steps - config.burn_in) // config.thinning < 1:
            raise ConfigError("no post-burn-in samples would be recorded; nothing to predict with")
        for key in ("train_path", "test_path"):
            path = model.get(key)
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{key} does not exist: {path}")
    if config.experiment == "mlp":
        sizes = model.get("layer_sizes", [])
        if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
            raise ConfigError("model.layer_sizes needs >= 2 positive entries")
        if model.get("activation") not in ("relu", "sigmoid"):
            raise ConfigError("model.activation must be 'relu' or 'sigmoid'")
        if int(model.get("epochs", 0)) < 1:
            raise ConfigError("model.epochs must be >= 1")
    if config.experiment == "order-check":
        if len(config.h_values) < 2:
            raise ConfigError("order-check needs >= 2 stepsizes")
        if int(config.model.get("replicates", 0)) < 1:
            raise ConfigError("model.replicates must be >= 1")
        if len(config.d_values) != 1:
            raise ConfigError("order-check uses a single D value")
    if config.experiment == "doublewell" and len(config.d_values) != 1:
        raise ConfigError("doublewell uses a single D value")
