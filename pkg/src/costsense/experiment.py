"""End-to-end experiment pipeline and its flat-file configuration.

A config is an INI-style file whose sections mirror the groups of
:class:`ExperimentConfig`; every key can be overridden on the command
line as ``--section.key value``. One integer seed drives everything:
data generation, the split protocol, weight init, batch shuffling and
resampling all derive their own streams from it, so a run is fully
reproducible from (config, seed).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from .cost_adapt import (
    CostObjectiveParams,
    alternating_optimize,
    class_separability,
    confusion_matrix,
    fixed_cost_matrix,
    histogram_matrix,
    save_history,
    train_baseline,
)
from .data import (
    LabeledDataset,
    SplitSpec,
    apply_imbalance_protocol,
    generate_gaussian_task,
    load_csv,
    load_idx,
)
from .errors import ConfigError
from .losses import LossKind
from .metrics import evaluate, save_report
from .network import SgdConfig, forward_batch, init_network, save_checkpoint
from .sampling import SmoteConfig, random_undersample, smote_oversample

MODES = ("baseline", "cosen", "fixed-cost", "smote", "rus")
LOSS_NAMES = {"ce": LossKind.CROSS_ENTROPY, "mse": LossKind.MSE,
              "hinge": LossKind.HINGE}


@dataclass
class ExperimentConfig:
    # [data]
    source: str = "gaussian"
    n_classes: int = 5
    dim: int = 2
    samples_per_class: tuple[int, ...] = (300,)
    radius: float = 3.0
    subset_per_class: int = 0  # 0 = use everything (idx/csv sources)
    images: str = ""
    labels: str = ""
    csv_path: str = ""
    label_column: str = "label"
    # [protocol]
    train_fraction: float = 1.0 / 3.0
    val_fraction: float = 0.05
    retention: dict[str, float] = field(default_factory=dict)
    # [network]
    hidden: tuple[int, ...] = (32,)
    # [train]
    loss: str = "ce"
    learning_rate: float = 0.1
    batch_size: int = 16
    epochs: int = 60
    mode: str = "cosen"
    fixed_cost: str = ""
    seed: int | None = None
    # [costs]
    gamma_xi: float = 0.3
    mu1: float | None = None
    sigma1: float | None = None
    mu2: float | None = None
    sigma2: float | None = None
    separability_every: int = 10
    # [sampling]
    smote_k: int = 5
    smote_target: str = "match-majority"
    rus_target: str = "match-minority"
    # [output]
    output_dir: str = "runs/latest"
    label: str = ""

    def loss_kind(self) -> LossKind:
        if self.loss not in LOSS_NAMES:
            raise ConfigError(f"unknown loss {self.loss!r}; pick one of "
                              f"{sorted(LOSS_NAMES)}")
        return LOSS_NAMES[self.loss]

    def validate(self) -> "ExperimentConfig":
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; pick one of {MODES}")
        if self.mode == "fixed-cost" and self.fixed_cost not in ("h", "s", "m"):
            raise ConfigError("mode fixed-cost needs fixed_cost set to h, s or m")
        if self.source not in ("gaussian", "idx", "csv"):
            raise ConfigError(f"unknown data source {self.source!r}")
        self.loss_kind()
        return self


# (section, key) -> (attribute, parser). The config file and the CLI
# override flags share this one schema.


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _parse_retention(text: str) -> dict[str, float]:
    result: dict[str, float] = {}
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ConfigError(f"retention entry {chunk!r} must look like class:frac")
        key, frac = chunk.split(":", 1)
        try:
            result[key.strip()] = float(frac)
        except ValueError:
            raise ConfigError(f"bad retention fraction in {chunk!r}") from None
    return result


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None


def _parse_optional_float(text: str) -> float | None:
    if text.strip().lower() in ("", "auto", "none"):
        return None
    return _parse_float(text)


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None


def _parse_count_or_token(text: str):
    text = text.strip()
    return text if text.startswith("match-") else _parse_int(text)


SCHEMA: dict[tuple[str, str], tuple[str, Any]] = {
    ("data", "source"): ("source", str),
    ("data", "n_classes"): ("n_classes", _parse_int),
    ("data", "dim"): ("dim", _parse_int),
    ("data", "samples_per_class"): ("samples_per_class", _parse_int_tuple),
    ("data", "radius"): ("radius", _parse_float),
    ("data", "subset_per_class"): ("subset_per_class", _parse_int),
    ("data", "images"): ("images", str),
    ("data", "labels"): ("labels", str),
    ("data", "csv_path"): ("csv_path", str),
    ("data", "label_column"): ("label_column", str),
    ("protocol", "train_fraction"): ("train_fraction", _parse_float),
    ("protocol", "val_fraction"): ("val_fraction", _parse_float),
    ("protocol", "retention"): ("retention", _parse_retention),
    ("network", "hidden"): ("hidden", _parse_int_tuple),
    ("train", "loss"): ("loss", str),
    ("train", "learning_rate"): ("learning_rate", _parse_float),
    ("train", "batch_size"): ("batch_size", _parse_int),
    ("train", "epochs"): ("epochs", _parse_int),
    ("train", "mode"): ("mode", str),
    ("train", "fixed_cost"): ("fixed_cost", str),
    ("train", "seed"): ("seed", _parse_int),
    ("costs", "gamma_xi"): ("gamma_xi", _parse_float),
    ("costs", "mu1"): ("mu1", _parse_optional_float),
    ("costs", "sigma1"): ("sigma1", _parse_optional_float),
    ("costs", "mu2"): ("mu2", _parse_optional_float),
    ("costs", "sigma2"): ("sigma2", _parse_optional_float),
    ("costs", "separability_every"): ("separability_every", _parse_int),
    ("sampling", "smote_k"): ("smote_k", _parse_int),
    ("sampling", "smote_target"): ("smote_target", _parse_count_or_token),
    ("sampling", "rus_target"): ("rus_target", _parse_count_or_token),
    ("output", "dir"): ("output_dir", str),
    ("output", "label"): ("label", str),
}


def load_config(path=None, overrides: dict[str, str] | None = None
                ) -> ExperimentConfig:
    """Read a config file (optional) and apply ``section.key`` overrides."""
    cfg = ExperimentConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(str(path))
        if not read:
            raise ConfigError(f"config file {path} not found")
        for section in parser.sections():
            for key, value in parser.items(section):
                _apply(cfg, section, key, value)
    for dotted, value in (overrides or {}).items():
        if "." not in dotted:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        section, key = dotted.split(".", 1)
        _apply(cfg, section, key, value)
    return cfg.validate()


def _apply(cfg: ExperimentConfig, section: str, key: str, value: str) -> None:
    entry = SCHEMA.get((section, key))
    if entry is None:
        raise ConfigError(f"unknown config key [{section}] {key}")
    attr, parse = entry
    setattr(cfg, attr, parse(value))


def config_to_text(cfg: ExperimentConfig) -> str:
    """Render a config back to its file form (used by `train` to archive)."""
    by_section: dict[str, list[str]] = {}
    for (section, key), (attr, _) in SCHEMA.items():
        value = getattr(cfg, attr)
        if value is None:
            text = "auto" if attr in ("mu1", "sigma1", "mu2", "sigma2") else ""
        elif isinstance(value, tuple):
            text = ",".join(str(v) for v in value)
        elif isinstance(value, dict):
            text = ",".join(f"{k}:{v}" for k, v in value.items())
        else:
            text = str(value)
        by_section.setdefault(section, []).append(f"{key} = {text}")
    chunks = []
    for section in ("data", "protocol", "network", "train", "costs",
                    "sampling", "output"):
        chunks.append(f"[{section}]")
        chunks.extend(by_section.get(section, []))
        chunks.append("")
    return "\n".join(chunks)


def resolve_retention(retention: dict[str, float], n_classes: int
                      ) -> dict[int, float]:
    """Expand odd/even tokens and integer keys into a class->fraction map."""
    result: dict[int, float] = {}
    for key, frac in retention.items():
        if key == "odd":
            result.update({c: frac for c in range(1, n_classes, 2)})
        elif key == "even":
            result.update({c: frac for c in range(0, n_classes, 2)})
        else:
            try:
                cls = int(key)
            except ValueError:
                raise ConfigError(f"retention class {key!r} is not an index, "
                                  "odd, or even") from None
            if not 0 <= cls < n_classes:
                raise ConfigError(f"retention class {cls} out of range")
            result[cls] = frac
    return result


# ---------------------------------------------------------------------------
# Pipeline.


def derive_seeds(seed: int) -> dict[str, int]:
    """Independent component seeds from the one run seed."""
    state = np.random.SeedSequence(seed).generate_state(5)
    names = ("data", "protocol", "init", "train", "sampling")
    return {name: int(value) for name, value in zip(names, state)}


def build_dataset(cfg: ExperimentConfig, data_seed: int) -> LabeledDataset:
    if cfg.source == "gaussian":
        counts = cfg.samples_per_class
        if len(counts) == 1:
            counts = counts * cfg.n_classes
        return generate_gaussian_task(cfg.n_classes, cfg.dim, counts,
                                      data_seed, cfg.radius)
    if cfg.source == "idx":
        if not cfg.images or not cfg.labels:
            raise ConfigError("idx source needs images and labels paths")
        ds = load_idx(cfg.images, cfg.labels)
    elif cfg.source == "csv":
        if not cfg.csv_path:
            raise ConfigError("csv source needs csv_path")
        ds = load_csv(cfg.csv_path, cfg.label_column)
    else:
        raise ConfigError(f"unknown data source {cfg.source!r}")
    if cfg.subset_per_class:
        ds = random_undersample(ds, cfg.subset_per_class, data_seed)
    return ds


def build_splits(cfg: ExperimentConfig, seeds: dict[str, int]):
    ds = build_dataset(cfg, seeds["data"])
    spec = SplitSpec(
        train_fraction=cfg.train_fraction,
        val_fraction=cfg.val_fraction,
        retention=resolve_retention(cfg.retention, ds.n_classes),
        seed=seeds["protocol"],
    )
    return apply_imbalance_protocol(ds, spec)


def run_experiment(cfg: ExperimentConfig, write: bool = True):
    """Ingest, split, optionally resample, train, evaluate, write artifacts.

    Returns (report, history, final costs entries). With ``write`` the
    output directory receives report.txt, metrics.csv, confusion.csv,
    history.jsonl, checkpoint.json and the resolved config.
    """
    cfg.validate()
    if cfg.seed is None:
        raise ConfigError("a seed is required to run an experiment")
    seeds = derive_seeds(cfg.seed)
    train, val, test = build_splits(cfg, seeds)

    if cfg.mode == "smote":
        train = smote_oversample(train, SmoteConfig(
            k_neighbors=cfg.smote_k, target=cfg.smote_target,
            seed=seeds["sampling"],
        ))
    elif cfg.mode == "rus":
        train = random_undersample(train, cfg.rus_target, seeds["sampling"])

    dims = (train.features.shape[1],) + cfg.hidden + (train.n_classes,)
    net = init_network(dims, seeds["init"])
    sgd = SgdConfig(cfg.learning_rate, cfg.batch_size, cfg.epochs, seeds["train"])
    kind = cfg.loss_kind()
    params = CostObjectiveParams(cfg.gamma_xi, cfg.mu1, cfg.sigma1,
                                 cfg.mu2, cfg.sigma2)

    if cfg.mode == "cosen":
        net, costs, history = alternating_optimize(
            train, val, net, kind, sgd, params,
            separability_every=cfg.separability_every,
        )
        final_costs = costs.entries
    elif cfg.mode == "fixed-cost":
        outputs, feats, _ = forward_batch(net, val.features)
        preds = np.argmax(outputs, axis=1)
        frozen = fixed_cost_matrix(
            cfg.fixed_cost,
            histogram=histogram_matrix(train.labels, train.n_classes),
            separability=class_separability(feats, val.labels, train.n_classes),
            confusion=confusion_matrix(val.labels, preds, train.n_classes),
        )
        net, costs, history = alternating_optimize(
            train, val, net, kind, sgd, replace(params, gamma_xi=0.0),
            initial_costs=frozen, separability_every=cfg.separability_every,
        )
        final_costs = costs.entries
    else:  # baseline, smote, rus
        net, history = train_baseline(net, train, val, kind, sgd)
        final_costs = np.ones((train.n_classes, train.n_classes))

    # The label is user-supplied run identification, never derived from the
    # mode: equivalent runs (baseline vs cosen with gamma_xi = 0) must write
    # byte-identical reports.
    report = evaluate(net, test, label=cfg.label)

    if write:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_report(report, out)
        save_history(history, out / "history.jsonl")
        save_checkpoint(net, final_costs, out / "checkpoint.json")
        (out / "config.ini").write_text(config_to_text(cfg))
    return report, history, final_costs
