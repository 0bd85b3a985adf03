"""Replication driver: train a batch of credit models, probe each one for
incoherent pairs with both audit scenarios, and aggregate rates across models.
"""

from dataclasses import dataclass, field

import numpy as np
import yaml

from .audit import scenario_a_probe, scenario_b_swap
from .credit import (DEFAULT_COLUMN_MAP, REQUIRED_DISCRIMINATIVE, build_feature_space,
                     load_german_numeric, profiles_from_rows, synthesize_credit_like)
from .errors import DataFormatError
from .mlp import TrainSpec, train_mlp

DEFAULT_SWAP_SETS = tuple((name,) for name in REQUIRED_DISCRIMINATIVE) + (REQUIRED_DISCRIMINATIVE,)


@dataclass(frozen=True)
class ExperimentConfig:
    data_path: str | None = None       # None trains on fabricated data
    synthetic_rows: int = 1000
    synthetic_seed: int = 7
    column_map: dict = field(default_factory=lambda: dict(DEFAULT_COLUMN_MAP))
    domain_overrides: dict = field(default_factory=dict)
    n_models: int = 30
    n_profiles: int = 50
    trials_per_model: int = 500
    swap_sets: tuple = DEFAULT_SWAP_SETS
    hidden: int = 23
    epochs: int = 100
    lr: float = 0.1
    batch_size: int = 32
    val_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.n_models < 1:
            raise DataFormatError("n_models must be >= 1")
        if self.n_profiles < 2:
            raise DataFormatError("n_profiles must be >= 2")
        if self.trials_per_model < 1:
            raise DataFormatError("trials_per_model must be >= 1")

    def train_spec(self, seed: int) -> TrainSpec:
        return TrainSpec(hidden=self.hidden, epochs=self.epochs, lr=self.lr,
                         batch_size=self.batch_size, val_fraction=self.val_fraction,
                         seed=seed)


@dataclass(frozen=True)
class ModelRun:
    seed: int
    val_accuracy: float
    history: tuple
    probes: tuple  # AuditReport per scenario, random probing first


@dataclass(frozen=True)
class ProbeSummary:
    features: str
    pairs_tested: int
    ips_found: int
    rate: float     # mean of per-model rates
    stddev: float   # sample stddev of per-model rates


@dataclass(frozen=True)
class ExperimentResult:
    runs: tuple

    def accuracy_mean(self) -> float:
        return float(np.mean([r.val_accuracy for r in self.runs]))

    def accuracy_std(self) -> float:
        accs = [r.val_accuracy for r in self.runs]
        return float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0

    def probe_summaries(self):
        order = []
        by_label = {}
        for run in self.runs:
            for probe in run.probes:
                if probe.features not in by_label:
                    order.append(probe.features)
                    by_label[probe.features] = []
                by_label[probe.features].append(probe)
        out = []
        for label in order:
            probes = by_label[label]
            rates = [p.ip_rate for p in probes]
            out.append(ProbeSummary(
                features=label,
                pairs_tested=sum(p.pairs_tested for p in probes),
                ips_found=sum(p.ips_found for p in probes),
                rate=float(np.mean(rates)),
                stddev=float(np.std(rates, ddof=1)) if len(rates) > 1 else 0.0,
            ))
        return out


def load_experiment_data(cfg: ExperimentConfig):
    if cfg.data_path is not None:
        return load_german_numeric(cfg.data_path)
    return synthesize_credit_like(cfg.synthetic_rows, cfg.synthetic_seed, cfg.column_map)


def run_experiment(cfg: ExperimentConfig, progress=None) -> ExperimentResult:
    """Train cfg.n_models models on one dataset, then probe each through both
    scenarios with profiles drawn from that model's validation rows.

    Fully deterministic for a given config; model i uses seed cfg.seed + i.
    """
    X, y = load_experiment_data(cfg)
    space = build_feature_space(X, cfg.column_map, cfg.domain_overrides)

    runs = []
    for i in range(cfg.n_models):
        seed = cfg.seed + i
        result = train_mlp(X, y, cfg.train_spec(seed))
        val_rows = X[result.val_idx]

        picker = np.random.default_rng(1_000_003 * seed + 101)
        k = min(cfg.n_profiles, len(val_rows))
        chosen = picker.choice(len(val_rows), size=k, replace=False)
        profiles = profiles_from_rows(val_rows[chosen])

        oracle = result.model.decide
        probes = [scenario_a_probe(oracle, space, profiles, cfg.trials_per_model,
                                   rng_seed=1_000_003 * seed + 202)]
        for swap in cfg.swap_sets:
            probes.append(scenario_b_swap(oracle, space, profiles, swap))

        run = ModelRun(seed=seed, val_accuracy=result.final_val_accuracy,
                       history=result.history, probes=tuple(probes))
        runs.append(run)
        if progress is not None:
            progress(run)
    return ExperimentResult(runs=tuple(runs))


# -- configuration files ------------------------------------------------------

def experiment_config_from_doc(doc) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise DataFormatError("experiment config must be a mapping")
    known = {
        "data": "data_path", "synthetic_rows": "synthetic_rows",
        "synthetic_seed": "synthetic_seed", "column_map": "column_map",
        "domain_overrides": "domain_overrides", "models": "n_models",
        "profiles": "n_profiles", "trials": "trials_per_model",
        "swap_sets": "swap_sets", "hidden": "hidden", "epochs": "epochs",
        "lr": "lr", "batch_size": "batch_size", "val_fraction": "val_fraction",
        "seed": "seed",
    }
    kwargs = {}
    for key, value in doc.items():
        if key not in known:
            raise DataFormatError(f"unknown experiment config key {key!r}")
        kwargs[known[key]] = value
    if "swap_sets" in kwargs:
        kwargs["swap_sets"] = tuple(tuple(s) for s in kwargs["swap_sets"])
    if "domain_overrides" in kwargs:
        kwargs["domain_overrides"] = {
            name: (int(pair[0]), int(pair[1]))
            for name, pair in kwargs["domain_overrides"].items()
        }
    return ExperimentConfig(**kwargs)


def load_experiment_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return experiment_config_from_doc(yaml.safe_load(fh))
