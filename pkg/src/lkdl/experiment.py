"""End-to-end pipelines and experiment orchestration.

Three pipelines share one protocol (optionally corrupt the raw test set,
map to a feature representation, train a classifier, evaluate):

* ``linear``          — identity features, plain per-class learning;
* ``lkdl``            — landmark virtual-sample features, then any linear
                        learner;
* ``kernel_baseline`` — exact kernel learning (KOMP + batch coefficient
                        update) on per-class kernel submatrices.

Repeats derive per-run seeds from the master seed via numpy SeedSequence
(PCG64 streams), so runs are independent but reproducible.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

# the package re-exports a ``classify`` *function*, which shadows the
# submodule attribute on the package, so import the submodule by file
from .classify import (
    classify_batch,
    corrupt_gaussian,
    corrupt_missing,
    train_per_class,
)
from . import datasets as _datasets
from . import lcksvd as _lcksvd
from . import nystrom as _nystrom
from .dict_learning import kernel_mod_learn
from .kernels import KernelSpec, kernel_diagonal, kernel_matrix
from .sampling import SamplerSpec
from .sparse_coding import komp

RNG_NAME = "numpy-PCG64"

CSV_FIELDS = [
    "pipeline", "kernel", "sampler", "c_over_N", "k", "repeat",
    "accuracy", "t_preprocess", "t_train", "t_test",
]


@dataclass
class ExperimentConfig:
    dataset: dict
    kernel: KernelSpec = field(default_factory=KernelSpec)
    sampler_method: str = "uniform"
    c: int | None = None
    c_fraction: float | None = None
    k: int = 16
    pipeline: str = "lkdl"
    learner: dict = field(default_factory=dict)
    corruption: dict = field(default_factory=dict)
    repeats: int = 1
    seed: int = 0
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        kernel = KernelSpec(**raw.pop("kernel", {}))
        sampler = raw.pop("sampler", {})
        cfg = cls(
            dataset=raw.pop("dataset"),
            kernel=kernel,
            sampler_method=sampler.get("method", "uniform"),
            c=sampler.get("c"),
            c_fraction=sampler.get("c_fraction"),
            **raw,
        )
        if cfg.pipeline not in ("linear", "lkdl", "kernel_baseline"):
            raise ValueError(f"unknown pipeline: {cfg.pipeline!r}")
        if cfg.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if cfg.c_fraction is not None and not 0.0 < cfg.c_fraction <= 1.0:
            raise ValueError("c_fraction must lie in (0, 1]")
        return cfg

    def landmark_count(self, n_train: int) -> int:
        if self.c is not None:
            return min(self.c, n_train)
        if self.c_fraction is not None:
            return max(1, int(round(self.c_fraction * n_train)))
        return n_train

    def c_over_n(self, n_train: int) -> float:
        return self.landmark_count(n_train) / n_train


def derive_seeds(master_seed: int, count: int) -> list[int]:
    """Counter-based split of the master seed into independent run seeds."""
    state = np.random.SeedSequence(master_seed).generate_state(count, dtype=np.uint64)
    return [int(s) for s in state]


def load_split(config: ExperimentConfig):
    """Materialize (train, test) LabeledDatasets from the config."""
    ds = config.dataset
    kind = ds.get("synthetic")
    if kind == "circles":
        n = ds.get("n_per_class", 500)
        radii = tuple(ds.get("radii", (1.0, 2.0)))
        noise = ds.get("noise_sigma", 0.05)
        seed = ds.get("seed", config.seed)
        train = _datasets.synth_circles(n, radii, noise, seed)
        test = _datasets.synth_circles(n, radii, noise, seed + 1)
    elif kind == "gaussian_mixture":
        n = ds.get("n_per_class", 500)
        n_classes = ds.get("n_classes", 2)
        p = ds.get("p", 20)
        seed = ds.get("seed", config.seed)
        # one draw shared by both splits: the class centers are random, so
        # separately seeded train/test sets would use unrelated mixtures
        full = _datasets.synth_gaussian_mixture(2 * n, n_classes, p, seed=seed)
        train, test = _datasets.split_per_class(full, n)
    elif kind is not None:
        raise ValueError(f"unknown synthetic dataset: {kind!r}")
    else:
        train = _load_part(ds["train"])
        test = _load_part(ds["test"])
    if ds.get("normalize", False):
        train = _datasets.normalize_unit(train)
        test = _datasets.normalize_unit(test)
    if "train_fraction" in ds and ds["train_fraction"] < 1.0:
        train = _datasets.subsample_fraction(
            train, ds["train_fraction"], ds.get("seed", config.seed)
        )
    return train, test


def _load_part(part: dict) -> _datasets.LabeledDataset:
    if "csv" in part:
        return _datasets.load_csv(
            part["csv"], part.get("label_column", 0), part.get("header", False)
        )
    return _datasets.load_idx(part["images"], part["labels"])


def apply_corruption(X_test: np.ndarray, corruption: dict, seed: int) -> np.ndarray:
    if not corruption:
        return X_test
    if "gaussian_sigma" in corruption:
        return corrupt_gaussian(
            X_test, corruption["gaussian_sigma"], seed,
            renormalize=corruption.get("renormalize", True),
        )
    if "missing_fraction" in corruption:
        return corrupt_missing(
            X_test, corruption["missing_fraction"], seed
        )
    raise ValueError(f"unknown corruption: {corruption!r}")


def preprocess(
    config: ExperimentConfig,
    X_train: np.ndarray,
    X_test: np.ndarray,
    seed: int,
):
    """Virtual-sample pre-processing: fit the landmark embedding on the
    train set and map both sets. Returns (nmap, F_train, F_test)."""
    c = config.landmark_count(X_train.shape[1])
    sampler = SamplerSpec(method=config.sampler_method, c=c, seed=seed)
    nmap = _nystrom.fit(X_train, config.kernel, sampler, min(config.k, c))
    return nmap, _nystrom.transform(nmap, X_train), _nystrom.transform(nmap, X_test)


@dataclass
class KernelBaselineModel:
    """Per-class exact-kernel model: class training samples and learned
    coefficient dictionaries."""

    labels: np.ndarray
    class_samples: list[np.ndarray]
    class_kernels: list[np.ndarray]
    coefficient_dicts: list[np.ndarray]
    kernel: KernelSpec
    q: int


def kernel_baseline_train(
    X_train: np.ndarray,
    labels: np.ndarray,
    kernel: KernelSpec,
    m_per_class: int,
    q: int,
    iterations: int,
    seed: int,
) -> KernelBaselineModel:
    classes = np.unique(labels)
    samples, kernels_, dicts = [], [], []
    for i, lab in enumerate(classes):
        X_i = X_train[:, labels == lab]
        K_i = kernel_matrix(kernel, X_i, X_i)
        m_i = min(m_per_class, X_i.shape[1])
        A_i, _, _ = kernel_mod_learn(K_i, m_i, q, iterations, seed=seed + i)
        samples.append(X_i)
        kernels_.append(K_i)
        dicts.append(A_i)
    return KernelBaselineModel(
        labels=classes, class_samples=samples, class_kernels=kernels_,
        coefficient_dicts=dicts, kernel=kernel, q=q,
    )


def kernel_baseline_classify(
    model: KernelBaselineModel, X_test: np.ndarray
) -> np.ndarray:
    n = X_test.shape[1]
    res = np.empty((model.labels.shape[0], n))
    kzz = kernel_diagonal(model.kernel, X_test)
    for i, (X_i, K_i, A_i) in enumerate(
        zip(model.class_samples, model.class_kernels, model.coefficient_dicts)
    ):
        K_ZX = kernel_matrix(model.kernel, X_test, X_i)
        KA = K_i @ A_i
        M = A_i.T @ KA
        B = K_ZX @ A_i
        for j in range(n):
            code = komp(
                K_i, K_ZX[j], float(kzz[j]), A_i, model.q,
                b=B[j], M=M,
            )
            res[i, j] = code.residual_norm**2
    return model.labels[np.argmin(res, axis=0)]


def _train_and_classify(config, F_train, y_train, F_test, seed):
    """Train the configured learner on features and predict test labels.
    Returns (t_train, t_test, predictions)."""
    learner = dict(config.learner)
    kind = learner.pop("type", "per_class")
    t0 = time.monotonic()
    if kind == "per_class":
        model = train_per_class(
            F_train, y_train,
            m_per_class=learner.get("m_per_class", 50),
            q=learner.get("q", 5),
            iterations=learner.get("iterations", 5),
            method=learner.get("method", "ksvd"),
            seed=seed,
        )
        t1 = time.monotonic()
        pred = classify_batch(model, F_test)
    elif kind == "lcksvd":
        model = _lcksvd.train(
            F_train, y_train,
            m=learner.get("m", 60),
            q=learner.get("q", 5),
            alpha=learner.get("alpha", 1.0),
            beta=learner.get("beta", 1.0),
            iterations=learner.get("iterations", 5),
            variant=learner.get("variant", 2),
            tau2=learner.get("tau2", 1e-4),
            seed=seed,
        )
        t1 = time.monotonic()
        pred = _lcksvd.predict_batch(model, F_test)
    else:
        raise ValueError(f"unknown learner type: {kind!r}")
    t2 = time.monotonic()
    return t1 - t0, t2 - t1, pred


def run_single(config: ExperimentConfig, train, test, seed: int) -> dict:
    """One pipeline run; returns a CSV-row dict."""
    X_test = apply_corruption(test.samples, config.corruption, seed)
    n_train = train.n

    t0 = time.monotonic()
    if config.pipeline == "linear":
        F_train, F_test = train.samples, X_test
        t_pre = time.monotonic() - t0
        t_train, t_test, pred = _train_and_classify(
            config, F_train, train.labels, F_test, seed
        )
    elif config.pipeline == "lkdl":
        _, F_train, F_test = preprocess(config, train.samples, X_test, seed)
        t_pre = time.monotonic() - t0
        t_train, t_test, pred = _train_and_classify(
            config, F_train, train.labels, F_test, seed
        )
    else:
        # exact-kernel baseline; submatrix construction counts as training
        learner = config.learner
        t_pre = 0.0
        t1 = time.monotonic()
        model = kernel_baseline_train(
            train.samples, train.labels, config.kernel,
            m_per_class=learner.get("m_per_class", 50),
            q=learner.get("q", 5),
            iterations=learner.get("iterations", 2),
            seed=seed,
        )
        t_train = time.monotonic() - t1
        t2 = time.monotonic()
        pred = kernel_baseline_classify(model, X_test)
        t_test = time.monotonic() - t2

    accuracy = float(np.mean(pred == test.labels))
    return {
        "pipeline": config.pipeline,
        "kernel": config.kernel.kind,
        "sampler": config.sampler_method,
        "c_over_N": round(config.c_over_n(n_train), 6),
        "k": config.k,
        "repeat": 0,
        "accuracy": accuracy,
        "t_preprocess": round(t_pre, 3),
        "t_train": round(t_train, 3),
        "t_test": round(t_test, 3),
    }


@dataclass
class RunReport:
    rows: list[dict]
    accuracy_mean: float
    accuracy_std: float

    @property
    def accuracies(self) -> list[float]:
        return [r["accuracy"] for r in self.rows]


def run_experiment(config: ExperimentConfig, train=None, test=None) -> RunReport:
    """Run the configured pipeline ``repeats`` times with derived seeds."""
    if train is None or test is None:
        train, test = load_split(config)
    seeds = derive_seeds(config.seed, config.repeats)
    rows = []
    for r, seed in enumerate(seeds):
        row = run_single(config, train, test, seed)
        row["repeat"] = r
        rows.append(row)
    acc = np.array([r["accuracy"] for r in rows])
    return RunReport(
        rows=rows,
        accuracy_mean=float(acc.mean()),
        accuracy_std=float(acc.std()),
    )


SWEEP_AXES = ("c_over_N", "noise_sigma", "missing_fraction", "train_fraction")


def run_sweep(config: ExperimentConfig, axis: str, values: list[float]) -> list[dict]:
    """One experiment per axis value; rows carry the axis value prepended."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis: {axis!r}")
    if not values:
        raise ValueError("sweep values list is empty")
    rows = []
    for value in values:
        cfg = ExperimentConfig(**{**asdict_shallow(config)})
        if axis == "c_over_N":
            cfg.c, cfg.c_fraction = None, float(value)
        elif axis == "noise_sigma":
            cfg.corruption = {**config.corruption, "gaussian_sigma": float(value)}
        elif axis == "missing_fraction":
            cfg.corruption = {"missing_fraction": float(value)}
        else:
            cfg.dataset = {**config.dataset, "train_fraction": float(value)}
        report = run_experiment(cfg)
        for row in report.rows:
            rows.append({axis: value, **row})
    return rows


def asdict_shallow(config: ExperimentConfig) -> dict:
    out = dict(config.__dict__)
    return out


def write_csv(rows: list[dict], path) -> None:
    if not rows:
        raise ValueError("no rows to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = list(rows[0].keys())
    # rows are already ordered (axis value, then repeat index)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def write_manifest(config: ExperimentConfig, path, extra: dict | None = None) -> None:
    """Machine-readable run manifest: config echo, RNG, version, timestamp."""
    from . import __version__

    payload = {
        "config": _jsonable(asdict_shallow(config)),
        "rng": RNG_NAME,
        "library_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if extra:
        payload.update(extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, KernelSpec):
        return asdict(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    return obj
