"""Correlation-controlled synthetic multitask regression data.

Task weight vectors are built as ``W = Q sqrt(L) U^T`` from the
eigendecomposition ``P = Q L Q^T`` of a target correlation matrix and a set
of orthonormal directions ``U``, so that ``w_i . w_j = P_ij`` and every
``w_i`` has unit norm. Labels are ``y_i = sum_{k=1..d_i} (w_i . x)^k + eps_i``
with ``x ~ N(0, I)`` and ``eps_i ~ N(0, sigma_i^2)``.
"""
from __future__ import annotations

import csv
import itertools
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .errors import ContractError, FormatError, NotPSDError, UndefinedMetricError
from .metrics import pearson
from .numkit import Rng, derive_seed, gram_schmidt, sym_eig
from .schema import FeatureSchema, TaskSpec, regression_tasks

DEFAULT_DEGREE = 3
DEFAULT_NOISE = 0.01
EIG_CLAMP = 1e-10
GENERATOR_VERSION = f"multitab-bench/{__version__}"


@dataclass
class GenConfig:
    t: int
    d: int = 32
    correlation: object = 0.6        # scalar p, or t x t nested list
    degrees: list = None
    noise_scales: list = None
    n: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.degrees is None:
            self.degrees = [DEFAULT_DEGREE] * self.t
        if self.noise_scales is None:
            self.noise_scales = [DEFAULT_NOISE] * self.t
        self.degrees = [int(k) for k in self.degrees]
        self.noise_scales = [float(s) for s in self.noise_scales]
        self.validate()

    def validate(self):
        if self.t < 2:
            raise ContractError("GenConfig: t must be >= 2")
        if self.d < self.t:
            raise ContractError(f"GenConfig: d={self.d} must be >= t={self.t}")
        if len(self.degrees) != self.t or len(self.noise_scales) != self.t:
            raise ContractError("GenConfig: degrees and noise_scales need one entry per task")
        if any(k < 1 for k in self.degrees):
            raise ContractError("GenConfig: polynomial degrees must be >= 1")
        if any(s < 0 for s in self.noise_scales):
            raise ContractError("GenConfig: noise scales must be >= 0")
        if self.n < 0:
            raise ContractError("GenConfig: n must be >= 0")
        self.correlation_matrix()

    def correlation_matrix(self):
        if np.ndim(self.correlation) == 0:
            return build_correlation_matrix(self.t, float(self.correlation))
        p = np.array(self.correlation, dtype=np.float64)
        check_correlation_matrix(p, self.t)
        return p

    def to_json(self):
        out = asdict(self)
        if np.ndim(self.correlation) != 0:
            out["correlation"] = np.asarray(self.correlation, dtype=float).tolist()
        return out

    @classmethod
    def from_json(cls, item):
        return cls(**{k: item[k] for k in ("t", "d", "correlation", "degrees", "noise_scales", "n", "seed") if k in item})


@dataclass
class LegacyGenConfig:
    d: int = 32
    p: float = 0.5
    c: float = 1.0
    alphas: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    noise_scale: float = 0.1   # std of N(0, 0.01)
    n: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if len(self.alphas) != len(self.betas):
            raise ContractError("LegacyGenConfig: alphas and betas must have the same length m")
        if not -1.0 <= self.p <= 1.0:
            raise ContractError("LegacyGenConfig: p must lie in [-1, 1]")
        if self.d < 2:
            raise ContractError("LegacyGenConfig: d must be >= 2")

    @property
    def m(self):
        return len(self.alphas)

    def to_json(self):
        return asdict(self)


@dataclass
class SyntheticDataset:
    features: np.ndarray            # n x d
    labels: np.ndarray              # n x t
    config: object = None           # GenConfig / LegacyGenConfig / dict echo
    schema: FeatureSchema = None
    tasks: list = None
    weights: np.ndarray = None

    def __post_init__(self):
        if self.schema is None:
            self.schema = FeatureSchema.numeric(self.features.shape[1])
        if self.tasks is None:
            self.tasks = regression_tasks(self.labels.shape[1])

    @property
    def n(self):
        return self.features.shape[0]


# -------------------------------------------------------------- weights


def build_correlation_matrix(t, p):
    if t < 2:
        raise ContractError("correlation matrix needs t >= 2")
    if not 0.0 <= p <= 1.0:
        raise ContractError(f"uniform correlation p={p} outside [0, 1]; pass a full matrix instead")
    out = np.full((t, t), float(p))
    np.fill_diagonal(out, 1.0)
    return out


def check_correlation_matrix(p, t=None):
    if p.ndim != 2 or p.shape[0] != p.shape[1] or (t is not None and p.shape[0] != t):
        raise ContractError(f"correlation matrix must be {t} x {t}, got shape {p.shape}")
    if np.max(np.abs(p - p.T)) >= 1e-10:
        raise ContractError("correlation matrix is not symmetric")
    if np.max(np.abs(np.diag(p) - 1.0)) > 1e-12:
        raise ContractError("correlation matrix needs a unit diagonal")
    if p.min() < -1.0 or p.max() > 1.0:
        raise ContractError("correlation entries must lie in [-1, 1]")
    if sym_eig(p).eigenvalues.min() < -EIG_CLAMP:
        raise NotPSDError("correlation matrix is not positive semidefinite")


def _sqrt_eigenvalues(values):
    if values.min() < -EIG_CLAMP:
        raise NotPSDError(f"eigenvalue {values.min():.3e} below -{EIG_CLAMP}")
    return np.sqrt(np.clip(values, 0.0, None))


def build_weight_matrix(p, d, rng):
    """t x d task weights whose Gram matrix equals the correlation matrix ``p``."""
    p = np.asarray(p, dtype=np.float64)
    t = p.shape[0]
    if d < t:
        raise ContractError(f"need d >= t, got d={d}, t={t}")
    eig = sym_eig(p)
    u = gram_schmidt(rng.normal((t, d)), rng)
    return eig.eigenvectors @ np.diag(_sqrt_eigenvalues(eig.eigenvalues)) @ u


def cosine_matrix(w):
    norms = np.linalg.norm(w, axis=1)
    return (w @ w.T) / np.outer(norms, norms)


# ---------------------------------------------------------------- labels


def polynomial_labels(z, degree):
    out = np.zeros_like(z)
    term = np.ones_like(z)
    for _ in range(degree):
        term = term * z
        out = out + term
    return out


def generate(config):
    rng = Rng(config.seed)
    w = build_weight_matrix(config.correlation_matrix(), config.d, rng)
    x = rng.normal((config.n, config.d))
    z = x @ w.T
    y = np.empty((config.n, config.t))
    for i in range(config.t):
        y[:, i] = polynomial_labels(z[:, i], config.degrees[i]) + rng.normal(config.n, config.noise_scales[i])
    return SyntheticDataset(x, y, config, weights=w)


def correlation_report(config, repeats, include_self=False):
    """Mean and std of pairwise label Pearson over ``repeats`` fresh datasets.

    Repeat ``r`` is generated from ``derive_seed(config.seed, r)``.
    ``include_self`` adds the diagonal pairs (i, i) as a diagnostic.
    """
    if repeats < 2:
        raise ContractError("correlation_report: repeats must be >= 2")
    pairs = list(itertools.combinations(range(config.t), 2))
    if include_self:
        pairs = [(i, i) for i in range(config.t)] + pairs
    samples = {pair: [] for pair in pairs}
    for r in range(repeats):
        cfg = GenConfig(**{**asdict(config), "seed": derive_seed(config.seed, r)})
        y = generate(cfg).labels
        for i in range(config.t):
            if y[:, i].var() == 0.0:
                raise UndefinedMetricError(f"correlation_report: task y{i} has zero label variance")
        for i, j in pairs:
            samples[(i, j)].append(pearson(y[:, i], y[:, j]))
    return {
        pair: {"mean": float(np.mean(v)), "std": float(np.std(v, ddof=1))}
        for pair, v in samples.items()
    }


def mean_pairwise(report):
    return float(np.mean([v["mean"] for (i, j), v in report.items() if i != j]))


def generate_legacy_mmoe(config):
    """Two-task sinusoidal generator with ``cos(w1, w2) = p``."""
    rng = Rng(config.seed)
    u1, u2 = gram_schmidt(rng.normal((2, config.d)), rng)
    w1 = config.c * u1
    w2 = config.c * (config.p * u1 + np.sqrt(1.0 - config.p ** 2) * u2)
    x = rng.normal((config.n, config.d))
    y = np.empty((config.n, 2))
    for j, w in enumerate((w1, w2)):
        z = x @ w
        y[:, j] = z + sum(np.sin(a * z + b) for a, b in zip(config.alphas, config.betas)) \
            + rng.normal(config.n, config.noise_scale)
    return SyntheticDataset(x, y, config, weights=np.stack([w1, w2]))


# ------------------------------------------------------------------- I/O

DATA_FILE = "data.csv"
SCHEMA_FILE = "schema.json"


def save_dataset(ds, directory):
    os.makedirs(directory, exist_ok=True)
    d, t = ds.features.shape[1], ds.labels.shape[1]
    config = ds.config.to_json() if hasattr(ds.config, "to_json") else ds.config
    seed = config.get("seed") if isinstance(config, dict) else None
    sidecar = {
        "generator_version": GENERATOR_VERSION,
        "generator": type(ds.config).__name__ if ds.config is not None else None,
        "config": config,
        "seed": seed,
        "n": int(ds.n),
        "d": int(d),
        "t": int(t),
        "features": ds.schema.to_json(),
        "tasks": [task.to_json() for task in ds.tasks],
    }
    header = [c.name for c in ds.schema.columns] + [task.name for task in ds.tasks]
    with open(os.path.join(directory, DATA_FILE), "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        block = np.hstack([ds.features, ds.labels])
        for row in block:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    with open(os.path.join(directory, SCHEMA_FILE), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _config_from_sidecar(sidecar):
    kind, cfg = sidecar.get("generator"), sidecar.get("config")
    if kind == "GenConfig":
        return GenConfig.from_json(cfg)
    if kind == "LegacyGenConfig":
        return LegacyGenConfig(**cfg)
    return cfg


def load_dataset(directory):
    schema_path = os.path.join(directory, SCHEMA_FILE)
    data_path = os.path.join(directory, DATA_FILE)
    try:
        with open(schema_path) as fh:
            sidecar = json.load(fh)
        schema = FeatureSchema.from_json(sidecar["features"])
        tasks = [TaskSpec.from_json(item) for item in sidecar["tasks"]]
        n, d, t = int(sidecar["n"]), int(sidecar["d"]), int(sidecar["t"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{schema_path}: malformed schema sidecar ({exc})") from exc
    if schema.d != d or len(tasks) != t:
        raise FormatError(f"{schema_path}: declares d={d}, t={t} but lists {schema.d} features, {len(tasks)} tasks")
    expected = [c.name for c in schema.columns] + [task.name for task in tasks]
    with open(data_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise FormatError(f"{data_path}:1: header {header} does not match sidecar columns {expected}")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != d + t:
                raise FormatError(f"{data_path}:{line_no}: expected {d + t} cells, found {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                for col, v in enumerate(row):
                    try:
                        float(v)
                    except ValueError:
                        raise FormatError(
                            f"{data_path}:{line_no}: non-numeric cell {v!r} in column {expected[col]!r}"
                        ) from None
    if len(rows) != n:
        raise FormatError(f"{data_path}: sidecar declares n={n} rows, found {len(rows)}")
    block = np.array(rows, dtype=np.float64).reshape(n, d + t)
    return SyntheticDataset(block[:, :d].copy(), block[:, d:].copy(), _config_from_sidecar(sidecar),
                            schema=schema, tasks=tasks)
