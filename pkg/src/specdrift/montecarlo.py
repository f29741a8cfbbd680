"""Finite-N experiments: sample the initial matrix and the Gaussian noise,
diagonalize, and accumulate overlap curves, resolvent traces and the
empirical bivariate CDF.

Samples are independent work units keyed by substream index. Accumulators
keep per-sample contributions, so merging is associative bit-exactly: the
final reduction always runs in ascending substream order regardless of how
partial accumulators were combined.

The initial matrix is always represented in its own eigenbasis (the noise is
rotationally invariant, so a GOE start reduces to a diagonal matrix of
sorted GOE eigenvalues). Overlaps <psi_i(t)|phi_j> are then just eigenvector
components of M_t.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DomainError
from .matrices import RngStream, sample_brownian_increment, sample_goe
from .profiles import SpectralProfile

ROW_SUM_TOL = 1e-10


@dataclass(frozen=True)
class GOEInitial:
    """Random GOE initial matrix with off-diagonal entry variance scale/n."""

    scale: float = 1.0

    def eigenvalues(self, n: int, gen: np.random.Generator) -> np.ndarray:
        return np.linalg.eigvalsh(sample_goe(n, self.scale, gen))

    def describe(self):
        return {"kind": "goe", "scale": self.scale}


@dataclass(frozen=True)
class ProfileInitial:
    """Deterministic initial matrix with eigenvalues a((i-1/2)/n)."""

    profile: SpectralProfile

    def eigenvalues(self, n: int, gen: np.random.Generator) -> np.ndarray:
        x = (np.arange(1, n + 1) - 0.5) / n
        return np.asarray(self.profile.eval(x), dtype=float)

    def describe(self):
        return {"kind": "profile", "profile": self.profile.kind}


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    t: float
    samples: int
    initial: GOEInitial | ProfileInitial
    target_indices: tuple = ()  # 1-based, matching the figures
    master_seed: int = 0
    binning: int = 1

    def __post_init__(self):
        object.__setattr__(self, "target_indices", tuple(self.target_indices))
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if self.samples < 1:
            raise ConfigError("samples must be at least 1")
        if self.t < 0:
            raise ConfigError("t must be nonnegative")
        if any(i < 1 or i > self.n for i in self.target_indices):
            raise ConfigError("target indices must lie in [1, n]")
        if self.binning < 1 or self.binning > self.n:
            raise ConfigError("binning window must lie in [1, n]")

    def describe(self):
        return {"n": self.n, "t": self.t, "samples": self.samples,
                "initial": self.initial.describe(),
                "target_indices": list(self.target_indices),
                "master_seed": self.master_seed, "binning": self.binning}


def _draw_sample(config: ExperimentConfig, k: int):
    """Eigenvalues a of the initial matrix, eigenvalues lam of M_t and the
    eigenvector matrix V of M_t in the initial eigenbasis (V[j, i] =
    <psi_i(t)|phi_j>), for substream k."""
    gen = RngStream(config.master_seed, k).generator()
    a = config.initial.eigenvalues(config.n, gen)
    if config.t > 0:
        m = np.diag(a) + sample_brownian_increment(config.n, config.t, gen)
        lam, vecs = np.linalg.eigh(m)
    else:
        lam, vecs = a.copy(), np.eye(config.n)
    return a, lam, vecs


def _map_samples(config, worker, workers=1):
    indices = range(config.samples)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, indices))
    return [worker(k) for k in indices]


# ---------------------------------------------------------------------------
# overlap curves


@dataclass
class OverlapAccumulator:
    """Mergeable accumulator of squared target-row overlaps.

    Per-sample contributions are kept keyed by substream index; sums are
    formed at finalize time in ascending key order (the fixed summation
    policy that makes merging associative bit-exactly).
    """

    n: int
    target_indices: tuple
    _parts: dict = field(default_factory=dict)

    def add_sample(self, k: int, a: np.ndarray, sq_rows: np.ndarray):
        if k in self._parts:
            raise ConfigError(f"substream {k} accumulated twice")
        row_sums = sq_rows.sum(axis=1)
        if np.max(np.abs(row_sums - 1.0)) > ROW_SUM_TOL:
            raise DomainError("overlap row not normalized; eigenbasis corrupt")
        self._parts[k] = (a, sq_rows)

    def merge(self, other: "OverlapAccumulator") -> "OverlapAccumulator":
        if other.n != self.n or other.target_indices != self.target_indices:
            raise ConfigError("accumulator shapes differ")
        dup = set(self._parts) & set(other._parts)
        if dup:
            raise ConfigError(f"duplicate substreams in merge: {sorted(dup)}")
        merged = OverlapAccumulator(self.n, self.target_indices)
        merged._parts = {**self._parts, **other._parts}
        return merged

    @property
    def count(self) -> int:
        return len(self._parts)

    def finalize(self):
        """(a_mean, sum, sumsq) with deterministic summation order."""
        keys = sorted(self._parts)
        if not keys:
            raise ConfigError("empty accumulator")
        a_sum = np.zeros(self.n)
        s = np.zeros((len(self.target_indices), self.n))
        s2 = np.zeros_like(s)
        for k in keys:
            a, sq = self._parts[k]
            a_sum += a
            s += sq
            s2 += sq * sq
        c = len(keys)
        return a_sum / c, s, s2


@dataclass
class OverlapCurve:
    """N * mean squared overlap against the (mean) initial eigenvalues."""

    index: int  # 1-based target index
    n: int
    t: float
    a: np.ndarray
    values: np.ndarray  # N * mean
    stderr: np.ndarray  # N * standard error (1 sigma)
    samples: int

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["j", "a_j_mean", "overlap_mean_timesN", "stderr_timesN"])
            for j in range(self.n):
                writer.writerow([j + 1, f"{self.a[j]:.12g}",
                                 f"{self.values[j]:.12g}", f"{self.stderr[j]:.12g}"])


def accumulate_overlaps(config: ExperimentConfig, workers: int = 1) -> OverlapAccumulator:
    if not config.target_indices:
        raise ConfigError("no target indices configured")
    targets = [i - 1 for i in config.target_indices]

    def worker(k):
        a, _lam, vecs = _draw_sample(config, k)
        sq = vecs[:, targets].T ** 2  # rows: targets, columns: j
        return k, a, sq

    acc = OverlapAccumulator(config.n, config.target_indices)
    for k, a, sq in _map_samples(config, worker, workers):
        acc.add_sample(k, a, sq)
    return acc


def curves_from_accumulator(config: ExperimentConfig, acc: OverlapAccumulator):
    a_mean, s, s2 = acc.finalize()
    c = acc.count
    curves = {}
    for row, idx in enumerate(acc.target_indices):
        mean = s[row] / c
        var = np.maximum(s2[row] / c - mean ** 2, 0.0)
        stderr = np.sqrt(var / c) if c > 1 else np.zeros_like(mean)
        curves[idx] = OverlapCurve(index=idx, n=config.n, t=config.t,
                                   a=a_mean, values=config.n * mean,
                                   stderr=config.n * stderr, samples=c)
    return curves


def run_overlap_experiment(config: ExperimentConfig, workers: int = 1):
    """Empirical N E[<psi_i|phi_j>^2] curves for each configured target."""
    acc = accumulate_overlaps(config, workers)
    curves = curves_from_accumulator(config, acc)
    if config.binning > 1:
        curves = {i: bin_overlap_curve(c, config.binning) for i, c in curves.items()}
    return curves


# ---------------------------------------------------------------------------
# binning


@lru_cache(maxsize=16)
def _band_smoother(n: int, window: int) -> np.ndarray:
    """Symmetric doubly stochastic band matrix of bandwidth `window`.

    A plain truncated moving average either loses mass or distorts constant
    curves at the boundary; symmetric Sinkhorn scaling of the band of ones
    restores both properties exactly (rows and columns sum to 1).
    """
    if window < 1 or window > n:
        raise DomainError("window must lie in [1, n]")
    if window == 1:
        return np.eye(n)
    h = (window - 1) // 2
    band = np.zeros((n, n))
    for i in range(n):
        band[i, max(0, i - h):min(n, i + (window - h))] = 1.0
    band = (band + band.T) / 2.0  # keep it symmetric for even windows
    k = band.copy()
    for _ in range(100000):
        k /= k.sum(axis=1, keepdims=True)
        k /= k.sum(axis=0, keepdims=True)
        err = np.max(np.abs(k.sum(axis=1) - 1.0))
        if err < 1e-15:
            return (k + k.T) / 2.0
    raise DomainError("band smoother scaling did not converge")


def bin_overlap_curve(curve: OverlapCurve, window: int) -> OverlapCurve:
    """Moving-average smoothing over index windows, mass preserving."""
    k = _band_smoother(curve.n, window)
    return OverlapCurve(index=curve.index, n=curve.n, t=curve.t, a=curve.a,
                        values=k @ curve.values,
                        stderr=np.sqrt(k ** 2 @ curve.stderr ** 2),
                        samples=curve.samples)


# ---------------------------------------------------------------------------
# resolvent functionals


@dataclass
class ScalarEstimate:
    value: complex
    stderr_re: float
    stderr_im: float
    samples: int


def _scalar_estimate(values) -> ScalarEstimate:
    arr = np.asarray(values)
    c = len(arr)
    mean = arr.mean()
    if c > 1:
        se_re = float(arr.real.std(ddof=1) / np.sqrt(c))
        se_im = float(arr.imag.std(ddof=1) / np.sqrt(c))
    else:
        se_re = se_im = 0.0
    return ScalarEstimate(value=complex(mean), stderr_re=se_re, stderr_im=se_im,
                          samples=c)


def theta_sample(a, lam, vecs, z: complex, g) -> complex:
    """(1/N) Tr((M_t - z)^{-1} g(A)) from the eigendecomposition of M_t."""
    ga = np.asarray([g(v) for v in a], dtype=float)
    return complex((ga @ vecs ** 2) @ (1.0 / (lam - z)) / len(a))


def theta_sample_resolvent(a, m_t, z: complex, g) -> complex:
    """Same trace via a direct linear solve; cross-check route."""
    n = len(a)
    r = np.linalg.solve(m_t - z * np.eye(n), np.eye(n))
    ga = np.asarray([g(v) for v in a], dtype=float)
    return complex(np.sum(np.diag(r) * ga) / n)


def estimate_theta(config: ExperimentConfig, z: complex, g, workers: int = 1) -> ScalarEstimate:
    """Monte Carlo estimate of Theta^g_N(z)."""
    z = complex(z)
    if z.imag == 0:
        raise DomainError("z must have nonzero imaginary part")

    def worker(k):
        a, lam, vecs = _draw_sample(config, k)
        return theta_sample(a, lam, vecs, z, g)

    return _scalar_estimate(_map_samples(config, worker, workers))


def empirical_cdf(config: ExperimentConfig, lam: float, alpha: float,
                  workers: int = 1) -> ScalarEstimate:
    """Phi_N(lambda, alpha): mean overlap weight of pairs with
    lambda_i <= lambda and a_j <= alpha."""

    def worker(k):
        a, lams, vecs = _draw_sample(config, k)
        cols = lams <= lam
        rows = a <= alpha
        if not cols.any() or not rows.any():
            return 0.0
        return float(np.sum(vecs[np.ix_(rows, cols)] ** 2) / config.n)

    return _scalar_estimate(_map_samples(config, worker, workers))


def resolvent_diagonal(config: ExperimentConfig, z: complex, workers: int = 1) -> np.ndarray:
    """Per-index mean of ((M_t - z)^{-1})_{ii} in the initial eigenbasis."""
    z = complex(z)
    if z.imag == 0:
        raise DomainError("z must have nonzero imaginary part")

    def worker(k):
        _a, lam, vecs = _draw_sample(config, k)
        return vecs ** 2 @ (1.0 / (lam - z))

    vals = _map_samples(config, worker, workers)
    return np.mean(np.asarray(vals), axis=0)


# ---------------------------------------------------------------------------
# manifests


def write_manifest(path, subcommand: str, config_echo: dict, seed, outputs,
                   duration_s: float, tolerances: dict | None = None):
    manifest = {
        "subcommand": subcommand,
        "config": config_echo,
        "master_seed": seed,
        "toolkit_version": _version(),
        "duration_seconds": duration_s,
        "outputs": list(outputs),
        "tolerances": tolerances or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _version():
    from . import __version__
    return __version__
