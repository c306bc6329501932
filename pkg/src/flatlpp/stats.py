"""Verification toolbox: KS tests, energy distance, chi-square fits, finite differences."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .rng import substream


class ValidationError(ValueError):
    """Inputs violate the preconditions of a test."""


@dataclass
class SampleBatch:
    """``N x d`` finite samples with a source tag and seed lineage."""

    values: np.ndarray
    label: str = ""
    seed: tuple = ()

    def __post_init__(self):
        v = np.asarray(self.values, float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 2:
            raise ValidationError("need an N x d array with N >= 2")
        if not np.all(np.isfinite(v)):
            raise ValidationError(f"non-finite samples in batch {self.label!r}")
        self.values = v

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column(self, k: int = 0) -> np.ndarray:
        return self.values[:, k]


def _batch(a) -> SampleBatch:
    return a if isinstance(a, SampleBatch) else SampleBatch(a)


def _univariate(a, min_n: int = 1) -> np.ndarray:
    a = _batch(a)
    if a.d != 1:
        raise ValidationError("univariate sample expected")
    if a.n < min_n:
        raise ValidationError(f"at least {min_n} samples required")
    return a.column()


def ecdf(a):
    """Sorted sample and ECDF heights."""
    x = np.sort(_univariate(a))
    return x, np.arange(1, len(x) + 1) / len(x)


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample KS distance and asymptotic p-value."""
    x, y = _univariate(a, 50), _univariate(b, 50)
    r = stats.ks_2samp(x, y, method="asymp")
    return float(r.statistic), float(r.pvalue)


def ks_one_sample(a, cdf) -> tuple[float, float]:
    """One-sample KS against a CDF; the CDF must be monotone on the sample."""
    x = np.sort(_univariate(a, 50))
    F = np.asarray(cdf(x), float)
    if F.shape != x.shape or not np.all(np.isfinite(F)):
        raise ValidationError("cdf must return finite values of the sample's shape")
    if np.any(np.diff(F) < -1e-12) or F.min() < -1e-12 or F.max() > 1 + 1e-12:
        raise ValidationError("cdf is not a non-decreasing map into [0, 1]")
    r = stats.kstest(x, lambda t: np.clip(np.asarray(cdf(t), float), 0, 1), method="asymp")
    return float(r.statistic), float(r.pvalue)


def _pair_distances(X: np.ndarray, block: int = 512) -> np.ndarray:
    """Euclidean distance matrix in float32, built in row blocks."""
    N = X.shape[0]
    D = np.empty((N, N), np.float32)
    sq = np.einsum("ij,ij->i", X, X)
    for s in range(0, N, block):
        blk = X[s : s + block]
        d2 = sq[s : s + block, None] + sq[None, :] - 2 * blk @ X.T
        np.maximum(d2, 0, out=d2)
        D[s : s + block] = np.sqrt(d2)
    return D


def _energy_from_labels(D, Z, na, nb):
    """Energy statistics for label columns ``Z`` (1 marks the first sample)."""
    DZ = D @ Z
    rowsum = D.sum(axis=1, dtype=np.float64)
    s_aa = np.einsum("ij,ij->j", Z, DZ, dtype=np.float64)
    s_ab = Z.T.astype(np.float64) @ rowsum - s_aa
    total = rowsum.sum()
    s_bb = total - 2 * s_ab - s_aa
    return 2 * s_ab / (na * nb) - s_aa / na**2 - s_bb / nb**2


def energy_distance(a, b, permutations: int = 199, seed: int = 0, chunk: int = 50) -> tuple[float, float]:
    """Energy statistic ``2E|X-Y| - E|X-X'| - E|Y-Y'|`` and permutation p-value."""
    A, B = _batch(a), _batch(b)
    if A.d != B.d:
        raise ValidationError("batches must have the same dimension")
    if permutations < 1:
        raise ValidationError("at least one permutation required")
    X = np.concatenate([A.values, B.values])
    center = X.mean(axis=0)
    D = _pair_distances(X - center)
    na, nb, N = A.n, B.n, X.shape[0]
    base = np.zeros((N, 1), np.float32)
    base[:na] = 1
    stat = float(_energy_from_labels(D, base, na, nb)[0])
    gen = substream(seed, "permutation")
    exceed = 0
    done = 0
    while done < permutations:
        k = min(chunk, permutations - done)
        Z = np.zeros((N, k), np.float32)
        for c in range(k):
            Z[gen.permutation(N)[:na], c] = 1
        exceed += int(np.sum(_energy_from_labels(D, Z, na, nb) >= stat - 1e-12 * abs(stat)))
        done += k
    return stat, (1 + exceed) / (1 + permutations)


PILOT_STRIDE = 5


def _split_pilot(x):
    mask = np.zeros(len(x), bool)
    mask[::PILOT_STRIDE] = True
    return x[~mask], x[mask]


def _bin_probs(density, edges):
    p = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(density, lo, hi, limit=200)
        p.append(val)
    return np.array(p)


def chi2_density_fit(a, density, bins: int = 20, support=(-np.inf, np.inf)) -> tuple[float, float]:
    """Pearson chi-square of a univariate sample against a density.

    Cells are delimited by quantiles of a pilot subsample (every
    ``PILOT_STRIDE``-th point), which is left out of the counts so that the
    cells do not depend on the data being tested.  The outer cells extend to
    the ends of ``support``.
    """
    if bins < 5:
        raise ValidationError("at least 5 bins required")
    x, pilot = _split_pilot(_univariate(a, 5 * bins))
    inner = np.quantile(pilot, np.linspace(0, 1, bins + 1)[1:-1])
    edges = np.concatenate([[support[0]], inner, [support[1]]])
    counts = np.histogram(x, bins=np.concatenate([[-np.inf], inner, [np.inf]]))[0]
    return chi2_from_probs(counts, _bin_probs(density, edges))


def chi2_from_probs(counts, probs, ddof: int = 0) -> tuple[float, float]:
    """Pearson chi-square from observed counts and model cell probabilities."""
    counts = np.asarray(counts, float).ravel()
    probs = np.asarray(probs, float).ravel()
    if counts.shape != probs.shape or len(counts) < 2:
        raise ValidationError("counts and probabilities must match")
    if np.any(probs <= 0):
        raise ValidationError("model assigns zero probability to a cell")
    expected = counts.sum() * probs
    stat = float(np.sum((counts - expected) ** 2 / expected))
    return stat, float(stats.chi2.sf(stat, len(counts) - 1 - ddof))


def chi2_ordered_pairs(samples, density, nu: int = 8, nv: int = 5, nodes: int = 24) -> tuple[float, float]:
    """Chi-square of ordered pairs ``x1 <= x2`` against a 2-d density.

    Cells are a product grid in ``(u, v) = (x1, x2 - x1)`` built from
    quantiles of a pilot subsample that is excluded from the counts; cell
    probabilities come from tensor Gauss-Legendre quadrature of ``density``
    (vectorised on ``(..., 2)`` points).  The outer cells are truncated far
    beyond the sample range.
    """
    s = np.asarray(samples, float)
    if s.ndim != 2 or s.shape[1] != 2:
        raise ValidationError("expects an N x 2 array")
    uv = np.stack([s[:, 0], s[:, 1] - s[:, 0]], axis=1)
    if np.any(uv < -1e-9 * max(1.0, float(np.abs(s).max()))):
        raise ValidationError("pairs must be ordered and nonnegative")
    uv = np.maximum(uv, 0.0)
    uv, pilot = _split_pilot(uv)
    u, v = uv[:, 0], uv[:, 1]
    ue = np.concatenate([[0.0], np.quantile(pilot[:, 0], np.linspace(0, 1, nu + 1)[1:-1]), [3 * s.max() + 10]])
    ve = np.concatenate([[0.0], np.quantile(pilot[:, 1], np.linspace(0, 1, nv + 1)[1:-1]), [3 * s.max() + 10]])
    counts = np.histogram2d(u, v, bins=[np.concatenate([ue[:-1], [np.inf]]), np.concatenate([ve[:-1], [np.inf]])])[0]
    t, w = np.polynomial.legendre.leggauss(nodes)
    probs = np.zeros((nu, nv))
    for i in range(nu):
        for j in range(nv):
            probs[i, j] = _cell_mass(density, ue[i], ue[i + 1], ve[j], ve[j + 1], t, w)
    return chi2_from_probs(counts, probs)


def _panels(lo, hi, t, w, k):
    e = np.linspace(lo, hi, k + 1)
    x = ((e[1:, None] - e[:-1, None]) * (t + 1) / 2 + e[:-1, None]).ravel()
    ww = ((e[1:, None] - e[:-1, None]) / 2 * w).ravel()
    return x, ww


def _cell_mass(density, u0, u1, v0, v1, t, w, k: int = 6):
    xu, wu = _panels(u0, u1, t, w, k)
    xv, wv = _panels(v0, v1, t, w, k)
    U, V = np.meshgrid(xu, xv, indexing="ij")
    pts = np.stack([U, U + V], axis=-1)
    return float(np.einsum("i,ij,j->", wu, np.asarray(density(pts), float), wv))


def bootstrap_ci(values, stat=np.mean, n_boot: int = 1000, level: float = 0.95, seed: int = 0) -> tuple:
    """Percentile bootstrap interval for a statistic of a univariate sample."""
    x = _univariate(values)
    gen = substream(seed, "bootstrap")
    reps = np.array([stat(x[gen.integers(0, len(x), len(x))]) for _ in range(n_boot)])
    lo, hi = np.quantile(reps, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def finite_diff_grad(fn, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    if not h > 0:
        raise ValidationError("step h must be positive")
    x = np.asarray(x, float)
    g = np.empty_like(x)
    for k in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g
