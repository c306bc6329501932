"""Matrix ensembles: drifted Hermitian Brownian motion, LOE and perturbed symmetric LUE."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .reflected import REPLICA_CHUNK, TIME_BLOCK, _bridge_extra
from .rng import substream


class MatrixError(Exception):
    """Invalid ensemble parameters."""


@dataclass(frozen=True)
class HermitianPathConfig:
    """Grid description of ``H(t) - t D`` with ``D = diag(drift_diag)``.

    ``scheme="bridge"`` adds, between grid points, the maximum of a Brownian
    bridge with unit variance rate to the top eigenvalue; ``"grid"`` takes the
    plain maximum over grid points.
    """

    n: int
    T: float
    dt: float
    drift_diag: tuple
    seed: int = 0
    replicas: int | None = None
    scheme: str = "grid"

    def __post_init__(self):
        object.__setattr__(self, "drift_diag", tuple(float(a) for a in self.drift_diag))
        if self.dt <= 0 or self.T <= 0:
            raise MatrixError("T and dt must be positive")
        if len(self.drift_diag) != self.n:
            raise MatrixError("drift_diag must have n entries")
        if any(a <= 0 for a in self.drift_diag):
            raise MatrixError("drift entries must be positive")
        if self.scheme not in ("grid", "bridge"):
            raise MatrixError(f"unknown scheme {self.scheme!r}")

    @property
    def steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))


def _gue_increments(gen, lead, n, b, dt):
    """Hermitian increments of shape ``lead + (b, n, n)``.

    Full time blocks are drawn and truncated, so a longer horizon extends the
    same path.
    """
    d = gen.standard_normal(lead + (TIME_BLOCK, n))[..., :b, :] * math.sqrt(dt)
    iu = np.triu_indices(n, 1)
    k = len(iu[0])
    re = gen.standard_normal(lead + (TIME_BLOCK, k))[..., :b, :]
    im = gen.standard_normal(lead + (TIME_BLOCK, k))[..., :b, :]
    z = (re + 1j * im) * math.sqrt(dt / 2)
    H = np.zeros(lead + (b, n, n), complex)
    H[..., iu[0], iu[1]] = z
    H[..., iu[1], iu[0]] = np.conj(z)
    idx = np.arange(n)
    H[..., idx, idx] = d
    return H


def _top_eigenvalue(M):
    if M.shape[-1] == 1:
        return M[..., 0, 0].real
    if M.shape[-1] == 2:
        a, d = M[..., 0, 0].real, M[..., 1, 1].real
        return 0.5 * (a + d) + np.hypot(0.5 * (a - d), np.abs(M[..., 0, 1]))
    return np.linalg.eigvalsh(M)[..., -1]


def hermitian_path(cfg: HermitianPathConfig, replica_chunk: int = 0) -> np.ndarray:
    """Materialise ``H(t_k)`` (without drift) for one replica chunk.

    Shape ``([r,] m+1, n, n)``.  Meant for checks on small grids.
    """
    out = []
    H = None
    for inc in _iter_blocks(cfg, replica_chunk):
        cum = np.cumsum(inc, axis=-3)
        if H is None:
            H = np.zeros(cum.shape[:-3] + (1,) + cum.shape[-2:], complex)
            out.append(H)
        block = H[..., -1:, :, :] + cum
        out.append(block)
        H = block
    return np.concatenate(out, axis=-3)


def _iter_blocks(cfg, c):
    r = None if cfg.replicas is None else min(REPLICA_CHUNK, cfg.replicas - c * REPLICA_CHUNK)
    lead = () if r is None else (r,)
    m = cfg.steps
    for b0 in range(0, m, TIME_BLOCK):
        b = min(TIME_BLOCK, m - b0)
        yield _gue_increments(substream(cfg.seed, "gue", c, b0 // TIME_BLOCK), lead, cfg.n, b, cfg.dt)


def sup_lambda_max(cfg: HermitianPathConfig) -> np.ndarray:
    """``max_k lambda_max(H(t_k) - t_k D)`` over the grid, per replica."""
    D = np.diag(cfg.drift_diag)
    chunks = 1 if cfg.replicas is None else -(-cfg.replicas // REPLICA_CHUNK)
    res = []
    for c in range(chunks):
        H = None
        best = None
        prev = None
        k0 = 0
        for inc in _iter_blocks(cfg, c):
            if H is None:
                H = np.zeros(inc.shape[:-3] + inc.shape[-2:], complex)
                best = np.zeros(inc.shape[:-3])
                prev = best.copy()
            b = inc.shape[-3]
            if cfg.scheme == "bridge":
                ug = substream(cfg.seed, "gue-bridge", c, k0 // TIME_BLOCK)
                u = ug.random(inc.shape[:-3] + (TIME_BLOCK,))[..., :b]
                u = np.where(u > 0, u, 0.5)
            for k in range(b):
                H = H + inc[..., k, :, :]
                lam = _top_eigenvalue(H - (k0 + k + 1) * cfg.dt * D)
                if cfg.scheme == "bridge":
                    top = 0.5 * (prev + lam + _bridge_extra(lam - prev, u[..., k], cfg.dt))
                    best = np.maximum(best, top)
                else:
                    best = np.maximum(best, lam)
                prev = lam
            k0 += b
        res.append(best)
    return res[0] if cfg.replicas is None else np.concatenate(res)


def charpoly_eigenvalues(M) -> np.ndarray:
    """Eigenvalues of a small Hermitian matrix from its characteristic polynomial."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] > 3:
        raise MatrixError("expects a single square matrix of size at most 3")
    return np.sort(np.roots(np.poly(M)).real)


def sample_loe(n: int, seed: int = 0, size: int | None = None) -> np.ndarray:
    """Ascending eigenvalues of ``X^T X`` with ``X`` an ``(n+1) x n`` real Gaussian."""
    if n < 1:
        raise MatrixError("n must be positive")
    gen = substream(seed, "loe", n)
    lead = () if size is None else (size,)
    X = gen.standard_normal(lead + (n + 1, n))
    return np.linalg.eigvalsh(np.swapaxes(X, -1, -2) @ X)


def sym_lue_precisions(alpha) -> np.ndarray:
    """``gamma_ij``: ``alpha_i`` on the diagonal, ``alpha_i + alpha_j`` off it."""
    a = np.asarray(alpha, float)
    g = a[:, None] + a[None, :]
    np.fill_diagonal(g, a)
    return g


def sample_sym_lue(alpha, seed: int = 0, size: int | None = None) -> np.ndarray:
    """Ascending eigenvalues of ``X^* X`` for complex symmetric ``X``.

    The matrix density is proportional to ``exp(-Tr(A X^* X))``: entry
    ``X_ij`` (i <= j) has density ``exp(-gamma_ij |x|^2)``.
    """
    a = np.asarray(alpha, float)
    if a.ndim != 1 or np.any(a <= 0):
        raise MatrixError("rates must be positive")
    n = len(a)
    gen = substream(seed, "sym-lue", n)
    lead = () if size is None else (size,)
    sd = np.sqrt(0.5 / sym_lue_precisions(a))
    Z = (gen.standard_normal(lead + (n, n)) + 1j * gen.standard_normal(lead + (n, n))) * sd
    X = np.triu(Z) + np.swapaxes(np.triu(Z, 1), -1, -2)
    return np.linalg.eigvalsh(np.conj(np.swapaxes(X, -1, -2)) @ X)
