"""Log-gamma polymer fields and Brownian polymer partition functions.

All partition arithmetic is carried out in log space.  The Brownian
functionals are computed on the grid of a :class:`~flatlpp.reflected.PathBundle`
with a trapezoidal rule for every nested integral:

``Y_k(t) = int_0^t Y_{k-1}(s) exp(beta (B_k(t) - B_k(s))) ds`` with ``Y_0 = 1``,
``Z_k(t) = int_0^t Z_{k-1}(s) exp(beta (B_k(t) - B_k(s))) ds`` with
``Z_1(t) = exp(beta B_1(t))``.

The drifts of the bundle are those of ``B_1, ..., B_n`` as written; callers
reorder them as their identity requires.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lpp import LppError, WeightField, cell_index, flat_paths, triangle_recursion
from .reflected import PathBundle, wall_trajectory


class PolymerError(Exception):
    """Invalid polymer request."""


class GridTooCoarseError(PolymerError):
    """Halving the grid changes the partition function beyond tolerance."""


@dataclass
class PartitionField:
    """Log partition functions ``xi_ij`` on the triangle."""

    n: int
    xi: np.ndarray

    def at(self, i: int, j: int):
        return self.xi[..., cell_index(self.n)[(i, j)]]


def loggamma_partition_field(env: WeightField) -> PartitionField:
    """``xi_ij = log W_ij + log(e^{xi_{i,j+1}} + e^{xi_{i+1,j}})`` from the line."""
    if env.kind != "inverse_gamma":
        raise PolymerError("the log-gamma field needs inverse-gamma weights")
    if not env.shape or env.shape[0] != "triangle":
        raise LppError("triangular environment required")
    return PartitionField(env.n, triangle_recursion(np.log(env.weights), env.n, "logsumexp"))


def loggamma_bruteforce(weights, n: int) -> float:
    """``zeta_11`` as an explicit sum over flat paths (single replica)."""
    idx = cell_index(n)
    w = np.asarray(weights, float)
    return float(sum(np.prod([w[idx[c]] for c in path]) for path in flat_paths(n)))


# ---------------------------------------------------------------------------
# Brownian environment
# ---------------------------------------------------------------------------

_NEG_INF = -np.inf


def _trap_step(prev_same, prev_lower_old, prev_lower_new, bdb, logh):
    """Log-space trapezoid update of one level of the nested integrals."""
    inner = np.logaddexp(prev_same, logh + prev_lower_old)
    return np.logaddexp(bdb + inner, logh + prev_lower_new)


def _run_levels(paths: PathBundle, beta: float, kind: str, record: bool, chunk: int, dt_factor: int = 1):
    """Iterate the nested recursion for one replica chunk.

    ``kind`` is ``"Y"`` (base level identically 1) or ``"Z"`` (base
    ``exp(beta B_1)``).  ``dt_factor=2`` merges pairs of increments, giving the
    same paths on a grid twice as coarse.
    """
    n = paths.n
    dt = paths.dt * dt_factor
    logh = math.log(dt / 2)
    r = paths.chunk_size(chunk)
    lead = () if r is None else (r,)
    L = np.full(lead + (n,), _NEG_INF)
    if kind == "Z":
        L[..., 0] = 0.0
    out = [L.copy()] if record else None
    carry = None
    with np.errstate(invalid="ignore"):
        for inc, _ in paths.blocks(chunk):
            if dt_factor == 2:
                if carry is not None:
                    inc = np.concatenate([carry, inc], axis=-1)
                    carry = None
                if inc.shape[-1] % 2:
                    carry = inc[..., -1:]
                    inc = inc[..., :-1]
                inc = inc[..., 0::2] + inc[..., 1::2]
            for k in range(inc.shape[-1]):
                bdb = beta * inc[..., k]
                old = L.copy()
                if kind == "Y":
                    L[..., 0] = _trap_step(old[..., 0], 0.0, 0.0, bdb[..., 0], logh)
                else:
                    L[..., 0] = old[..., 0] + bdb[..., 0]
                for j in range(1, n):
                    L[..., j] = _trap_step(old[..., j], old[..., j - 1], L[..., j - 1], bdb[..., j], logh)
                if record:
                    out.append(L.copy())
    return np.stack(out, axis=-2) if record else L


def brownian_partition_trajectory(paths: PathBundle, beta: float = 1.0, record: bool = False,
                                  check_tol: float | None = None) -> dict:
    """Log partition functions ``log Y_k`` and ``log Z_k`` on the grid.

    Returns a dict with keys ``"logY"`` and ``"logZ"``, each of shape
    ``([R,] n)`` (terminal) or ``([R,] m+1, n)`` when ``record``.  With
    ``check_tol`` the computation is repeated on the twice-coarser grid and
    :class:`GridTooCoarseError` is raised if the median relative change of
    ``Y_n(T)`` exceeds the tolerance.
    """
    if beta <= 0:
        raise PolymerError("beta must be positive")
    res = {}
    for kind in ("Y", "Z"):
        parts = [_run_levels(paths, beta, kind, record, c) for c in range(paths.n_chunks)]
        res["log" + kind] = parts[0] if paths.replicas is None else np.concatenate(parts, axis=0)
    if check_tol is not None:
        rel = richardson_change(paths, beta)
        if rel > check_tol:
            raise GridTooCoarseError(f"relative change {rel:.3g} on grid coarsening exceeds {check_tol}")
    return res


def richardson_change(paths: PathBundle, beta: float = 1.0) -> float:
    """Median relative change of ``Y_n(T)`` between ``dt`` and ``2 dt``."""
    fine = np.concatenate([np.atleast_2d(_run_levels(paths, beta, "Y", False, c)) for c in range(paths.n_chunks)])
    coarse = np.concatenate([np.atleast_2d(_run_levels(paths, beta, "Y", False, c, 2)) for c in range(paths.n_chunks)])
    return float(np.median(np.abs(np.expm1(coarse[..., -1] - fine[..., -1]))))


@dataclass
class IntegratedPartition:
    log_value: np.ndarray
    horizon: np.ndarray

    @property
    def value(self) -> np.ndarray:
        return np.exp(self.log_value)


def integrated_partition(paths: PathBundle, T: float = 5.0, tail_tol: float = 1e-4, beta: float = 1.0,
                         block: float = 5.0) -> IntegratedPartition:
    """``int_0^inf Z_n(s) ds`` with an adaptive horizon.

    Integration starts on ``[0, T]`` and is extended in blocks of ``block``
    time units until the last block adds less than ``tail_tol`` relative to
    the running total, for every replica of a chunk.  ``paths.T`` is the
    largest horizon allowed.
    """
    if any(a <= 0 for a in paths.drifts):
        raise PolymerError("all drifts must be strictly negative (alpha > 0) for the integral to converge")
    n = paths.n
    dt = paths.dt
    logh = math.log(dt / 2)
    first = max(1, int(round(T / dt)))
    per_block = max(1, int(round(block / dt)))
    vals, horizons = [], []
    for c in range(paths.n_chunks):
        r = paths.chunk_size(c)
        lead = () if r is None else (r,)
        L = np.full(lead + (n,), _NEG_INF)
        L[..., 0] = 0.0
        acc = np.full(lead, _NEG_INF)
        acc_mark = acc.copy()
        step = 0
        next_check = first
        done = False
        with np.errstate(invalid="ignore"):
            for inc, _ in paths.blocks(c):
                for k in range(inc.shape[-1]):
                    bdb = beta * inc[..., k]
                    old = L.copy()
                    L[..., 0] = old[..., 0] + bdb[..., 0]
                    for j in range(1, n):
                        L[..., j] = _trap_step(old[..., j], old[..., j - 1], L[..., j - 1], bdb[..., j], logh)
                    acc = np.logaddexp(acc, logh + np.logaddexp(old[..., n - 1], L[..., n - 1]))
                    step += 1
                    if step == next_check:
                        added = -np.expm1(acc_mark - acc)  # block share of the running total
                        if step > first and np.all(added < tail_tol):
                            done = True
                            break
                        acc_mark = acc.copy()
                        next_check += per_block
                if done:
                    break
        if not done:
            raise PolymerError(f"tail criterion not met within horizon {paths.T}")
        vals.append(acc)
        horizons.append(np.full(lead, step * dt))
    if paths.replicas is None:
        return IntegratedPartition(vals[0], horizons[0])
    return IntegratedPartition(np.concatenate(vals), np.concatenate(horizons))


def zero_temp_scan(paths: PathBundle, beta_list) -> tuple:
    """``(1/beta) log Y_n(T)`` for each beta, plus the ``beta = inf`` value.

    The limit is the top coordinate of the grid Skorokhod system driven by
    the same paths.  Returns ``(values, reference)`` where ``values[k]``
    corresponds to ``beta_list[k]``.
    """
    betas = list(beta_list)
    if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise PolymerError("beta_list must be increasing")
    out = []
    for b in betas:
        if b == math.inf:
            out.append(wall_trajectory(paths, "grid", record=False)[..., -1])
        else:
            out.append(brownian_partition_trajectory(paths, b)["logY"][..., -1] / b)
    ref = wall_trajectory(paths, "grid", record=False)[..., -1]
    return out, ref
