"""Path-valued systems driven by Brownian motions with drift.

* the wall system ``Y`` (reflection at 0 and pushing between neighbours),
* the triangular array ``Z`` of running-supremum recursions,
* the exponentially interacting array ``X`` with its forward and reversed
  drifts, the potential ``V_S`` and the associated identities.

Brownian increments come from a :class:`PathBundle`, which generates them
lazily in fixed blocks of replicas and time steps so that results do not
depend on how the work is chunked.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .lpp import cell_index, triangle_cells
from .rng import substream

REPLICA_CHUNK = 1000
TIME_BLOCK = 200


class SimulationError(Exception):
    """Invalid simulation request."""


class BlowUpError(SimulationError):
    """The X-array left the finite region."""


# ---------------------------------------------------------------------------
# Brownian increments
# ---------------------------------------------------------------------------

@dataclass
class PathBundle:
    """``n`` Brownian motions with drifts ``-alpha_j`` on a uniform grid.

    ``replicas=None`` describes a single realisation; otherwise a leading
    replica axis is used.  Driftless noise is generated per replica chunk and
    time block from keyed substreams; :attr:`increments` materialises the full
    array including drifts (only sensible for modest sizes).
    """

    drifts: tuple
    T: float
    dt: float
    seed: int = 0
    replicas: int | None = None
    given: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.drifts = tuple(float(a) for a in self.drifts)
        if self.T <= 0 or self.dt <= 0:
            raise SimulationError("T and dt must be positive")
        if self.given is None:
            self.m = int(round(self.T / self.dt))
            if self.m < 1:
                raise SimulationError("horizon shorter than one step")
        else:
            self.m = self.given.shape[-1]

    @property
    def n(self) -> int:
        return len(self.drifts)

    @classmethod
    def from_increments(cls, increments, dt: float, drifts=None) -> "PathBundle":
        """Wrap explicit increments (drift included) of shape ``([R,] n, m)``."""
        inc = np.asarray(increments, float)
        n = inc.shape[-2]
        drifts = (0.0,) * n if drifts is None else tuple(drifts)
        reps = None if inc.ndim == 2 else inc.shape[0]
        return cls(drifts, inc.shape[-1] * dt, dt, 0, reps, inc)

    @property
    def n_chunks(self) -> int:
        return 1 if self.replicas is None else -(-self.replicas // REPLICA_CHUNK)

    def chunk_size(self, c: int) -> int | None:
        if self.replicas is None:
            return None
        return min(REPLICA_CHUNK, self.replicas - c * REPLICA_CHUNK)

    def blocks(self, c: int = 0, uniforms: int = 0) -> Iterator[tuple]:
        """Yield ``(increments, u)`` for replica chunk ``c`` block by block.

        ``increments`` has shape ``([r,] n, b)`` and includes the drift.
        ``u`` holds ``uniforms`` independent uniform arrays of the same shape
        (or is ``None``).
        """
        alpha = np.array(self.drifts)[:, None]
        r = self.chunk_size(c)
        lead = () if r is None else (r,)
        for b0 in range(0, self.m, TIME_BLOCK):
            b = min(TIME_BLOCK, self.m - b0)
            if self.given is not None:
                sl = self.given[..., b0 : b0 + b] if r is None else self.given[c * REPLICA_CHUNK : c * REPLICA_CHUNK + r, :, b0 : b0 + b]
                inc = sl
            else:
                # full blocks are drawn so that a longer horizon extends the same paths
                gen = substream(self.seed, "noise", c, b0 // TIME_BLOCK)
                inc = gen.standard_normal(lead + (self.n, TIME_BLOCK))[..., :b] * math.sqrt(self.dt) - alpha * self.dt
            u = None
            if uniforms:
                ug = substream(self.seed, "bridge", c, b0 // TIME_BLOCK)
                u = ug.random((uniforms,) + lead + (self.n, TIME_BLOCK))[..., :b]
                u = np.where(u > 0, u, 0.5)
            yield inc, u

    @property
    def increments(self) -> np.ndarray:
        if self.given is not None:
            return self.given
        parts = []
        for c in range(self.n_chunks):
            parts.append(np.concatenate([inc for inc, _ in self.blocks(c)], axis=-1))
        return parts[0] if self.replicas is None else np.concatenate(parts, axis=0)

    def paths(self) -> np.ndarray:
        """Cumulative paths ``B_j(t_k)`` including ``t_0 = 0``."""
        inc = self.increments
        z = np.zeros(inc.shape[:-1] + (1,))
        return np.concatenate([z, np.cumsum(inc, axis=-1)], axis=-1)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.m + 1) * self.dt


def sample_path_bundle(drifts, T: float, dt: float, seed: int = 0, replicas: int | None = None) -> PathBundle:
    """Lazily sampled Brownian motions with drifts ``-alpha_j``."""
    drifts = tuple(drifts)
    return PathBundle(drifts, T, dt, seed, replicas)


def _bridge_extra(diff, u, var_dt):
    """``sqrt(diff^2 - 2 var dt log u)``: the bridge-maximum spread."""
    return np.sqrt(diff * diff - 2.0 * var_dt * np.log(u))


# ---------------------------------------------------------------------------
# the wall system Y
# ---------------------------------------------------------------------------

def _wall_step(y, dB, u, scheme, dt):
    """One step of the Skorokhod recursion for all coordinates (in place)."""
    n = y.shape[-1]
    prev_old = np.zeros(y.shape[:-1])
    prev_new = np.zeros(y.shape[:-1])
    for j in range(n):
        old = y[..., j].copy()
        free = old + dB[..., j]
        if scheme == "grid":
            push = prev_new
        else:
            # maximum over the step of (neighbour - own noise), bridge approximation
            var = 1.0 if j == 0 else 2.0
            a = prev_old + dB[..., j]
            b = prev_new
            push = 0.5 * (a + b + _bridge_extra(b - a, u[..., j], var * dt))
        y[..., j] = np.maximum(free, push)
        prev_old, prev_new = old, y[..., j]
    return y


def wall_trajectory(paths: PathBundle, scheme: str = "grid", record: bool = True, y0=None):
    """Reflected system with a wall at 0, driven by ``paths``.

    ``scheme="grid"`` is the discrete Skorokhod recursion
    ``Y_1 <- max(Y_1 + dB_1, 0)``, ``Y_j <- max(Y_j + dB_j, Y_{j-1})``, which
    reproduces the running-supremum formulas on the grid exactly.
    ``scheme="bridge"`` also accounts for excursions between grid points by
    sampling Brownian-bridge maxima; it is exact for ``Y_1`` and a
    second-order correction for the others.

    Returns the trajectory ``([R,] m+1, n)`` when ``record`` else the terminal
    value ``([R,] n)``.
    """
    if scheme not in ("grid", "bridge"):
        raise SimulationError(f"unknown scheme {scheme!r}")
    outs = []
    for c in range(paths.n_chunks):
        r = paths.chunk_size(c)
        lead = () if r is None else (r,)
        y = np.zeros(lead + (paths.n,)) if y0 is None else np.broadcast_to(np.asarray(y0, float), lead + (paths.n,)).copy()
        traj = [y.copy()] if record else None
        for inc, u in paths.blocks(c, uniforms=1 if scheme == "bridge" else 0):
            for k in range(inc.shape[-1]):
                uk = None if u is None else u[0, ..., k]
                _wall_step(y, inc[..., k], uk, scheme, paths.dt)
                if record:
                    traj.append(y.copy())
        outs.append(np.stack(traj, axis=-2) if record else y)
    if paths.replicas is None:
        return outs[0]
    return np.concatenate(outs, axis=0)


def wall_running_sup(paths: PathBundle) -> np.ndarray:
    """Explicit grid formula ``Y_j(t) = max_{s<=t}(B_j(t) - B_j(s) + Y_{j-1}(s))``."""
    B = paths.paths()
    m = paths.m
    prev = np.zeros(B.shape[:-2] + (m + 1,))
    out = []
    for j in range(paths.n):
        Bj = B[..., j, :]
        # max over s <= t of (Y_{j-1}(s) - B_j(s)), plus B_j(t)
        run = np.maximum.accumulate(prev - Bj, axis=-1)
        Yj = Bj + run
        out.append(Yj)
        prev = Yj
    return np.stack(out, axis=-1)


# ---------------------------------------------------------------------------
# the triangular Z array
# ---------------------------------------------------------------------------

def _z_layout(n: int):
    """For each row ``k`` the (noise index, drift index) used by ``Z_j^k``."""
    layout = {}
    for k in range(1, n + 1):
        layout[k] = [(n - k + j, k - j + 1) for j in range(1, k + 1)]
    return layout


def triangular_sup_trajectory(paths: PathBundle, scheme: str = "grid", record: bool = False):
    """Triangular array ``Z_j^k`` and running suprema of ``Z_k^k``.

    ``Z_1^k`` is Brownian motion ``n-k+1`` with drift ``-alpha_k``;
    ``Z_j^k(t) = sup_s (B(t) - B(s) + Z_{j-1}^k(s))`` with Brownian motion
    ``n-k+j`` and drift ``-alpha_{k-j+1}``.  The noise is shared: only ``n``
    Brownian motions drive the whole array.  Returns ``(Z, S)`` where ``Z``
    maps ``(k, j)`` to terminal values (or trajectories when ``record``) and
    ``S`` has the suprema of ``Z_k^k`` along the last axis.
    """
    n = paths.n
    layout = _z_layout(n)
    alpha = np.array(paths.drifts)
    dt = paths.dt
    Zs, Ss = [], []
    for c in range(paths.n_chunks):
        r = paths.chunk_size(c)
        lead = () if r is None else (r,)
        Z = {(k, j): np.zeros(lead) for k in layout for j in range(1, k + 1)}
        S = np.zeros(lead + (n,))
        traj = {key: [v.copy()] for key, v in Z.items()} if record else None
        ncell = len(Z)
        for inc, u in paths.blocks(c, uniforms=ncell + n if scheme == "bridge" else 0):
            # recover driftless noise to re-apply per-use drifts
            noise = inc + alpha[:, None] * dt
            for s in range(inc.shape[-1]):
                q = 0
                for k in range(1, n + 1):
                    prev_old = prev_new = None
                    for j, (bi, ai) in enumerate(layout[k], start=1):
                        dB = noise[..., bi - 1, s] - alpha[ai - 1] * dt
                        old = Z[(k, j)]
                        free = old + dB
                        if j == 1:
                            new = free
                        elif scheme == "grid":
                            new = np.maximum(free, prev_new)
                        else:
                            a = prev_old + dB
                            b = prev_new
                            new = np.maximum(free, 0.5 * (a + b + _bridge_extra(b - a, u[q, ..., 0, s], 2.0 * dt)))
                        q += 1
                        prev_old, prev_new = old, new
                        Z[(k, j)] = new
                        if record:
                            traj[(k, j)].append(new.copy())
                    # running supremum of Z_k^k
                    top_old, top_new = prev_old, prev_new
                    if scheme == "grid":
                        S[..., k - 1] = np.maximum(S[..., k - 1], top_new)
                    else:
                        # Z_k^k moves like a Brownian motion between pushes
                        mx = 0.5 * (top_old + top_new + _bridge_extra(top_new - top_old, u[ncell + k - 1, ..., 0, s], dt))
                        S[..., k - 1] = np.maximum(S[..., k - 1], mx)
        Zs.append({key: (np.stack(v, axis=-1) if record else Z[key]) for key, v in (traj.items() if record else Z.items())})
        Ss.append(S)
    if paths.replicas is None:
        return Zs[0], Ss[0]
    Zout = {key: np.concatenate([z[key] for z in Zs], axis=0) for key in Zs[0]}
    return Zout, np.concatenate(Ss, axis=0)


def z_slopes(alpha) -> dict:
    """Limits ``Z_j^k(t)/t -> -min(alpha_k, ..., alpha_{k-j+1})``."""
    n = len(alpha)
    return {(k, j): -min(alpha[k - j : k]) for k in range(1, n + 1) for j in range(1, k + 1)}


# ---------------------------------------------------------------------------
# X-array: drifts, potential and identities
# ---------------------------------------------------------------------------

def full_region(n: int) -> frozenset:
    return frozenset(triangle_cells(n))


def validate_region(n: int, S) -> frozenset:
    """Check that ``S`` contains the line and is closed towards larger indices."""
    S = frozenset(S)
    cells = set(triangle_cells(n))
    if not S <= cells:
        raise SimulationError("region has cells outside the triangle")
    for i in range(1, n + 1):
        if (i, n + 1 - i) not in S:
            raise SimulationError("region must contain every cell of the line i + j = n + 1")
    for i, j in S:
        for nb in ((i + 1, j), (i, j + 1)):
            if nb in cells and nb not in S:
                raise SimulationError(f"region lacks a down-right boundary at {(i, j)}")
    return S


class XArrayModel:
    """Drifts and potential of the X-array on a region ``S``."""

    def __init__(self, alpha, S=None):
        self.alpha = tuple(float(a) for a in alpha)
        self.n = n = len(self.alpha)
        self.S = validate_region(n, full_region(n) if S is None else S)
        self.cells = triangle_cells(n)
        self.idx = cell_index(n)

    def gamma(self, i: int, j: int) -> float:
        return self.alpha[i - 1] + self.alpha[self.n - j]

    def on_line(self, i: int, j: int) -> bool:
        return i + j == self.n + 1

    def _col(self, x, c):
        return x[..., self.idx[c]]

    def drifts(self, x):
        """Forward drift ``b`` and reversed drift ``a`` (cells outside S are 0)."""
        x = np.asarray(x, float)
        b = np.zeros_like(x)
        a = np.zeros_like(x)
        X = lambda c: self._col(x, c)
        n = self.n
        for (i, j) in self.S:
            k = self.idx[(i, j)]
            xi = x[..., k]
            if self.on_line(i, j):
                wall = 0.5 * np.exp(-xi)
                b[..., k] = -self.alpha[n - j] + wall
                a[..., k] = -self.alpha[i - 1] + wall
            else:
                b[..., k] = -self.alpha[n - j] + np.exp(X((i, j + 1)) - xi)
                a[..., k] = -self.alpha[i - 1] + np.exp(X((i + 1, j)) - xi)
            if (i - 1, j) in self.S:
                g = self.gamma(i - 1, j)
                b[..., k] += g * _sigmoid(xi - X((i - 1, j + 1))) - np.exp(xi - X((i - 1, j)))
            if (i, j - 1) in self.S:
                g = self.gamma(i, j - 1)
                a[..., k] += g * _sigmoid(xi - X((i + 1, j - 1))) - np.exp(xi - X((i, j - 1)))
        return b, a

    def forward_drift(self, x):
        return self.drifts(x)[0]

    def reversed_drift(self, x):
        return self.drifts(x)[1]

    def potential(self, x):
        x = np.asarray(x, float)
        X = lambda c: self._col(x, c)
        V = np.zeros(x.shape[:-1])
        for (i, j) in self.S:
            xi = X((i, j))
            if self.on_line(i, j):
                V = V + 2 * self.alpha[i - 1] * xi + np.exp(-xi)
            else:
                g = self.gamma(i, j)
                r, d = X((i, j + 1)), X((i + 1, j))
                V = V + g * xi + np.exp(r - xi) + np.exp(d - xi) - g * np.logaddexp(r, d)
        return V

    def grad_potential(self, x):
        x = np.asarray(x, float)
        X = lambda c: self._col(x, c)
        G = np.zeros_like(x)
        for (i, j) in self.S:
            k = self.idx[(i, j)]
            xi = x[..., k]
            if self.on_line(i, j):
                G[..., k] += 2 * self.alpha[i - 1] - np.exp(-xi)
                continue
            g = self.gamma(i, j)
            kr, kd = self.idx[(i, j + 1)], self.idx[(i + 1, j)]
            r, d = x[..., kr], x[..., kd]
            G[..., k] += g - np.exp(r - xi) - np.exp(d - xi)
            G[..., kr] += np.exp(r - xi) - g * _sigmoid(r - d)
            G[..., kd] += np.exp(d - xi) - g * _sigmoid(d - r)
        return G

    def divergence(self, x):
        """Analytic divergence of ``d = b - a``."""
        x = np.asarray(x, float)
        X = lambda c: self._col(x, c)
        tot = np.zeros(x.shape[:-1])
        for (i, j) in self.S:
            xi = X((i, j))
            db = da = 0.0
            if self.on_line(i, j):
                db = da = -0.5 * np.exp(-xi)
            else:
                db = -np.exp(X((i, j + 1)) - xi)
                da = -np.exp(X((i + 1, j)) - xi)
            if (i - 1, j) in self.S:
                s = _sigmoid(xi - X((i - 1, j + 1)))
                db = db + self.gamma(i - 1, j) * s * (1 - s) - np.exp(xi - X((i - 1, j)))
            if (i, j - 1) in self.S:
                s = _sigmoid(xi - X((i + 1, j - 1)))
                da = da + self.gamma(i, j - 1) * s * (1 - s) - np.exp(xi - X((i, j - 1)))
            tot = tot + db - da
        return tot

    def evaluate(self, x) -> dict:
        b, a = self.drifts(x)
        return {"b": b, "a": a, "d": b - a, "V": self.potential(x), "gradV": self.grad_potential(x)}

    def symbolic_divergence(self):
        """Exact divergence of ``d`` with sympy (expected to simplify to 0)."""
        import sympy as sp

        syms = {c: sp.Symbol(f"x_{c[0]}_{c[1]}", real=True) for c in self.cells}
        al = [sp.nsimplify(a) for a in self.alpha]
        n = self.n
        gam = lambda i, j: al[i - 1] + al[n - j]
        E = sp.exp
        total = 0
        for (i, j) in self.S:
            xi = syms[(i, j)]
            if self.on_line(i, j):
                b = -al[n - j] + E(-xi) / 2
                a = -al[i - 1] + E(-xi) / 2
            else:
                b = -al[n - j] + E(syms[(i, j + 1)] - xi)
                a = -al[i - 1] + E(syms[(i + 1, j)] - xi)
            if (i - 1, j) in self.S:
                b += gam(i - 1, j) * E(xi) / (E(syms[(i - 1, j + 1)]) + E(xi)) - E(xi - syms[(i - 1, j)])
            if (i, j - 1) in self.S:
                a += gam(i, j - 1) * E(xi) / (E(syms[(i + 1, j - 1)]) + E(xi)) - E(xi - syms[(i, j - 1)])
            total += sp.diff(b - a, xi)
        return sp.simplify(sp.together(sp.expand(total)))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def drift_and_potential(alpha, state, S=None) -> dict:
    """Forward/reversed drifts, their difference, ``V_S`` and ``grad V_S``."""
    return XArrayModel(alpha, S).evaluate(state)


def finite_diff_divergence(model: XArrayModel, x, h: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, float)
    tot = np.zeros(x.shape[:-1])
    for c in model.S:
        k = model.idx[c]
        xp, xm = x.copy(), x.copy()
        xp[..., k] += h
        xm[..., k] -= h
        dp = model.forward_drift(xp) - model.reversed_drift(xp)
        dm = model.forward_drift(xm) - model.reversed_drift(xm)
        tot = tot + (dp[..., k] - dm[..., k]) / (2 * h)
    return tot


@dataclass
class XArrayResult:
    times: np.ndarray
    states: np.ndarray
    cells: tuple
    taming_fraction: float
    max_abs: float

    @property
    def final(self) -> np.ndarray:
        return self.states[..., -1, :]

    def cell(self, i: int, j: int) -> np.ndarray:
        return self.states[..., self.cells.index((i, j))]


def x_array_simulate(alpha, T: float, dt: float = 1e-3, seed: int = 0, init=None,
                     direction: str = "forward", replicas: int | None = None,
                     record_every: float | None = None, sigma: float = 1.0,
                     blowup: float = 1e6) -> XArrayResult:
    """Tamed Euler scheme for the X-array.

    ``x <- x + drift dt / (1 + dt |drift|) + dB``.  ``direction`` selects the
    forward generator or the one with reversed interactions.  ``init`` is a
    per-cell state (broadcast over replicas); defaults to zeros.  Snapshots
    are stored every ``record_every`` time units (terminal only when None).
    ``sigma=0`` gives the deterministic flow.
    """
    model = XArrayModel(alpha)
    n = model.n
    ncell = len(model.cells)
    if direction not in ("forward", "reversed"):
        raise SimulationError(f"unknown direction {direction!r}")
    m = int(round(T / dt))
    lead = () if replicas is None else (replicas,)
    x = np.zeros(lead + (ncell,))
    if init is not None:
        x[...] = np.asarray(init, float)
    stride = m if record_every is None else max(1, int(round(record_every / dt)))
    snaps, times = [x.copy()], [0.0]
    tamed = 0
    total = 0
    sq = math.sqrt(dt) * sigma
    step = 0
    bpos = 0
    nblocks = -(-m // TIME_BLOCK)
    for blk in range(nblocks):
        b = min(TIME_BLOCK, m - blk * TIME_BLOCK)
        if sigma:
            gen = substream(seed, "xarray", blk)
            noise = gen.standard_normal((b,) + lead + (ncell,)) * sq
        for s in range(b):
            bb, aa = model.drifts(x)
            drift = bb if direction == "forward" else aa
            corr = dt * np.abs(drift)
            tamed += int(np.count_nonzero(corr > 1.0 / 9.0))
            total += corr.size
            x += drift * dt / (1.0 + corr)
            if sigma:
                x += noise[s]
            step += 1
            if step % stride == 0 or step == m:
                mx = float(np.max(np.abs(x)))
                if not np.isfinite(mx) or mx > blowup:
                    raise BlowUpError(f"|x| reached {mx} at t={step * dt:.4f}")
                if step % stride == 0:
                    snaps.append(x.copy())
                    times.append(step * dt)
        bpos += b
    if times[-1] != m * dt:
        snaps.append(x.copy())
        times.append(m * dt)
    states = np.stack(snaps, axis=-2)
    frac = tamed / max(total, 1)
    return XArrayResult(np.array(times), states, model.cells, frac, float(np.max(np.abs(states))))


def export_trajectory_csv(path, times, states, cells):
    """Write ``t,i,j,value`` rows for a single-replica trajectory."""
    states = np.asarray(states)
    if states.ndim != 2:
        raise SimulationError("export a single replica: states must be (times, cells)")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "i", "j", "value"])
        for t, row in zip(times, states):
            for (i, j), v in zip(cells, row):
                w.writerow([repr(float(t)), i, j, repr(float(v))])
