"""Scalar cadlag paths and distances on them.

A path is a piecewise-linear continuous part sampled on a time grid plus a
finite, strictly increasing list of jumps.  Evaluation is right-continuous:
the jump at time t is included in the value at t.  This class of paths is
closed under addition and is exactly the class produced by the samplers in
:mod:`barostoch.noise`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "CadlagPath",
    "Reparametrization",
    "ConvergenceReport",
    "evaluate",
    "left_limit",
    "jump_at",
    "continuous_value",
    "add_paths",
    "zero_path",
    "uniform_distance",
    "skorokhod_distance",
    "skorokhod_converges",
    "path_integral",
]

_MAX_STEPIZE_EVENTS = 20000


@dataclass(frozen=True, eq=False)
class CadlagPath:
    """Right-continuous path with left limits on [0, horizon].

    ``continuous_values`` are linearly interpolated between ``grid_times``
    and held constant beyond the last grid time.  Jumps live in
    (0, horizon] and are strictly increasing in time.
    """

    horizon: float
    grid_times: np.ndarray
    continuous_values: np.ndarray
    jump_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    jump_sizes: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        object.__setattr__(self, "grid_times", np.asarray(self.grid_times, dtype=float))
        object.__setattr__(self, "continuous_values", np.asarray(self.continuous_values, dtype=float))
        object.__setattr__(self, "jump_times", np.asarray(self.jump_times, dtype=float))
        object.__setattr__(self, "jump_sizes", np.asarray(self.jump_sizes, dtype=float))
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        t, v = self.grid_times, self.continuous_values
        if t.ndim != 1 or t.shape != v.shape or t.size == 0:
            raise ValueError("grid_times and continuous_values must be equal-length 1d arrays")
        if t[0] != 0.0:
            raise ValueError("grid_times must start at 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("grid_times must be strictly increasing")
        if t[-1] > self.horizon:
            raise ValueError("grid_times must lie within [0, horizon]")
        if v[0] != 0.0:
            raise ValueError("path value at t=0 must be 0")
        jt, js = self.jump_times, self.jump_sizes
        if jt.shape != js.shape or jt.ndim != 1:
            raise ValueError("jump_times and jump_sizes must be equal-length 1d arrays")
        if jt.size:
            if jt[0] <= 0.0 or jt[-1] > self.horizon:
                raise ValueError("jump times must lie in (0, horizon]")
            if np.any(np.diff(jt) <= 0):
                raise ValueError("jump times must be strictly increasing")

    @property
    def n_jumps(self) -> int:
        return int(self.jump_times.size)

    def is_pure_step(self) -> bool:
        """True when the continuous part is identically zero."""
        return bool(np.all(self.continuous_values == 0.0))


@dataclass(frozen=True)
class Reparametrization:
    """Piecewise-linear strictly increasing time change with fixed endpoints."""

    knots_t: np.ndarray
    knots_lambda: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "knots_t", np.asarray(self.knots_t, dtype=float))
        object.__setattr__(self, "knots_lambda", np.asarray(self.knots_lambda, dtype=float))
        t, lam = self.knots_t, self.knots_lambda
        if t.shape != lam.shape or t.ndim != 1 or t.size < 2:
            raise ValueError("need matching 1d knot arrays with at least the two endpoints")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(lam) <= 0):
            raise ValueError("reparametrization must be strictly increasing in both coordinates")
        if t[0] != 0.0 or lam[0] != 0.0 or t[-1] != lam[-1]:
            raise ValueError("endpoints must be fixed: lambda(0)=0 and lambda(T)=T")

    @property
    def horizon(self) -> float:
        return float(self.knots_t[-1])

    def __call__(self, t):
        return np.interp(t, self.knots_t, self.knots_lambda)

    def max_time_shift(self) -> float:
        """sup |lambda(t) - t|, attained at a knot for piecewise-linear lambda."""
        return float(np.max(np.abs(self.knots_lambda - self.knots_t)))


def identity_reparametrization(horizon: float) -> Reparametrization:
    return Reparametrization(np.array([0.0, horizon]), np.array([0.0, horizon]))


def _check_time(path: CadlagPath, t) -> np.ndarray:
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0.0) or np.any(ts > path.horizon):
        raise ValueError(f"evaluation time outside [0, {path.horizon}]")
    return ts


def continuous_value(path: CadlagPath, t):
    """Continuous part only, linearly interpolated (constant beyond the grid)."""
    return np.interp(t, path.grid_times, path.continuous_values)


def jump_at(path: CadlagPath, t: float) -> float:
    """Jump size recorded exactly at time t (0.0 if none)."""
    idx = np.searchsorted(path.jump_times, t)
    if idx < path.n_jumps and path.jump_times[idx] == t:
        return float(path.jump_sizes[idx])
    return 0.0


def _left_right_values(path: CadlagPath, ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Left limits and right-continuous values from one shared base.

    The value at a jump time is the left limit plus the recorded jump, as
    a single float addition, so value == left_limit + jump holds bitwise.
    (The subtractive form of that identity can be off by one ulp.)
    """
    left = np.interp(ts, path.grid_times, path.continuous_values)
    if not path.n_jumps:
        return left, left.copy()
    idx = np.searchsorted(path.jump_times, ts, side="left")
    cum = np.concatenate([[0.0], np.cumsum(path.jump_sizes)])
    left = left + cum[idx]
    right = left.copy()
    hit = (idx < path.n_jumps) & (path.jump_times[np.minimum(idx, path.n_jumps - 1)] == ts)
    right[hit] = left[hit] + path.jump_sizes[idx[hit]]
    return left, right


def evaluate(path: CadlagPath, t):
    """Right-continuous evaluation: continuous part plus jumps at times <= t."""
    ts = _check_time(path, t)
    _, right = _left_right_values(path, ts)
    return right if np.ndim(t) else float(right[0])


def left_limit(path: CadlagPath, t):
    """Left limit at t (the value without the jump recorded exactly at t)."""
    ts = _check_time(path, t)
    left, _ = _left_right_values(path, ts)
    return left if np.ndim(t) else float(left[0])


def zero_path(horizon: float) -> CadlagPath:
    return CadlagPath(horizon, np.array([0.0, horizon]), np.array([0.0, 0.0]))


def add_paths(a: CadlagPath, b: CadlagPath) -> CadlagPath:
    """Pointwise sum; exact for piecewise-linear continuous parts."""
    if a.horizon != b.horizon:
        raise ValueError("cannot add paths with different horizons")
    grid = np.union1d(a.grid_times, b.grid_times)
    cont = continuous_value(a, grid) + continuous_value(b, grid)
    times = np.concatenate([a.jump_times, b.jump_times])
    sizes = np.concatenate([a.jump_sizes, b.jump_sizes])
    order = np.argsort(times, kind="stable")
    times, sizes = times[order], sizes[order]
    # merge exact duplicates so jump times stay strictly increasing
    if times.size:
        keep_t, keep_s = [times[0]], [sizes[0]]
        for t, s in zip(times[1:], sizes[1:]):
            if t == keep_t[-1]:
                keep_s[-1] += s
            else:
                keep_t.append(t)
                keep_s.append(s)
        times, sizes = np.array(keep_t), np.array(keep_s)
        nonzero = sizes != 0.0
        times, sizes = times[nonzero], sizes[nonzero]
    return CadlagPath(a.horizon, grid, cont, times, sizes)


def path_integral(path: CadlagPath, a: float, b: float) -> float:
    """Exact integral of the path over [a, b] (piecewise-linear plus steps)."""
    if not 0.0 <= a <= b <= path.horizon:
        raise ValueError("integration bounds must satisfy 0 <= a <= b <= horizon")
    knots = np.union1d(path.grid_times, np.array([a, b]))
    knots = knots[(knots >= a) & (knots <= b)]
    vals = continuous_value(path, knots)
    total = float(np.trapezoid(vals, knots))
    for tj, sj in zip(path.jump_times, path.jump_sizes):
        if tj < b:
            total += sj * (b - max(a, tj))
    return total


def _breakpoints(x: CadlagPath, y: CadlagPath) -> np.ndarray:
    return np.union1d(
        np.union1d(x.grid_times, y.grid_times),
        np.union1d(x.jump_times, y.jump_times),
    )


def uniform_distance(x: CadlagPath, y: CadlagPath) -> float:
    """sup_t |x(t) - y(t)|, exact on the supported path class.

    The difference is piecewise linear between breakpoints with steps at
    jump times, so the supremum is attained at a breakpoint or at the left
    limit of a jump time.
    """
    if x.horizon != y.horizon:
        raise ValueError("paths must share a horizon")
    ts = _breakpoints(x, y)
    d_right = np.abs(np.atleast_1d(evaluate(x, ts)) - np.atleast_1d(evaluate(y, ts)))
    jt = np.union1d(x.jump_times, y.jump_times)
    if jt.size:
        d_left = np.abs(np.atleast_1d(left_limit(x, jt)) - np.atleast_1d(left_limit(y, jt)))
        return float(max(d_right.max(), d_left.max()))
    return float(d_right.max())


def _stepize(path: CadlagPath, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Approximate the path by a pure step path within sup-error delta.

    Returns (times, sizes) of the step representation.  Each linear span of
    the continuous part is chopped so the value moves at most delta per
    step; original jumps are kept as-is.
    """
    times = list(path.jump_times)
    sizes = list(path.jump_sizes)
    t, v = path.grid_times, path.continuous_values
    n_extra = 0
    for k in range(t.size - 1):
        dv = v[k + 1] - v[k]
        if dv == 0.0:
            continue
        parts = int(np.ceil(abs(dv) / delta))
        n_extra += parts
        if n_extra > _MAX_STEPIZE_EVENTS:
            raise ValueError(
                "path variation too large for requested tolerance; increase tol"
            )
        sub_t = np.linspace(t[k], t[k + 1], parts + 1)
        sub_v = np.linspace(v[k], v[k + 1], parts + 1)
        for j in range(parts):
            times.append(sub_t[j + 1])
            sizes.append(sub_v[j + 1] - sub_v[j])
    times = np.asarray(times, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    order = np.argsort(times, kind="stable")
    times, sizes = times[order], sizes[order]
    # coalesce coincident events
    if times.size:
        keep_t, keep_s = [times[0]], [sizes[0]]
        for ti, si in zip(times[1:], sizes[1:]):
            if ti == keep_t[-1]:
                keep_s[-1] += si
            else:
                keep_t.append(ti)
                keep_s.append(si)
        times, sizes = np.array(keep_t), np.array(keep_s)
    return times, sizes


def _align_steps(
    xt: np.ndarray, xs: np.ndarray, yt: np.ndarray, ys: np.ndarray, horizon: float
) -> tuple[float, float, list[tuple[float, float]]]:
    """Dynamic program over monotone alignments of two step paths.

    State (i, j) means the first i x-jumps and j y-jumps have occurred; the
    value discrepancy on that stretch is |X_i - Y_j| with X, Y the prefix
    sums.  Matching jump i with jump j costs |xt[i] - yt[j]| in time shift;
    skipped jumps cost nothing in time but move the level.  The objective is
    max(value cost, time cost), with ties broken toward the smaller time
    cost; both components accumulate by max, so the lexicographic DP is
    exact.
    """
    m, n = xs.size, ys.size
    X = np.concatenate([[0.0], np.cumsum(xs)])
    Y = np.concatenate([[0.0], np.cumsum(ys)])
    seg = np.abs(X[:, None] - Y[None, :])

    big = np.inf
    cost = np.full((m + 1, n + 1), big)
    tcost = np.full((m + 1, n + 1), big)
    move = np.zeros((m + 1, n + 1), dtype=np.int8)  # 1 diag, 2 up(i), 3 left(j)
    cost[0, 0] = seg[0, 0]
    tcost[0, 0] = 0.0
    for i in range(m + 1):
        for j in range(n + 1):
            if i == 0 and j == 0:
                continue
            best = (big, big, 0)
            if i > 0 and j > 0:
                dt = abs(xt[i - 1] - yt[j - 1])
                c = max(cost[i - 1, j - 1], dt, seg[i, j])
                tc = max(tcost[i - 1, j - 1], dt)
                if (c, tc) < best[:2]:
                    best = (c, tc, 1)
            if i > 0:
                c = max(cost[i - 1, j], seg[i, j])
                tc = tcost[i - 1, j]
                if (c, tc) < best[:2]:
                    best = (c, tc, 2)
            if j > 0:
                c = max(cost[i, j - 1], seg[i, j])
                tc = tcost[i, j - 1]
                if (c, tc) < best[:2]:
                    best = (c, tc, 3)
            cost[i, j], tcost[i, j], move[i, j] = best

    # backtrack matched pairs for the witnessing reparametrization
    pairs: list[tuple[float, float]] = []
    i, j = m, n
    while i > 0 or j > 0:
        mv = move[i, j]
        if mv == 1:
            pairs.append((float(xt[i - 1]), float(yt[j - 1])))
            i, j = i - 1, j - 1
        elif mv == 2:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return float(cost[m, n]), float(tcost[m, n]), pairs


def _witness_from_pairs(pairs: list[tuple[float, float]], horizon: float) -> Reparametrization:
    kt, kl = [0.0], [0.0]
    for t, lam in pairs:
        if t <= kt[-1] or lam <= kl[-1] or t >= horizon or lam >= horizon:
            continue
        kt.append(t)
        kl.append(lam)
    kt.append(horizon)
    kl.append(horizon)
    return Reparametrization(np.array(kt), np.array(kl))


def skorokhod_distance(
    x: CadlagPath, y: CadlagPath, tol: float = 1e-9
) -> tuple[float, Reparametrization]:
    """Distance inf{eps: some time change lambda keeps |lambda-id| and
    |x - y(lambda)| below eps}, computed to within ``tol``.

    Pure step paths are solved exactly by the alignment DP; paths with a
    nonconstant continuous part are first replaced by step approximations
    within tol/4 in the uniform norm, which perturbs the distance by at
    most tol/2.
    """
    if x.horizon != y.horizon:
        raise ValueError("paths must share a horizon")
    if tol <= 0:
        raise ValueError("tol must be positive")
    delta = tol / 4.0
    if x.is_pure_step():
        xt, xs = x.jump_times.copy(), x.jump_sizes.copy()
    else:
        xt, xs = _stepize(x, delta)
    if y.is_pure_step():
        yt, ys = y.jump_times.copy(), y.jump_sizes.copy()
    else:
        yt, ys = _stepize(y, delta)
    d, _, pairs = _align_steps(xt, xs, yt, ys, x.horizon)
    return d, _witness_from_pairs(pairs, x.horizon)


@dataclass(frozen=True)
class ConvergenceReport:
    distances: tuple[float, ...]
    is_decreasing: bool
    trend: str


def skorokhod_converges(
    seq: Sequence[CadlagPath], x: CadlagPath, tol: float = 1e-9, trend_tol: float | None = None
) -> ConvergenceReport:
    """Distances of each sequence member to x, with a monotone-trend flag."""
    if len(seq) == 0:
        raise ValueError("empty path sequence")
    if trend_tol is None:
        trend_tol = tol
    ds = tuple(skorokhod_distance(p, x, tol)[0] for p in seq)
    dec = all(ds[k + 1] <= ds[k] + trend_tol for k in range(len(ds) - 1))
    return ConvergenceReport(ds, dec, "decreasing" if dec else "non-monotone")
