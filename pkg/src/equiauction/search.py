"""WEV-minimising pricing delta*(c), MEU frontiers and landscape sweeps."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .equity import meu_verdict, theory_bounds, wev
from .simulate import default_workers

SCAN = 21
TOL = 1e-3
_INVPHI = (np.sqrt(5.0) - 1) / 2


def golden_section(fun, lo, hi, tol=TOL):
    """Minimise fun on [lo, hi] down to an interval of width tol; returns (x, f(x))."""
    a, b = float(lo), float(hi)
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = fun(x1), fun(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = fun(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def _local_minima(values):
    v = np.asarray(values)
    idx = []
    for i in range(v.size):
        left = v[i - 1] if i > 0 else np.inf
        right = v[i + 1] if i < v.size - 1 else np.inf
        if v[i] <= left and v[i] <= right:
            idx.append(i)
    return idx


def delta_star(market, tol=TOL, scan=SCAN, objective=None):
    """Global minimiser of WEV over delta in [0, 1].

    WEV need not be convex in delta, so every local minimum of the coarse scan is
    refined and the best is kept. Returns a dict with the minimiser, its WEV and
    the scan itself.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    f = objective or (lambda d: wev(market, d))
    grid = np.linspace(0.0, 1.0, int(scan))
    vals = np.array([f(d) for d in grid])
    best_x, best_f = None, np.inf
    for i in _local_minima(vals):
        cands = [(grid[i], vals[i])]
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        cands.append(golden_section(f, lo, hi, tol))
        for x, fx in cands:
            if fx < best_f:
                best_x, best_f = float(x), float(fx)
    return {"delta_star": best_x, "wev_min": best_f, "scan_delta": grid, "scan_wev": vals}


def meu_frontier(market, c=None, scan=SCAN, tol=TOL):
    """Largest delta (to tol) for which monotone ex-post utility holds."""
    if c is not None:
        market = market.with_c(c)
    if market.c >= 1:
        return 0.0
    grid = np.linspace(0.0, 1.0, int(scan))
    holds = [True] + [meu_verdict(market, d).meu_holds for d in grid[1:]]
    if all(holds):
        return 1.0
    j = holds.index(False)
    lo, hi = grid[j - 1], grid[j]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if meu_verdict(market, mid).meu_holds:
            lo = mid
        else:
            hi = mid
    return float(lo)


@dataclass
class SweepResult:
    c_grid: np.ndarray
    delta_grid: np.ndarray
    wev_matrix: np.ndarray
    delta_star: np.ndarray
    wev_star: np.ndarray
    meu_frontier: np.ndarray
    bounds: list
    failures: list = field(default_factory=list)

    def summary(self):
        rows = []
        for i, c in enumerate(self.c_grid):
            row = {"c": float(c), "delta_star": float(self.delta_star[i]),
                   "wev_min": float(self.wev_star[i]), "frontier": float(self.meu_frontier[i])}
            row.update({k: float(v) for k, v in self.bounds[i].items()})
            rows.append(row)
        return rows


def landscape_sweep(market, c_grid, delta_grid, tol=TOL, frontier=True, workers=None):
    """WEV on a (c, delta) grid plus delta*(c), MEU frontier and theory bounds per row.

    Cells run on a thread pool and are stored by grid index; a failing cell is
    recorded as NaN with its error message.
    """
    c_grid = np.asarray(c_grid, dtype=float)
    delta_grid = np.asarray(delta_grid, dtype=float)
    for g in (c_grid, delta_grid):
        if g.size == 0 or np.any(g < 0) or np.any(g > 1):
            raise ValueError("grids must be non-empty and lie in [0, 1]")
    workers = default_workers() if workers is None else max(1, int(workers))
    failures = []

    def cell(ij):
        i, j = ij
        try:
            return wev(market.with_c(c_grid[i]), delta_grid[j])
        except Exception as exc:  # recorded, not fatal
            failures.append({"c": float(c_grid[i]), "delta": float(delta_grid[j]), "error": str(exc)})
            return np.nan

    def row(i):
        m = market.with_c(c_grid[i])
        try:
            ds = delta_star(m, tol)
            star = (ds["delta_star"], ds["wev_min"])
        except Exception as exc:
            failures.append({"c": float(c_grid[i]), "delta": None, "error": str(exc)})
            star = (np.nan, np.nan)
        fr = meu_frontier(m, tol=tol) if frontier else np.nan
        return star, fr, theory_bounds(m)

    cells = [(i, j) for i in range(c_grid.size) for j in range(delta_grid.size)]
    if workers == 1:
        values = [cell(ij) for ij in cells]
        rows = [row(i) for i in range(c_grid.size)]
    else:
        with ThreadPoolExecutor(workers) as ex:
            values = list(ex.map(cell, cells))
            rows = list(ex.map(row, range(c_grid.size)))
    mat = np.array(values, dtype=float).reshape(c_grid.size, delta_grid.size)
    failures.sort(key=lambda f: (f["c"], -1 if f["delta"] is None else f["delta"]))
    return SweepResult(c_grid, delta_grid, mat,
                       np.array([r[0][0] for r in rows]), np.array([r[0][1] for r in rows]),
                       np.array([r[1] for r in rows]), [r[2] for r in rows], failures)
