"""Eigenvalue surfaces over control grids, intersection search and classification.

Levels are labelled by sorted index (``lambda_1 <= lambda_2 <= ...``, 1-based);
``gap_j = lambda_{j+1} - lambda_j``. All thresholds are relative to
``scale(u) = max(1, ||H(u)||_F)`` unless stated otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .config import DEFAULT_TOLERANCES, Tolerances
from .herm import SpectrumPoint, eig_hermitian, eigvalsh_batch
from .system import ControlledHamiltonian, OutsideRegion

CONICAL = "CONICAL"
WEAKLY_CONICAL = "WEAKLY_CONICAL"
HIGHER_MULTIPLICITY = "HIGHER_MULTIPLICITY"
NOT_ISOLATED = "NOT_ISOLATED"
UNRESOLVED = "UNRESOLVED"

_BATCH = 4096


class NoIntersectionFound(RuntimeError):
    """The minimized gap stayed above the intersection tolerance."""

    def __init__(self, message: str, best_point=None, best_gap: float = math.nan):
        super().__init__(message)
        self.best_point = best_point
        self.best_gap = best_gap


def _check_level(model: ControlledHamiltonian, j: int) -> int:
    if not 1 <= int(j) <= model.dim - 1:
        raise ValueError(f"level {j} outside [1, {model.dim - 1}]")
    return int(j)


def spectrum_at(model: ControlledHamiltonian, u: ArrayLike) -> SpectrumPoint:
    """Eigendecomposition of ``H(u)``; ``u`` must lie inside the control box."""
    u = model.check(u)
    return eig_hermitian(model.hamiltonian(u), u)


def eigenvalues_at(model: ControlledHamiltonian, points: ArrayLike) -> NDArray[np.float64]:
    """Ascending eigenvalues for a batch of control points, shape ``(K, n)``."""
    pts = np.asarray(points, dtype=float).reshape(-1, model.m)
    out = np.empty((len(pts), model.dim))
    for s in range(0, len(pts), _BATCH):
        out[s : s + _BATCH] = eigvalsh_batch(model.matrices(pts[s : s + _BATCH]))
    return out


def gap_at(model: ControlledHamiltonian, u: ArrayLike, j: int) -> float:
    w = np.linalg.eigvalsh(model.matrix(u, check=False))
    return float(w[j] - w[j - 1])


# ------------------------------------------------------------------ grids


@dataclass(frozen=True, eq=False)
class ScanGrid:
    """Rectangular grid in the plane of two (or one) control axes.

    Controls not on a scanned axis are held at ``base``. ``eigenvalues`` has
    shape ``counts + (n,)``; full eigenvectors are recomputed on demand by
    :meth:`point`, which keeps large scans light.
    """

    axes: tuple[int, ...]
    bounds: tuple[tuple[float, float], ...]
    counts: tuple[int, ...]
    base: NDArray[np.float64]
    eigenvalues: NDArray[np.float64] | None = field(default=None, repr=False)

    @property
    def coords(self) -> list[NDArray[np.float64]]:
        return [np.linspace(lo, hi, k) for (lo, hi), k in zip(self.bounds, self.counts)]

    def points(self) -> NDArray[np.float64]:
        """Full control vectors, row-major over the grid, shape ``(prod(counts), m)``."""
        mesh = np.meshgrid(*self.coords, indexing="ij")
        pts = np.tile(self.base, (int(np.prod(self.counts)), 1))
        for ax, c in zip(self.axes, mesh):
            pts[:, ax] = c.ravel()
        return pts

    def point(self, model: ControlledHamiltonian, index: Sequence[int]) -> SpectrumPoint:
        u = self.base.copy()
        for ax, c, i in zip(self.axes, self.coords, index):
            u[ax] = c[i]
        return spectrum_at(model, u)


def make_grid(
    model: ControlledHamiltonian,
    bounds: Sequence[tuple[float, float]],
    counts: Sequence[int],
    axes: Sequence[int] = (0, 1),
    base: ArrayLike | None = None,
) -> ScanGrid:
    """Validate a grid specification; every grid point must be strictly inside the box."""
    axes = tuple(int(a) for a in axes)
    if not 1 <= len(axes) <= 2 or len(set(axes)) != len(axes):
        raise ValueError("a grid scans one or two distinct control axes")
    if len(bounds) != len(axes) or len(counts) != len(axes):
        raise ValueError("one (lo, hi) bound and one count per scanned axis")
    base = np.zeros(model.m) if base is None else np.array(base, dtype=float)
    if base.shape != (model.m,):
        raise ValueError(f"base point must have length {model.m}")
    clean_bounds = []
    for ax, (lo, hi), k in zip(axes, bounds, counts):
        if not 0 <= ax < model.m:
            raise ValueError(f"axis {ax} out of range")
        if int(k) < 2 or not float(lo) < float(hi):
            raise ValueError(f"invalid grid axis ({lo}, {hi}) x {k}")
        rlo, rhi = model.region[ax]
        if not (rlo < float(lo) and float(hi) < rhi):
            raise OutsideRegion(f"grid bounds ({lo}, {hi}) not strictly inside ({rlo}, {rhi})")
        clean_bounds.append((float(lo), float(hi)))
    for ax in range(model.m):
        if ax not in axes:
            rlo, rhi = model.region[ax]
            if not rlo < base[ax] < rhi:
                raise OutsideRegion(f"base value {base[ax]} outside ({rlo}, {rhi})")
    return ScanGrid(axes, tuple(clean_bounds), tuple(int(k) for k in counts), base)


def scan_spectrum(model: ControlledHamiltonian, grid: ScanGrid) -> ScanGrid:
    """Fill ``grid.eigenvalues`` (returns a new grid)."""
    w = eigenvalues_at(model, grid.points())
    return replace(grid, eigenvalues=w.reshape(grid.counts + (model.dim,)))


def scan_gap_surface(model: ControlledHamiltonian, grid: ScanGrid, j: int) -> NDArray[np.float64]:
    """``lambda_{j+1} - lambda_j`` on the grid (nonnegative)."""
    j = _check_level(model, j)
    if grid.eigenvalues is None:
        grid = scan_spectrum(model, grid)
    return np.maximum(grid.eigenvalues[..., j] - grid.eigenvalues[..., j - 1], 0.0)


def lipschitz_excess(model: ControlledHamiltonian, grid: ScanGrid) -> float:
    """Largest violation of the Weyl bound between neighbouring grid points.

    Weyl: ``|lambda_j(u) - lambda_j(u')| <= ||sum_l (u_l - u'_l) H_l||_2``.
    Returns ``max(diff - bound)``, which should not exceed roundoff.
    """
    if grid.eigenvalues is None:
        grid = scan_spectrum(model, grid)
    w = grid.eigenvalues
    coords = grid.coords
    worst = -np.inf
    for k, ax in enumerate(grid.axes):
        step = coords[k][1] - coords[k][0]
        bound = step * float(np.linalg.norm(model.couplings[ax].entries, 2))
        diff = np.abs(np.diff(w, axis=k)).max()
        worst = max(worst, float(diff - bound))
    return worst


def grid_minima(gaps: NDArray[np.float64], grid: ScanGrid, limit: int = 16) -> list[NDArray[np.float64]]:
    """Interior local minima of a gap surface, smallest first, as control vectors."""
    g = np.asarray(gaps)
    if g.ndim == 1:
        g = g[:, None]
    padded = np.pad(g, 1, mode="constant", constant_values=np.inf)
    centre = padded[1:-1, 1:-1]
    is_min = np.ones_like(centre, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                nb = padded[1 + di : padded.shape[0] - 1 + di, 1 + dj : padded.shape[1] - 1 + dj]
                is_min &= centre <= nb
    # drop points on the grid boundary along scanned axes
    if g.shape[0] > 2:
        is_min[[0, -1], :] = False
    if len(grid.axes) == 2 and g.shape[1] > 2:
        is_min[:, [0, -1]] = False
    idx = np.argwhere(is_min)
    order = np.argsort(centre[is_min], kind="stable")[:limit]
    coords = grid.coords
    seeds = []
    for i in order:
        u = grid.base.copy()
        for k, ax in enumerate(grid.axes):
            u[ax] = coords[k][idx[i][k]]
        seeds.append(u)
    return seeds


# ------------------------------------------------------------ intersections


@dataclass(frozen=True)
class ConicalDirection:
    """A probed unit direction that passed the one-sided linear fits."""

    direction: tuple[float, ...]
    c_minus: float
    c_plus: float
    delta: float

    def to_dict(self) -> dict:
        return {
            "direction": list(self.direction),
            "c_minus": self.c_minus,
            "c_plus": self.c_plus,
            "delta": self.delta,
        }


@dataclass(frozen=True)
class IntersectionRecord:
    location: tuple[float, ...]
    level: int
    gap_at_location: float
    scale: float
    axes: tuple[int, ...]
    multiplicity: int = 2
    classification: str | None = None
    conical_directions: tuple[ConicalDirection, ...] = ()
    probed_directions: int = 0
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "location": list(self.location),
            "level": self.level,
            "gap_at_location": self.gap_at_location,
            "scale": self.scale,
            "axes": list(self.axes),
            "multiplicity": self.multiplicity,
            "classification": self.classification,
            "conical_directions": [d.to_dict() for d in self.conical_directions],
            "probed_directions": self.probed_directions,
            "evaluations": self.evaluations,
        }


def _search_directions(d: int) -> NDArray[np.float64]:
    dirs = [np.eye(d)]
    if d == 2:
        dirs.append(np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2))
    return np.vstack(dirs)


_GOLD = 0.5 * (3.0 - math.sqrt(5.0))


def _line_min(f, x, d, h, fx, xtol, budget):
    """Derivative-free minimization of ``f(x + t d)`` starting from ``t = 0``.

    Probes ``t = +-h``; on success expands the step until the value rises,
    then shrinks the bracket by golden sections to width ``xtol``.
    Returns ``(x, f(x), evaluations)``.
    """
    evals = 1
    fp = f(x + h * d)
    if fp < fx:
        sgn, f1 = 1.0, fp
    else:
        fm = f(x - h * d)
        evals += 1
        if not fm < fx:
            return x, fx, evals
        sgn, f1 = -1.0, fm
    a, b, fb = 0.0, sgn * h, f1
    step = h
    while True:
        step *= 2.0
        c = b + sgn * step
        fc = f(x + c * d)
        evals += 1
        if fc >= fb or evals >= budget:
            break
        a, b, fb = b, c, fc
    lo, hi = min(a, c), max(a, c)
    while hi - lo > xtol and evals < budget:
        if b - lo > hi - b:
            t = b - _GOLD * (b - lo)
        else:
            t = b + _GOLD * (hi - b)
        ft = f(x + t * d)
        evals += 1
        if ft < fb:
            if t < b:
                hi = b
            else:
                lo = b
            b, fb = t, ft
        elif t < b:
            lo = t
        else:
            hi = t
    return x + b * d, fb, evals


def locate_intersection(
    model: ControlledHamiltonian,
    j: int,
    seed: ArrayLike,
    tol: Tolerances = DEFAULT_TOLERANCES,
    axes: Sequence[int] | None = None,
    step: float = 0.05,
) -> IntersectionRecord:
    """Minimize ``gap_j`` from ``seed`` by derivative-free pattern search.

    Each sweep runs a bracketing line minimization along every coordinate
    axis (then along the two diagonals in the plane) with probe step ``h``;
    ``h`` halves after a sweep that does not move. Only the coordinates in
    ``axes`` move (all by default). The search stops when ``h`` falls below
    ``tol.coord_precision`` or after ``tol.max_evals`` gap evaluations and
    accepts when the final gap is below ``tol.intersect * scale``.

    Line minimization to convergence keeps the search on a symmetry axis
    when the gap grows only quadratically off it, where a plain compass
    search drifts along the shallow valley.
    """
    j = _check_level(model, j)
    x = model.check(np.array(seed, dtype=float)).copy()
    axes = tuple(range(model.m)) if axes is None else tuple(int(a) for a in axes)
    dirs = []
    for v in _search_directions(len(axes)):
        full = np.zeros(model.m)
        full[list(axes)] = v
        dirs.append(full)
    lo, hi = np.array(model.region).T

    def f(y: NDArray[np.float64]) -> float:
        if not (np.all(lo < y) and np.all(y < hi)):
            return math.inf
        return gap_at(model, y, j)

    fx = f(x)
    evals = 1
    h = float(step)
    while evals < tol.max_evals and fx > 0.0:
        start = x.copy()
        for d in dirs:
            xtol = 1e-14 * max(1.0, float(np.max(np.abs(x))))
            x, fx, e = _line_min(f, x, d, h, fx, xtol, tol.max_evals - evals)
            evals += e
            if evals >= tol.max_evals:
                break
        if np.max(np.abs(x - start)) < tol.coord_precision:
            if h <= tol.coord_precision:
                break
            h *= 0.5
    scale = model.scale(x)
    if not fx < tol.intersect * scale:
        raise NoIntersectionFound(
            f"gap_{j} stays at {fx:.3e} >= {tol.intersect * scale:.3e} near {x.tolist()}", x, fx
        )
    return IntersectionRecord(
        location=tuple(float(c) for c in x),
        level=j,
        gap_at_location=float(fx),
        scale=scale,
        axes=axes,
        evaluations=evals,
    )


def multiplicity_at(model: ControlledHamiltonian, u: ArrayLike, j: int, tol: Tolerances = DEFAULT_TOLERANCES) -> int:
    """Size of the eigenvalue cluster containing ``lambda_j``."""
    j = int(j)
    if not 1 <= j <= model.dim:
        raise ValueError(f"level {j} outside [1, {model.dim}]")
    u = model.check(u)
    w = np.linalg.eigvalsh(model.matrix(u))
    thr = tol.cluster * model.scale(u)
    lo = j - 1
    while lo > 0 and w[lo] - w[lo - 1] <= thr:
        lo -= 1
    hi = j - 1
    while hi < model.dim - 1 and w[hi + 1] - w[hi] <= thr:
        hi += 1
    return hi - lo + 1


def _unit_directions(d: int, k: int, seed: int = 0) -> NDArray[np.float64]:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        ang = np.arange(k) * (2 * math.pi / k)
        return np.column_stack([np.cos(ang), np.sin(ang)])
    v = np.random.default_rng(seed).normal(size=(k, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _check_ball(model: ControlledHamiltonian, u, axes, radius: float, what: str) -> None:
    for ax in axes:
        lo, hi = model.region[ax]
        if not (lo < u[ax] - radius and u[ax] + radius < hi):
            raise OutsideRegion(f"{what} of radius {radius} around {list(u)} leaves the control box; use a smaller radius")


def is_isolated(
    model: ControlledHamiltonian,
    u: ArrayLike,
    j: int,
    radius: float,
    tol: Tolerances = DEFAULT_TOLERANCES,
    axes: Sequence[int] | None = None,
) -> bool:
    """True iff ``gap_j`` exceeds the intersection tolerance on three rings around ``u``."""
    j = _check_level(model, j)
    u = model.check(u)
    axes = tuple(range(model.m)) if axes is None else tuple(axes)
    _check_ball(model, u, axes, radius, "ball")
    dirs = _unit_directions(len(axes), tol.k_ring)
    pts = []
    for r in (radius / 4, radius / 2, radius):
        block = np.tile(u, (len(dirs), 1))
        block[:, list(axes)] += r * dirs
        pts.append(block)
    pts = np.vstack(pts)
    w = eigenvalues_at(model, pts)
    gaps = w[:, j] - w[:, j - 1]
    scales = np.maximum(1.0, np.linalg.norm(model.matrices(pts), axis=(1, 2)))
    return bool(np.all(gaps > tol.intersect * scales))


def _one_sided_fit(t: NDArray[np.float64], g: NDArray[np.float64]) -> tuple[float, float]:
    """Least-squares slope of ``g ~ c t`` through the origin and its relative residual."""
    c = float(t @ g / (t @ t))
    norm = float(np.linalg.norm(g))
    res = float(np.linalg.norm(g - c * t)) / norm if norm > 0 else math.inf
    return c, res


def _probe(model, record: IntersectionRecord, tol: Tolerances, delta: float):
    u = np.array(record.location)
    axes = record.axes
    j = record.level
    _check_ball(model, u, axes, delta, "probe")
    dirs = _unit_directions(len(axes), tol.k_dir)
    ts = delta * np.array([0.125, 0.25, 0.5, 1.0])
    floor = tol.slope_floor * record.scale
    out = []
    for d in dirs:
        pts = []
        for sign in (1.0, -1.0):
            block = np.tile(u, (len(ts), 1))
            block[:, list(axes)] += sign * ts[:, None] * d
            pts.append(block)
        w = eigenvalues_at(model, np.vstack(pts))
        g = w[:, j] - w[:, j - 1]
        c_plus, r_plus = _one_sided_fit(ts, g[: len(ts)])
        c_minus, r_minus = _one_sided_fit(ts, g[len(ts) :])
        ok = min(c_plus, c_minus) > floor and max(r_plus, r_minus) < tol.fit_residual
        out.append((d, c_minus, c_plus, ok))
    return out


def classify_intersection(
    model: ControlledHamiltonian,
    record: IntersectionRecord,
    tol: Tolerances = DEFAULT_TOLERANCES,
    isolation_radius: float | None = None,
) -> IntersectionRecord:
    """Fill multiplicity, classification and the conical directions of a located record.

    ``isolation_radius`` defaults to ten probe radii. The verdict is a sampled
    one: ``CONICAL`` means every probed direction passed the fits.
    """
    if not record.gap_at_location < tol.intersect * record.scale:
        raise ValueError("record is not an intersection at the current tolerance")
    u = np.array(record.location)
    mult = multiplicity_at(model, u, record.level, tol)
    if mult > 2:
        return replace(record, multiplicity=mult, classification=HIGHER_MULTIPLICITY, conical_directions=())
    radius = 10 * tol.probe_radius if isolation_radius is None else isolation_radius
    if not is_isolated(model, u, record.level, radius, tol, record.axes):
        return replace(record, multiplicity=mult, classification=NOT_ISOLATED, conical_directions=())
    probes = _probe(model, record, tol, tol.probe_radius)
    good = tuple(
        ConicalDirection(tuple(float(x) for x in d), float(cm), float(cp), tol.probe_radius)
        for d, cm, cp, ok in probes
        if ok
    )
    if len(good) == len(probes):
        verdict = CONICAL
    elif good:
        verdict = WEAKLY_CONICAL
    else:
        verdict = UNRESOLVED
    return replace(
        record,
        multiplicity=mult,
        classification=verdict,
        conical_directions=good,
        probed_directions=len(probes),
    )


def conical_directions(
    model: ControlledHamiltonian, record: IntersectionRecord, tol: Tolerances = DEFAULT_TOLERANCES
) -> list[ConicalDirection]:
    """Probed directions passing the conicality fit (empty unless multiplicity two)."""
    if record.classification is None:
        record = classify_intersection(model, record, tol)
    if record.multiplicity != 2:
        return []
    return list(record.conical_directions)


def find_intersections(
    model: ControlledHamiltonian,
    grid: ScanGrid,
    j: int,
    tol: Tolerances = DEFAULT_TOLERANCES,
    seeds: Sequence[ArrayLike] | None = None,
    max_seeds: int = 16,
    classify: bool = True,
    search_axes: Sequence[int] | None = None,
) -> list[IntersectionRecord]:
    """Locate (and classify) intersections of level ``j`` from seeds or grid minima.

    The search and the classification move the controls in ``search_axes``
    (default: the grid axes), so a line scan can seed a search in the plane.
    Duplicates closer than ``1e3 * coord_precision`` are dropped; records are
    ordered by location.
    """
    if seeds is None:
        gaps = scan_gap_surface(model, grid, j)
        seeds = grid_minima(gaps, grid, max_seeds)
    axes = grid.axes if search_axes is None else tuple(int(a) for a in search_axes)
    step = 2.0 * max((hi - lo) / (k - 1) for (lo, hi), k in zip(grid.bounds, grid.counts))
    records: list[IntersectionRecord] = []
    for s in seeds:
        try:
            rec = locate_intersection(model, j, s, tol, axes, step=step)
        except NoIntersectionFound:
            continue
        loc = np.array(rec.location)
        if any(np.linalg.norm(loc - np.array(r.location)) < 1e3 * tol.coord_precision for r in records):
            continue
        records.append(rec)
    if classify:
        records = [classify_intersection(model, r, tol) for r in records]
    records.sort(key=lambda r: r.location)
    return records
