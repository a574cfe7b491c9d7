"""Machine-readable checks of the spectral hypotheses behind single-input controllability.

Each check returns a :class:`CheckResult` that records where it was evaluated,
its status (``pass``, ``fail`` or ``unreliable``), numeric witnesses and the
tolerances it used. A :class:`Certificate` bundles checks for one model.
"""

from __future__ import annotations

import datetime as _dt
import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .config import DEFAULT_TOLERANCES, Tolerances
from .herm import HermitianOperator, SpectrumPoint, commutator, eig_hermitian
from .lie import controllability_verdict
from .models import enantio_couplings, enantio_hamiltonian
from .scan import CONICAL, WEAKLY_CONICAL, IntersectionRecord, eigenvalues_at, spectrum_at
from .system import ControlledHamiltonian, OutsideRegion

PASS, FAIL, UNRELIABLE = "pass", "fail", "unreliable"


class DegenerateSpectrum(ValueError):
    """A check that needs simple eigenvalues met a cluster."""


@dataclass(frozen=True)
class CheckResult:
    name: str
    location: list
    status: str
    witnesses: dict
    tolerances: dict

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        wit = dict(self.witnesses)
        wit["tolerances"] = dict(self.tolerances)
        return {"name": self.name, "location": self.location, "status": self.status, "witnesses": wit}


def _loc(u) -> list:
    return [float(x) for x in np.atleast_1d(u)]


def _scale(eigenvalues: NDArray[np.float64]) -> float:
    return max(1.0, float(np.linalg.norm(eigenvalues)))


def _clusters(w: NDArray[np.float64], thr: float) -> list[list[int]]:
    groups = [[0]]
    for i in range(1, len(w)):
        if w[i] - w[i - 1] <= thr:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _restrict(point: SpectrumPoint, levels: int | None) -> tuple[NDArray, NDArray]:
    k = point.dim if levels is None else int(levels)
    if not 2 <= k <= point.dim:
        raise ValueError(f"levels must lie in [2, {point.dim}]")
    return point.eigenvalues[:k], point.eigenvectors[:, :k]


def check_simple_spectrum(
    point: SpectrumPoint, tol: Tolerances = DEFAULT_TOLERANCES, levels: int | None = None
) -> CheckResult:
    w, _ = _restrict(point, levels)
    thr = tol.cluster * _scale(point.eigenvalues)
    gaps = np.diff(w)
    mult = max(len(c) for c in _clusters(w, thr))
    i = int(np.argmin(gaps))
    return CheckResult(
        "simple_spectrum",
        [_loc(point.u)],
        PASS if mult == 1 else FAIL,
        {"min_gap": float(gaps[i]), "min_gap_levels": [i + 1, i + 2], "max_multiplicity": mult, "levels": len(w)},
        {"cluster": thr},
    )


def check_nonresonance(
    point: SpectrumPoint, tol: Tolerances = DEFAULT_TOLERANCES, levels: int | None = None
) -> CheckResult:
    """All gaps ``lambda_j - lambda_k`` (``j > k``) pairwise distinct.

    Threshold ``tol.nonresonance * max(1, ||lambda||)``. Degenerate spectra fail
    with the largest cluster size as witness.
    """
    w, _ = _restrict(point, levels)
    scale = _scale(point.eigenvalues)
    thr = tol.nonresonance * scale
    mult = max(len(c) for c in _clusters(w, tol.cluster * scale))
    tols = {"nonresonance": thr, "cluster": tol.cluster * scale}
    if mult > 1:
        return CheckResult("nonresonance", [_loc(point.u)], FAIL, {"max_multiplicity": mult}, tols)
    pairs = [(j, k) for k, j in itertools.combinations(range(len(w)), 2)]
    gaps = np.array([w[j] - w[k] for j, k in pairs])
    order = np.argsort(gaps, kind="stable")
    diffs = np.diff(gaps[order])
    i = int(np.argmin(diffs))
    a, b = pairs[order[i]], pairs[order[i + 1]]
    witnesses = {
        "min_gap_difference": float(diffs[i]),
        "pairs": [[a[0] + 1, a[1] + 1], [b[0] + 1, b[1] + 1]],
        "levels": len(w),
    }
    return CheckResult("nonresonance", [_loc(point.u)], PASS if diffs[i] > thr else FAIL, witnesses, tols)


def check_couplings(
    point: SpectrumPoint,
    W: HermitianOperator | ArrayLike,
    tol: Tolerances = DEFAULT_TOLERANCES,
    levels: int | None = None,
) -> CheckResult:
    """``|<phi_j, W phi_{j+1}>|`` for consecutive eigenvectors, all above ``tol.couple * ||W||_F``."""
    w, vecs = _restrict(point, levels)
    scale = _scale(point.eigenvalues)
    if max(len(c) for c in _clusters(w, tol.cluster * scale)) > 1:
        raise DegenerateSpectrum("coupling check needs a simple spectrum")
    mat = np.asarray(getattr(W, "entries", W))
    thr = tol.couple * float(np.linalg.norm(mat))
    elems = np.abs(np.einsum("ij,ik,kj->j", vecs[:, :-1].conj(), mat, vecs[:, 1:]))
    ok = bool(np.all(elems > thr))
    witnesses = {
        "couplings": [float(x) for x in elems],
        "min_coupling": float(elems.min()),
        "weakest_pair": [int(np.argmin(elems)) + 1, int(np.argmin(elems)) + 2],
    }
    return CheckResult("couplings", [_loc(point.u)], PASS if ok else FAIL, witnesses, {"couple": thr})


def check_connectedness(
    records: Sequence[IntersectionRecord], n: int, levels: Sequence[int] | None = None
) -> CheckResult:
    """Every level ``j`` in ``1..n-1`` (or in ``levels``) meets its neighbour conically or weakly conically."""
    wanted = list(range(1, n)) if levels is None else sorted(int(j) for j in levels)
    good = {CONICAL, WEAKLY_CONICAL}
    counts = {j: sum(1 for r in records if r.level == j and r.classification in good) for j in wanted}
    missing = [j for j, c in counts.items() if c == 0]
    return CheckResult(
        "connectedness",
        [list(r.location) for r in records],
        PASS if not missing else FAIL,
        {"missing_levels": missing, "records_per_level": {str(j): c for j, c in counts.items()}},
        {},
    )


def _ball_samples(u, axes, radius, k, rng) -> NDArray[np.float64]:
    d = len(axes)
    dirs = rng.normal(size=(k, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    r = radius * rng.random(k) ** (1.0 / d)
    pts = np.tile(u, (k, 1))
    pts[:, list(axes)] += r[:, None] * dirs
    return pts


def intersecting_levels(model: ControlledHamiltonian, u: ArrayLike, tol: Tolerances = DEFAULT_TOLERANCES) -> list[int]:
    """Levels ``j`` with ``lambda_j(u) = lambda_{j+1}(u)`` up to the cluster tolerance."""
    u = model.check(u)
    w = np.linalg.eigvalsh(model.matrix(u))
    thr = tol.cluster * model.scale(u)
    return [j + 1 for j in range(len(w) - 1) if w[j + 1] - w[j] <= thr]


def germs_independence_proxy(
    model: ControlledHamiltonian,
    u: ArrayLike,
    levels: Sequence[int],
    radius: float,
    samples: int = 50,
    tol: Tolerances = DEFAULT_TOLERANCES,
    axes: Sequence[int] | None = None,
    seed: int = 0,
) -> CheckResult:
    """Real-linear independence of the gap functions of ``levels`` near ``u``.

    Samples points uniformly in the ball, forms ``M[k, j] = lambda_{j+1} - lambda_j``,
    normalizes columns and compares the smallest singular value with
    ``tol.germs``. A pass is a sufficient certificate; a fail is inconclusive.
    """
    u = model.check(u)
    axes = tuple(range(model.m)) if axes is None else tuple(axes)
    for ax in axes:
        lo, hi = model.region[ax]
        if not (lo < u[ax] - radius and u[ax] + radius < hi):
            raise OutsideRegion(f"ball of radius {radius} around {u.tolist()} leaves the control box")
    levels = [int(j) for j in levels]
    if not levels:
        raise ValueError("at least one level required")
    pts = _ball_samples(u, axes, radius, samples, np.random.default_rng(seed))
    w = eigenvalues_at(model, pts)
    M = np.column_stack([w[:, j] - w[:, j - 1] for j in levels])
    norms = np.linalg.norm(M, axis=0)
    if np.any(norms == 0):
        smin = 0.0
    else:
        smin = float(np.linalg.svd(M / norms, compute_uv=False).min())
    ok = smin > tol.germs
    return CheckResult(
        "germs_independence",
        [_loc(u)],
        PASS if ok else FAIL,
        {"smallest_singular_value": smin, "levels": levels, "samples": samples, "radius": radius,
         "seed": seed, "inconclusive": not ok},
        {"germs": tol.germs},
    )


# ------------------------------------------------------------------ sweeps


@dataclass(frozen=True)
class SweepReport:
    axes: tuple[int, ...]
    values: list
    verdicts: list = field(repr=False)

    @property
    def passes(self) -> int:
        return sum(1 for v in self.verdicts if v["full"])

    @property
    def pass_fraction(self) -> float:
        return self.passes / len(self.verdicts)

    @property
    def failing(self) -> list:
        return [v["value"] for v in self.verdicts if not v["full"]]

    @property
    def unreliable(self) -> int:
        return sum(1 for v in self.verdicts if v["unreliable"])

    def to_dict(self) -> dict:
        return {
            "axes": list(self.axes),
            "samples": len(self.verdicts),
            "pass_fraction": self.pass_fraction,
            "failing": self.failing,
            "unreliable": self.unreliable,
            "verdicts": self.verdicts,
        }


def _sweep_one(args):
    model, axes, value, tol = args
    res = controllability_verdict(model, list(zip(axes, value)), tol)
    return {
        "value": [float(x) for x in value],
        "verdict": res.verdict,
        "dim": res.dim,
        "full": res.full,
        "unreliable": res.unreliable,
        "min_accepted_residual": res.min_accepted_residual,
        "max_rejected_residual": res.max_rejected_residual,
    }


def frozen_sweep(
    model: ControlledHamiltonian,
    axes: Sequence[int],
    values: Sequence[Sequence[float]],
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
) -> SweepReport:
    """Lie-rank verdict with the controls on ``axes`` frozen at each value tuple.

    Results are ordered by input index whatever the worker count.
    """
    axes = tuple(int(a) for a in axes)
    vals = [tuple(float(x) for x in np.atleast_1d(v)) for v in values]
    if not vals:
        raise ValueError("empty sweep")
    for v in vals:
        if len(v) != len(axes):
            raise ValueError("each sweep value needs one entry per frozen axis")
        for ax, x in zip(axes, v):
            lo, hi = model.interval(ax)
            if not lo < x < hi:
                raise OutsideRegion(f"sweep value {x} outside ({lo}, {hi}) for {model.labels[ax]}")
    jobs = [(model, axes, v, tol) for v in vals]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            verdicts = list(pool.map(_sweep_one, jobs))
    else:
        verdicts = [_sweep_one(j) for j in jobs]
    return SweepReport(axes, [list(v) for v in vals], verdicts)


def single_input_sweep(
    model: ControlledHamiltonian,
    axis: int,
    values: Sequence[float],
    tol: Tolerances = DEFAULT_TOLERANCES,
    workers: int = 1,
) -> SweepReport:
    """Freeze one control at each value and decide controllability in the rest."""
    return frozen_sweep(model, (axis,), [(v,) for v in values], tol, workers)


def sweep_check(report: SweepReport, threshold: float = 0.95) -> CheckResult:
    status = PASS if report.pass_fraction >= threshold else FAIL
    return CheckResult(
        "single_input_sweep",
        report.values,
        status,
        {"axes": list(report.axes), "pass_fraction": report.pass_fraction, "failing": report.failing,
         "unreliable": report.unreliable, "samples": len(report.verdicts)},
        {"pass_fraction_threshold": threshold},
    )


# ------------------------------------------------------------------ enantio


def _ad_power_series(h: NDArray, x: NDArray, coeffs: NDArray) -> tuple[NDArray, float]:
    """``sum_p coeffs[p] ad_h^{2p}(x)`` (ascending ``p``) and the largest term norm."""
    total = np.zeros_like(x)
    term = x.copy()
    biggest = 0.0
    for p, a in enumerate(coeffs):
        if p:
            term = commutator(h, commutator(h, term))
        contrib = a * term
        biggest = max(biggest, float(np.linalg.norm(contrib)))
        total = total + contrib
    return total, biggest


def enantio_obstruction(
    z: ArrayLike, E=(-1.5, 0.5, 1.0), tol: Tolerances = DEFAULT_TOLERANCES
) -> CheckResult:
    """Spectral conditions that separate the two enantiomers at ``z = (u, v, w)``.

    Checks ``lambda_2 - lambda_1 > 0`` and ``<phi_1, H_w phi_2> != 0`` for
    ``H+``, and that the first gap of ``H+`` is not a gap of ``H-``. Then builds
    the monic polynomial ``P`` with roots ``0`` and ``-(gaps of H-)^2``: the
    combination ``sum_p a_p ad^{2p}(i H_w)`` vanishes for ``H-`` and must not
    for ``H+``. Polynomial tolerances are relative to the largest term.
    """
    E = tuple(float(x) for x in E)
    if abs(sum(E)) > 1e-12 * max(1.0, max(abs(x) for x in E)):
        raise ValueError(f"energies must sum to zero, got {sum(E)}")
    if not E[0] < E[1] < E[2]:
        raise ValueError("energies must be strictly increasing")
    z = np.asarray(z, dtype=float)
    hp = enantio_hamiltonian(z, E, "+")
    hm = enantio_hamiltonian(z, E, "-")
    hw = enantio_couplings()[2]
    sp, sm = eig_hermitian(hp, z), eig_hermitian(hm, z)
    scale = max(1.0, float(np.linalg.norm(hp)))
    thr = tol.obstruction * scale
    wp, wm = sp.eigenvalues, sm.eigenvalues
    gap_p = float(wp[1] - wp[0])
    coupling = float(abs(sp.vector(1).conj() @ hw @ sp.vector(2)))
    gaps_m = np.array([wm[k] - wm[j] for j, k in itertools.combinations(range(3), 2)])
    separation = float(np.min(np.abs(gaps_m - gap_p)))
    coeffs = np.poly(np.concatenate([[0.0], -(gaps_m**2)]))[::-1].real
    xw = 1j * hw
    plus, big_p = _ad_power_series(1j * hp, xw, coeffs)
    minus, big_m = _ad_power_series(1j * hm, xw, coeffs)
    poly_scale = max(1.0, big_p, big_m)
    plus_norm, minus_norm = float(np.linalg.norm(plus)), float(np.linalg.norm(minus))
    conditions = {
        "gap_positive": gap_p > thr,
        "coupling_nonzero": coupling > thr,
        "gap_not_shared": separation > thr,
        "polynomial_separates": plus_norm > tol.obstruction * poly_scale and minus_norm < 1e-7 * poly_scale,
    }
    witnesses = {
        "gap_plus": gap_p,
        "coupling_plus": coupling,
        "gap_separation": separation,
        "polynomial_coefficients": [float(a) for a in coeffs],
        "plus_combination_norm": plus_norm,
        "minus_combination_norm": minus_norm,
        "polynomial_scale": poly_scale,
        "conditions": conditions,
    }
    return CheckResult(
        "enantio_obstruction",
        [_loc(z)],
        PASS if all(conditions.values()) else FAIL,
        witnesses,
        {"obstruction": thr, "polynomial_relative": tol.obstruction, "minus_vanishing": 1e-7},
    )


# ------------------------------------------------------------------ certificates


def default_timestamp() -> str:
    """``SOURCE_DATE_EPOCH`` when set (reproducible builds), else the current UTC time."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (
        _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc)
        if epoch
        else _dt.datetime.now(_dt.timezone.utc)
    )
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class Certificate:
    model: str
    tolerances: dict
    checks: list[CheckResult] = field(default_factory=list)
    timestamp: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def summary(self) -> dict:
        return {
            "pass": self.passed,
            "checks": len(self.checks),
            "failed": [c.name for c in self.checks if c.status == FAIL],
            "unreliable": [c.name for c in self.checks if c.status == UNRELIABLE],
        }

    def to_dict(self) -> dict:
        out = {
            "model": self.model,
            "timestamp": self.timestamp or default_timestamp(),
            "tolerances": self.tolerances,
            "checks": [c.to_dict() for c in self.checks],
            "summary": self.summary(),
        }
        out.update(self.extra)
        return out


def certify_point(
    model: ControlledHamiltonian,
    u: ArrayLike,
    control: int,
    tol: Tolerances = DEFAULT_TOLERANCES,
    records: Sequence[IntersectionRecord] | None = None,
    levels: int | None = None,
    germs_radius: float | None = None,
    timestamp: str = "",
) -> Certificate:
    """Spectral hypotheses at ``u`` for steering with the single control ``control``.

    Runs simple spectrum, non-resonance and nearest-neighbour coupling
    (through ``H_control``) at ``u``; with ``records`` also connectedness and,
    when ``germs_radius`` is given, the germs proxy at each record. ``levels``
    restricts all spectral checks to the lowest levels (truncated models).
    """
    point = spectrum_at(model, u)
    cert = Certificate(model.name, tol.as_dict(), timestamp=timestamp)
    simple = check_simple_spectrum(point, tol, levels)
    cert.checks.append(simple)
    cert.checks.append(check_nonresonance(point, tol, levels))
    if simple.passed:
        cert.checks.append(check_couplings(point, model.couplings[control], tol, levels))
    else:
        cert.checks.append(
            CheckResult("couplings", [_loc(point.u)], FAIL, {"reason": "degenerate spectrum"}, {})
        )
    if records is not None:
        n = model.dim if levels is None else int(levels)
        cert.checks.append(check_connectedness(records, n))
        if germs_radius is not None:
            for r in records:
                lv = intersecting_levels(model, r.location, tol) or [r.level]
                cert.checks.append(
                    germs_independence_proxy(model, r.location, lv, germs_radius, tol=tol, axes=r.axes)
                )
    return cert
