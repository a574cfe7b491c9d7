import math

import numpy as np
import pytest

from conictrl.config import DEFAULT_TOLERANCES
from conictrl.herm import HermitianOperator
from conictrl.models import JCParams, build_counterexample, build_enantio, build_jc, enantio_intersections, jc_intersection_g
from conictrl.scan import (
    CONICAL,
    NOT_ISOLATED,
    UNRESOLVED,
    WEAKLY_CONICAL,
    IntersectionRecord,
    NoIntersectionFound,
    classify_intersection,
    conical_directions,
    find_intersections,
    gap_at,
    is_isolated,
    lipschitz_excess,
    locate_intersection,
    make_grid,
    multiplicity_at,
    scan_gap_surface,
    scan_spectrum,
    spectrum_at,
)
from conictrl.system import ControlledHamiltonian, OutsideRegion, zero_model

E = (-1.5, 0.5, 1.0)
JC60 = JCParams(0.4, math.sqrt(2), 60)


def _curve_model():
    """Two levels that stay degenerate along the whole line u1 = 0."""
    h0 = np.diag([0.0, 0.0, 3.0])
    h1 = np.zeros((3, 3))
    h1[0, 2] = h1[2, 0] = 1.0
    h2 = np.diag([1.0, 1.0, 0.0])
    return ControlledHamiltonian(h0, (h1, h2), ((-5.0, 5.0), (-5.0, 5.0)))


def _enantio_grid(model, counts=(41, 41)):
    return make_grid(model, [(-6, 6), (-6, 6)], counts, axes=(0, 2), base=(0.0, 3.0, 0.0))


def test_spectrum_at_examples():
    assert np.allclose(spectrum_at(build_counterexample(), (0, 0)).eigenvalues, [1, 2, 3, 6])
    assert np.allclose(spectrum_at(build_enantio(), (0, 0, 0)).eigenvalues, E)
    p = JCParams(0.4, math.sqrt(2), 40)
    lam = spectrum_at(build_jc(p), (0, 0)).eigenvalues[:10]
    drift = np.sort([p.omega * (n + 0.5) + s * p.Omega / 2 for n in range(41) for s in (1, -1)])[:10]
    assert np.allclose(lam, drift, atol=1e-10)


def test_spectrum_at_outside_region():
    with pytest.raises(OutsideRegion):
        spectrum_at(build_counterexample(), (10.0, 0.0))


def test_make_grid_rejects_bounds_outside_box():
    with pytest.raises(OutsideRegion):
        make_grid(build_counterexample(), [(-10, 1), (0, 1)], (5, 5))
    with pytest.raises(ValueError):
        make_grid(build_counterexample(), [(1, 0), (0, 1)], (5, 5))


def test_zero_coupling_surface_constant():
    m = zero_model(3, diag=[0.0, 1.0, 4.0])
    grid = make_grid(m, [(-1, 1), (-1, 1)], (7, 9))
    assert np.all(scan_gap_surface(m, grid, 1) == 1.0)
    assert np.all(scan_gap_surface(m, grid, 2) == 3.0)
    with pytest.raises(ValueError):
        scan_gap_surface(m, grid, 3)


def test_gap_surface_nonnegative_and_weyl_bound():
    for model, grid in (
        (build_counterexample(), make_grid(build_counterexample(), [(-3, 3), (-3, 3)], (31, 31))),
        (build_enantio(), _enantio_grid(build_enantio())),
    ):
        grid = scan_spectrum(model, grid)
        for j in range(1, model.dim):
            assert np.all(scan_gap_surface(model, grid, j) >= 0)
        assert lipschitz_excess(model, grid) <= 1e-9


def test_enantio_gap_surface_minima_near_loci():
    m = build_enantio()
    grid = scan_spectrum(m, _enantio_grid(m, (121, 121)))
    pts = grid.points()[:, [0, 2]]
    for j in (1, 2):
        gaps = scan_gap_surface(m, grid, j).ravel()
        for loc in enantio_intersections(3.0, E):
            if loc.level != j:
                continue
            near = np.linalg.norm(pts - np.array(loc.point), axis=1) < 0.15
            assert gaps[near].min() < 0.1
            assert gaps[near].min() <= np.percentile(gaps, 1)


def test_locate_enantio_from_seed():
    m = build_enantio()
    rec = locate_intersection(m, 2, (3.3, 3.0, -2.2), axes=(0, 2))
    assert np.linalg.norm(np.array(rec.location)[[0, 2]] - [3.35410, -2.23607]) < 1e-5
    exact = [p.point for p in enantio_intersections(3.0, E) if p.level == 2 and p.point[0] > 0][0]
    assert np.linalg.norm(np.array(rec.location)[[0, 2]] - exact) < 1e-6
    assert rec.location[1] == 3.0
    assert rec.gap_at_location < DEFAULT_TOLERANCES.intersect * rec.scale


def test_locate_raises_when_gap_positive():
    m = zero_model(2, diag=[0.0, 1.0])
    with pytest.raises(NoIntersectionFound):
        locate_intersection(m, 1, (0.5, 0.5))


def test_locate_jc_crossing():
    m = build_jc(JC60)
    g_star = jc_intersection_g(10, "+", 15, "-", JC60)[0]
    level = int(np.searchsorted(np.linalg.eigvalsh(m.matrix((g_star, 0.0))), 5.3307745 - 1e-6)) + 1
    rec = locate_intersection(m, level, (0.25, 0.0))
    assert abs(rec.location[0] - g_star) < 1e-5
    assert abs(rec.location[1]) < 1e-5


def test_multiplicity_cases():
    m = build_enantio()
    assert multiplicity_at(m, (0.7, 0.3, 0.2), 1) == 1
    u, w = [p.point for p in enantio_intersections(3.0, E) if p.level == 1][0]
    assert multiplicity_at(m, (u, 3.0, w), 1) == 2
    assert multiplicity_at(zero_model(3), (0.3, 0.1), 1) == 3


def test_isolation_cases():
    m = build_enantio()
    u, w = [p.point for p in enantio_intersections(3.0, E) if p.level == 2][0]
    assert is_isolated(m, (u, 3.0, w), 2, 0.3, axes=(0, 2))
    assert not is_isolated(_curve_model(), (0.0, 0.0), 1, 0.3)
    jc = build_jc(JC60)
    rec = locate_intersection(jc, 27, (0.25, 0.0))
    assert is_isolated(jc, rec.location, 27, 0.2)
    with pytest.raises(OutsideRegion, match="smaller radius"):
        is_isolated(m, (u, 3.0, w), 2, 20.0, axes=(0, 2))


def test_classify_enantio_conical():
    m = build_enantio()
    rec = classify_intersection(m, locate_intersection(m, 1, (2.8, 3.0, 4.2), axes=(0, 2)))
    assert rec.classification == CONICAL
    assert rec.multiplicity == 2
    dirs = conical_directions(m, rec)
    assert len(dirs) == DEFAULT_TOLERANCES.k_dir == rec.probed_directions
    assert min(min(d.c_minus, d.c_plus) for d in dirs) > DEFAULT_TOLERANCES.slope_floor * rec.scale
    for d in dirs:
        assert np.linalg.norm(d.direction) == pytest.approx(1.0)


def test_classify_is_deterministic():
    m = build_enantio()
    rec = locate_intersection(m, 1, (2.8, 3.0, 4.2), axes=(0, 2))
    a, b = classify_intersection(m, rec), classify_intersection(m, rec)
    assert a.to_dict() == b.to_dict()


def test_classify_jc_weakly_conical():
    jc = build_jc(JC60)
    rec = classify_intersection(jc, locate_intersection(jc, 27, (0.25, 0.0)))
    assert rec.classification == WEAKLY_CONICAL
    dirs = np.array([d.direction for d in conical_directions(jc, rec)])
    assert len(dirs) >= 1
    angles = np.degrees(np.arccos(np.clip(np.abs(dirs[:, 0]), 0, 1)))
    assert np.min(angles) < 5
    # the drive enters only at second order, so the pure drive direction is not conical
    assert not any(np.allclose(np.abs(d), [0.0, 1.0]) for d in dirs)
    assert len(dirs) < rec.probed_directions


def test_classify_curve_not_isolated():
    m = _curve_model()
    rec = locate_intersection(m, 1, (0.1, 0.2))
    assert classify_intersection(m, rec).classification == NOT_ISOLATED


def test_classify_higher_multiplicity():
    m = zero_model(3)
    rec = IntersectionRecord((0.0, 0.0), 1, 0.0, 1.0, (0, 1))
    assert classify_intersection(m, rec).classification == "HIGHER_MULTIPLICITY"
    assert conical_directions(m, classify_intersection(m, rec)) == []


def test_unresolved_record_has_no_directions():
    rec = IntersectionRecord((0.0, 0.0), 1, 0.0, 1.0, (0, 1), 2, UNRESOLVED)
    assert conical_directions(zero_model(2), rec) == []


def test_classify_rejects_record_with_large_gap():
    m = zero_model(2, diag=[0.0, 1.0])
    with pytest.raises(ValueError):
        classify_intersection(m, IntersectionRecord((0.0, 0.0), 1, 1.0, 1.0, (0, 1)))


def test_find_intersections_enantio_matches_closed_form():
    m = build_enantio()
    grid = scan_spectrum(m, _enantio_grid(m, (61, 61)))
    found = []
    for j in (1, 2):
        found += find_intersections(m, grid, j)
    assert len(found) == 4
    exact = {(p.level, p.point) for p in enantio_intersections(3.0, E)}
    for rec in found:
        assert rec.classification == CONICAL
        d = min(np.linalg.norm(np.array(rec.location)[[0, 2]] - np.array(pt)) for lv, pt in exact if lv == rec.level)
        assert d < 1e-6


def test_gap_at_matches_spectrum():
    m = build_enantio()
    lam = spectrum_at(m, (0.1, 0.2, 0.3)).eigenvalues
    assert gap_at(m, (0.1, 0.2, 0.3), 2) == pytest.approx(lam[2] - lam[1])


def test_hermitian_operator_reused_in_models():
    m = zero_model(2)
    assert isinstance(m.H0, HermitianOperator)
