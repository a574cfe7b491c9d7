import math

import numpy as np
import pytest

from conictrl.models import (
    EnantioParams,
    JCParams,
    build_counterexample,
    build_enantio,
    build_jc,
    enantio_couplings,
    enantio_intersections,
    enantio_rotation,
    jc_all_crossings,
    jc_analytic_spectrum,
    jc_branch,
    jc_displacement_check,
    jc_intersection_g,
    jc_lowest_levels,
    jc_nondegeneracy_probe,
    jc_quadratic_roots,
)
from conictrl.scan import spectrum_at

E = (-1.5, 0.5, 1.0)
JC = JCParams(0.4, math.sqrt(2.0), 40)


# ---------------------------------------------------------------- counterexample


def test_counterexample_drift_spectrum():
    assert np.allclose(spectrum_at(build_counterexample(), (0, 0)).eigenvalues, [1, 2, 3, 6])


def test_counterexample_matrix_at_one_one():
    expected = np.array(
        [[1.0, 1.0, 1.0, 0.0], [1.0, 2.0, 0.0, 2.0], [1.0, 0.0, 3.0, 1.0], [0.0, 2.0, 1.0, 6.0]]
    )
    assert np.array_equal(build_counterexample().matrix((1, 1)).real, expected)


# ---------------------------------------------------------------- enantio


def test_enantio_drift_and_sign_difference():
    plus, minus = build_enantio(EnantioParams(E, "+")), build_enantio(EnantioParams(E, "-"))
    assert np.allclose(plus.matrix((0, 0, 0)), np.diag(E))
    z = (0.4, -1.2, 2.0)
    hu = enantio_couplings()[0]
    assert np.allclose(plus.matrix(z) - minus.matrix(z), 2 * 0.4 * hu)


def test_enantio_generators_traceless():
    m = build_enantio()
    for h in (m.H0, *m.couplings):
        assert abs(np.trace(h.skew())) < 1e-15


def test_enantio_couplings_single_pair():
    hu, hv, hw = enantio_couplings()
    for h, (i, j) in ((hu, (0, 1)), (hv, (0, 2)), (hw, (1, 2))):
        mask = np.zeros((3, 3))
        mask[i, j] = mask[j, i] = 1.0
        assert np.array_equal(h, mask)


def test_enantio_params_validation():
    with pytest.raises(ValueError):
        EnantioParams((-1.0, 0.5, 1.0))
    with pytest.raises(ValueError):
        EnantioParams((0.5, -1.5, 1.0))


def test_enantio_mirror_spectrum(rng):
    plus, minus = build_enantio(EnantioParams(E, "+")), build_enantio(EnantioParams(E, "-"))
    for _ in range(20):
        u, v, w = rng.uniform(-3, 3, 3)
        a = np.linalg.eigvalsh(minus.matrix((u, v, w)))
        b = np.linalg.eigvalsh(plus.matrix((-u, v, w)))
        assert np.allclose(a, b, atol=1e-10)


def test_rotation_trivial_case():
    rot = enantio_rotation(0.0, E)
    assert rot.theta == 0.0
    assert (rot.E1t, rot.E3t) == pytest.approx((E[0], E[2]))
    assert np.allclose(rot.P, np.eye(3))


def test_rotation_figure_parameters():
    rot = enantio_rotation(3.0, E)
    assert rot.theta == pytest.approx(math.atan(2.4), abs=1e-12)
    assert rot.theta == pytest.approx(1.17601, abs=1e-5)
    block = np.linalg.eigvalsh(np.array([[E[0], 3.0], [3.0, E[2]]]))
    assert (rot.E1t, rot.E3t) == pytest.approx(tuple(block), abs=1e-12)
    assert (rot.E1t, rot.E3t) == pytest.approx((-3.5, 3.0), abs=1e-12)
    h = np.diag(E) + 3.0 * enantio_couplings()[1]
    rotated = rot.P @ h @ rot.P.T
    assert abs(rotated[0, 2]) < 1e-10


def test_rotation_odd_symmetry():
    a, b = enantio_rotation(1.3, E), enantio_rotation(-1.3, E)
    assert b.theta == pytest.approx(-a.theta)
    assert (b.E1t, b.E3t) == pytest.approx((a.E1t, a.E3t))


def test_intersection_loci_figure_parameters():
    loci = enantio_intersections(3.0, E)
    level2 = sorted(p.point for p in loci if p.level == 2)
    level1 = sorted(p.point for p in loci if p.level == 1)
    assert np.allclose(level2, [(-3.35410, 2.23607), (3.35410, -2.23607)], atol=1e-5)
    assert np.allclose(level1, [(-2.82843, -4.24264), (2.82843, 4.24264)], atol=1e-5)


def test_intersection_loci_have_vanishing_gap():
    m = build_enantio()
    for v in (0.0, 1.0, 3.0, -2.0):
        for loc in enantio_intersections(v, E):
            u, w = loc.point
            lam = spectrum_at(m, (u, v, w)).eigenvalues
            assert lam[loc.level] - lam[loc.level - 1] < 1e-8
            # the third level stays away
            other = lam[2] - lam[1] if loc.level == 1 else lam[1] - lam[0]
            assert other > 0.1


def test_intersection_loci_on_axes_without_static_field():
    loci = enantio_intersections(0.0, E)
    r12 = math.sqrt((E[2] - E[0]) * (E[2] - E[1]))
    r23 = math.sqrt((E[2] - E[0]) * (E[1] - E[0]))
    pts = {p.level: sorted(q.point for q in loci if q.level == p.level) for p in loci}
    assert np.allclose(pts[2], [(-r12, 0.0), (r12, 0.0)], atol=1e-12)
    assert np.allclose(pts[1], [(0.0, -r23), (0.0, r23)], atol=1e-12)


# ---------------------------------------------------------------- Jaynes-Cummings


def test_jc_params_validation():
    with pytest.raises(ValueError):
        JCParams(0.4, math.sqrt(2), 1)
    with pytest.raises(ValueError):
        JCParams(-0.4, math.sqrt(2), 10)
    assert JCParams(0.4, 1.0, 5).dim == 12


def test_jc_drift_spectrum_by_tensorization():
    m = build_jc(JC)
    lam = np.sort(np.linalg.eigvalsh(m.H0.entries))
    expected = np.sort([JC.omega * (n + 0.5) + s * JC.Omega / 2 for n in range(41) for s in (1, -1)])
    assert np.allclose(lam, expected, atol=1e-12)


def test_jc_blocks_hermitian_and_ground_pair():
    m = build_jc(JC)
    for h in (m.H0, *m.couplings):
        assert np.linalg.norm(h.entries - h.entries.conj().T) < 1e-12
    ground = np.zeros(m.dim)
    ground[1] = 1.0  # |0> e_-1
    assert np.allclose(m.couplings[0].entries @ ground, 0)


def test_jc_spectrum_at_origin_matches_drift_levels():
    m = build_jc(JC)
    lam = spectrum_at(m, (0.0, 0.0)).eigenvalues[:20]
    expected = np.sort([JC.omega * (n + 0.5) + s * JC.Omega / 2 for n in range(41) for s in (1, -1)])[:20]
    assert np.allclose(lam, expected, atol=1e-10)


def test_analytic_spectrum_zero_coupling():
    levels = jc_analytic_spectrum(0.0, JC, 5)
    d = {(x.n, x.nu): x.value for x in levels}
    for n in range(5):
        assert d[(n, 1)] == pytest.approx(JC.omega * (n + 0.5) + JC.Omega / 2)
        assert d[(n, -1)] == pytest.approx(JC.omega * (n + 1.5) - JC.Omega / 2)
    assert d[(-1, -1)] == pytest.approx(-JC.Delta / 2)


def test_analytic_spectrum_branch_values():
    g = 0.23534
    a, b = jc_branch(10, "+", g, JC), jc_branch(15, "-", g, JC)
    # direct evaluation of both branch formulas
    lhs = 0.4 * 11 + 0.5 * math.sqrt(JC.Delta**2 + 44 * g * g)
    rhs = 0.4 * 16 - 0.5 * math.sqrt(JC.Delta**2 + 64 * g * g)
    assert a == pytest.approx(lhs, abs=1e-14)
    assert b == pytest.approx(rhs, abs=1e-14)
    # both near the quoted crossing energy (quoted to four decimals, true value 5.33077)
    assert a == pytest.approx(5.3309, abs=2e-4)
    assert b == pytest.approx(5.3309, abs=2e-4)
    assert abs(a - b) < 1e-4


def test_analytic_vs_truncated():
    p = JCParams(0.4, math.sqrt(2), 60)
    m = build_jc(p)
    for g in (0.0, 0.7, 2.5):
        num = np.linalg.eigvalsh(m.matrix((g, 0.0)))[:20]
        assert np.allclose(num, jc_lowest_levels(g, p, 20), atol=1e-6)


def test_intersection_quadratic_pair():
    roots = jc_quadratic_roots(10, 15, JC)
    assert roots == pytest.approx([0.34615, 53.654], abs=1e-3)
    g = jc_intersection_g(10, "+", 15, "-", JC)
    assert len(g) == 1
    assert g[0] == pytest.approx(0.4 * math.sqrt(roots[0]), rel=1e-12)
    assert 0.2352 <= g[0] <= 0.2355
    assert abs(jc_branch(10, "+", g[0], JC) - jc_branch(15, "-", g[0], JC)) < 1e-9


def test_intersection_same_sign_empty_and_same_branch_error():
    assert jc_intersection_g(3, "+", 7, "+", JC) == []
    with pytest.raises(ValueError):
        jc_intersection_g(4, "+", 4, "+", JC)


def test_all_crossings_validated():
    for g, (n, nu), (m, mu) in jc_all_crossings(JC, 6):
        assert g > 0
        assert abs(jc_branch(n, nu, g, JC) - jc_branch(m, mu, g, JC)) < 1e-9


def test_displacement_trivial_and_converged():
    assert jc_displacement_check(0.5, 0.0, JC) < 1e-10
    assert jc_displacement_check(0.5, 0.2, JCParams(0.4, math.sqrt(2), 80)) < 1e-6


def test_displacement_rejects_small_truncation():
    with pytest.raises(ValueError):
        jc_displacement_check(0.5, 3.0, JCParams(0.4, math.sqrt(2), 4))


def test_nondegeneracy_probe_cases():
    p80 = JCParams(0.4, math.sqrt(2), 80)
    assert jc_nondegeneracy_probe(0.5, 0.1, p80, 20) > 1e-4
    g = jc_intersection_g(10, "+", 15, "-", JC)[0]
    assert jc_nondegeneracy_probe(g, 0.0, p80, 40) < 1e-6
    rational = JCParams(0.4, 0.8, 40)
    assert jc_nondegeneracy_probe(0.0, 0.0, rational, 10) < 1e-12
    with pytest.raises(ValueError):
        jc_nondegeneracy_probe(0.5, 0.1, p80, 60)
