import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conictrl.config import DEFAULT_TOLERANCES
from conictrl.herm import DimensionMismatch, hs_inner, random_hermitian, random_unitary
from conictrl.lie import (
    controllability_verdict,
    from_coords,
    invariant_subspace_probe,
    lie_closure,
    simultaneous_verdict,
    to_coords,
)
from conictrl.models import EnantioParams, build_counterexample, build_enantio, enantio_couplings, enantio_hamiltonian
from conictrl.system import OutsideRegion

from conftest import brute_lie_dim

E = (-1.5, 0.5, 1.0)


def _random_gens(r, n, k, traceless=False):
    gens = []
    for _ in range(k):
        h = random_hermitian(n, r)
        if traceless:
            h = h - np.trace(h) / n * np.eye(n)
        gens.append(1j * h)
    return gens


def test_coordinates_are_isometric(rng):
    a, b = (1j * random_hermitian(4, rng) for _ in range(2))
    assert np.dot(to_coords(a), to_coords(b)) == pytest.approx(hs_inner(a, b), abs=1e-12)
    assert np.allclose(from_coords(to_coords(a), 4), a, atol=1e-14)


def test_abelian_singleton():
    res = lie_closure([1j * np.diag([1.0, -1.0])])
    assert res.dim == 1


def test_counterexample_full_closure():
    m = build_counterexample()
    res = lie_closure([m.H0.skew(), m.couplings[0].skew(), m.couplings[1].skew()])
    assert res.dim == 16
    assert res.verdict == "FULL_U"


def test_two_by_two_matches_brute_force():
    gens = [1j * np.diag([1.0, 2.0]), 1j * np.array([[0.0, 1.0], [1.0, 0.0]])]
    res = lie_closure(gens)
    assert res.dim == brute_lie_dim(gens) == 4
    assert res.verdict == "FULL_U"


def test_basis_orthonormal_and_contains_generators(rng):
    gens = _random_gens(rng, 3, 2)
    res = lie_closure(gens)
    basis = res.basis
    gram = np.array([[hs_inner(a, b) for b in basis] for a in basis])
    assert np.allclose(gram, np.eye(res.dim), atol=1e-9)
    for g in gens:
        assert res.contains(g)
    assert res.dim <= 9


def test_traceless_cap_and_verdict(rng):
    res = lie_closure(_random_gens(rng, 3, 2, traceless=True))
    assert res.generators_traceless
    assert res.dim == 8
    assert res.verdict == "FULL_SU"


def test_rejects_non_skew_and_mismatch():
    with pytest.raises(ValueError):
        lie_closure([np.eye(2)])
    with pytest.raises((DimensionMismatch, ValueError)):
        lie_closure([1j * np.eye(2), 1j * np.eye(3)])
    with pytest.raises(ValueError):
        lie_closure([])


def test_spectral_and_bfs_agree_on_random_and_structured(rng):
    m = build_counterexample()
    cases = [
        [m.H0.skew(), m.couplings[0].skew(), m.couplings[1].skew()],
        [m.H0.skew(), m.couplings[0].skew()],
        [(m.H0.entries + 0.3 * m.couplings[1].entries) * 1j, m.couplings[0].skew()],
    ]
    cases += [_random_gens(rng, 4, 2) for _ in range(3)]
    for gens in cases:
        assert lie_closure(gens, method="spectral").dim == lie_closure(gens, method="bfs").dim == brute_lie_dim(gens)


def test_block_diagonal_generators_deficient_and_match_oracle():
    a = np.zeros((4, 4))
    a[0, 2] = a[2, 0] = 1.0
    b = np.diag([1.0, 2.0, 3.0, 6.0])
    gens = [1j * a, 1j * b]
    res = lie_closure(gens)
    assert res.dim == brute_lie_dim(gens)
    assert res.verdict.startswith("DEFICIENT")


def test_controllability_verdict_full_counterexample():
    assert controllability_verdict(build_counterexample()).verdict == "FULL_U"


def test_enantio_frozen_verdict_full_su():
    res = controllability_verdict(build_enantio(), frozen=[(0, 0.7), (1, 0.3)])
    assert res.verdict == "FULL_SU"
    assert res.dim == 8
    gens = [1j * enantio_hamiltonian((0.7, 0.3, 0.0), E), 1j * enantio_couplings()[2]]
    assert brute_lie_dim(gens) == 8


def test_counterexample_both_freezings():
    m = build_counterexample()
    # freezing u2 at zero leaves a drift and coupling that preserve span{e1,e3} and span{e2,e4}
    r_u2 = controllability_verdict(m, frozen=(1, 0.0))
    assert r_u2.verdict.startswith("DEFICIENT")
    assert r_u2.dim <= 8
    gens = [m.H0.skew(), m.couplings[0].skew()]
    assert r_u2.dim == brute_lie_dim(gens)
    # freezing u1 also gives a deficient algebra, for any frozen value tried
    for val in (-2.0, 0.0, 0.5, 3.0):
        r_u1 = controllability_verdict(m, frozen=(0, val))
        gens = [1j * (m.H0.entries + val * m.couplings[0].entries), m.couplings[1].skew()]
        assert r_u1.dim == brute_lie_dim(gens)
        assert not r_u1.full


def test_frozen_value_outside_region():
    with pytest.raises(OutsideRegion):
        controllability_verdict(build_counterexample(), frozen=(0, 11.0))


def test_verdict_near_threshold_is_flagged():
    # a coupling of relative size ~1e-9 produces residuals inside the ambiguous band
    h0 = np.diag([0.0, 1.0, 3.0])
    w = np.zeros((3, 3))
    w[0, 1] = w[1, 0] = 1.0
    w[1, 2] = w[2, 1] = 1e-9
    res = lie_closure([1j * h0, 1j * w])
    assert res.unreliable


def test_simultaneous_identical_pairs_not_full():
    hp = enantio_hamiltonian((0.7, 0.3, 0.0), E)
    hw = enantio_couplings()[2]
    res = simultaneous_verdict((hp, hw), (hp, hw))
    assert not res.full
    assert res.dim <= 8


def test_simultaneous_enantio_pair_full():
    hp = enantio_hamiltonian((0.7, 0.3, 0.0), E, "+")
    hm = enantio_hamiltonian((0.7, 0.3, 0.0), E, "-")
    hw = enantio_couplings()[2]
    res = simultaneous_verdict((hp, hw), (hm, hw))
    assert res.full and res.dim == 16
    z = np.zeros((3, 3))
    gens = [1j * np.block([[hp, z], [z, hm]]), 1j * np.block([[hw, z], [z, hw]])]
    assert brute_lie_dim(gens) == 16


def test_simultaneous_conjugate_pair_not_full(rng):
    hp = enantio_hamiltonian((0.7, 0.3, 0.0), E)
    hw = enantio_couplings()[2]
    # unitary built from functions of hw commutes with hw
    w, v = np.linalg.eigh(hw)
    u = v @ np.diag(np.exp(1j * rng.uniform(0, 2 * np.pi, 3))) @ v.conj().T
    assert np.allclose(u @ hw @ u.conj().T, hw)
    res = simultaneous_verdict((hp, hw), (u @ hp @ u.conj().T, hw))
    assert not res.full and res.dim < 16


def test_simultaneous_rejects_trace():
    with pytest.raises(ValueError):
        simultaneous_verdict((np.eye(2), np.diag([1.0, -1.0])), (np.diag([1.0, -1.0]),) * 2)


def test_invariant_subspace_probe_block_structure():
    m = build_counterexample()
    projs = invariant_subspace_probe([m.H0.skew(), m.couplings[0].skew()])
    assert len(projs) == 2
    e13 = np.diag([1.0, 0.0, 1.0, 0.0])
    e24 = np.diag([0.0, 1.0, 0.0, 1.0])
    got = sorted(projs, key=lambda p: -p[0, 0].real)
    assert np.allclose(got[0], e13, atol=1e-9)
    assert np.allclose(got[1], e24, atol=1e-9)
    for p in projs:
        assert round(np.trace(p).real) == 2


def test_invariant_subspace_probe_irreducible():
    m = build_counterexample()
    assert invariant_subspace_probe([m.H0.skew(), m.couplings[0].skew(), m.couplings[1].skew()]) == []


def test_invariant_subspace_probe_diagonal():
    projs = invariant_subspace_probe([1j * np.diag([1.0, 2.0])])
    assert len(projs) == 2
    assert any(np.allclose(p, np.diag([1.0, 0.0])) for p in projs)
    assert any(np.allclose(p, np.diag([0.0, 1.0])) for p in projs)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4), k=st.integers(1, 3))
def test_idempotence(seed, n, k):
    gens = _random_gens(np.random.default_rng(seed), n, k)
    res = lie_closure(gens)
    assert lie_closure(res.basis).dim == res.dim


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4), sparse=st.booleans())
def test_unitary_conjugation_invariance(seed, n, sparse):
    r = np.random.default_rng(seed)
    if sparse:
        # structured deficient generators: drift diagonal plus one off-diagonal pair
        h0 = np.diag(r.uniform(-2, 2, n))
        w = np.zeros((n, n))
        w[0, n - 1] = w[n - 1, 0] = 1.0
        gens = [1j * h0, 1j * w]
    else:
        gens = _random_gens(r, n, 2)
    u = random_unitary(n, r)
    conj = [u.conj().T @ g @ u for g in gens]
    assert lie_closure(conj).dim == lie_closure(gens).dim


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_monotonicity(seed):
    r = np.random.default_rng(seed)
    h0 = np.diag(r.uniform(-2, 2, 4))
    w = np.zeros((4, 4))
    w[0, 1] = w[1, 0] = 1.0
    base = lie_closure([1j * h0, 1j * w]).dim
    more = lie_closure([1j * h0, 1j * w, 1j * random_hermitian(4, r)]).dim
    assert more >= base


def test_verdict_labels_by_dimension():
    r = lie_closure([1j * np.diag([1.0, -1.0])])
    assert r.verdict == "DEFICIENT(1)"
    assert DEFAULT_TOLERANCES.rank == 1e-8


def test_enantio_sign_minus_also_full():
    res = controllability_verdict(build_enantio(EnantioParams(E, "-")), frozen=[(0, 0.7), (1, 0.3)])
    assert res.verdict == "FULL_SU"
