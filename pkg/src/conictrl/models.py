"""The worked systems and their closed-form oracles.

* the 4x4 two-input counterexample,
* the three-level enantio-selective model ``H^+/-(u, v, w)``,
* the driven Jaynes-Cummings Hamiltonian, truncated at Fock level ``N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.typing import NDArray

from .herm import HermitianOperator, evolve
from .system import ControlledHamiltonian

DEFAULT_BOX = (-10.0, 10.0)


# ---------------------------------------------------------------- counterexample


def build_counterexample() -> ControlledHamiltonian:
    h0 = np.diag([1.0, 2.0, 3.0, 6.0])
    h1 = np.zeros((4, 4))
    h1[0, 2] = h1[2, 0] = 1.0
    h1[1, 3] = h1[3, 1] = 2.0
    h2 = np.zeros((4, 4))
    h2[0, 1] = h2[1, 0] = 1.0
    h2[2, 3] = h2[3, 2] = 1.0
    return ControlledHamiltonian(
        HermitianOperator(h0),
        (HermitianOperator(h1), HermitianOperator(h2)),
        (DEFAULT_BOX, DEFAULT_BOX),
        ("u1", "u2"),
        name="counterexample",
        params={"model": "counterexample"},
    )


# ---------------------------------------------------------------- enantio


def _parse_sign(sign) -> str:
    if sign in ("+", 1, "plus", "+1"):
        return "+"
    if sign in ("-", -1, "minus", "-1"):
        return "-"
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


@dataclass(frozen=True)
class EnantioParams:
    """Level energies ``E1 < E2 < E3`` summing to zero, and the enantiomer sign."""

    E: tuple[float, float, float] = (-1.5, 0.5, 1.0)
    sign: str = "+"

    def __post_init__(self):
        e = tuple(float(x) for x in self.E)
        if len(e) != 3:
            raise ValueError("three level energies required")
        if not e[0] < e[1] < e[2]:
            raise ValueError(f"energies must satisfy E1 < E2 < E3, got {e}")
        if abs(sum(e)) > 1e-12 * max(1.0, max(abs(x) for x in e)):
            raise ValueError(f"energies must sum to zero, got sum {sum(e)}")
        object.__setattr__(self, "E", e)
        object.__setattr__(self, "sign", _parse_sign(self.sign))


def enantio_couplings() -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """``(H_u, H_v, H_w)``: unit couplings of the pairs (1,2), (1,3), (2,3)."""
    mats = []
    for i, j in ((0, 1), (0, 2), (1, 2)):
        m = np.zeros((3, 3))
        m[i, j] = m[j, i] = 1.0
        mats.append(m)
    return tuple(mats)


def build_enantio(p: EnantioParams = EnantioParams(), box=DEFAULT_BOX) -> ControlledHamiltonian:
    """Three-control model; the ``-`` enantiomer flips the sign of ``H_u``."""
    hu, hv, hw = enantio_couplings()
    s = 1.0 if p.sign == "+" else -1.0
    return ControlledHamiltonian(
        HermitianOperator(np.diag(p.E)),
        (HermitianOperator(s * hu), HermitianOperator(hv), HermitianOperator(hw)),
        (box, box, box),
        ("u", "v", "w"),
        name=f"enantio{p.sign}",
        params={"model": "enantio", "E1": p.E[0], "E2": p.E[1], "E3": p.E[2], "sign": p.sign},
    )


def enantio_hamiltonian(z: Iterable[float], E=(-1.5, 0.5, 1.0), sign="+") -> NDArray[np.float64]:
    u, v, w = (float(x) for x in z)
    hu, hv, hw = enantio_couplings()
    s = 1.0 if _parse_sign(sign) == "+" else -1.0
    return np.diag(np.asarray(E, dtype=float)) + s * u * hu + v * hv + w * hw


@dataclass(frozen=True)
class EnantioRotation:
    theta: float
    E1t: float
    E3t: float
    P: NDArray[np.float64]


def enantio_rotation(v: float, E=(-1.5, 0.5, 1.0)) -> EnantioRotation:
    """Rotation in the (1,3) plane that diagonalizes the static ``v`` coupling.

    The rotated outer energies are the eigenvalues of ``[[E1, v], [v, E3]]``.
    """
    e1, e2, e3 = (float(x) for x in E)
    theta = math.atan(2.0 * v / (e3 - e1))
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    mean, half = 0.5 * (e1 + e3), 0.5 * math.hypot(e3 - e1, 2.0 * v)
    P = np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])
    rotated = P @ enantio_hamiltonian((0.0, v, 0.0), E) @ P.T
    if abs(rotated[0, 2]) > 1e-10 * max(1.0, abs(v)):
        raise ArithmeticError("rotation failed to diagonalize the (1,3) block")
    return EnantioRotation(theta, mean - half, mean + half, P)


@dataclass(frozen=True)
class PredictedLocus:
    level: int  # intersection between lambda_level and lambda_level+1
    point: tuple[float, float]  # (u, w)


def enantio_intersections(v: float, E=(-1.5, 0.5, 1.0), sign="+") -> list[PredictedLocus]:
    """Closed-form intersection points of ``H(u, v, w)`` in the ``(u, w)`` plane.

    The pair at radius ``sqrt((E3t - E1t)(E3t - E2))`` along ``(cos, -sin)`` of
    half the rotation angle is where the two upper levels meet; the pair at
    radius ``sqrt((E3t - E1t)(E2 - E1t))`` along ``(sin, cos)`` is where the two
    lower levels meet. For the ``-`` enantiomer the ``u`` coordinate flips.
    """
    rot = enantio_rotation(v, E)
    e2 = float(E[1])
    ra2 = (rot.E3t - rot.E1t) * (rot.E3t - e2)
    rb2 = (rot.E3t - rot.E1t) * (e2 - rot.E1t)
    if ra2 <= 0 or rb2 <= 0:
        raise ArithmeticError("non-positive radicand; energies are not ordered")
    c, s = math.cos(rot.theta / 2), math.sin(rot.theta / 2)
    ra, rb = math.sqrt(ra2), math.sqrt(rb2)
    flip = 1.0 if _parse_sign(sign) == "+" else -1.0
    loci = [
        PredictedLocus(1, (flip * rb * s, rb * c)),
        PredictedLocus(1, (-flip * rb * s, -rb * c)),
        PredictedLocus(2, (flip * ra * c, -ra * s)),
        PredictedLocus(2, (-flip * ra * c, ra * s)),
    ]
    return loci


# ---------------------------------------------------------------- Jaynes-Cummings


@dataclass(frozen=True)
class JCParams:
    """Oscillator frequency ``omega``, two-level splitting ``Omega``, Fock cutoff."""

    omega: float = 0.4
    Omega: float = math.sqrt(2.0)
    N_trunc: int = 40

    def __post_init__(self):
        if not (self.omega > 0 and self.Omega > 0):
            raise ValueError("omega and Omega must be positive")
        if int(self.N_trunc) < 2:
            raise ValueError("N_trunc must be at least 2")
        object.__setattr__(self, "N_trunc", int(self.N_trunc))

    @property
    def Delta(self) -> float:
        return self.Omega - self.omega

    @property
    def dim(self) -> int:
        return 2 * (self.N_trunc + 1)


SIGMA_Z = np.diag([1.0, -1.0])
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]])
SIGMA_MINUS = SIGMA_PLUS.T


def annihilation(N: int) -> NDArray[np.float64]:
    """Truncated ``a`` on Fock levels ``0..N`` (so ``a^dagger |N> = 0``)."""
    return np.diag(np.sqrt(np.arange(1, N + 1, dtype=float)), 1)


def jc_blocks(p: JCParams) -> tuple[NDArray, NDArray, NDArray]:
    """``(H0, H1, H2)`` in the interleaved basis ``|n> e_1, |n> e_-1``."""
    N = p.N_trunc
    a = annihilation(N)
    ad = a.T
    eye_osc, eye_spin = np.eye(N + 1), np.eye(2)
    h0 = p.omega * np.kron(ad @ a + 0.5 * eye_osc, eye_spin) + 0.5 * p.Omega * np.kron(eye_osc, SIGMA_Z)
    h1 = np.kron(a, SIGMA_PLUS) + np.kron(ad, SIGMA_MINUS)
    h2 = np.kron(a + ad, eye_spin)
    return h0, h1, h2


def build_jc(p: JCParams = JCParams(), box=DEFAULT_BOX) -> ControlledHamiltonian:
    """Truncated driven JC model; control 1 is the coupling ``g``, control 2 the drive."""
    h0, h1, h2 = jc_blocks(p)
    return ControlledHamiltonian(
        HermitianOperator(h0),
        (HermitianOperator(h1), HermitianOperator(h2)),
        (box, box),
        ("g", "u"),
        name="jc",
        params={"model": "jc", "omega": p.omega, "Omega": p.Omega, "N_trunc": p.N_trunc},
    )


def _nu(nu) -> int:
    if nu in ("+", 1, "+1"):
        return 1
    if nu in ("-", -1, "-1"):
        return -1
    raise ValueError(f"branch label must be '+' or '-', got {nu!r}")


def isolated_label(p: JCParams) -> int:
    """Branch label of the uncoupled level ``|0> e_-1``.

    Its energy ``-Delta/2`` equals the branch formula at ``n = -1`` with
    label ``-sign(Delta)`` (``-`` when ``Delta >= 0``).
    """
    return -1 if p.Delta >= 0 else 1


def jc_branch(n: int, nu, g: float, p: JCParams) -> float:
    """``E_{n,nu}(g) = omega (n+1) + nu/2 sqrt(Delta^2 + 4 g^2 (n+1))``, ``n >= -1``."""
    nu = _nu(nu)
    if n < -1:
        raise ValueError("branch index must be >= -1")
    if n == -1 and nu != isolated_label(p) and p.Delta != 0:
        raise ValueError("n = -1 only exists with the isolated-level label")
    return p.omega * (n + 1) + 0.5 * nu * math.sqrt(p.Delta**2 + 4.0 * g * g * (n + 1))


@dataclass(frozen=True)
class JCLevel:
    n: int
    nu: int
    value: float


def jc_analytic_spectrum(g: float, p: JCParams, n_max: int) -> list[JCLevel]:
    """Closed-form eigenvalues of ``H0 + g H1`` for ``n = -1 .. n_max``."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    out = [JCLevel(-1, isolated_label(p), -0.5 * p.Delta)]
    for n in range(n_max + 1):
        for nu in (1, -1):
            out.append(JCLevel(n, nu, jc_branch(n, nu, g, p)))
    return out


def jc_lowest_levels(g: float, p: JCParams, k: int) -> NDArray[np.float64]:
    """The ``k`` smallest eigenvalues of the untruncated ``H0 + g H1``."""
    n_max = max(k, 8)
    while True:
        vals = np.sort([lv.value for lv in jc_analytic_spectrum(g, p, n_max)])[:k]
        # lower bound of every branch with index above n_max
        r = math.sqrt(n_max + 2)
        bound = p.omega * r * r - 0.5 * abs(p.Delta) - abs(g) * r
        increasing = r > abs(g) / (2 * p.omega)
        if increasing and bound > vals[-1]:
            return vals
        n_max *= 2


def jc_intersection_g(n: int, nu, m: int, mu, p: JCParams) -> list[float]:
    """Positive coupling values where branches ``(n, nu)`` and ``(m, mu)`` cross.

    Roots of ``x^2 - 2(m+n+2) x + (m-n)^2 - (Delta/omega)^2 = 0`` with
    ``x = g^2/omega^2`` are kept only when the branch values actually agree,
    since squaring admits spurious roots.
    """
    nu, mu = _nu(nu), _nu(mu)
    if (n, nu) == (m, mu):
        raise ValueError("the two branches must differ")
    for idx, lab in ((n, nu), (m, mu)):
        if idx < -1:
            raise ValueError("branch index must be >= -1")
        if idx == -1 and lab != isolated_label(p) and p.Delta != 0:
            raise ValueError("n = -1 only exists with the isolated-level label")
    a, b = n + 1, m + 1
    if a == b:
        return []
    d2 = (p.Delta / p.omega) ** 2
    big = (a + b) + math.sqrt(4.0 * a * b + d2)
    const = (a - b) ** 2 - d2
    roots = [big, const / big]
    out = []
    for x in roots:
        if x <= 0:
            continue
        g = p.omega * math.sqrt(x)
        if abs(jc_branch(n, nu, g, p) - jc_branch(m, mu, g, p)) < 1e-9:
            out.append(g)
    return sorted(out)


def jc_quadratic_roots(n: int, m: int, p: JCParams) -> list[float]:
    """Both roots ``x`` of the crossing quadratic, unfiltered."""
    a, b = n + 1, m + 1
    d2 = (p.Delta / p.omega) ** 2
    big = (a + b) + math.sqrt(4.0 * a * b + d2)
    return sorted([((a - b) ** 2 - d2) / big, big])


def jc_all_crossings(p: JCParams, n_max: int) -> list[tuple[float, tuple[int, int], tuple[int, int]]]:
    """Every validated crossing ``(g, (n, nu), (m, mu))`` among branches ``n, m <= n_max``."""
    labels = [(-1, isolated_label(p))] + [(n, nu) for n in range(n_max + 1) for nu in (1, -1)]
    out = []
    for i, (n, nu) in enumerate(labels):
        for m, mu in labels[i + 1 :]:
            for g in jc_intersection_g(n, nu, m, mu, p):
                out.append((g, (n, nu), (m, mu)))
    out.sort()
    return out


def displacement(delta: float, N: int) -> NDArray[np.complex128]:
    """``D(delta) = exp(delta a^dagger - delta a)`` on the truncated oscillator."""
    a = annihilation(N)
    gen = delta * (a.T - a)
    # exp(K) for real antisymmetric K equals exp(-i (iK)) with iK Hermitian
    return evolve(HermitianOperator(1j * gen), 1.0).entries


def jc_tilde(u1t: float, u2t: float, p: JCParams) -> NDArray[np.float64]:
    """``omega(a^dagger a + 1/2) + Omega/2 sigma_z + u1t (a^dagger s_- + a s_+) + u2t sigma_x``."""
    h0, h1, _ = jc_blocks(p)
    return h0 + u1t * h1 + u2t * np.kron(np.eye(p.N_trunc + 1), SIGMA_X)


def jc_displacement_check(u1: float, u2: float, p: JCParams) -> float:
    """Frobenius residual of the displaced form of ``H(u1, u2)`` on Fock levels below ``N/2``.

    Compares ``H(u1, u2)`` with ``D^dagger H~(u1, -u1 delta) D + (omega delta^2 - 2 u2 delta)``,
    ``delta = u2/omega``.
    """
    N = p.N_trunc
    delta = u2 / p.omega
    if abs(delta) >= 0.25 * math.sqrt(N):
        raise ValueError(f"truncation N={N} too small for displacement {delta}")
    h0, h1, h2 = jc_blocks(p)
    lhs = h0 + u1 * h1 + u2 * h2
    d = np.kron(displacement(delta, N), np.eye(2))
    rhs = d.conj().T @ jc_tilde(u1, -u1 * delta, p) @ d + (p.omega * delta**2 - 2 * u2 * delta) * np.eye(p.dim)
    keep = 2 * (N // 2)
    return float(np.linalg.norm((lhs - rhs)[:keep, :keep]))


def jc_nondegeneracy_probe(u1: float, u2: float, p: JCParams, k: int = 20) -> float:
    """Smallest nearest-neighbour gap among the lowest ``k`` truncated levels."""
    if not 2 <= k <= p.N_trunc // 2:
        raise ValueError("k must lie in [2, N_trunc/2]")
    h0, h1, h2 = jc_blocks(p)
    w = np.linalg.eigvalsh(h0 + u1 * h1 + u2 * h2)[:k]
    return float(np.min(np.diff(w)))
