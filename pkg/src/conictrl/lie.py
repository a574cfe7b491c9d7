"""Real Lie algebras generated by skew-Hermitian matrices and controllability verdicts.

Elements of u(n) are stored in isometric real coordinates (imaginary diagonal,
then sqrt(2) times the real and imaginary strict upper triangle), so that the
Euclidean dot product of coordinate vectors equals ``Re tr(A^dagger B)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .config import DEFAULT_TOLERANCES, Tolerances
from .herm import DimensionMismatch, frobenius, is_skew_hermitian
from .system import ControlledHamiltonian, normalize_frozen

SQRT2 = np.sqrt(2.0)
_CHUNK = 64


def _flat_index(n: int) -> tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.int64]]:
    iu = np.triu_indices(n, 1)
    return np.arange(n) * (n + 1), iu[0] * n + iu[1], iu[1] * n + iu[0]


def to_coords(x: NDArray[np.complex128]) -> NDArray[np.float64]:
    """Isometric coordinates of one skew-Hermitian matrix or a stack of them."""
    x = np.asarray(x)
    n = x.shape[-1]
    diag, up, _ = _flat_index(n)
    flat = x.reshape(x.shape[:-2] + (n * n,))
    u = flat[..., up]
    return np.concatenate([flat[..., diag].imag, SQRT2 * u.real, SQRT2 * u.imag], axis=-1)


def from_coords(c: NDArray[np.float64], n: int) -> NDArray[np.complex128]:
    c = np.asarray(c, dtype=float)
    lead = c.shape[:-1]
    diag, up, low = _flat_index(n)
    p = len(up)
    out = np.zeros(lead + (n * n,), dtype=np.complex128)
    out[..., diag] = 1j * c[..., :n]
    u = (c[..., n : n + p] + 1j * c[..., n + p :]) / SQRT2
    out[..., up] = u
    out[..., low] = -np.conj(u)
    return out.reshape(lead + (n, n))


@dataclass(frozen=True, eq=False)
class LieClosureResult:
    """Orthonormal basis of a generated real Lie algebra and its verdict.

    ``verdict`` is ``"FULL_SU"``, ``"FULL_U"`` or ``"DEFICIENT(d)"``.
    ``unreliable`` is set when some accepted or rejected residual fell inside
    the ambiguous band around the rank tolerance.
    """

    n: int
    dim: int
    coords: NDArray[np.float64]
    generators_traceless: bool
    verdict: str
    min_accepted_residual: float
    max_rejected_residual: float
    unreliable: bool
    tolerance: float

    @property
    def basis(self) -> list[NDArray[np.complex128]]:
        return list(from_coords(self.coords, self.n))

    @property
    def full(self) -> bool:
        return self.verdict in ("FULL_SU", "FULL_U")

    @property
    def target_dim(self) -> int:
        return self.n**2 - 1 if self.generators_traceless else self.n**2

    def contains(self, x: ArrayLike, tol: float = 1e-8) -> bool:
        c = to_coords(np.asarray(x))
        r = c - self.coords.T @ (self.coords @ c)
        return float(np.linalg.norm(r)) <= tol * max(1.0, float(np.linalg.norm(c)))

    def summary(self) -> dict:
        return {
            "n": self.n,
            "dim": self.dim,
            "target_dim": self.target_dim,
            "generators_traceless": self.generators_traceless,
            "verdict": self.verdict,
            "min_accepted_residual": self.min_accepted_residual,
            "max_rejected_residual": self.max_rejected_residual,
            "unreliable": self.unreliable,
            "tol_rank": self.tolerance,
        }


class _OrthoBasis:
    """Growing orthonormal row basis with blocked two-pass Gram-Schmidt."""

    def __init__(self, size: int, cap: int, tol: float, band: tuple[float, float]):
        self.q = np.zeros((cap, size))
        self.k = 0
        self.cap = cap
        self.tol = tol
        self.band = band
        self.min_acc = np.inf
        self.max_rej = 0.0
        self.flagged = False

    def _note(self, res: float, accepted: bool) -> None:
        if accepted:
            self.min_acc = min(self.min_acc, res)
        else:
            self.max_rej = max(self.max_rej, res)
        if self.band[0] <= res <= self.band[1]:
            self.flagged = True

    def absorb(self, cands: NDArray[np.float64]) -> list[int]:
        """Orthogonalize candidate rows in order; return indices of accepted ones."""
        accepted = []
        for start in range(0, len(cands), _CHUNK):
            if self.k >= self.cap:
                break
            block = np.array(cands[start : start + _CHUNK])
            if self.k:
                q = self.q[: self.k]
                for _ in range(2):
                    block -= (block @ q.T) @ q
            k0 = self.k
            for i, row in enumerate(block):
                if self.k >= self.cap:
                    break
                if self.k > k0:
                    qn = self.q[k0 : self.k]
                    for _ in range(2):
                        row = row - qn.T @ (qn @ row)
                res = float(np.linalg.norm(row))
                ok = res > self.tol
                self._note(res, ok)
                if ok:
                    self.q[self.k] = row / res
                    self.k += 1
                    accepted.append(start + i)
        return accepted


def _validate_generators(generators: Sequence[ArrayLike]) -> list[NDArray[np.complex128]]:
    if not generators:
        raise ValueError("at least one generator is required")
    gens = [np.asarray(g, dtype=np.complex128) for g in generators]
    n = gens[0].shape[0]
    for g in gens:
        if g.shape != (n, n):
            raise DimensionMismatch(f"generator shape {g.shape} differs from {(n, n)}")
        if not is_skew_hermitian(g, 1e-10):
            raise ValueError("generators must be skew-Hermitian")
    return gens


def _verdict(dim: int, n: int, traceless: bool) -> str:
    if traceless and dim == n * n - 1:
        return "FULL_SU"
    if dim == n * n:
        return "FULL_U"
    return f"DEFICIENT({dim})"


def _bfs_closure(unit, n, ob):
    frontier = []
    if unit:
        ob.absorb(to_coords(np.stack(unit)))
        frontier = [ob.q[i] for i in range(ob.k)]
    while frontier and ob.k < ob.cap:
        mats = from_coords(np.stack(frontier), n)
        cands = np.empty((len(frontier), len(unit), n * n))
        for gi, g in enumerate(unit):
            cands[:, gi] = to_coords(np.matmul(g, mats) - np.matmul(mats, g))
        before = ob.k
        ob.absorb(cands.reshape(-1, n * n))
        frontier = [ob.q[i] for i in range(before, ob.k)]
    return ob.q[: ob.k].copy()


def _gap_classes(w: NDArray[np.float64], gap_tol: float) -> NDArray[np.int64]:
    """Class label per coordinate, grouping equal spectral gaps ``|w_k - w_j|``.

    Diagonal coordinates carry gap 0. Nearby gap values are merged by single
    linkage, which only ever coarsens the split.
    """
    n = len(w)
    iu = np.triu_indices(n, 1)
    gaps = np.concatenate([[0.0], np.abs(w[iu[1]] - w[iu[0]])])
    order = np.argsort(gaps, kind="stable")
    breaks = np.diff(gaps[order]) > gap_tol
    cls_sorted = np.concatenate([[0], np.cumsum(breaks)])
    cls = np.empty_like(cls_sorted)
    cls[order] = cls_sorted
    zero, pair = cls[0], cls[1:]
    return np.concatenate([np.full(n, zero), pair, pair])


def _spectral_closure(unit, n, cap, tol: Tolerances):
    """Closure with exact splitting into eigenspaces of ``ad`` of the first generator.

    For skew-Hermitian ``g0`` in the algebra, the projection of any algebra
    element onto a real eigenspace of ``ad_g0`` is a real polynomial in
    ``ad_g0`` applied to it, hence again in the algebra. Working in the
    eigenbasis of ``g0`` these projections are coordinate masks, so each
    gap class carries its own small orthonormal basis. This avoids the
    Vandermonde-type ill conditioning of plain bracketing when the drift
    spectrum is nearly resonant.
    """
    herm = -1j * unit[0]
    w, v = np.linalg.eigh(0.5 * (herm + herm.conj().T))
    labels = _gap_classes(w, tol.cluster)
    n_cls = int(labels.max()) + 1
    members = [np.flatnonzero(labels == c) for c in range(n_cls)]
    sizes = np.array([len(m) for m in members])
    bases: list[list[NDArray[np.float64]]] = [[] for _ in range(n_cls)]
    rot = [v.conj().T @ g @ v for g in unit]
    band = (tol.unreliable_low, tol.unreliable_high)
    stats = {"min_acc": np.inf, "max_rej": 0.0, "flag": False, "k": 0}
    accepted: list[NDArray[np.float64]] = []

    def note(res: float, ok: bool) -> None:
        if ok:
            stats["min_acc"] = min(stats["min_acc"], res)
        else:
            stats["max_rej"] = max(stats["max_rej"], res)
        if band[0] <= res <= band[1]:
            stats["flag"] = True

    perm = np.argsort(labels, kind="stable")
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    counts = np.zeros(n_cls, dtype=int)

    def absorb(cands: NDArray[np.float64]) -> list[NDArray[np.float64]]:
        new = []
        norms = np.sqrt(np.add.reduceat(cands[:, perm] ** 2, starts, axis=1))
        for cand, row in zip(cands, norms):
            for c in np.flatnonzero((row > 0) & (counts < sizes)):
                if stats["k"] >= cap:
                    return new
                if row[c] <= tol.rank:
                    note(float(row[c]), False)
                    continue
                comp = cand[members[c]]
                if counts[c]:
                    q = np.array(bases[c])
                    for _ in range(2):
                        comp = comp - q.T @ (q @ comp)
                res = float(np.linalg.norm(comp))
                ok = res > tol.rank
                note(res, ok)
                if ok:
                    comp = comp / res
                    bases[c].append(comp)
                    counts[c] += 1
                    full_vec = np.zeros(n * n)
                    full_vec[members[c]] = comp
                    new.append(full_vec)
                    accepted.append(full_vec)
                    stats["k"] += 1
        return new

    rot = np.stack(rot)
    frontier = absorb(to_coords(rot))
    while frontier and stats["k"] < cap:
        mats = from_coords(np.stack(frontier), n)
        cands = np.stack([to_coords(g @ mats - mats @ g) for g in rot], axis=1)
        frontier = absorb(cands.reshape(-1, n * n))
    if accepted:
        mats = from_coords(np.stack(accepted), n)
        coords = to_coords(v @ mats @ v.conj().T)
    else:
        coords = np.zeros((0, n * n))
    return coords, stats


def lie_closure(
    generators: Sequence[ArrayLike], tol: Tolerances = DEFAULT_TOLERANCES, method: str = "spectral"
) -> LieClosureResult:
    """Smallest real Lie algebra containing the given skew-Hermitian matrices.

    Breadth-first: every newly accepted basis element is bracketed with each
    generator, in a fixed order. Left-normed brackets of generators already
    span the generated algebra, so bracketing against the full basis is not
    needed. A candidate is accepted when its residual after projection onto
    the current basis exceeds ``tol.rank`` (candidates are built from
    unit-norm elements, so the threshold is relative).

    ``method="spectral"`` (default) additionally splits every candidate into
    its components along the eigenspaces of ``ad`` of the first generator,
    which spans the same algebra with far better conditioning.
    ``method="bfs"`` is the plain bracket-and-project scheme.
    """
    gens = _validate_generators(generators)
    n = gens[0].shape[0]
    traceless = all(abs(np.trace(g)) <= 1e-10 * max(1.0, frobenius(g)) for g in gens)
    unit = [g / frobenius(g) for g in gens if frobenius(g) > 0]
    cap = n * n - 1 if traceless else n * n
    if method == "bfs" or not unit:
        ob = _OrthoBasis(n * n, max(cap, 1), tol.rank, (tol.unreliable_low, tol.unreliable_high))
        coords = _bfs_closure(unit, n, ob)
        min_acc, max_rej, flag = ob.min_acc, ob.max_rej, ob.flagged
    elif method == "spectral":
        coords, st = _spectral_closure(unit, n, cap, tol)
        min_acc, max_rej, flag = st["min_acc"], st["max_rej"], st["flag"]
    else:
        raise ValueError(f"unknown closure method {method!r}")
    dim = len(coords)
    return LieClosureResult(
        n=n,
        dim=dim,
        coords=coords,
        generators_traceless=traceless,
        verdict=_verdict(dim, n, traceless),
        min_accepted_residual=float(min_acc) if dim else 0.0,
        max_rejected_residual=float(max_rej),
        unreliable=bool(flag),
        tolerance=tol.rank,
    )


def verdict_generators(model: ControlledHamiltonian, frozen=None) -> list[NDArray[np.complex128]]:
    """Generators ``{i(H0 + sum frozen), i H_other...}`` (all of them if nothing is frozen)."""
    pairs = normalize_frozen(frozen)
    if not pairs:
        return [model.H0.skew()] + [h.skew() for h in model.couplings]
    reduced = model.freeze(pairs)
    return [reduced.H0.skew()] + [h.skew() for h in reduced.couplings]


def controllability_verdict(
    model: ControlledHamiltonian, frozen=None, tol: Tolerances = DEFAULT_TOLERANCES, method: str = "spectral"
) -> LieClosureResult:
    """Lie-rank verdict for a model, optionally with some controls held constant.

    ``frozen`` is ``(axis, value)`` or a sequence of such pairs (0-based axes);
    frozen values must lie in the projection of the control box.
    """
    return lie_closure(verdict_generators(model, frozen), tol, method)


@dataclass(frozen=True)
class SimultaneousResult:
    full: bool
    dim: int
    target_dim: int
    closure: LieClosureResult = field(repr=False)

    @property
    def verdict(self) -> str:
        return "FULL" if self.full else f"DEFICIENT({self.dim})"


def simultaneous_verdict(
    pair_a: tuple[ArrayLike, ArrayLike],
    pair_b: tuple[ArrayLike, ArrayLike],
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> SimultaneousResult:
    """Simultaneous controllability of two systems sharing one control.

    Each pair is ``(drift, coupling)`` given as Hermitian matrices. The
    direct-sum generators ``diag(iH_A, iH_B)`` and ``diag(iW_A, iW_B)`` must
    generate all of ``su(n) + su(n)``, i.e. dimension ``2(n^2 - 1)``.
    """
    mats = [np.asarray(getattr(x, "entries", x), dtype=np.complex128) for x in (*pair_a, *pair_b)]
    n = mats[0].shape[0]
    for m in mats:
        if m.shape != (n, n):
            raise DimensionMismatch("all four matrices must share one dimension")
        if abs(np.trace(m)) > 1e-10 * max(1.0, frobenius(m)):
            raise ValueError("simultaneous verdict requires traceless Hamiltonians")
    ha, wa, hb, wb = mats
    z = np.zeros((n, n))
    gens = [1j * np.block([[ha, z], [z, hb]]), 1j * np.block([[wa, z], [z, wb]])]
    res = lie_closure(gens, tol)
    target = 2 * (n * n - 1)
    return SimultaneousResult(res.dim == target, res.dim, target, res)


def _complex_closure(generators: list[NDArray[np.complex128]], tol: float) -> int:
    """Dimension of the unital associative algebra generated over C."""
    n = generators[0].shape[0]
    basis = np.zeros((n * n, n * n), dtype=np.complex128)
    k = 0

    def add(x) -> bool:
        nonlocal k
        v = x.ravel().astype(np.complex128)
        nv = np.linalg.norm(v)
        if nv == 0 or k >= n * n:
            return False
        v = v / nv
        for _ in range(2):
            v = v - basis[:k].T @ (basis[:k].conj() @ v)
        r = np.linalg.norm(v)
        if r > tol:
            basis[k] = v / r
            k += 1
            return True
        return False

    frontier = [np.eye(n, dtype=np.complex128)]
    add(frontier[0])
    gens = [g / frobenius(g) for g in generators if frobenius(g) > 0]
    for g in gens:
        if add(g):
            frontier.append(g)
    degree = 1
    while frontier and k < n * n and degree <= n * n:
        new = []
        for e in frontier:
            for g in gens:
                p = g @ e
                if add(p):
                    new.append(p / frobenius(p))
        frontier = new
        degree += 1
    return k


def invariant_subspace_probe(
    generators: Sequence[ArrayLike], tol: Tolerances = DEFAULT_TOLERANCES, seed: int = 0
) -> list[NDArray[np.complex128]]:
    """Orthogonal projectors onto common invariant subspaces, or ``[]`` if irreducible.

    Irreducibility is decided by the dimension of the associative algebra the
    generators span. Otherwise a random Hermitian element of the commutant is
    diagonalized and the projectors onto its eigenspaces are returned, ordered
    by the first basis vector each one touches.
    """
    gens = _validate_generators(generators)
    n = gens[0].shape[0]
    if _complex_closure(gens, tol.rank) == n * n:
        return []
    eye = np.eye(n)
    # row-major vec: vec(G X) = (G kron I) vec X,  vec(X G) = (I kron G^T) vec X
    system = np.vstack([np.kron(g, eye) - np.kron(eye, g.T) for g in gens])
    _, s, vh = np.linalg.svd(system)
    s_full = np.zeros(vh.shape[0])
    s_full[: len(s)] = s
    null = vh[s_full <= tol.rank * max(1.0, s_full[0])].conj()
    if len(null) <= 1:
        return []
    rng = np.random.default_rng(seed)
    herm = np.zeros((n, n), dtype=np.complex128)
    for v in null:
        c = v.reshape(n, n)
        herm += rng.normal() * (c + c.conj().T) + rng.normal() * 1j * (c - c.conj().T)
    w, vecs = np.linalg.eigh(herm)
    spread = max(1.0, float(np.max(np.abs(w))))
    clusters: list[list[int]] = [[0]]
    for i in range(1, n):
        if w[i] - w[clusters[-1][-1]] <= tol.cluster * spread:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    if len(clusters) == 1:
        return []
    projectors = []
    for idx in clusters:
        v = vecs[:, idx]
        p = v @ v.conj().T
        projectors.append(p)
    projectors.sort(key=lambda p: int(np.argmax(np.real(np.diag(p)) > 1e-8)))
    return projectors
