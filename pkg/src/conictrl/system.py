"""Controlled Hamiltonians ``H(u) = H0 + sum_l u_l H_l`` over a box of controls."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .herm import DimensionMismatch, HermitianOperator


class OutsideRegion(ValueError):
    """A control value is not strictly inside the open control box."""


def _as_op(h) -> HermitianOperator:
    return h if isinstance(h, HermitianOperator) else HermitianOperator(h)


@dataclass(frozen=True, eq=False)
class ControlledHamiltonian:
    H0: HermitianOperator
    couplings: tuple[HermitianOperator, ...]
    region: tuple[tuple[float, float], ...]
    labels: tuple[str, ...] = ()
    name: str = "model"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "H0", _as_op(self.H0))
        object.__setattr__(self, "couplings", tuple(_as_op(h) for h in self.couplings))
        n = self.H0.dim
        for h in self.couplings:
            if h.dim != n:
                raise DimensionMismatch(f"coupling of dim {h.dim} does not match drift dim {n}")
        region = tuple((float(lo), float(hi)) for lo, hi in self.region)
        if len(region) != len(self.couplings):
            raise ValueError("region needs one interval per control")
        for lo, hi in region:
            if not lo < hi:
                raise ValueError(f"empty control interval ({lo}, {hi})")
        object.__setattr__(self, "region", region)
        labels = tuple(self.labels) or tuple(f"u{k + 1}" for k in range(len(region)))
        if len(labels) != len(region):
            raise ValueError("one label per control required")
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.H0.dim

    @property
    def m(self) -> int:
        return len(self.couplings)

    def contains(self, u: ArrayLike) -> bool:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.m,):
            return False
        lo, hi = np.array(self.region).T
        return bool(np.all(lo < u) and np.all(u < hi))

    def check(self, u: ArrayLike) -> NDArray[np.float64]:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.m,):
            raise ValueError(f"control vector must have length {self.m}, got shape {u.shape}")
        if not self.contains(u):
            raise OutsideRegion(f"control {u.tolist()} outside region {list(self.region)}")
        return u

    def matrix(self, u: ArrayLike, check: bool = True) -> NDArray[np.complex128]:
        u = self.check(u) if check else np.asarray(u, dtype=float)
        out = self.H0.entries.copy()
        for c, h in zip(u, self.couplings):
            if c:
                out += c * h.entries
        return out

    def hamiltonian(self, u: ArrayLike) -> HermitianOperator:
        return HermitianOperator(self.matrix(u))

    def matrices(self, points: ArrayLike) -> NDArray[np.complex128]:
        """Stack of ``H(u)`` for an array of control points of shape ``(K, m)``."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.m)
        stack = np.stack([h.entries for h in self.couplings]) if self.m else np.zeros((0, self.dim, self.dim))
        return self.H0.entries[None] + np.einsum("kl,lij->kij", pts, stack)

    def scale(self, u: ArrayLike) -> float:
        """Frobenius norm of ``H(u)``; floor of 1 so that tolerances stay meaningful."""
        return max(1.0, float(np.linalg.norm(self.matrix(u, check=False))))

    def interval(self, axis: int) -> tuple[float, float]:
        """Projection of the control box onto one axis."""
        return self.region[axis]

    def freeze(self, frozen: Iterable[tuple[int, float]]) -> "ControlledHamiltonian":
        """Absorb fixed control values into the drift.

        Returns the model in the remaining controls, with the remaining box.
        """
        frozen = dict(_normalize_frozen(frozen))
        drift = self.H0.entries.copy()
        for axis, value in frozen.items():
            if not 0 <= axis < self.m:
                raise IndexError(f"control axis {axis} out of range")
            lo, hi = self.region[axis]
            if not lo < value < hi:
                raise OutsideRegion(f"frozen value {value} outside ({lo}, {hi}) for {self.labels[axis]}")
            drift += value * self.couplings[axis].entries
        keep = [k for k in range(self.m) if k not in frozen]
        params = dict(self.params)
        params["frozen"] = {self.labels[a]: v for a, v in frozen.items()}
        return ControlledHamiltonian(
            HermitianOperator(drift),
            tuple(self.couplings[k] for k in keep),
            tuple(self.region[k] for k in keep),
            tuple(self.labels[k] for k in keep),
            name=self.name,
            params=params,
        )


def _normalize_frozen(frozen) -> list[tuple[int, float]]:
    if frozen is None:
        return []
    if isinstance(frozen, tuple) and len(frozen) == 2 and np.isscalar(frozen[0]) and np.isscalar(frozen[1]):
        return [(int(frozen[0]), float(frozen[1]))]
    out = []
    for axis, value in frozen:
        out.append((int(axis), float(value)))
    if len({a for a, _ in out}) != len(out):
        raise ValueError("an axis is frozen twice")
    return out


def normalize_frozen(frozen) -> list[tuple[int, float]]:
    """Accept ``(axis, value)`` or a sequence of such pairs."""
    return _normalize_frozen(frozen)


def zero_model(dim: int, m: int = 2, diag: Sequence[float] | None = None) -> ControlledHamiltonian:
    """Model with a diagonal drift and vanishing couplings."""
    d = np.zeros(dim) if diag is None else np.asarray(diag, dtype=float)
    return ControlledHamiltonian(
        HermitianOperator(np.diag(d)),
        tuple(HermitianOperator.zeros(dim) for _ in range(m)),
        tuple((-10.0, 10.0) for _ in range(m)),
        name="zero",
    )
