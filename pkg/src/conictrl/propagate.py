"""Propagators and states under piecewise-constant controls."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .herm import HermitianOperator, UnitaryOperator, evolve
from .system import ControlledHamiltonian, OutsideRegion


@dataclass(frozen=True, eq=False)
class PiecewiseControl:
    """Control value ``values[k]`` held on ``(breakpoints[k], breakpoints[k+1])``."""

    breakpoints: NDArray[np.float64]
    values: NDArray[np.float64]

    def __post_init__(self):
        t = np.array(self.breakpoints, dtype=float)
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("at least two breakpoints are required")
        if t[0] != 0.0:
            raise ValueError("the first breakpoint must be 0")
        if not np.all(np.diff(t) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if len(v) != len(t) - 1:
            raise ValueError(f"{len(t) - 1} intervals need {len(t) - 1} control values, got {len(v)}")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breakpoints", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_durations(cls, durations: Sequence[float], values: ArrayLike) -> "PiecewiseControl":
        return cls(np.concatenate([[0.0], np.cumsum(durations)]), values)

    @property
    def durations(self) -> NDArray[np.float64]:
        return np.diff(self.breakpoints)

    @property
    def intervals(self) -> int:
        return len(self.values)

    def validate(self, model: ControlledHamiltonian) -> None:
        if self.values.shape[1] != model.m:
            raise ValueError(f"model has {model.m} controls, schedule has {self.values.shape[1]}")
        for k, v in enumerate(self.values):
            if not model.contains(v):
                raise OutsideRegion(f"interval {k + 1}: control {v.tolist()} outside region {list(model.region)}")


def step_unitaries(model: ControlledHamiltonian, ctrl: PiecewiseControl, sign: float = 1.0) -> list[UnitaryOperator]:
    """``exp(-i dt_k sign H(u_k))`` for every interval, in time order."""
    ctrl.validate(model)
    out = []
    for dt, v in zip(ctrl.durations, ctrl.values):
        out.append(evolve(HermitianOperator(sign * model.matrix(v)), float(dt)))
    return out


def propagator(model: ControlledHamiltonian, ctrl: PiecewiseControl) -> UnitaryOperator:
    """Ordered product of the interval unitaries, later intervals on the left.

    Unitarity is checked against ``1e-9`` times the number of intervals.
    """
    steps = step_unitaries(model, ctrl)
    total = np.eye(model.dim, dtype=np.complex128)
    for u in steps:
        total = u.entries @ total
    return UnitaryOperator(total, tol=1e-9 * ctrl.intervals)


def _unit(psi: ArrayLike, what: str) -> NDArray[np.complex128]:
    psi = np.asarray(psi, dtype=np.complex128).ravel()
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ValueError(f"{what} must have unit norm, got {np.linalg.norm(psi):.12g}")
    return psi


def propagate_state(model: ControlledHamiltonian, ctrl: PiecewiseControl, psi0: ArrayLike) -> NDArray[np.complex128]:
    psi = _unit(psi0, "initial state")
    if psi.shape != (model.dim,):
        raise ValueError(f"state must have length {model.dim}")
    return propagator(model, ctrl).entries @ psi


def trajectory(
    model: ControlledHamiltonian, ctrl: PiecewiseControl, psi0: ArrayLike
) -> tuple[NDArray[np.complex128], NDArray[np.float64]]:
    """States at every breakpoint (shape ``(L+1, n)``) and the unitarity defect of the running product."""
    psi = _unit(psi0, "initial state")
    states = [psi]
    total = np.eye(model.dim, dtype=np.complex128)
    defects = [0.0]
    for u in step_unitaries(model, ctrl):
        total = u.entries @ total
        states.append(total @ psi)
        defects.append(float(np.linalg.norm(total.conj().T @ total - np.eye(model.dim))))
    return np.array(states), np.array(defects)


def fidelity(psi: ArrayLike, phi: ArrayLike) -> float:
    """``|<psi, phi>|^2`` for unit vectors."""
    a, b = _unit(psi, "psi"), _unit(phi, "phi")
    return float(min(1.0, abs(np.vdot(a, b)) ** 2))


def reversed_negated_propagator(model: ControlledHamiltonian, ctrl: PiecewiseControl) -> NDArray[np.complex128]:
    """Propagator of the interval-reversed schedule with every ``H(u)`` replaced by ``-H(u)``.

    Equals the adjoint of :func:`propagator`.
    """
    steps = step_unitaries(model, ctrl, sign=-1.0)
    total = np.eye(model.dim, dtype=np.complex128)
    for u in reversed(steps):
        total = u.entries @ total
    return total
