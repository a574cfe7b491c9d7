"""Centralized numerical tolerances and sampling densities."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    """Default thresholds used across the package.

    Unless noted, values are relative: they are multiplied by a scale taken
    from the operator at hand (its Frobenius norm, or 1 for unit-normalized
    Lie-algebra elements).
    """

    herm: float = 1e-12
    unitary: float = 1e-10
    rank: float = 1e-8
    unreliable_low: float = 1e-10
    unreliable_high: float = 1e-6
    intersect: float = 1e-7
    cluster: float = 1e-6
    slope_floor: float = 1e-4
    fit_residual: float = 0.1
    couple: float = 1e-8
    nonresonance: float = 1e-8
    germs: float = 1e-6
    obstruction: float = 1e-8
    # absolute, in control units
    probe_radius: float = 1e-2
    coord_precision: float = 1e-9
    k_ring: int = 64
    k_dir: int = 32
    max_evals: int = 10_000

    def as_dict(self) -> dict:
        return asdict(self)

    def override(self, **kwargs) -> "Tolerances":
        """Return a copy with some fields replaced.

        Float overrides must lie in ``[1e-14, 1e-2]`` except for the fit
        residual and the probe radius, which are not tolerances in that sense.
        """
        known = {f.name for f in fields(self)}
        for key, value in kwargs.items():
            if key not in known:
                raise KeyError(f"unknown tolerance {key!r}")
            if key in ("k_ring", "k_dir", "max_evals"):
                if int(value) < 1:
                    raise ValueError(f"{key} must be positive")
                continue
            if key in ("fit_residual", "probe_radius"):
                if not value > 0:
                    raise ValueError(f"{key} must be positive")
                continue
            if not 1e-14 <= float(value) <= 1e-2:
                raise ValueError(f"tolerance {key}={value} outside [1e-14, 1e-2]")
        return replace(self, **kwargs)


DEFAULT_TOLERANCES = Tolerances()
