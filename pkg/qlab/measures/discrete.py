from collections.abc import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from qlab.errors import MeasureError
from qlab.measures.base import LevyMeasure
from qlab.measures.continuous import ContinuousMeasure


class Atoms(LevyMeasure):
    """
    Purely discrete measure Σ σ_k δ_{ν_k} (type I_d).

    Atoms are stored sorted by position, so that the inverse CDF walks them in order.
    """

    def __init__(self, atoms: Iterable[tuple[float, float]]):
        """
        :param atoms: ``(position, weight)`` pairs; positions nonzero and distinct, weights positive.
        :type atoms: Iterable[tuple[float, float]]
        """
        pairs = sorted((float(x), float(w)) for x, w in atoms)
        if not pairs:
            raise MeasureError("Atoms measure is not type I: it has no atoms", payload={"total_mass": 0.0})
        for x, w in pairs:
            if not (np.isfinite(x) and np.isfinite(w)):
                raise MeasureError(f"atom ({x!r}, {w!r}) is not finite")
            if x == 0.0:
                raise MeasureError("atom positions must be nonzero")
            if w <= 0.0:
                raise MeasureError(f"atom weight at {x!r} must be positive, got {w!r}")
        positions = [x for x, _ in pairs]
        if len(set(positions)) != len(positions):
            raise MeasureError("atom positions must be pairwise distinct")

        self._atoms: tuple[tuple[float, float], ...] = tuple(pairs)
        self._positions: NDArray[np.float64] = np.array(positions)
        self._positions.flags.writeable = False
        self._cum: NDArray[np.float64] = np.cumsum([w for _, w in pairs])
        self._validate_mass()

    def __repr__(self) -> str:
        return f"Atoms({list(self._atoms)!r})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Atoms) and other._atoms == self._atoms

    def __hash__(self) -> int:
        return hash(("atoms", self._atoms))

    @property
    def atoms(self) -> tuple[tuple[float, float], ...]:
        return self._atoms

    @property
    def positions(self) -> NDArray[np.float64]:
        return self._positions

    @property
    def support(self) -> tuple[float, float]:
        return float(self._positions[0]), float(self._positions[-1])

    @property
    def has_continuous_part(self) -> bool:
        return False

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(self._positions.tolist())

    @property
    def total_mass(self) -> float:
        return float(self._cum[-1])

    def _mass_up_to(self, x: ArrayLike, side: str) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=float)
        count = np.searchsorted(self._positions, x, side=side)
        return np.concatenate(([0.0], self._cum))[count]

    def cdf(self, x: ArrayLike) -> NDArray[np.float64]:
        return self._mass_up_to(x, "right")

    def cdf_left(self, x: ArrayLike) -> NDArray[np.float64]:
        return self._mass_up_to(x, "left")

    def density(self, x: ArrayLike) -> NDArray[np.float64]:
        return np.zeros_like(np.asarray(x, dtype=float))

    def ppf(self, u: NDArray[np.float64]) -> NDArray[np.float64]:
        target = self._clip_uniforms(u) * self.total_mass
        index = np.minimum(np.searchsorted(self._cum, target, side="right"), self._positions.size - 1)
        return self._positions[index]

    def centering_drift(self) -> float:
        return float(sum(x * w for x, w in self._atoms if abs(x) < 1.0))

    def all_positive(self) -> bool:
        return bool(self._positions[0] > 0.0)


class Mixture(LevyMeasure):
    """
    Sum of a continuous part and an atom part.
    """

    def __init__(self, continuous: ContinuousMeasure, atoms: Atoms):
        if not isinstance(continuous, ContinuousMeasure):
            raise MeasureError(f"Mixture continuous part must be a density measure, got {type(continuous).__name__}")
        if not isinstance(atoms, Atoms):
            raise MeasureError(f"Mixture atom part must be an Atoms measure, got {type(atoms).__name__}")
        self.continuous: ContinuousMeasure = continuous
        self.atom_part: Atoms = atoms
        self._validate_mass()

    def __repr__(self) -> str:
        return f"Mixture(continuous={self.continuous!r}, atoms={self.atom_part!r})"

    @property
    def atoms(self) -> tuple[tuple[float, float], ...]:
        return self.atom_part.atoms

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.continuous.breakpoints) | set(self.atom_part.breakpoints)))

    @property
    def support(self) -> tuple[float, float]:
        lo, hi = self.continuous.support
        positions = self.atom_part.positions
        return min(lo, float(positions[0])), max(hi, float(positions[-1]))

    @property
    def total_mass(self) -> float:
        return self.continuous.total_mass + self.atom_part.total_mass

    def cdf(self, x: ArrayLike) -> NDArray[np.float64]:
        return self.continuous.cdf(x) + self.atom_part.cdf(x)

    def cdf_left(self, x: ArrayLike) -> NDArray[np.float64]:
        return self.continuous.cdf(x) + self.atom_part.cdf_left(x)

    def density(self, x: ArrayLike) -> NDArray[np.float64]:
        return self.continuous.density(x)

    def ppf(self, u: NDArray[np.float64]) -> NDArray[np.float64]:
        u = self._clip_uniforms(u)
        omega = self.total_mass
        share = self.continuous.total_mass / omega
        # a single uniform selects the part, then is rescaled to a fresh uniform inside it
        from_continuous = self.continuous.ppf(u / share)
        from_atoms = self.atom_part.ppf((u - share) / (1.0 - share))
        return np.where(u < share, from_continuous, from_atoms)

    def centering_drift(self) -> float:
        return self.continuous.centering_drift() + self.atom_part.centering_drift()
