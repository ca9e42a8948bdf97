import math
from abc import ABC, abstractmethod

import numpy as np
from numpy.typing import ArrayLike, NDArray

from qlab.errors import MeasureError

# Smallest and largest uniforms fed to an inverse CDF; keeps closed-form inverses finite.
U_MIN = 2.0**-54
U_MAX = 1.0 - 2.0**-53


class LevyMeasure(ABC):
    """
    Abstract base for summable (type I) Lévy measures.

    A measure exposes its total mass Ω, its cumulative distribution (left-closed and
    left-open variants, so that atoms are handled exactly), the density of its
    continuous part and the list of its atoms. All scalar functionals of the
    ``measures.operations`` module are built on these primitives.

    Measures are immutable after construction.
    """

    @property
    @abstractmethod
    def total_mass(self) -> float:
        """
        Total mass Ω = ∫ν(dx).

        :return: The (finite, strictly positive) total mass.
        :rtype: float
        """

    @abstractmethod
    def cdf(self, x: ArrayLike) -> NDArray[np.float64]:
        """
        Unnormalized distribution function ν((−∞, x]).

        :param x: Evaluation point(s).
        :return: Array of cumulative masses, same shape as ``x``.
        """

    @abstractmethod
    def cdf_left(self, x: ArrayLike) -> NDArray[np.float64]:
        """
        Left-open variant ν((−∞, x)). Differs from :meth:`cdf` only at atoms.
        """

    @abstractmethod
    def density(self, x: ArrayLike) -> NDArray[np.float64]:
        """
        Density of the continuous part (zero for purely discrete measures).
        """

    @abstractmethod
    def ppf(self, u: NDArray[np.float64]) -> NDArray[np.float64]:
        """
        Inverse CDF of the normalized jump law ν/Ω.

        :param u: Uniform draws in [0, 1); values are clipped to the open interval.
        :return: Jump sizes, same shape as ``u``.
        """

    @abstractmethod
    def centering_drift(self) -> float:
        """
        γ = ∫_{|y|<1} y ν(dy).
        """

    @property
    def atoms(self) -> tuple[tuple[float, float], ...]:
        """
        Discrete part as ``(position, weight)`` pairs sorted by position.
        """
        return ()

    @property
    def has_continuous_part(self) -> bool:
        return True

    @property
    def support(self) -> tuple[float, float]:
        """
        Closed hull of the measure's support; infinite ends for unbounded densities.
        """
        return -math.inf, math.inf

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """
        Points where the density is not smooth, plus atom positions. Quadrature routines split there.
        """
        return ()

    def mass_between(self, lo: ArrayLike, hi: ArrayLike) -> NDArray[np.float64]:
        """
        Exact mass of the closed interval [lo, hi]; zero when ``hi < lo``.
        """
        lo_arr = np.asarray(lo, dtype=float)
        hi_arr = np.asarray(hi, dtype=float)
        mass = self.cdf(hi_arr) - self.cdf_left(lo_arr)
        return np.where(hi_arr >= lo_arr, np.maximum(mass, 0.0), 0.0)

    def normalized_cdf(self, x: ArrayLike) -> NDArray[np.float64]:
        return self.cdf(x) / self.total_mass

    def _validate_mass(self) -> None:
        omega = self.total_mass
        if not math.isfinite(omega) or omega <= 0.0:
            raise MeasureError(
                f"{self.__class__.__name__} is not type I: total mass must be finite and positive, got {omega!r}",
                payload={"total_mass": omega if math.isfinite(omega) else None},
            )

    @staticmethod
    def _clip_uniforms(u: ArrayLike) -> NDArray[np.float64]:
        return np.clip(np.asarray(u, dtype=float), U_MIN, U_MAX)
