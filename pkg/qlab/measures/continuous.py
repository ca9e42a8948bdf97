from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from qlab.errors import MeasureError
from qlab.measures.base import LevyMeasure


class ContinuousMeasure(LevyMeasure):
    """
    Base for measures with a density and no atoms (type I_c).

    Subclasses get the left-open CDF for free (it equals the CDF) and must say
    whether the density is unimodal with mode 0.
    """

    def cdf_left(self, x: ArrayLike) -> NDArray[np.float64]:
        return self.cdf(x)

    def is_unimodal(self) -> bool:
        """
        True iff the density is nondecreasing on x < 0 and nonincreasing on x > 0.
        """
        raise NotImplementedError


class BilateralExponential(ContinuousMeasure):
    """
    Two-sided exponential family ν′(x) = p²·e^{−p|x|}, with Ω = 2p.
    """

    def __init__(self, p: float):
        """
        :param p: Positive decay rate.
        :type p: float
        """
        if not np.isfinite(p) or p <= 0.0:
            raise MeasureError(f"BilateralExponential rate must be positive, got {p!r}")
        self.p: float = float(p)

    def __repr__(self) -> str:
        return f"BilateralExponential(p={self.p!r})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, BilateralExponential) and other.p == self.p

    def __hash__(self) -> int:
        return hash(("bilateral_exp", self.p))

    @property
    def total_mass(self) -> float:
        return 2.0 * self.p

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (0.0,)

    def density(self, x: ArrayLike) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=float)
        return self.p * self.p * np.exp(-self.p * np.abs(x))

    def cdf(self, x: ArrayLike) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=float)
        p = self.p
        with np.errstate(over="ignore"):
            left = p * np.exp(p * np.minimum(x, 0.0))
            right = 2.0 * p - p * np.exp(-p * np.maximum(x, 0.0))
        return np.where(x < 0.0, left, right)

    def ppf(self, u: NDArray[np.float64]) -> NDArray[np.float64]:
        u = self._clip_uniforms(u)
        lower = np.log(2.0 * np.minimum(u, 0.5)) / self.p
        upper = -np.log(2.0 * (1.0 - np.maximum(u, 0.5))) / self.p
        return np.where(u < 0.5, lower, upper)

    def centering_drift(self) -> float:
        return 0.0

    def is_unimodal(self) -> bool:
        return True


class DensityTable(ContinuousMeasure):
    """
    Piecewise-linear density given on sorted breakpoints, zero outside them.

    Integrals of a piecewise-linear density are piecewise polynomial, so mass, CDF,
    drift and inverse CDF are all evaluated exactly rather than by quadrature.
    """

    def __init__(self, breakpoints: Sequence[float], values: Sequence[float]):
        """
        :param breakpoints: Strictly increasing abscissae (at least two).
        :type breakpoints: Sequence[float]

        :param values: Nonnegative density values at the breakpoints.
        :type values: Sequence[float]
        """
        xs = np.asarray(breakpoints, dtype=float)
        fs = np.asarray(values, dtype=float)
        if xs.ndim != 1 or xs.size < 2 or xs.shape != fs.shape:
            raise MeasureError("DensityTable needs two equally long 1-d sequences with at least two points")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(fs))):
            raise MeasureError("DensityTable entries must be finite")
        if np.any(np.diff(xs) <= 0.0):
            raise MeasureError("DensityTable breakpoints must be strictly increasing")
        if np.any(fs < 0.0):
            raise MeasureError("DensityTable values must be nonnegative")

        self._xs: NDArray[np.float64] = xs
        self._fs: NDArray[np.float64] = fs
        self._xs.flags.writeable = False
        self._fs.flags.writeable = False

        widths = np.diff(xs)
        self._slopes: NDArray[np.float64] = np.diff(fs) / widths
        self._cum: NDArray[np.float64] = np.concatenate(([0.0], np.cumsum(0.5 * (fs[:-1] + fs[1:]) * widths)))
        self._validate_mass()

    def __repr__(self) -> str:
        return f"DensityTable(breakpoints={self._xs.tolist()!r}, values={self._fs.tolist()!r})"

    @property
    def xs(self) -> NDArray[np.float64]:
        return self._xs

    @property
    def fs(self) -> NDArray[np.float64]:
        return self._fs

    @property
    def total_mass(self) -> float:
        return float(self._cum[-1])

    @property
    def support(self) -> tuple[float, float]:
        return float(self._xs[0]), float(self._xs[-1])

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(float(v) for v in np.union1d(self._xs, [0.0]))

    def density(self, x: ArrayLike) -> NDArray[np.float64]:
        return np.interp(np.asarray(x, dtype=float), self._xs, self._fs, left=0.0, right=0.0)

    def cdf(self, x: ArrayLike) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=float)
        piece = np.clip(np.searchsorted(self._xs, x, side="right") - 1, 0, self._xs.size - 2)
        d = x - self._xs[piece]
        inside = self._cum[piece] + self._fs[piece] * d + 0.5 * self._slopes[piece] * d * d
        return np.where(x < self._xs[0], 0.0, np.where(x >= self._xs[-1], self.total_mass, inside))

    def ppf(self, u: NDArray[np.float64]) -> NDArray[np.float64]:
        target = self._clip_uniforms(u) * self.total_mass
        piece = np.clip(np.searchsorted(self._cum, target, side="left") - 1, 0, self._xs.size - 2)
        rest = target - self._cum[piece]
        f0 = self._fs[piece]
        disc = np.sqrt(np.maximum(f0 * f0 + 2.0 * self._slopes[piece] * rest, 0.0))
        denom = f0 + disc
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(denom > 0.0, 2.0 * rest / denom, 0.0)
        return self._xs[piece] + d

    def centering_drift(self) -> float:
        lo = np.clip(self._xs[:-1], -1.0, 1.0)
        hi = np.clip(self._xs[1:], -1.0, 1.0)
        # density on each piece written as A + B·y
        slope = self._slopes
        intercept = self._fs[:-1] - slope * self._xs[:-1]
        moment = intercept * (hi**2 - lo**2) / 2.0 + slope * (hi**3 - lo**3) / 3.0
        return float(np.sum(moment))

    def is_unimodal(self) -> bool:
        points = np.union1d(self._xs, [0.0])
        values = self.density(points)
        left = np.concatenate(([0.0], values[points <= 0.0]))
        right = np.concatenate((values[points >= 0.0], [0.0]))
        return bool(np.all(np.diff(left) >= 0.0) and np.all(np.diff(right) <= 0.0))
