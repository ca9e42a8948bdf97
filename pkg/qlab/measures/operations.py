"""
Scalar functionals of summable Lévy measures.

Everything here is a pure function of an immutable :class:`~qlab.measures.base.LevyMeasure`:
total mass, centering drift, the tail functions μ±, the anchored kernel k, both forms of
the generator, unimodality and inverse-CDF jump sampling, plus the JSON sub-schema used by
scenario files.
"""

import logging
from collections.abc import Callable, Iterable, Mapping
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate

from qlab.errors import ConfigError, DomainError, MeasureError
from qlab.measures.base import LevyMeasure
from qlab.measures.continuous import BilateralExponential, ContinuousMeasure, DensityTable
from qlab.measures.discrete import Atoms, Mixture

logger = logging.getLogger(__name__)

QUAD_EPSREL = 1e-10
QUAD_EPSABS = 1e-13
QUAD_LIMIT = 200

RealFunction = Callable[[float], float]


def _pieces(lo: float, hi: float, points: Iterable[float]) -> list[tuple[float, float]]:
    cuts = sorted({p for p in points if lo < p < hi})
    edges = [lo, *cuts, hi]
    return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _integrate(g: RealFunction, lo: float, hi: float, points: Iterable[float] = ()) -> float:
    """
    Adaptive quadrature of ``g`` over [lo, hi], split at ``points``; either end may be infinite.
    """
    if not hi > lo:
        return 0.0
    total = 0.0
    for a, b in _pieces(lo, hi, points):
        value, _ = integrate.quad(g, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)
        total += value
    return total


def _restrict(f: RealFunction, support: tuple[float, float] | None) -> RealFunction:
    if support is None:
        return f
    lo, hi = support

    def restricted(z: float) -> float:
        return float(f(z)) if lo <= z <= hi else 0.0

    return restricted


def _central_difference(f: RealFunction, step: float = 1e-5) -> RealFunction:
    def derivative(z: float) -> float:
        h = step * max(1.0, abs(z))
        return (float(f(z + h)) - float(f(z - h))) / (2.0 * h)

    return derivative


def total_mass(m: LevyMeasure) -> float:
    """
    :return: Ω = ∫ν(dx).
    :rtype: float
    """
    return m.total_mass


def centering_gamma(m: LevyMeasure) -> float:
    """
    Drift γ = ∫_{|y|<1} y ν(dy) that removes the compensator, so the process is the bare jump sum.
    """
    return m.centering_drift()


def mass_between(m: LevyMeasure, lo: ArrayLike, hi: ArrayLike) -> NDArray[np.float64]:
    return m.mass_between(lo, hi)


def jump_cdf(m: LevyMeasure, x: ArrayLike) -> NDArray[np.float64]:
    """
    Distribution function of a single jump, ν((−∞, x]) / Ω.
    """
    return m.normalized_cdf(x)


def _tails(m: LevyMeasure, s: ArrayLike) -> NDArray[np.float64]:
    s = np.asarray(s, dtype=float)
    left = m.cdf(s)
    right = -(m.total_mass - m.cdf_left(s))
    return np.where(s < 0.0, left, np.minimum(right, 0.0))


def mu_tails(m: LevyMeasure, x: float) -> float:
    """
    Tail function μ₋(x) = ν((−∞, x]) for x < 0 and μ₊(x) = −ν([x, ∞)) for x > 0.

    :param m: The measure.
    :type m: LevyMeasure

    :param x: Nonzero evaluation point.
    :type x: float

    :return: μ₋(x) ≥ 0 or μ₊(x) ≤ 0.
    :rtype: float
    """
    if x == 0.0:
        raise DomainError("mu_tails is undefined at x = 0: the one-sided limits differ")
    return float(_tails(m, x))


def kernel_k(m: LevyMeasure, x: float, a: float = 1.0) -> float:
    """
    Anchored kernel k₋(x) = ∫_{−a}^{x} μ₋ for x < 0 and k₊(x) = −∫_{x}^{a} μ₊ for x > 0.
    """
    if x == 0.0:
        raise DomainError("kernel_k is undefined at x = 0")
    if not a > 0.0:
        raise DomainError(f"kernel anchor must be positive, got {a!r}")

    def tail(t: float) -> float:
        return float(_tails(m, t))

    points = m.breakpoints
    if x < 0.0:
        lo, hi = sorted((-a, x))
        value = _integrate(tail, lo, hi, points)
        return value if x > -a else -value
    lo, hi = sorted((x, a))
    value = _integrate(tail, lo, hi, points)
    return -value if x < a else value


def apply_generator_direct(
    m: LevyMeasure,
    f: RealFunction,
    x: float,
    support: tuple[float, float] | None = None,
) -> float:
    """
    Direct form Lf(x) = −Ω f(x) + ∫ f(x + y) ν(dy).

    :param m: The measure.
    :type m: LevyMeasure

    :param f: Bounded function; treated as zero outside ``support`` when one is given.
    :type f: Callable[[float], float]

    :param x: Evaluation point.
    :type x: float

    :param support: Closed interval carrying ``f``; bounds the quadrature range.
    :type support: tuple[float, float] | None

    :return: (Lf)(x).
    :rtype: float
    """
    f = _restrict(f, support)
    value = -m.total_mass * float(f(x))
    value += sum(w * float(f(x + pos)) for pos, w in m.atoms)

    if m.has_continuous_part:
        lo, hi = m.support
        if support is not None:
            lo, hi = max(lo, support[0] - x), min(hi, support[1] - x)

        def integrand(y: float) -> float:
            return float(f(x + y)) * float(m.density(y))

        value += _integrate(integrand, lo, hi, (0.0, *m.breakpoints))
    return value


def apply_generator_convolution(
    m: LevyMeasure,
    f: RealFunction,
    x: float,
    derivative: RealFunction | None = None,
    support: tuple[float, float] | None = None,
) -> float:
    """
    Convolution form Lf(x) = −∫_{y<x} μ₋(y − x) f′(y) dy − ∫_{y>x} μ₊(y − x) f′(y) dy.

    ``derivative`` is f′; when omitted it is approximated by central differences.
    """
    if not m.has_continuous_part:
        raise MeasureError(
            "the convolution form needs a continuous part; use direct form for pure-atom measures",
            payload={"measure": repr(m)},
        )
    df = derivative if derivative is not None else _central_difference(f)
    df = _restrict(df, support)

    lo, hi = m.support
    if support is not None:
        lo, hi = max(lo, support[0] - x), min(hi, support[1] - x)

    def integrand(s: float) -> float:
        return float(_tails(m, s)) * float(df(x + s))

    points = m.breakpoints
    below = _integrate(integrand, lo, min(hi, 0.0), points)
    above = _integrate(integrand, max(lo, 0.0), hi, points)
    return -(below + above)


def is_unimodal(m: LevyMeasure) -> bool:
    """
    True iff the density is nondecreasing on x < 0 and nonincreasing on x > 0 (mode 0).

    Only meaningful for measures that are a density; atoms make the notion not applicable.
    """
    if not isinstance(m, ContinuousMeasure):
        raise MeasureError(f"unimodality is not applicable to {type(m).__name__} measures")
    return m.is_unimodal()


def sample_jump(m: LevyMeasure, u: float) -> float:
    if not 0.0 < u < 1.0:
        raise DomainError(f"uniform draw must lie in (0, 1), got {u!r}")
    return float(m.ppf(np.array([u]))[0])


def sample_jumps(m: LevyMeasure, u: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Vectorized :func:`sample_jump`; draws outside (0, 1) are clipped rather than refused.
    """
    return m.ppf(u)


def split_measure(m: LevyMeasure) -> tuple[ContinuousMeasure | None, Atoms | None]:
    """
    Split into the density part (type I_c) and the atom part (type I_d).
    """
    if isinstance(m, Mixture):
        return m.continuous, m.atom_part
    if isinstance(m, Atoms):
        return None, m
    if isinstance(m, ContinuousMeasure):
        return m, None
    raise MeasureError(f"unknown measure type {type(m).__name__}")


def _require(obj: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in obj:
        raise ConfigError(f"missing key '{where}.{key}'", payload={"key": f"{where}.{key}"})
    return obj[key]


def _read_table_file(path: Path) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    if not path.is_file():
        raise ConfigError(f"referenced density table '{path}' does not exist", payload={"file": str(path)})
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"cannot read density table '{path}': {exc}", payload={"file": str(path)})
    if data.shape[1] < 2:
        raise ConfigError(f"density table '{path}' needs two columns x,f", payload={"file": str(path)})
    return data[:, 0], data[:, 1]


def parse_measure(obj: Mapping[str, Any], base_dir: Path | None = None, where: str = "measure") -> LevyMeasure:
    """
    Build a measure from its JSON sub-schema.

    :param obj: One of ``{"type": "bilateral_exp", "p": ...}``, ``{"type": "atoms", "atoms": [{"x", "w"}]}``,
        ``{"type": "density_table", "x": [...], "f": [...]}`` (or ``"file"``: a two-column CSV) and
        ``{"type": "mixture", "continuous": {...}, "atoms": {...}}``.
    :type obj: Mapping[str, Any]

    :param base_dir: Directory that relative table files are resolved against.
    :type base_dir: Path | None

    :return: The measure.
    :rtype: LevyMeasure
    """
    if not isinstance(obj, Mapping):
        raise ConfigError(f"'{where}' must be an object", payload={"key": where})
    kind = _require(obj, "type", where)

    if kind == "bilateral_exp":
        return BilateralExponential(float(_require(obj, "p", where)))

    if kind == "atoms":
        entries = _require(obj, "atoms", where)
        try:
            pairs = [(float(entry["x"]), float(entry["w"])) for entry in entries]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"'{where}.atoms' entries need numeric 'x' and 'w': {exc}", payload={"key": where})
        return Atoms(pairs)

    if kind == "density_table":
        if "file" in obj:
            path = Path(obj["file"])
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            xs, fs = _read_table_file(path)
            logger.debug("Loaded density table with %d breakpoints from %s", xs.size, path)
        else:
            xs, fs = _require(obj, "x", where), _require(obj, "f", where)
        return DensityTable(xs, fs)

    if kind == "mixture":
        continuous = parse_measure(_require(obj, "continuous", where), base_dir, f"{where}.continuous")
        atoms = parse_measure(_require(obj, "atoms", where), base_dir, f"{where}.atoms")
        if not isinstance(continuous, ContinuousMeasure) or not isinstance(atoms, Atoms):
            raise ConfigError(f"'{where}' mixture needs a density part and an atoms part", payload={"key": where})
        return Mixture(continuous, atoms)

    raise ConfigError(f"unknown measure type {kind!r} at '{where}.type'", payload={"key": f"{where}.type"})


def measure_to_dict(m: LevyMeasure) -> dict[str, Any]:
    if isinstance(m, BilateralExponential):
        return {"type": "bilateral_exp", "p": m.p}
    if isinstance(m, DensityTable):
        return {"type": "density_table", "x": m.xs.tolist(), "f": m.fs.tolist()}
    if isinstance(m, Atoms):
        return {"type": "atoms", "atoms": [{"x": x, "w": w} for x, w in m.atoms]}
    if isinstance(m, Mixture):
        return {
            "type": "mixture",
            "continuous": measure_to_dict(m.continuous),
            "atoms": measure_to_dict(m.atom_part),
        }
    raise MeasureError(f"unknown measure type {type(m).__name__}")

