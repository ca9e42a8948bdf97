"""
Exact engine for positive atoms on a bounded domain.

With every ν_k > 0 each jump moves the path right, so after finitely many jumps it has left Δ and
T^m = 0. Everything here is evaluated on the finite set of points reachable from the query point,
without a grid.
"""

import logging
import math
from collections import defaultdict
from collections.abc import Callable, Iterable
from functools import cached_property

from qlab.discretize import Domain
from qlab.errors import DomainError, MeasureError
from qlab.measures import Atoms

logger = logging.getLogger(__name__)

Interval = tuple[float, float]


def _normalize_atoms(atoms: Atoms | Iterable[tuple[float, float]]) -> tuple[tuple[float, float], ...]:
    pairs = atoms.atoms if isinstance(atoms, Atoms) else tuple(sorted((float(x), float(w)) for x, w in atoms))
    if not pairs:
        raise MeasureError("the exact atom engine needs at least one atom")
    negative = [x for x, _ in pairs if x <= 0.0]
    if negative:
        raise MeasureError(
            "nilpotency not guaranteed: every atom position must be positive",
            payload={"nonpositive_atoms": negative},
        )
    return pairs


def _merge(intervals: Iterable[Interval]) -> list[Interval]:
    merged: list[Interval] = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def _intersect(intervals: list[Interval], segments: Iterable[Interval]) -> list[Interval]:
    out = []
    for lo, hi in intervals:
        for a, b in segments:
            left, right = max(lo, a), min(hi, b)
            if left <= right:
                out.append((left, right))
    return out


def nilpotency_index(atoms: Atoms | Iterable[tuple[float, float]], domain: Domain) -> int:
    """
    Smallest m with T^m = 0 on Δ.

    Tracks the closed set R_k of starts from which some k-jump path stays in Δ:
    R_0 = Δ and R_k = Δ ∩ ∪_j (R_{k−1} − ν_j). The first empty R_k gives m, which never exceeds
    floor(span / min ν) + 1.

    :param atoms: Positive atoms.
    :type atoms: Atoms | Iterable[tuple[float, float]]

    :param domain: The bounded domain.
    :type domain: Domain

    :return: Nilpotency index m ≥ 1.
    :rtype: int
    """
    pairs = _normalize_atoms(atoms)
    bound = math.floor(domain.span / min(x for x, _ in pairs)) + 1
    reachable: list[Interval] = list(domain.segments)
    for k in range(1, bound + 1):
        shifted = [(lo - x, hi - x) for lo, hi in reachable for x, _ in pairs]
        reachable = _merge(_intersect(shifted, domain.segments))
        if not reachable:
            return k
    return bound


class ExactAtomOperator:
    """
    T f(x) = Σ_k σ_k f(x + ν_k) restricted to Δ, for positive atoms.
    """

    def __init__(self, atoms: Atoms | Iterable[tuple[float, float]], domain: Domain):
        self.atoms: tuple[tuple[float, float], ...] = _normalize_atoms(atoms)
        self.domain: Domain = domain
        self.omega: float = math.fsum(w for _, w in self.atoms)

    def __repr__(self) -> str:
        return f"ExactAtomOperator(atoms={list(self.atoms)!r}, domain={self.domain.to_list()!r})"

    @cached_property
    def nilpotency_index(self) -> int:
        return nilpotency_index(self.atoms, self.domain)

    def _check_point(self, x: float) -> None:
        if not bool(self.domain.contains(x)):
            raise DomainError(f"point {x!r} lies outside the domain", payload={"point": x})

    def frontier(self, x: float, k: int) -> dict[float, float]:
        """
        Positions reachable from ``x`` in exactly ``k`` jumps without leaving Δ, with their path weights.
        """
        self._check_point(x)
        current: dict[float, float] = {float(x): 1.0}
        for _ in range(k):
            following: defaultdict[float, float] = defaultdict(float)
            for position, weight in current.items():
                for shift, sigma in self.atoms:
                    y = position + shift
                    if self.domain.contains(y):
                        following[y] += weight * sigma
            current = dict(following)
            if not current:
                break
        return current

    def apply_power(self, f: Callable[[float], float], x: float, k: int) -> float:
        """
        (T^k f)(x).
        """
        if k < 0:
            raise DomainError(f"power must be nonnegative, got {k}")
        return math.fsum(weight * float(f(y)) for y, weight in self.frontier(x, k).items())

    def power_coefficients(self, x: float) -> list[float]:
        """
        c_k = (T^k 1)(x) for k = 0 … m−1.
        """
        self._check_point(x)
        coefficients = []
        current: dict[float, float] = {float(x): 1.0}
        for _ in range(self.nilpotency_index):
            coefficients.append(math.fsum(current.values()))
            following: defaultdict[float, float] = defaultdict(float)
            for position, weight in current.items():
                for shift, sigma in self.atoms:
                    y = position + shift
                    if self.domain.contains(y):
                        following[y] += weight * sigma
            current = dict(following)
        return coefficients

    def neumann_T1(self, f: Callable[[float], float], x: float) -> float:
        """
        T₁f(x) = Σ_{k=1}^{m−1} Ω^{−k} (T^k f)(x); the series stops because T^m = 0.
        """
        return math.fsum(self.apply_power(f, x, k) / self.omega**k for k in range(1, self.nilpotency_index))

    def mean_exit(self, x: float) -> float:
        """
        (B·1)(x) = (1/Ω) Σ_{k<m} c_k / Ω^k.
        """
        coefficients = self.power_coefficients(x)
        return math.fsum(c / self.omega**k for k, c in enumerate(coefficients)) / self.omega

    def laplace(self, s: complex, x: float) -> complex:
        """
        ∫₀^∞ e^{−st} p(t) dt = Σ_k c_k / (s + Ω)^{k+1}.
        """
        coefficients = self.power_coefficients(x)
        return sum(c / (s + self.omega) ** (k + 1) for k, c in enumerate(coefficients))

    def semigroup(self, t: float, x: float) -> float:
        """
        (e^{tL}1)(x) = e^{−Ωt} Σ_{k<m} t^k c_k / k!.
        """
        coefficients = self.power_coefficients(x)
        series = math.fsum(t**k * c / math.factorial(k) for k, c in enumerate(coefficients))
        return math.exp(-self.omega * t) * series


def apply_T_power(a: ExactAtomOperator, f: Callable[[float], float], x: float, k: int) -> float:
    return a.apply_power(f, x, k)


def neumann_T1_exact(a: ExactAtomOperator, f: Callable[[float], float], x: float) -> float:
    """
    Exact T₁f(x) for the nilpotent atom operator, summed over the reachable set.
    """
    return a.neumann_T1(f, x)
