"""
Closed forms for the two-sided exponential measure ν′(x) = p²e^{−p|x|} on Δ = [0, ω].

The resolvent kernel γ of T₁ is piecewise bilinear, and the eigenvalues of T₁ solve
tan(pω/√λ) = 2√λ/(1 − λ). Both serve as oracles for the grid machinery.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize

from qlab.discretize import Domain, assemble_T, build_grid
from qlab.errors import DomainError
from qlab.measures import BilateralExponential
from qlab.quasipotential import build_B
from qlab.spectral import principal_eigen

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_MAX = 16.0
DEFAULT_MAX_BRANCHES = 64
DEGENERACY_TOLERANCE = 1e-9
TABULATED_ROOTS: tuple[tuple[str, float, float], ...] = (
    ("pi/4", math.pi / 4, 0.445),
    ("pi/3", math.pi / 3, 0.617),
    ("pi/2", math.pi / 2, 0.162),
    ("2pi/3", 2 * math.pi / 3, 1.433),
    ("pi", math.pi, 2.454),
)
ROOT_TOLERANCE = 0.005
OPERATOR_TOLERANCE = 0.01


@dataclass(frozen=True)
class BilateralScenario:
    p: float
    omega_len: float

    def __post_init__(self):
        if not (self.p > 0.0 and math.isfinite(self.p)):
            raise DomainError(f"rate p must be positive, got {self.p!r}")
        if not (self.omega_len > 0.0 and math.isfinite(self.omega_len)):
            raise DomainError(f"domain length must be positive, got {self.omega_len!r}")

    @classmethod
    def from_product(cls, product: float, p: float = 1.0) -> "BilateralScenario":
        return cls(p=p, omega_len=product / p)

    @property
    def product(self) -> float:
        return self.p * self.omega_len

    @property
    def omega(self) -> float:
        return 2.0 * self.p

    @cached_property
    def coefficients(self) -> tuple[float, float, float, float]:
        """
        (α₁, β₁, α₂, β₂) of the bilinear kernel.
        """
        p, c = self.p, self.product
        alpha1 = p * (1.0 + c) / (2.0 + c)
        beta1 = -p * p / (2.0 + c)
        return alpha1, beta1, p * alpha1, p * beta1

    def measure(self) -> BilateralExponential:
        return BilateralExponential(self.p)

    def domain(self) -> Domain:
        return Domain.interval(0.0, self.omega_len)


@dataclass(frozen=True)
class EigenRoot:
    lam: float
    branch: int
    theta: float
    degenerate: bool = False
    maximal: bool = False


def _check_inside(sc: BilateralScenario, *values: NDArray[np.float64]) -> None:
    slack = 1e-12 * sc.omega_len
    for v in values:
        if np.any(v < -slack) or np.any(v > sc.omega_len + slack):
            raise DomainError(f"arguments must lie in [0, {sc.omega_len}]")


def gamma_closed_form(sc: BilateralScenario, x: ArrayLike, t: ArrayLike) -> NDArray[np.float64]:
    """
    γ(x, t) = (α₁ + α₂u) + (β₁ + β₂u)v with u = min(x, t), v = max(x, t).

    Writing the kernel through min and max makes it symmetric by construction and continuous on the
    diagonal.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    _check_inside(sc, x, t)
    alpha1, beta1, alpha2, beta2 = sc.coefficients
    u = np.minimum(x, t)
    v = np.maximum(x, t)
    return (alpha1 + alpha2 * u) + (beta1 + beta2 * u) * v


def integral_equation_residual(sc: BilateralScenario, x: float, t: float, quad_n: int) -> float:
    """
    γ(x,t) − (p/2)e^{−p|x−t|} − (p/2)∫₀^ω e^{−p|x−y|}γ(y,t)dy with a ``quad_n``-point midpoint rule.
    """
    p = sc.p
    h = sc.omega_len / quad_n
    y = (np.arange(quad_n) + 0.5) * h
    integral = h * np.sum(np.exp(-p * np.abs(x - y)) * gamma_closed_form(sc, y, t))
    return float(gamma_closed_form(sc, x, t) - 0.5 * p * math.exp(-p * abs(x - t)) - 0.5 * p * integral)


def _characteristic(theta: float, c: float) -> float:
    # pole-free form of tan θ = 2cθ / (θ² − c²)
    return 2.0 * c * theta * math.cos(theta) - (theta * theta - c * c) * math.sin(theta)


def eigen_roots(
    sc: BilateralScenario,
    lambda_max: float = DEFAULT_LAMBDA_MAX,
    max_branches: int = DEFAULT_MAX_BRANCHES,
) -> list[EigenRoot]:
    """
    Roots λ ∈ (0, lambda_max] of tan(pω/√λ) = 2√λ/(1 − λ), largest first.

    The search runs in θ = pω/√λ, one tan branch ((k−½)π, (k+½)π) at a time, each split at θ = pω
    where the right side has its pole; on every piece there is at most one root. Roots accumulate
    at λ = 0, so only the first ``max_branches`` branches are searched. When pω sits on a pole of
    tan both sides diverge together at λ = 1; that root is returned with ``degenerate=True``.

    :param sc: The scenario.
    :type sc: BilateralScenario

    :param lambda_max: Largest λ searched; at least 1.
    :type lambda_max: float

    :param max_branches: Number of tan branches searched.
    :type max_branches: int

    :return: Roots sorted by decreasing λ, the first flagged ``maximal``.
    :rtype: list[EigenRoot]
    """
    if lambda_max < 1.0:
        raise DomainError(f"lambda_max must be at least 1, got {lambda_max!r}")
    c = sc.product
    theta_lo = c / math.sqrt(lambda_max)
    degenerate = abs(math.cos(c)) <= DEGENERACY_TOLERANCE
    guard = DEGENERACY_TOLERANCE * max(1.0, c)

    found: list[EigenRoot] = []
    for k in range(max_branches):
        lo = max((k - 0.5) * math.pi, theta_lo)
        hi = (k + 0.5) * math.pi
        if hi <= lo:
            continue
        cuts = [lo, hi]
        if lo < c < hi:
            cuts = [lo, c, hi]
        for a, b in zip(cuts[:-1], cuts[1:]):
            if degenerate:
                a = c + guard if abs(a - c) < guard else a
                b = c - guard if abs(b - c) < guard else b
            if b <= a:
                continue
            ga, gb = _characteristic(a, c), _characteristic(b, c)
            if ga == 0.0:
                theta = a
            elif ga * gb < 0.0:
                theta = optimize.brentq(_characteristic, a, b, args=(c,), xtol=1e-15, rtol=4 * np.finfo(float).eps)
            else:
                continue
            found.append(EigenRoot(lam=(c / theta) ** 2, branch=k, theta=theta))

    if degenerate:
        found.append(EigenRoot(lam=1.0, branch=round(c / math.pi), theta=c, degenerate=True))

    found.sort(key=lambda r: r.lam, reverse=True)
    if found:
        top = found[0]
        found[0] = EigenRoot(top.lam, top.branch, top.theta, top.degenerate, maximal=True)
    logger.debug("pω=%.6g: %d roots, maximal %.10g", c, len(found), found[0].lam if found else float("nan"))
    return found


def eigen_coefficients(sc: BilateralScenario, lam: float) -> tuple[float, float]:
    """
    (a(λ), b(λ)) of the 2×2 system for the sine/cosine coefficients of an eigenfunction.
    """
    if lam <= 0.0:
        raise DomainError(f"lambda must be positive, got {lam!r}")
    c = sc.product
    s = math.sqrt(lam)
    angle = c / s
    a = (-s * math.cos(angle) - lam * math.sin(angle) + (1.0 + c) * s) / (2.0 + c)
    b = (s * math.sin(angle) - lam * math.cos(angle) + lam) / (2.0 + c)
    return a, b


def characteristic_residual(sc: BilateralScenario, lam: float) -> float:
    """
    √λ·a(λ) + b(λ) − λ; vanishes exactly at eigenvalues, degenerate one included.
    """
    a, b = eigen_coefficients(sc, lam)
    return math.sqrt(lam) * a + b - lam


def eigenfunction_closed_form(sc: BilateralScenario, lam: float, x: ArrayLike) -> NDArray[np.float64]:
    """
    f(x) = √λ·sin(xp/√λ) + cos(xp/√λ), normalized by f(0) = 1.
    """
    if lam <= 0.0:
        raise DomainError(f"lambda must be positive, got {lam!r}")
    s = math.sqrt(lam)
    arg = np.asarray(x, dtype=float) * sc.p / s
    return s * np.sin(arg) + np.cos(arg)


def operator_top_eigenvalue(sc: BilateralScenario, n: int = 400) -> float:
    """
    Top eigenvalue λ₁ of T₁ built by Nyström discretization on ``n`` midpoint nodes.
    """
    grid = build_grid(sc.domain(), n)
    q = build_B(assemble_T(sc.measure(), grid))
    return principal_eigen(q).lambda1


@dataclass(frozen=True)
class TableRow:
    label: str
    p_omega: float
    tabulated: float
    equation_root: float
    degenerate_root: float | None
    maximal_root: float
    operator_eigenvalue: float
    tabulated_matches_equation: bool
    operator_matches_equation: bool
    operator_matches_tabulated: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RootTable:
    rows: tuple[TableRow, ...]
    operator_monotone: bool

    def to_dict(self) -> dict:
        return {"rows": [row.to_dict() for row in self.rows], "operator_monotone": self.operator_monotone}


def _table_row(label: str, product: float, tabulated: float, p: float, n: int, lambda_max: float) -> TableRow:
    sc = BilateralScenario.from_product(product, p)
    roots = eigen_roots(sc, lambda_max)
    regular = [r.lam for r in roots if not r.degenerate]
    degenerate = next((r.lam for r in roots if r.degenerate), None)
    equation_root = regular[0] if regular else float("nan")
    maximal_root = roots[0].lam if roots else float("nan")
    operator = operator_top_eigenvalue(sc, n)
    return TableRow(
        label=label,
        p_omega=product,
        tabulated=tabulated,
        equation_root=equation_root,
        degenerate_root=degenerate,
        maximal_root=maximal_root,
        operator_eigenvalue=operator,
        tabulated_matches_equation=abs(equation_root - tabulated) <= ROOT_TOLERANCE,
        operator_matches_equation=abs(operator - maximal_root) <= OPERATOR_TOLERANCE * maximal_root,
        operator_matches_tabulated=abs(operator - tabulated) <= OPERATOR_TOLERANCE * tabulated,
    )


def reproduce_table(
    p: float = 1.0,
    n: int = 400,
    lambda_max: float = DEFAULT_LAMBDA_MAX,
    threads: int | None = None,
) -> RootTable:
    """
    Compare the tabulated maximal roots with the equation's roots and the discretized operator.

    Disagreements between the three columns are logged and flagged, never reconciled.
    """
    args = [(label, product, tabulated, p, n, lambda_max) for label, product, tabulated in TABULATED_ROOTS]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = tuple(pool.map(lambda a: _table_row(*a), args))
    else:
        rows = tuple(_table_row(*a) for a in args)

    for row in rows:
        if not (row.tabulated_matches_equation and row.operator_matches_equation and row.operator_matches_tabulated):
            logger.warning(
                "pω=%s: tabulated %.4g, equation %.6g (maximal %.6g), operator %.6g disagree",
                row.label,
                row.tabulated,
                row.equation_root,
                row.maximal_root,
                row.operator_eigenvalue,
            )
    operators = [row.operator_eigenvalue for row in rows]
    monotone = all(b > a for a, b in zip(operators[:-1], operators[1:]))
    if not monotone:
        logger.warning("Operator eigenvalues are not increasing in pω: %s", operators)
    return RootTable(rows=rows, operator_monotone=monotone)
