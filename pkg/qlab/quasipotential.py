"""
Quasi-potential B = −L_Δ⁻¹ = (1/Ω)(I + T₁) and the identities built on it.

Grid operators come from :mod:`qlab.discretize`; positive atoms go through
:class:`~qlab.exact_atoms.ExactAtomOperator`. Functions accepting either dispatch on the type.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray
from scipy import linalg
from scipy.sparse import csgraph, csr_matrix
from scipy.sparse.linalg import expm_multiply

from qlab.discretize import NORM_TOLERANCE, Grid, OperatorMatrix, OperatorRole, generator_from
from qlab.errors import ConditionViolatedError, DomainError, NumericalError
from qlab.exact_atoms import ExactAtomOperator

logger = logging.getLogger(__name__)

INVERSE_RESIDUAL = 1e-10
TALBOT_POINTS = 20


class Condition(str, Enum):
    NEUMANN = "neumann"
    NILPOTENT = "nilpotent"


@dataclass(frozen=True, eq=False)
class Quasipotential:
    """
    Grid quasi-potential with its resolvent part T₁ = ΩB − I and kernel γ[i, j] = T₁[i, j] / w_j.
    """

    B: OperatorMatrix
    T: OperatorMatrix
    omega: float
    t1: NDArray[np.float64] = field(repr=False)
    t1_kernel: NDArray[np.float64] = field(repr=False)
    condition: Condition
    structurally_nilpotent: bool
    residual: float

    @property
    def grid(self) -> Grid:
        return self.B.grid

    @property
    def quasi_nilpotent(self) -> bool:
        """
        T₁ has no spectrum besides 0 although T ≠ 0: the decay law does not apply.
        """
        return self.structurally_nilpotent and bool(np.any(self.T.entries))

    def ones_image(self) -> NDArray[np.float64]:
        return self.B.entries.sum(axis=1)


QuasipotentialLike = Quasipotential | ExactAtomOperator


def is_structurally_nilpotent(entries: NDArray[np.float64]) -> bool:
    """
    True when the support graph of a nonnegative matrix has no cycle, hence some power vanishes.
    """
    if np.any(np.diag(entries) != 0.0):
        return False
    graph = csr_matrix(entries != 0.0)
    n_components, _ = csgraph.connected_components(graph, directed=True, connection="strong")
    return n_components == entries.shape[0]


def build_B(T: OperatorMatrix, omega: float | None = None, norm: float | None = None) -> Quasipotential:
    """
    Solve B = (ΩI − T)⁻¹ by dense LU.

    :param T: The jump operator on a grid.
    :type T: OperatorMatrix

    :param omega: Total mass; defaults to the Ω the matrix was assembled with.
    :type omega: float | None

    :param norm: ‖T‖ used for the condition check; defaults to the matrix's maximal row sum. Pass the
        exact :func:`~qlab.discretize.t_norm` to keep quadrature noise out of the check.
    :type norm: float | None

    :return: The quasi-potential.
    :rtype: Quasipotential
    """
    if T.role is not OperatorRole.T:
        raise DomainError(f"build_B expects a T matrix, got role {T.role.value}")
    omega = T.omega if omega is None else float(omega)
    entries = T.entries
    n = T.n
    norm = float(np.max(np.abs(entries).sum(axis=1))) if norm is None else float(norm)
    nilpotent = is_structurally_nilpotent(entries)

    if norm < omega * (1.0 - NORM_TOLERANCE):
        condition = Condition.NEUMANN
    elif nilpotent:
        condition = Condition.NILPOTENT
        logger.info("Condition ||T|| < Omega fails (%.12g >= %.12g); T is nilpotent, continuing", norm, omega)
    else:
        raise ConditionViolatedError(
            "condition ||T|| < Omega violated and T is not nilpotent",
            payload={"t_norm": norm, "omega": omega},
        )

    system = omega * np.eye(n) - entries
    try:
        factors = linalg.lu_factor(system, check_finite=True)
        inverse = linalg.lu_solve(factors, np.eye(n))
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"LU solve of (Omega I - T) failed: {exc}", payload={"condition": _cond(system)})

    residual = float(np.max(np.abs(inverse @ system - np.eye(n)))) if np.all(np.isfinite(inverse)) else np.inf
    if not residual <= INVERSE_RESIDUAL:
        raise NumericalError(
            "quasi-potential inverse residual too large",
            payload={"residual": residual, "condition": _cond(system)},
        )

    t1 = omega * inverse - np.eye(n)
    t1.flags.writeable = False
    kernel = t1 / T.grid.weights[None, :]
    kernel.flags.writeable = False
    logger.debug("Built B on %d nodes: condition=%s residual=%.3g", n, condition.value, residual)
    return Quasipotential(
        B=OperatorMatrix(inverse, T.grid, OperatorRole.B, omega),
        T=T,
        omega=omega,
        t1=t1,
        t1_kernel=kernel,
        condition=condition,
        structurally_nilpotent=nilpotent,
        residual=residual,
    )


def _cond(matrix: NDArray[np.float64]) -> float | None:
    value = float(np.linalg.cond(matrix))
    return value if np.isfinite(value) else None


def neumann_partial_sum(T: NDArray[np.float64] | OperatorMatrix, omega: float, K: int) -> NDArray[np.float64]:
    """
    Σ_{k=1}^{K} (T/Ω)^k, the truncated series whose limit is T₁.
    """
    entries = T.entries if isinstance(T, OperatorMatrix) else np.asarray(T, dtype=float)
    scaled = entries / omega
    term = np.eye(entries.shape[0])
    total = np.zeros_like(scaled)
    for _ in range(K):
        term = term @ scaled
        total += term
    return total


def mean_exit_time(q: QuasipotentialLike, start: float) -> float:
    """
    Mean exit time (B·1)(start) = (1/Ω)(1 + (T₁·1)(start)).

    Grid operators are read at the node nearest to ``start``.
    """
    if isinstance(q, ExactAtomOperator):
        return q.mean_exit(start)
    i = q.grid.nearest_node(start)
    return float(q.ones_image()[i])


def laplace_survival(q: QuasipotentialLike, s: complex, start: float) -> complex | float:
    """
    ∫₀^∞ e^{−st} p(t, Δ) dt = ((I + sB)⁻¹ B·1)(start).

    Complex ``s`` is accepted for contour inversion; real ``s`` must be nonnegative.
    """
    if np.isreal(s) and np.real(s) < 0.0:
        raise DomainError(f"Laplace argument must be nonnegative, got {s!r}")
    if s == 0:
        return mean_exit_time(q, start)
    if isinstance(q, ExactAtomOperator):
        value = q.laplace(s, start)
        return float(value.real) if np.isreal(s) else value

    i = q.grid.nearest_node(start)
    b = q.B.entries
    system = np.eye(q.grid.n) + s * b
    try:
        solution = np.linalg.solve(system, q.ones_image())
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Laplace solve failed at s={s!r}: {exc}", payload={"s": str(s)})
    return float(solution[i].real) if np.isreal(s) else complex(solution[i])


def survival_semigroup(L: OperatorMatrix | ExactAtomOperator, t: float, start: float) -> float:
    """
    Survival probability (e^{tL_Δ}·1)(start).

    Grid generators use the truncated-Taylor action of the matrix exponential with scaling; the atom
    engine sums the finite series e^{−Ωt} Σ_{k<m} (tT)^k / k!.
    """
    if t < 0.0:
        raise DomainError(f"time must be nonnegative, got {t!r}")
    if isinstance(L, ExactAtomOperator):
        return L.semigroup(t, start)
    generator = generator_from(L) if L.role is OperatorRole.T else L
    i = generator.grid.nearest_node(start)
    if t == 0.0:
        return 1.0
    value = expm_multiply(t * generator.entries, np.ones(generator.n))[i]
    return float(np.clip(value, 0.0, 1.0))


def survival_curve_semigroup(
    L: OperatorMatrix | ExactAtomOperator,
    times: Sequence[float],
    start: float,
) -> NDArray[np.float64]:
    """
    :func:`survival_semigroup` over a time grid; evenly spaced grids are computed in one stepped sweep.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return np.empty(0)
    if isinstance(L, ExactAtomOperator):
        return np.array([L.semigroup(t, start) for t in times])

    generator = generator_from(L) if L.role is OperatorRole.T else L
    i = generator.grid.nearest_node(start)
    steps = np.diff(times)
    if times.size > 2 and np.allclose(steps, steps[0], rtol=1e-12, atol=0.0) and steps[0] > 0.0:
        sweep = expm_multiply(
            generator.entries,
            np.ones(generator.n),
            start=times[0],
            stop=times[-1],
            num=times.size,
            endpoint=True,
        )
        values = sweep[:, i]
    else:
        values = np.array([survival_semigroup(generator, t, start) for t in times])
    values = np.clip(values, 0.0, 1.0)
    values[times == 0.0] = 1.0
    return values


def talbot_invert(F: Callable[[complex], complex], t: float, M: int = TALBOT_POINTS) -> float:
    """
    Fixed Talbot inversion of a Laplace transform at ``t > 0``.

    The contour s(θ) = rθ(cot θ + i), r = 2M/(5t), is sampled at θ_k = kπ/M.
    """
    if not t > 0.0:
        raise DomainError(f"Talbot inversion needs t > 0, got {t!r}")
    r = 2.0 * M / (5.0 * t)
    total = 0.5 * np.real(F(r)) * np.exp(r * t)
    for k in range(1, M):
        theta = k * np.pi / M
        cot = 1.0 / np.tan(theta)
        s = r * theta * (cot + 1j)
        sigma = theta + (theta * cot - 1.0) * cot
        total += np.real(np.exp(t * s) * F(s) * (1.0 + 1j * sigma))
    return float(r / M * total)


def phi_kernel(q: Quasipotential, x: float, y: float) -> float:
    """
    Cumulative kernel Φ(x, y) = ∫_{a₁}^{y} γ(x, u) du with Φ(x, a₁) = 0.

    Each cell's T₁ mass is spread uniformly over the cell, so Φ is piecewise linear in ``y`` and
    nondecreasing whenever T₁ ≥ 0.
    """
    domain = q.grid.domain
    if not domain.lo <= y <= domain.hi:
        raise DomainError(f"y={y!r} lies outside the closed domain", payload={"y": y})
    i = q.grid.nearest_node(x)
    left, right = q.grid.cell_edges()
    covered = np.clip((y - left) / (right - left), 0.0, 1.0)
    return float(np.dot(q.t1[i], covered))


def radon_modulus(q: Quasipotential, delta: float) -> float:
    """
    max over node pairs with |x − ξ| ≤ δ of Σ_j |ΔΦ(x, y_j) − ΔΦ(ξ, y_j)|.

    The increments ΔΦ(x_i, y_j) are the entries T₁[i, j]. A modulus that vanishes with δ is the
    grid shadow of a compact kernel; a modulus bounded away from zero flags a non-compact one.
    """
    if delta < 0.0:
        raise DomainError(f"delta must be nonnegative, got {delta!r}")
    nodes = q.grid.nodes
    t1 = q.t1
    best = 0.0
    for offset in range(1, nodes.size):
        close = (nodes[offset:] - nodes[:-offset]) <= delta
        if not np.any(close):
            break
        variation = np.abs(t1[offset:] - t1[:-offset]).sum(axis=1)
        best = max(best, float(np.max(variation[close])))
    return best
