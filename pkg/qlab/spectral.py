"""
Principal eigenpair of the quasi-potential and the decay law p(t, Δ) ≈ q·e^{−t/μ₁}.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy import linalg

from qlab.discretize import Grid
from qlab.errors import DomainError, NumericalError
from qlab.exact_atoms import ExactAtomOperator
from qlab.quasipotential import Quasipotential, QuasipotentialLike

logger = logging.getLogger(__name__)

RAYLEIGH_TOLERANCE = 1e-12
RESIDUAL_TOLERANCE = 1e-10
MAX_ITERATIONS = 100_000
MULTIPLICITY_TOLERANCE = 1e-8
CONE_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    """
    Dominant eigen-data of B.

    ``g1`` is the right eigenfunction scaled to max 1; ``h1`` holds the increments of the left
    eigenfunction, scaled so that Σ g1·h1 = 1. For quasi-nilpotent operators only ``omega`` and
    ``mu1 = 1/Ω`` are meaningful and the decay-law accessors refuse to answer.
    """

    omega: float
    mu1: float
    lambda1: float
    quasi_nilpotent: bool = False
    grid: Grid | None = field(default=None, repr=False)
    g1: NDArray[np.float64] | None = field(default=None, repr=False)
    h1: NDArray[np.float64] | None = field(default=None, repr=False)
    eigenvalues: NDArray[np.complex128] | None = field(default=None, repr=False)
    projected_ones: NDArray[np.float64] | None = field(default=None, repr=False)
    multiplicity: int = 1
    gap: float = 1.0
    index_one: bool = True
    iterations: int = 0

    @classmethod
    def flagged(cls, omega: float) -> "SpectralSummary":
        return cls(omega=omega, mu1=1.0 / omega, lambda1=0.0, quasi_nilpotent=True)

    def cluster_count(self, epsilon: float) -> int:
        if self.quasi_nilpotent or self.eigenvalues is None:
            return 0
        return int(np.count_nonzero(np.abs(self.eigenvalues - 1.0 / self.omega) > epsilon))


def power_iterate(
    matrix: NDArray[np.float64],
    tol: float = RAYLEIGH_TOLERANCE,
    max_iter: int = MAX_ITERATIONS,
) -> tuple[float, NDArray[np.float64], int]:
    """
    Dominant eigenpair of a nonnegative matrix by power iteration from the all-ones vector.

    Stops once the Rayleigh quotient moves by at most ``tol`` (relative) and the residual
    ‖Av − μv‖∞ is below 1e−10·μ‖v‖∞.

    :return: ``(mu, v, iterations)`` with ``v`` scaled to max 1.
    :rtype: tuple[float, NDArray[np.float64], int]
    """
    v = np.ones(matrix.shape[0])
    mu = np.nan
    for iteration in range(1, max_iter + 1):
        w = matrix @ v
        scale = float(np.max(np.abs(w)))
        if scale == 0.0:
            raise NumericalError("power iteration hit the null space")
        quotient = float(v @ w) / float(v @ v)
        residual = float(np.max(np.abs(w - quotient * v)))
        if abs(quotient - mu) <= tol * abs(quotient) and residual <= RESIDUAL_TOLERANCE * abs(quotient):
            return quotient, v, iteration
        mu = quotient
        v = w / scale
        if w[int(np.argmax(np.abs(w)))] < 0.0:
            v = -v
    raise NumericalError(
        "no real dominant eigenvalue: power iteration did not converge",
        payload={"iterations": max_iter, "last_quotient": mu},
    )


def index_one(B: NDArray[np.float64], mu1: float, eigenvalues: NDArray[np.complex128] | None = None) -> bool:
    """
    True when μ₁ has equal algebraic and geometric multiplicity (no Jordan block).
    """
    if eigenvalues is None:
        eigenvalues = linalg.eigvals(B)
    algebraic = int(np.count_nonzero(np.abs(eigenvalues - mu1) <= 1e-6 * abs(mu1)))
    singular = linalg.svdvals(B - mu1 * np.eye(B.shape[0]))
    geometric = int(np.count_nonzero(singular <= MULTIPLICITY_TOLERANCE * max(abs(mu1), float(singular[0]))))
    return algebraic == geometric


def _projected_ones(B: NDArray[np.float64], mask_tol: float, mu1: float) -> NDArray[np.float64]:
    values, left, right = linalg.eig(B, left=True, right=True)
    dominant = np.abs(values - mu1) <= mask_tol * mu1
    v_r = right[:, dominant]
    w_r = left[:, dominant]
    coupling = w_r.conj().T @ v_r
    projected = v_r @ np.linalg.solve(coupling, w_r.conj().T @ np.ones(B.shape[0]))
    return np.real(projected)


def principal_eigen(q: QuasipotentialLike) -> SpectralSummary:
    """
    Krein–Rutman eigen-data of B: power iteration on B and Bᵀ, one dense decomposition for the rest.

    :param q: The quasi-potential.
    :type q: Quasipotential | ExactAtomOperator

    :return: The summary; flagged when T₁ is quasi-nilpotent.
    :rtype: SpectralSummary
    """
    if isinstance(q, ExactAtomOperator) or q.quasi_nilpotent:
        logger.warning("Krein-Rutman hypotheses fail: T1 quasi-nilpotent, no decay law")
        return SpectralSummary.flagged(q.omega)

    B = q.B.entries
    omega = q.omega
    mu_right, g1, right_iterations = power_iterate(B)
    mu_left, h1, left_iterations = power_iterate(B.T)
    if abs(mu_right - mu_left) > 1e-9 * mu_right:
        raise NumericalError(
            "left and right dominant eigenvalues disagree",
            payload={"right": mu_right, "left": mu_left},
        )
    g1 = g1 / np.max(g1)
    h1 = h1 / float(g1 @ h1)

    for name, vector in (("right", g1), ("left", h1)):
        if np.min(vector) < -CONE_TOLERANCE * np.max(np.abs(vector)):
            raise NumericalError(
                f"the {name} dominant eigenvector leaves the nonnegative cone",
                payload={"eigenvector": name, "min": float(np.min(vector)), "mu1": mu_right},
            )

    eigenvalues = linalg.eigvals(B)
    eigenvalues = eigenvalues[np.argsort(-np.abs(eigenvalues), kind="stable")]
    close = np.abs(eigenvalues - mu_right) <= MULTIPLICITY_TOLERANCE * mu_right
    multiplicity = int(np.count_nonzero(close))
    rest = np.abs(eigenvalues[~close])
    gap = float(rest.max() / mu_right) if rest.size else 1.0

    if multiplicity > 1:
        projected = _projected_ones(B, MULTIPLICITY_TOLERANCE, mu_right)
        logger.info(
            "Dominant eigenvalue %.12g has multiplicity %d; prefactor uses the spectral projector", mu_right, multiplicity
        )
    else:
        projected = g1 * float(np.sum(h1))

    return SpectralSummary(
        omega=omega,
        mu1=mu_right,
        lambda1=omega * mu_right - 1.0,
        grid=q.grid,
        g1=g1,
        h1=h1,
        eigenvalues=eigenvalues,
        projected_ones=projected,
        multiplicity=multiplicity,
        gap=gap,
        index_one=index_one(B, mu_right, eigenvalues),
        iterations=max(right_iterations, left_iterations),
    )


def _require_decay_law(s: SpectralSummary) -> None:
    if s.quasi_nilpotent:
        raise NumericalError("Krein-Rutman hypotheses fail: T1 quasi-nilpotent, no decay law")


def decay_rate(s: SpectralSummary) -> float:
    """
    Exponential survival rate 1/μ₁.
    """
    _require_decay_law(s)
    return 1.0 / s.mu1


def prefactor_q(s: SpectralSummary, start: float) -> float:
    """
    q = Σ_k g_k(start)·Σ_j h_k[j] over the dominant eigenpairs, read at the node nearest ``start``.

    :param s: Summary from :func:`principal_eigen`.
    :type s: SpectralSummary

    :param start: Start point in Δ.
    :type start: float

    :return: The prefactor of p(t, Δ) ≈ q·e^{−t/μ₁}.
    :rtype: float
    """
    _require_decay_law(s)
    i = s.grid.nearest_node(start)
    if s.multiplicity == 1:
        value = float(s.g1[i] * np.sum(s.h1))
    else:
        value = float(s.projected_ones[i])
    if value < -1e-9:
        raise NumericalError("negative decay prefactor", payload={"q": value, "start": start})
    return value


def eigen_clustering(
    q: QuasipotentialLike,
    epsilon: float,
    eigenvalues: NDArray[np.complex128] | None = None,
) -> int:
    """
    Number of eigenvalues of B farther than ``epsilon`` from 1/Ω.

    The whole spectrum must sit in the open right half-plane.
    """
    if epsilon <= 0.0:
        raise DomainError(f"epsilon must be positive, got {epsilon!r}")
    if isinstance(q, ExactAtomOperator) or (isinstance(q, Quasipotential) and q.structurally_nilpotent):
        return 0
    if eigenvalues is None:
        eigenvalues = linalg.eigvals(q.B.entries)
    if np.min(eigenvalues.real) <= 0.0:
        raise NumericalError(
            "spectrum of B leaves the open right half-plane",
            payload={"min_real_part": float(np.min(eigenvalues.real))},
        )
    return int(np.count_nonzero(np.abs(eigenvalues - 1.0 / q.omega) > epsilon))
