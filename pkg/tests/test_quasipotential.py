import math

import numpy as np
import pytest

from qlab.discretize import Domain, OperatorMatrix, OperatorRole, assemble_L, assemble_T, build_grid, shift_operator
from qlab.errors import ConditionViolatedError, DomainError, MeasureError
from qlab.exact_atoms import ExactAtomOperator, apply_T_power, neumann_T1_exact, nilpotency_index
from qlab.measures import Atoms, BilateralExponential
from qlab.quasipotential import (
    Condition,
    build_B,
    is_structurally_nilpotent,
    laplace_survival,
    mean_exit_time,
    neumann_partial_sum,
    phi_kernel,
    radon_modulus,
    survival_curve_semigroup,
    survival_semigroup,
    talbot_invert,
)


def _matrix(entries, omega, n=None):
    entries = np.asarray(entries, dtype=float)
    grid = build_grid(Domain.interval(0.0, 1.0), n or entries.shape[0])
    return OperatorMatrix(entries, grid, OperatorRole.T, omega)


@pytest.fixture(scope="module")
def unit_q():
    m = BilateralExponential(1.0)
    return build_B(assemble_T(m, build_grid(Domain.interval(0.0, 1.0), 100)))


@pytest.fixture
def unit_atom():
    return ExactAtomOperator(Atoms([(0.3, 1.0)]), Domain.interval(0.0, 1.0))


def test_B_inverts_minus_L(unit_q):
    L = assemble_L(BilateralExponential(1.0), unit_q.grid)
    product = -L.entries @ unit_q.B.entries
    np.testing.assert_allclose(product, np.eye(unit_q.grid.n), atol=1e-10)
    assert unit_q.residual <= 1e-10
    assert unit_q.condition is Condition.NEUMANN


def test_B_is_nonnegative_and_splits_into_resolvent(unit_q):
    assert np.all(unit_q.B.entries >= -1e-14)
    np.testing.assert_allclose(
        unit_q.B.entries, (np.eye(unit_q.grid.n) + unit_q.t1) / unit_q.omega, rtol=0, atol=1e-14
    )


def test_resolvent_kernel_is_scaled_by_weights(unit_q):
    np.testing.assert_allclose(unit_q.t1_kernel * unit_q.grid.weights[None, :], unit_q.t1, atol=1e-15)


def test_neumann_partial_sums_converge_geometrically(unit_q):
    T = unit_q.T
    ratio = float(np.max(T.row_sums())) / unit_q.omega
    assert ratio < 1.0

    def error(K):
        return float(np.max(np.abs(unit_q.t1 - neumann_partial_sum(T, unit_q.omega, K)).sum(axis=1)))

    for K in (5, 10, 15):
        assert error(K + 5) <= error(K) * ratio**5 * (1.0 + 1e-6)
    assert error(60) <= 1e-12


def test_two_sided_atoms_refuse_quasipotential():
    g = build_grid(Domain.interval(0.0, 1.0), 10)
    with pytest.raises(ConditionViolatedError) as excinfo:
        build_B(shift_operator(Atoms([(0.3, 1.0), (-0.3, 1.0)]), g))
    assert excinfo.value.exit_code == 2
    assert excinfo.value.payload["omega"] == 2.0


def test_dense_matrix_above_omega_is_violated():
    with pytest.raises(ConditionViolatedError):
        build_B(_matrix(np.full((3, 3), 1.0), omega=2.0))


def test_nilpotent_matrix_at_omega_is_accepted():
    q = build_B(_matrix([[0.0, 1.0], [0.0, 0.0]], omega=1.0))
    assert q.condition is Condition.NILPOTENT
    assert q.structurally_nilpotent
    assert q.quasi_nilpotent
    np.testing.assert_allclose(q.B.entries, [[1.0, 1.0], [0.0, 1.0]], atol=1e-14)


def test_zero_operator_is_not_quasi_nilpotent():
    q = build_B(_matrix(np.zeros((4, 4)), omega=2.0))
    assert q.condition is Condition.NEUMANN
    assert q.structurally_nilpotent
    assert not q.quasi_nilpotent
    np.testing.assert_allclose(q.B.entries, 0.5 * np.eye(4))


@pytest.mark.parametrize(
    "entries,expected",
    [
        ([[0.0, 1.0], [0.0, 0.0]], True),
        ([[0.0, 1.0], [1.0, 0.0]], False),
        ([[0.5, 0.0], [0.0, 0.0]], False),
        ([[0.0, 1.0, 1.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]], True),
    ],
)
def test_structural_nilpotency(entries, expected):
    assert is_structurally_nilpotent(np.asarray(entries)) is expected


def test_build_B_refuses_non_T_roles(unit_q):
    with pytest.raises(DomainError):
        build_B(unit_q.B)


def test_norm_override_drives_the_condition():
    # a caller-supplied norm at or above Ω leaves only the nilpotent route open
    q = build_B(_matrix(np.zeros((3, 3)), omega=2.0), norm=2.0)
    assert q.condition is Condition.NILPOTENT
    assert not q.quasi_nilpotent


@pytest.mark.parametrize(
    "atoms,expected",
    [
        ([(0.3, 1.0)], 4),
        ([(0.6, 1.0)], 2),
        ([(1.5, 1.0)], 1),
        ([(0.25, 1.0)], 5),
        ([(0.3, 0.5), (0.45, 0.5)], 4),
    ],
)
def test_nilpotency_index(atoms, expected):
    assert nilpotency_index(Atoms(atoms), Domain.interval(0.0, 1.0)) == expected


def test_nilpotency_index_bound_on_split_domain():
    d = Domain(((0.0, 1.0), (1.2, 2.0)))
    m = Atoms([(0.5, 1.0)])
    assert nilpotency_index(m, d) <= math.floor(d.span / 0.5) + 1
    # 0 → 0.5 → 1.0 → 1.5 → 2.0 stays inside, the next jump leaves
    assert ExactAtomOperator(m, d).power_coefficients(0.0) == [1.0, 1.0, 1.0, 1.0, 1.0]


def test_exact_engine_refuses_nonpositive_atoms():
    with pytest.raises(MeasureError, match="nilpotency not guaranteed"):
        ExactAtomOperator([(0.3, 1.0), (-0.1, 1.0)], Domain.interval(0.0, 1.0))


def test_exact_atom_identities(unit_atom):
    assert unit_atom.nilpotency_index == 4
    assert unit_atom.power_coefficients(0.0) == [1.0, 1.0, 1.0, 1.0]
    assert mean_exit_time(unit_atom, 0.0) == pytest.approx(4.0, rel=1e-14)
    assert laplace_survival(unit_atom, 1.0, 0.0) == pytest.approx(0.9375, rel=1e-14)
    assert survival_semigroup(unit_atom, 1.0, 0.0) == pytest.approx(math.exp(-1.0) * 8.0 / 3.0, rel=1e-14)


def test_exact_atom_powers(unit_atom):
    assert apply_T_power(unit_atom, lambda y: y, 0.0, 2) == pytest.approx(0.6)
    assert apply_T_power(unit_atom, lambda y: 1.0, 0.0, 4) == 0.0
    ((position, weight),) = unit_atom.frontier(0.5, 1).items()
    assert position == pytest.approx(0.8)
    assert weight == 1.0
    # T₁·1(0) = 1 + 1 + 1 for the three jumps that stay inside
    assert neumann_T1_exact(unit_atom, lambda y: 1.0, 0.0) == pytest.approx(3.0)
    with pytest.raises(DomainError):
        unit_atom.apply_power(lambda y: 1.0, 1.5, 1)


def test_exact_and_grid_engines_agree_on_aligned_atoms():
    d = Domain.interval(0.0, 1.0)
    m = Atoms([(0.25, 1.0)])
    grid_q = build_B(shift_operator(m, build_grid(d, 4)))
    exact = ExactAtomOperator(m, d)
    assert mean_exit_time(grid_q, 0.125) == pytest.approx(4.0, rel=1e-12)
    assert mean_exit_time(exact, 0.125) == pytest.approx(4.0, rel=1e-14)
    # the closed domain keeps 1.0 inside, so one more jump is needed from the left edge
    assert mean_exit_time(exact, 0.0) == pytest.approx(5.0, rel=1e-14)


def test_laplace_at_zero_is_mean_exit(unit_q):
    assert laplace_survival(unit_q, 0.0, 0.3) == pytest.approx(mean_exit_time(unit_q, 0.3))
    with pytest.raises(DomainError):
        laplace_survival(unit_q, -1.0, 0.3)


def test_mean_exit_time_from_ones_image(unit_q):
    i = unit_q.grid.nearest_node(0.5)
    expected = (1.0 + unit_q.t1[i].sum()) / unit_q.omega
    assert mean_exit_time(unit_q, 0.5) == pytest.approx(expected, rel=1e-12)


def test_semigroup_starts_at_one_and_decreases(unit_q):
    times = np.linspace(0.0, 5.0, 51)
    curve = survival_curve_semigroup(unit_q.T, times, 0.5)
    assert curve[0] == 1.0
    assert np.all(np.diff(curve) <= 1e-10)
    assert survival_semigroup(unit_q.T, 0.0, 0.5) == 1.0
    with pytest.raises(DomainError):
        survival_semigroup(unit_q.T, -1.0, 0.5)


def test_stepped_sweep_matches_pointwise_semigroup(unit_q):
    times = np.linspace(0.0, 4.0, 9)
    swept = survival_curve_semigroup(unit_q.T, times, 0.2)
    pointwise = [survival_semigroup(unit_q.T, t, 0.2) for t in times]
    np.testing.assert_allclose(swept, pointwise, rtol=1e-8, atol=1e-12)


def test_semigroup_without_jumps_inside_is_pure_killing():
    q = build_B(_matrix(np.zeros((3, 3)), omega=2.0))
    assert survival_semigroup(q.T, 1.5, 0.5) == pytest.approx(math.exp(-3.0), rel=1e-10)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_talbot_inversion_of_grid_laplace(unit_q, t):
    start = 0.3
    inverted = talbot_invert(lambda s: laplace_survival(unit_q, s, start), t)
    assert inverted == pytest.approx(survival_semigroup(unit_q.T, t, start), abs=1e-6)


@pytest.mark.parametrize("t", [0.5, 1.0, 3.0])
def test_talbot_inversion_of_exact_laplace(unit_atom, t):
    inverted = talbot_invert(lambda s: laplace_survival(unit_atom, s, 0.0), t)
    assert inverted == pytest.approx(survival_semigroup(unit_atom, t, 0.0), abs=1e-6)


def test_talbot_needs_positive_time():
    with pytest.raises(DomainError):
        talbot_invert(lambda s: 1.0 / (s + 1.0), 0.0)


def test_phi_kernel_is_cumulative(unit_q):
    assert phi_kernel(unit_q, 0.5, 0.0) == 0.0
    i = unit_q.grid.nearest_node(0.5)
    assert phi_kernel(unit_q, 0.5, 1.0) == pytest.approx(unit_q.t1[i].sum(), rel=1e-12)
    ys = np.linspace(0.0, 1.0, 21)
    values = [phi_kernel(unit_q, 0.5, y) for y in ys]
    assert np.all(np.diff(values) >= -1e-14)
    with pytest.raises(DomainError):
        phi_kernel(unit_q, 0.5, 1.5)


def test_radon_modulus_vanishes_for_continuous_kernel(unit_q):
    deltas = [0.2, 0.1, 0.05, 0.025]
    moduli = [radon_modulus(unit_q, delta) for delta in deltas]
    assert all(b < a for a, b in zip(moduli[:-1], moduli[1:]))
    assert moduli[-1] < 0.1 * float(np.max(unit_q.t1.sum(axis=1)))
    assert radon_modulus(unit_q, 0.0) == 0.0


def test_radon_modulus_stays_large_for_atom_shift():
    g = build_grid(Domain.interval(0.0, 1.0), 100)
    q = build_B(shift_operator(Atoms([(0.3, 1.0)]), g))
    assert radon_modulus(q, 0.02) >= 1.0
    with pytest.raises(DomainError):
        radon_modulus(q, -0.1)
