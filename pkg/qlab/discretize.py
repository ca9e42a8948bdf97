"""
Domains, midpoint grids and dense Nyström discretizations of the truncated jump operator.
"""

import logging
import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from qlab.errors import ConfigError, DomainError, MeasureError
from qlab.measures import Atoms, LevyMeasure

logger = logging.getLogger(__name__)

# Relative slack under which a norm counts as reaching Ω.
NORM_TOLERANCE = 1e-12
# Interpolation weights this close to a node snap onto it.
SNAP_TOLERANCE = 1e-9
DEFAULT_PROBES = 4000
PROBES_PER_NODE = 10


@dataclass(frozen=True)
class Domain:
    """
    Finite union of disjoint closed segments a₁ < b₁ < a₂ < … < b_n.
    """

    segments: tuple[tuple[float, float], ...]

    def __post_init__(self):
        segments = tuple((float(a), float(b)) for a, b in self.segments)
        if not segments:
            raise DomainError("a domain needs at least one segment")
        edges = [v for segment in segments for v in segment]
        if not all(math.isfinite(v) for v in edges):
            raise DomainError("domain segments must be finite", payload={"segments": [list(s) for s in segments]})
        if any(lo >= hi for lo, hi in zip(edges[:-1], edges[1:])):
            raise DomainError(
                "domain segments must interleave strictly: a1 < b1 < a2 < b2 < ...",
                payload={"segments": [list(s) for s in segments]},
            )
        object.__setattr__(self, "segments", segments)

    @classmethod
    def interval(cls, lo: float, hi: float) -> "Domain":
        return cls(((lo, hi),))

    @property
    def lo(self) -> float:
        return self.segments[0][0]

    @property
    def hi(self) -> float:
        return self.segments[-1][1]

    @property
    def span(self) -> float:
        return self.hi - self.lo

    @property
    def length(self) -> float:
        return sum(b - a for a, b in self.segments)

    def contains(self, x: ArrayLike) -> NDArray[np.bool_]:
        """
        Membership in the closed set Δ.
        """
        x = np.asarray(x, dtype=float)
        inside = np.zeros(x.shape, dtype=bool)
        for a, b in self.segments:
            inside |= (x >= a) & (x <= b)
        return inside

    def segment_of(self, x: float) -> int:
        """
        :return: Index of the segment containing ``x``, or -1.
        :rtype: int
        """
        for k, (a, b) in enumerate(self.segments):
            if a <= x <= b:
                return k
        return -1

    def to_list(self) -> list[list[float]]:
        return [[a, b] for a, b in self.segments]


@dataclass(frozen=True, eq=False)
class Grid:
    """
    Composite midpoint nodes over a :class:`Domain`.
    """

    domain: Domain
    nodes: NDArray[np.float64] = field(repr=False)
    weights: NDArray[np.float64] = field(repr=False)
    segment_index: NDArray[np.int64] = field(repr=False)

    @property
    def n(self) -> int:
        return int(self.nodes.size)

    def nearest_node(self, x: float) -> int:
        """
        Index of the node nearest to ``x``; ``x`` must lie in the closed domain.
        """
        if not bool(self.domain.contains(x)):
            raise DomainError(f"point {x!r} lies outside the domain", payload={"point": x})
        return int(np.argmin(np.abs(self.nodes - x)))

    def cell_edges(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        half = 0.5 * self.weights
        return self.nodes - half, self.nodes + half


class OperatorRole(str, Enum):
    T = "T"
    L = "L"
    B = "B"


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """
    Dense discretization of T, L_Δ or B on a :class:`Grid`, tagged with the Ω used to build it.
    """

    entries: NDArray[np.float64] = field(repr=False)
    grid: Grid
    role: OperatorRole
    omega: float

    def __post_init__(self):
        self.entries.flags.writeable = False

    @property
    def n(self) -> int:
        return self.grid.n

    def row_sums(self) -> NDArray[np.float64]:
        return self.entries.sum(axis=1)


def _allocate_nodes(lengths: Sequence[float], n_total: int) -> list[int]:
    total = sum(lengths)
    quotas = [n_total * length / total for length in lengths]
    counts = [max(1, math.floor(q)) for q in quotas]
    while sum(counts) > n_total:
        surplus = [c - q if c > 1 else -math.inf for c, q in zip(counts, quotas)]
        counts[int(np.argmax(surplus))] -= 1
    while sum(counts) < n_total:
        deficit = [q - c for c, q in zip(counts, quotas)]
        counts[int(np.argmax(deficit))] += 1
    return counts


def build_grid(d: Domain, n_total: int) -> Grid:
    """
    Midpoint grid with nodes shared out by segment length (largest remainder, at least one each).

    :param d: The domain.
    :type d: Domain

    :param n_total: Total number of nodes.
    :type n_total: int

    :return: The grid.
    :rtype: Grid
    """
    if n_total < len(d.segments):
        raise ConfigError(
            f"grid needs at least one node per segment: n={n_total} < {len(d.segments)} segments",
            payload={"key": "grid.n", "n": n_total},
        )
    counts = _allocate_nodes([b - a for a, b in d.segments], n_total)

    nodes, weights, index = [], [], []
    for k, ((a, b), count) in enumerate(zip(d.segments, counts)):
        h = (b - a) / count
        nodes.append(a + (np.arange(count) + 0.5) * h)
        weights.append(np.full(count, h))
        index.append(np.full(count, k, dtype=np.int64))

    grid = Grid(d, np.concatenate(nodes), np.concatenate(weights), np.concatenate(index))
    for array in (grid.nodes, grid.weights, grid.segment_index):
        array.flags.writeable = False
    return grid


def _probe_points(m: LevyMeasure, d: Domain, n_probe: int) -> NDArray[np.float64]:
    points = []
    for (a, b), count in zip(d.segments, _allocate_nodes([b - a for a, b in d.segments], max(n_probe, len(d.segments)))):
        points.append(np.linspace(a, b, count + 1))
        points.append([0.5 * (a + b)])
    # the covered atom mass jumps exactly where an atom lands on a segment edge
    for pos, _ in m.atoms:
        for a, b in d.segments:
            points.append([a - pos, b - pos])
    probes = np.unique(np.concatenate(points))
    return probes[d.contains(probes)]


def covered_mass(m: LevyMeasure, d: Domain, x: ArrayLike) -> NDArray[np.float64]:
    """
    ν(Δ − x): the jump mass that keeps a path started at ``x`` inside Δ.
    """
    x = np.asarray(x, dtype=float)
    mass = np.zeros(x.shape)
    for a, b in d.segments:
        mass += m.mass_between(a - x, b - x)
    return np.minimum(mass, m.total_mass)


def probe_count(grid_nodes: int | None = None) -> int:
    """
    Probes for the ‖T‖ search: at least ten per grid node, never fewer than the default.
    """
    if grid_nodes is None:
        return DEFAULT_PROBES
    return max(DEFAULT_PROBES, PROBES_PER_NODE * int(grid_nodes))


def t_norm(m: LevyMeasure, d: Domain, n_probe: int | None = None, grid_nodes: int | None = None) -> float:
    """
    ‖T‖ = sup_{x∈Δ} ν(Δ − x), maximized over a probe grid plus segment endpoints.

    The per-point mass is exact, so only the location of the supremum is approximate.

    :param n_probe: Explicit probe count; overrides ``grid_nodes``.
    :type n_probe: int | None

    :param grid_nodes: Size of the discretization the norm is checked for; sets the probe count
        through :func:`probe_count`.
    :type grid_nodes: int | None
    """
    probes = _probe_points(m, d, probe_count(grid_nodes) if n_probe is None else n_probe)
    mass = covered_mass(m, d, probes)
    best = int(np.argmax(mass))
    logger.debug("t_norm=%.12g attained near x=%.6g over %d probes", mass[best], probes[best], probes.size)
    return float(mass[best])


def condition_status(
    m: LevyMeasure,
    d: Domain,
    norm: float | None = None,
    grid_nodes: int | None = None,
) -> str:
    """
    ``"neumann"`` when ‖T‖ < Ω, ``"nilpotent"`` when that fails for positive atoms only,
    ``"violated"`` otherwise.
    """
    norm = t_norm(m, d, grid_nodes=grid_nodes) if norm is None else norm
    if norm < m.total_mass * (1.0 - NORM_TOLERANCE):
        return "neumann"
    if isinstance(m, Atoms) and m.all_positive():
        return "nilpotent"
    return "violated"


def _density_rows(density, nodes: NDArray[np.float64], weights: NDArray[np.float64], rows: slice) -> NDArray[np.float64]:
    return density(nodes[None, :] - nodes[rows, None]) * weights[None, :]


def assemble_atom_shift(atoms: Iterable[tuple[float, float]], g: Grid) -> NDArray[np.float64]:
    """
    Grid embedding of f ↦ Σ σ_k f(x + ν_k).

    A shifted node is spread over its two neighbours in the same segment by linear interpolation
    and clamped to the end nodes of that segment; shifts that leave Δ contribute nothing.
    """
    n = g.n
    matrix = np.zeros((n, n))
    starts = np.searchsorted(g.segment_index, np.arange(len(g.domain.segments)), side="left")
    stops = np.searchsorted(g.segment_index, np.arange(len(g.domain.segments)), side="right")

    for pos, weight in atoms:
        targets = g.nodes + pos
        for i, y in enumerate(targets):
            k = g.domain.segment_of(float(y))
            if k < 0:
                continue
            first, last = int(starts[k]), int(stops[k]) - 1
            seg_nodes = g.nodes[first : last + 1]
            if y <= seg_nodes[0] or first == last:
                matrix[i, first] += weight
                continue
            if y >= seg_nodes[-1]:
                matrix[i, last] += weight
                continue
            j = first + int(np.searchsorted(seg_nodes, y, side="right")) - 1
            theta = (y - g.nodes[j]) / (g.nodes[j + 1] - g.nodes[j])
            if theta < SNAP_TOLERANCE:
                matrix[i, j] += weight
            elif theta > 1.0 - SNAP_TOLERANCE:
                matrix[i, j + 1] += weight
            else:
                matrix[i, j] += weight * (1.0 - theta)
                matrix[i, j + 1] += weight * theta
    return matrix


def assemble_T(m: LevyMeasure, g: Grid, threads: int | None = None) -> OperatorMatrix:
    """
    Nyström matrix T[i, j] = w_j ν′(y_j − x_i), plus interpolated atom shifts for mixtures.

    :param m: Measure with a continuous part.
    :type m: LevyMeasure

    :param g: The grid.
    :type g: Grid

    :param threads: Worker threads for row blocks. Every entry is computed independently, so the
        result does not depend on the number of workers.
    :type threads: int | None

    :return: Matrix with role ``T``.
    :rtype: OperatorMatrix
    """
    if not m.has_continuous_part:
        raise MeasureError(
            "pure-atom measures have no Nyström matrix; use exact atom engine",
            payload={"measure": repr(m)},
        )
    n = g.n
    threads = max(1, threads or 1)
    blocks = [slice(lo, min(lo + max(1, n // threads), n)) for lo in range(0, n, max(1, n // threads))]

    if threads == 1:
        entries = _density_rows(m.density, g.nodes, g.weights, slice(0, n))
    else:
        entries = np.empty((n, n))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for rows, part in zip(blocks, pool.map(lambda s: _density_rows(m.density, g.nodes, g.weights, s), blocks)):
                entries[rows] = part

    if m.atoms:
        entries = entries + assemble_atom_shift(m.atoms, g)
    return OperatorMatrix(entries, g, OperatorRole.T, m.total_mass)


def assemble_L(m: LevyMeasure, g: Grid, threads: int | None = None) -> OperatorMatrix:
    """
    L_Δ = −Ω·I + T.
    """
    t = assemble_T(m, g, threads)
    entries = t.entries - m.total_mass * np.eye(g.n)
    return OperatorMatrix(entries, g, OperatorRole.L, m.total_mass)


def shift_operator(m: Atoms, g: Grid) -> OperatorMatrix:
    """
    T for a pure-atom measure embedded on a grid by :func:`assemble_atom_shift`.
    """
    return OperatorMatrix(assemble_atom_shift(m.atoms, g), g, OperatorRole.T, m.total_mass)


def generator_from(t: OperatorMatrix) -> OperatorMatrix:
    if t.role is not OperatorRole.T:
        raise DomainError(f"expected a T matrix, got role {t.role.value}")
    return OperatorMatrix(t.entries - t.omega * np.eye(t.n), t.grid, OperatorRole.L, t.omega)
