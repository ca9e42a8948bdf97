"""
Monte Carlo oracle: compound Poisson paths killed on leaving Δ.

Between jumps a centered compound Poisson path does not move, so exits are checked only at jump
epochs. Paths still inside Δ at the horizon are censored.
"""

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from qlab.discretize import Domain
from qlab.errors import ConfigError, DomainError, NumericalError
from qlab.measures import LevyMeasure, sample_jumps
from qlab.streams import DEFAULT_BLOCK_SIZE, PathStream, block_generator, path_blocks

logger = logging.getLogger(__name__)

FIT_SURVIVAL_RANGE = (1e-3, 1e-1)
FIT_MIN_COUNT = 50
FIT_MIN_POINTS = 5


@dataclass(frozen=True)
class ExitRecord:
    exit_time: float | None
    n_jumps: int
    exit_position: float | None
    first_jump_time: float = math.inf

    @property
    def censored(self) -> bool:
        return self.exit_time is None


@dataclass(frozen=True, eq=False)
class ExitRecords:
    """
    Columnar batch of exit records; censored paths carry NaN exit time and position.
    """

    exit_time: NDArray[np.float64] = field(repr=False)
    n_jumps: NDArray[np.int64] = field(repr=False)
    exit_position: NDArray[np.float64] = field(repr=False)
    first_jump_time: NDArray[np.float64] = field(repr=False)
    horizon: float
    start: float

    @property
    def n_paths(self) -> int:
        return int(self.exit_time.size)

    @property
    def censored(self) -> NDArray[np.bool_]:
        return np.isnan(self.exit_time)

    @property
    def n_censored(self) -> int:
        return int(np.count_nonzero(self.censored))

    def record(self, i: int) -> ExitRecord:
        exit_time = float(self.exit_time[i])
        if math.isnan(exit_time):
            return ExitRecord(None, int(self.n_jumps[i]), None, float(self.first_jump_time[i]))
        return ExitRecord(exit_time, int(self.n_jumps[i]), float(self.exit_position[i]), float(self.first_jump_time[i]))


def _check_start(d: Domain, start: float, horizon: float) -> None:
    if not bool(d.contains(start)):
        raise DomainError(f"start {start!r} lies outside the closed domain", payload={"start": start})
    if not horizon > 0.0:
        raise DomainError(f"horizon must be positive, got {horizon!r}")


def simulate_exit(
    m: LevyMeasure,
    d: Domain,
    start: float,
    horizon: float,
    stream: PathStream,
) -> ExitRecord:
    """
    One path: exponential(Ω) waits, inverse-CDF jumps, exit at the first landing outside Δ.

    :param m: Jump measure.
    :type m: LevyMeasure

    :param d: Domain; membership uses closed segments.
    :type d: Domain

    :param start: Start point in Δ.
    :type start: float

    :param horizon: Censoring time.
    :type horizon: float

    :param stream: Stream of this path, as handed out by :func:`~qlab.streams.path_stream`.
    :type stream: PathStream

    :return: The exit record.
    :rtype: ExitRecord
    """
    _check_start(d, start, horizon)
    scale = 1.0 / m.total_mass
    time, position, jumps = 0.0, float(start), 0
    first_jump = math.inf
    while True:
        wait, uniform = stream.step(scale)
        time += wait
        if time > horizon:
            return ExitRecord(None, jumps, None, first_jump)
        if jumps == 0:
            first_jump = time
        position += float(sample_jumps(m, np.array([uniform]))[0])
        jumps += 1
        if not bool(d.contains(position)):
            return ExitRecord(time, jumps, position, first_jump)


def _simulate_block(
    m: LevyMeasure,
    d: Domain,
    start: float,
    horizon: float,
    seed: int,
    block: int,
    size: int,
    block_size: int,
) -> tuple[NDArray[np.float64], NDArray[np.int64], NDArray[np.float64], NDArray[np.float64]]:
    rng = block_generator(seed, block)
    scale = 1.0 / m.total_mass

    time = np.zeros(size)
    position = np.full(size, float(start))
    jumps = np.zeros(size, dtype=np.int64)
    exit_time = np.full(size, np.nan)
    exit_position = np.full(size, np.nan)
    first_jump = np.full(size, np.inf)
    alive = np.ones(size, dtype=bool)

    while np.any(alive):
        # a full block of draws per step, so path i always consumes the same stream entries
        waits = rng.exponential(scale, block_size)[:size]
        uniforms = rng.random(block_size)[:size]

        time[alive] += waits[alive]
        alive &= time <= horizon
        first = alive & (jumps == 0)
        first_jump[first] = time[first]

        position[alive] += sample_jumps(m, uniforms[alive])
        jumps[alive] += 1

        left = alive & ~d.contains(position)
        exit_time[left] = time[left]
        exit_position[left] = position[left]
        alive &= ~left

    return exit_time, jumps, exit_position, first_jump


def simulate_exits(
    m: LevyMeasure,
    d: Domain,
    start: float,
    horizon: float,
    n_paths: int,
    seed: int,
    threads: int | None = None,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> ExitRecords:
    """
    Batch simulator over ``n_paths`` paths split in fixed blocks with their own streams.

    Results depend on ``(seed, path index, block_size)`` only; ``threads`` changes the wall time.
    """
    _check_start(d, start, horizon)
    if n_paths < 1:
        raise ConfigError(f"number of paths must be positive, got {n_paths}", payload={"key": "mc.paths"})
    blocks = path_blocks(n_paths, block_size)

    def run(spec: tuple[int, int, int]):
        block, _, size = spec
        return _simulate_block(m, d, start, horizon, seed, block, size, block_size)

    workers = max(1, threads or 1)
    if workers == 1:
        parts = [run(spec) for spec in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))

    exit_time, jumps, exit_position, first_jump = (np.concatenate(column) for column in zip(*parts))
    records = ExitRecords(exit_time, jumps, exit_position, first_jump, float(horizon), float(start))
    logger.info(
        "Simulated %d paths in %d blocks (%d censored at horizon %g)",
        n_paths,
        len(blocks),
        records.n_censored,
        horizon,
    )
    return records


@dataclass(frozen=True)
class DecayFit:
    rate: float
    stderr: float
    window: tuple[float, float]
    n_points: int


@dataclass(frozen=True, eq=False)
class SurvivalEstimate:
    time_grid: NDArray[np.float64] = field(repr=False)
    survival: NDArray[np.float64] = field(repr=False)
    stderr: NDArray[np.float64] = field(repr=False)
    counts: NDArray[np.int64] = field(repr=False)
    n_paths: int
    horizon: float
    fit: DecayFit | None = None

    @property
    def fitted_rate(self) -> float | None:
        return self.fit.rate if self.fit else None

    @property
    def fitted_rate_stderr(self) -> float | None:
        return self.fit.stderr if self.fit else None

    @property
    def fit_window(self) -> tuple[float, float] | None:
        return self.fit.window if self.fit else None


def survival_curve(records: ExitRecords, time_grid: Sequence[float]) -> SurvivalEstimate:
    """
    Empirical survival P(T_Δ > t) on ``time_grid``; censored paths survive every t up to the horizon.

    :param records: Simulated records.
    :type records: ExitRecords

    :param time_grid: Sorted nonnegative times, none past the horizon.
    :type time_grid: Sequence[float]

    :return: Survival estimate with binomial standard errors.
    :rtype: SurvivalEstimate
    """
    times = np.asarray(time_grid, dtype=float)
    if times.size == 0 or np.any(np.diff(times) < 0.0) or times[0] < 0.0:
        raise ConfigError("time grid must be sorted, nonnegative and nonempty", payload={"key": "mc.time_grid"})
    if times[-1] > records.horizon:
        raise ConfigError(
            f"time grid reaches {times[-1]} beyond the horizon {records.horizon}; survival is not extrapolated",
            payload={"key": "mc.time_grid"},
        )
    exits = np.sort(np.where(records.censored, np.inf, records.exit_time))
    n = records.n_paths
    counts = n - np.searchsorted(exits, times, side="right")
    survival = counts / n
    stderr = np.sqrt(survival * (1.0 - survival) / n)
    return SurvivalEstimate(times, survival, stderr, counts.astype(np.int64), n, records.horizon)


def fit_decay_rate(s: SurvivalEstimate, window: tuple[float, float] | None = None) -> DecayFit:
    """
    Weighted least squares of log S(t) = a − r·t with inverse-variance weights n·S/(1 − S).

    Without ``window`` the fit uses the points where S ∈ [1e−3, 1e−1]. Every point used needs at
    least 50 surviving paths, and at least 5 points are required.
    """
    times, survival, counts = s.time_grid, s.survival, s.counts
    usable = (counts >= FIT_MIN_COUNT) & (survival < 1.0)
    if window is None:
        lo, hi = FIT_SURVIVAL_RANGE
        usable &= (survival >= lo) & (survival <= hi)
    else:
        usable &= (times >= window[0]) & (times <= window[1])

    if np.count_nonzero(usable) < FIT_MIN_POINTS:
        raise NumericalError(
            "window underpopulated: simulate more paths or lower t_hi",
            payload={"points": int(np.count_nonzero(usable)), "window": list(window) if window else None},
        )
    if window is None and usable[-1]:
        logger.warning("Automatic fit window reaches the end of the time grid at t=%g", times[-1])

    t = times[usable]
    y = np.log(survival[usable])
    weights = s.n_paths * survival[usable] / (1.0 - survival[usable])
    design = np.column_stack([np.ones_like(t), -t])
    normal = design.T @ (weights[:, None] * design)
    coefficients = np.linalg.solve(normal, design.T @ (weights * y))
    covariance = np.linalg.inv(normal)
    fit = DecayFit(
        rate=float(coefficients[1]),
        stderr=float(math.sqrt(covariance[1, 1])),
        window=(float(t[0]), float(t[-1])),
        n_points=int(t.size),
    )
    logger.debug("Fitted decay rate %.6g ± %.2g on [%g, %g]", fit.rate, fit.stderr, *fit.window)
    return fit


@dataclass(frozen=True)
class ZeroJumpCheck:
    t: float
    empirical: float
    exact: float
    sigma: float

    @property
    def within_three_sigma(self) -> bool:
        return abs(self.empirical - self.exact) <= 3.0 * self.sigma


def zero_jump_check(records: ExitRecords, t: float, omega: float) -> ZeroJumpCheck:
    """
    Fraction of paths without a jump by ``t`` against P(no jump) = e^{−Ωt}.
    """
    if t > records.horizon:
        raise ConfigError(f"zero-jump check time {t} exceeds the horizon {records.horizon}")
    exact = math.exp(-omega * t)
    empirical = float(np.mean(records.first_jump_time > t))
    sigma = math.sqrt(exact * (1.0 - exact) / records.n_paths)
    return ZeroJumpCheck(t=t, empirical=empirical, exact=exact, sigma=sigma)


def mean_exit_from_records(records: ExitRecords) -> tuple[float, int]:
    """
    :return: Mean exit time over uncensored paths and their number.
    :rtype: tuple[float, int]
    """
    exited = records.exit_time[~records.censored]
    if exited.size == 0:
        raise NumericalError("no path exited before the horizon")
    if records.n_censored:
        logger.warning("%d of %d paths censored; mean exit time is biased low", records.n_censored, records.n_paths)
    return float(np.mean(exited)), int(exited.size)


def prefactor_plateau(s: SurvivalEstimate, mu1: float, window: tuple[float, float] = (5.0, 15.0)) -> float:
    """
    Mean of S(t)·e^{t/μ₁} over ``window``: the Monte Carlo reading of the decay prefactor q.
    """
    inside = (s.time_grid >= window[0]) & (s.time_grid <= window[1]) & (s.survival > 0.0)
    if not np.any(inside):
        raise NumericalError("no positive survival estimate inside the plateau window", payload={"window": list(window)})
    return float(np.mean(s.survival[inside] * np.exp(s.time_grid[inside] / mu1)))
