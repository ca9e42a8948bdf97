"""
Scenario configuration: JSON in, frozen dataclasses out.
"""

import json
import logging
import os
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from qlab.discretize import Domain
from qlab.errors import ConfigError, MeasureError
from qlab.measures import LevyMeasure, measure_to_dict, parse_measure
from qlab.streams import DEFAULT_BLOCK_SIZE

logger = logging.getLogger(__name__)

PIPELINES = ("spectral", "simulate", "exit-time", "table61", "validate")
SEED_ENV = "QLAB_SEED"
MIN_NODES = 10
MIN_PATHS = 1000
AUTO_TIME_POINTS = 301
SCENARIO_KEYS = ("run", "measure", "domain", "start", "grid", "mc", "diagnostics", "table", "threads", "output_dir")


@dataclass(frozen=True)
class GridConfig:
    n: int = 400

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "GridConfig":
        _reject_unknown(obj, ("n",), "grid")
        n = _integer(obj.get("n", cls.n), "grid.n")
        if n < MIN_NODES:
            raise ConfigError(f"grid.n must be at least {MIN_NODES}, got {n}", payload={"key": "grid.n"})
        return cls(n=n)


@dataclass(frozen=True)
class MonteCarloConfig:
    """
    ``time_grid`` is ``None`` for the automatic grid of 301 evenly spaced times on [0, horizon].
    """

    paths: int = 100_000
    horizon: float = 30.0
    seed: int = 0
    time_grid: tuple[float, ...] | None = None
    block_size: int = DEFAULT_BLOCK_SIZE

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "MonteCarloConfig":
        _reject_unknown(obj, ("paths", "horizon", "seed", "time_grid", "block_size"), "mc")
        paths = _integer(obj.get("paths", cls.paths), "mc.paths")
        if paths < MIN_PATHS:
            raise ConfigError(f"mc.paths must be at least {MIN_PATHS}, got {paths}", payload={"key": "mc.paths"})
        horizon = _number(obj.get("horizon", cls.horizon), "mc.horizon")
        if not horizon > 0.0:
            raise ConfigError(f"mc.horizon must be positive, got {horizon}", payload={"key": "mc.horizon"})
        block_size = _integer(obj.get("block_size", cls.block_size), "mc.block_size")
        if block_size < 1:
            raise ConfigError("mc.block_size must be positive", payload={"key": "mc.block_size"})

        raw_grid = obj.get("time_grid", "auto")
        time_grid = None
        if raw_grid != "auto":
            if not isinstance(raw_grid, list) or not raw_grid:
                raise ConfigError("mc.time_grid must be 'auto' or a list of times", payload={"key": "mc.time_grid"})
            time_grid = tuple(_number(t, "mc.time_grid") for t in raw_grid)
            if any(b < a for a, b in zip(time_grid[:-1], time_grid[1:])) or time_grid[0] < 0.0:
                raise ConfigError("mc.time_grid must be sorted and nonnegative", payload={"key": "mc.time_grid"})
            if time_grid[-1] > horizon:
                raise ConfigError("mc.time_grid extends beyond mc.horizon", payload={"key": "mc.time_grid"})

        return cls(
            paths=paths,
            horizon=horizon,
            seed=_integer(obj.get("seed", cls.seed), "mc.seed"),
            time_grid=time_grid,
            block_size=block_size,
        )

    def times(self) -> np.ndarray:
        if self.time_grid is None:
            return np.linspace(0.0, self.horizon, AUTO_TIME_POINTS)
        return np.asarray(self.time_grid, dtype=float)


@dataclass(frozen=True)
class DiagnosticsConfig:
    radon_deltas: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    cluster_epsilon: float = 0.05
    plateau_window: tuple[float, float] = (5.0, 15.0)
    fit_window: tuple[float, float] | None = None

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "DiagnosticsConfig":
        _reject_unknown(obj, ("radon_deltas", "cluster_epsilon", "plateau_window", "fit_window"), "diagnostics")
        deltas = tuple(_number(v, "diagnostics.radon_deltas") for v in obj.get("radon_deltas", cls.radon_deltas))
        epsilon = _number(obj.get("cluster_epsilon", cls.cluster_epsilon), "diagnostics.cluster_epsilon")
        if epsilon <= 0.0:
            raise ConfigError("diagnostics.cluster_epsilon must be positive", payload={"key": "diagnostics.cluster_epsilon"})
        return cls(
            radon_deltas=deltas,
            cluster_epsilon=epsilon,
            plateau_window=_window(obj.get("plateau_window", cls.plateau_window), "diagnostics.plateau_window"),
            fit_window=_window(obj["fit_window"], "diagnostics.fit_window") if obj.get("fit_window") else None,
        )


@dataclass(frozen=True)
class TableConfig:
    p: float = 1.0
    n: int = 400

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "TableConfig":
        _reject_unknown(obj, ("p", "n"), "table")
        p = _number(obj.get("p", cls.p), "table.p")
        if p <= 0.0:
            raise ConfigError("table.p must be positive", payload={"key": "table.p"})
        n = _integer(obj.get("n", cls.n), "table.n")
        if n < MIN_NODES:
            raise ConfigError(f"table.n must be at least {MIN_NODES}", payload={"key": "table.n"})
        return cls(p=p, n=n)


@dataclass(frozen=True)
class ScenarioConfig:
    """
    A validated scenario. ``measure`` and ``domain`` may be omitted only when ``run`` is ``["table61"]``.
    """

    run: tuple[str, ...]
    output_dir: Path
    measure: LevyMeasure | None = None
    domain: Domain | None = None
    start: float | None = None
    grid: GridConfig = field(default_factory=GridConfig)
    mc: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    table: TableConfig = field(default_factory=TableConfig)
    threads: int | None = None

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any], base_dir: Path | None = None) -> "ScenarioConfig":
        """
        :param obj: Decoded JSON document.
        :type obj: Mapping[str, Any]

        :param base_dir: Directory relative paths are resolved against (the config file's directory).
        :type base_dir: Path | None

        :return: The validated configuration.
        :rtype: ScenarioConfig
        """
        if not isinstance(obj, Mapping):
            raise ConfigError("scenario configuration must be a JSON object")
        _reject_unknown(obj, SCENARIO_KEYS)
        base_dir = base_dir or Path.cwd()
        run = _run_list(obj.get("run"))

        measure = domain = None
        needs_process = any(stage != "table61" for stage in run)
        if obj.get("measure") is not None or needs_process:
            if obj.get("measure") is None:
                raise ConfigError("missing key 'measure'", payload={"key": "measure"})
            try:
                measure = parse_measure(obj["measure"], base_dir)
            except ConfigError:
                raise
            except MeasureError as exc:
                raise ConfigError(f"invalid measure: {exc}", payload={"key": "measure", **exc.payload})
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid measure: {exc}", payload={"key": "measure"})
        if obj.get("domain") is not None or needs_process:
            domain = _domain(obj.get("domain"))

        start = obj.get("start")
        if start is not None:
            start = _number(start, "start")
            if domain is not None and not bool(domain.contains(start)):
                raise ConfigError(f"start {start} lies outside the domain", payload={"key": "start"})

        threads = obj.get("threads")
        if threads is not None:
            threads = _integer(threads, "threads")
            if threads < 1:
                raise ConfigError("threads must be positive", payload={"key": "threads"})

        output_dir = Path(obj.get("output_dir", "qlab-out"))
        if not output_dir.is_absolute():
            output_dir = base_dir / output_dir

        return cls(
            run=run,
            output_dir=output_dir,
            measure=measure,
            domain=domain,
            start=start,
            grid=GridConfig.from_dict(_section(obj, "grid")),
            mc=MonteCarloConfig.from_dict(_section(obj, "mc")),
            diagnostics=DiagnosticsConfig.from_dict(_section(obj, "diagnostics")),
            table=TableConfig.from_dict(_section(obj, "table")),
            threads=threads,
        )

    @property
    def start_point(self) -> float:
        """
        The start point, defaulting to the left end a₁ of the domain.
        """
        if self.domain is None:
            raise ConfigError("scenario has no domain", payload={"key": "domain"})
        return self.domain.lo if self.start is None else self.start

    def with_overrides(
        self,
        run: tuple[str, ...] | None = None,
        threads: int | None = None,
        output_dir: Path | None = None,
        seed: int | None = None,
    ) -> "ScenarioConfig":
        """
        Copy with command-line and environment overrides applied; ``None`` keeps the configured value.
        """
        changes: dict[str, Any] = {}
        if run is not None:
            changes["run"] = _run_list(list(run))
        if threads is not None:
            if threads < 1:
                raise ConfigError("--threads must be positive", payload={"key": "threads"})
            changes["threads"] = threads
        if output_dir is not None:
            changes["output_dir"] = Path(output_dir)
        if seed is not None:
            changes["mc"] = replace(self.mc, seed=seed)
        updated = replace(self, **changes)
        if any(stage != "table61" for stage in updated.run) and (updated.measure is None or updated.domain is None):
            raise ConfigError("pipelines other than table61 need 'measure' and 'domain'", payload={"key": "measure"})
        return updated

    def to_dict(self) -> dict[str, Any]:
        return {
            "run": list(self.run),
            "measure": measure_to_dict(self.measure) if self.measure is not None else None,
            "domain": self.domain.to_list() if self.domain is not None else None,
            "start": self.start_point if self.domain is not None else None,
            "grid": {"n": self.grid.n},
            "mc": {
                "paths": self.mc.paths,
                "horizon": self.mc.horizon,
                "seed": self.mc.seed,
                "time_grid": list(self.mc.time_grid) if self.mc.time_grid is not None else "auto",
                "block_size": self.mc.block_size,
            },
        }


def _reject_unknown(obj: Mapping[str, Any], allowed: tuple[str, ...], prefix: str | None = None) -> None:
    unknown = sorted(key for key in obj if key not in allowed)
    if unknown:
        key = unknown[0] if prefix is None else f"{prefix}.{unknown[0]}"
        raise ConfigError(f"unknown configuration key '{key}'", payload={"key": key, "allowed": list(allowed)})


def _section(obj: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    value = obj.get(key, {})
    if not isinstance(value, Mapping):
        raise ConfigError(f"'{key}' must be an object", payload={"key": key})
    return value


def _number(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {value!r}", payload={"key": key})
    return float(value)


def _integer(value: Any, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{key}' must be an integer, got {value!r}", payload={"key": key})
    return value


def _window(value: Any, key: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"'{key}' must be a pair [lo, hi]", payload={"key": key})
    lo, hi = (_number(v, key) for v in value)
    if not lo < hi:
        raise ConfigError(f"'{key}' must satisfy lo < hi", payload={"key": key})
    return lo, hi


def _run_list(value: Any) -> tuple[str, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError("'run' must be a nonempty list of pipelines", payload={"key": "run", "choices": list(PIPELINES)})
    unknown = [stage for stage in value if stage not in PIPELINES]
    if unknown:
        raise ConfigError(f"unknown pipelines {unknown}", payload={"key": "run", "choices": list(PIPELINES)})
    # dedupe, keep order
    return tuple(dict.fromkeys(value))


def _domain(value: Any) -> Domain:
    if not isinstance(value, list) or not value:
        raise ConfigError("'domain' must be a nonempty list of [a, b] segments", payload={"key": "domain"})
    try:
        segments = tuple((_number(a, "domain"), _number(b, "domain")) for a, b in value)
        return Domain(segments)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid domain: {exc}", payload={"key": "domain"})


def load_config(path: str | os.PathLike, environ: Mapping[str, str] | None = None) -> ScenarioConfig:
    """
    Read and validate a scenario file, then apply the ``QLAB_SEED`` override.

    :param path: JSON configuration file.
    :type path: str | os.PathLike

    :param environ: Environment to read overrides from; defaults to ``os.environ``.
    :type environ: Mapping[str, str] | None

    :return: The validated configuration.
    :rtype: ScenarioConfig
    """
    path = Path(path)
    environ = os.environ if environ is None else environ
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration '{path}': {exc}", payload={"file": str(path)})
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in '{path}': {exc}", payload={"file": str(path), "line": exc.lineno})

    cfg = ScenarioConfig.from_dict(document, base_dir=path.resolve().parent)
    seed = environ.get(SEED_ENV)
    if seed is not None:
        try:
            value = int(seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {seed!r}", payload={"key": SEED_ENV})
        cfg = cfg.with_overrides(seed=value)
        logger.info("Seed overridden by %s=%s", SEED_ENV, seed)
    return cfg
