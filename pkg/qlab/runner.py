"""
Scenario orchestration: builds the operators once, runs the requested pipelines under stage
telemetry and writes the reports.
"""

import logging
import math
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

from qlab import __version__
from qlab.bilateral_example import reproduce_table
from qlab.config import ScenarioConfig
from qlab.discretize import assemble_T, build_grid, condition_status, shift_operator, t_norm
from qlab.errors import ConditionViolatedError, NumericalError, QlabError
from qlab.exact_atoms import ExactAtomOperator
from qlab.measures import Atoms
from qlab.quasipotential import (
    Quasipotential,
    QuasipotentialLike,
    build_B,
    mean_exit_time,
    radon_modulus,
    survival_curve_semigroup,
)
from qlab.reports import write_columns, write_error, write_json, write_summary
from qlab.simulate import (
    ExitRecords,
    SurvivalEstimate,
    fit_decay_rate,
    mean_exit_from_records,
    prefactor_plateau,
    simulate_exits,
    survival_curve,
    zero_jump_check,
)
from qlab.spectral import SpectralSummary, decay_rate, eigen_clustering, prefactor_q, principal_eigen
from qlab.telemetry import StageMonitor, default_monitor

logger = logging.getLogger(__name__)

RATE_TOLERANCE = 0.05
PREFACTOR_TOLERANCE = 0.20
MEAN_EXIT_TOLERANCE = 0.02
ZERO_JUMP_TIME = 1.0


def _relative(a: float | None, b: float | None) -> float | None:
    if a is None or b is None or b == 0.0:
        return None
    return abs(a - b) / abs(b)


class ScenarioRunner:
    """
    Runs one scenario. Operators and simulations are built lazily and shared between pipelines.
    """

    def __init__(self, config: ScenarioConfig, monitor: StageMonitor | None = None):
        """
        :param config: Validated scenario.
        :type config: ScenarioConfig

        :param monitor: Stage telemetry; defaults to the stock collectors on a fresh registry.
        :type monitor: Optional[StageMonitor]
        """
        self.config: ScenarioConfig = config
        self.monitor: StageMonitor = monitor if monitor is not None else default_monitor()
        self.summary: dict[str, Any] = {
            "qlab_version": __version__,
            "run": list(config.run),
            "scenario": config.to_dict(),
            "omega": None,
            "t_norm": None,
            "condition_status": None,
        }
        self._records: ExitRecords | None = None
        self._survival: SurvivalEstimate | None = None

    @property
    def output_dir(self) -> Path:
        return self.config.output_dir

    @cached_property
    def operator(self) -> QuasipotentialLike:
        """
        The quasi-potential: exact atom engine for positive atoms, dense grid operator otherwise.
        """
        cfg = self.config
        m, d = cfg.measure, cfg.domain
        with self.monitor.stage("operator") as outputs:
            norm = t_norm(m, d, grid_nodes=cfg.grid.n)
            status = condition_status(m, d, norm)
            outputs["condition"] = status
            self.summary.update(omega=m.total_mass, t_norm=norm, condition_status=status)
            logger.info("Omega=%.12g, ||T||=%.12g, condition %s", m.total_mass, norm, status)
            if status == "violated":
                raise ConditionViolatedError(
                    "condition ||T|| < Omega violated and the measure is not nilpotent-eligible",
                    payload={"t_norm": norm, "omega": m.total_mass},
                )

            if isinstance(m, Atoms) and m.all_positive():
                exact = ExactAtomOperator(m, d)
                self.summary["nilpotency_index"] = exact.nilpotency_index
                return exact

            grid = build_grid(d, cfg.grid.n)
            T = shift_operator(m, grid) if isinstance(m, Atoms) else assemble_T(m, grid, cfg.threads)
            return build_B(T, m.total_mass, norm=norm)

    @cached_property
    def spectrum(self) -> SpectralSummary:
        return principal_eigen(self.operator)

    def records(self) -> ExitRecords:
        if self._records is None:
            cfg = self.config
            with self.monitor.stage("simulate") as outputs:
                self._records = simulate_exits(
                    cfg.measure,
                    cfg.domain,
                    cfg.start_point,
                    cfg.mc.horizon,
                    cfg.mc.paths,
                    cfg.mc.seed,
                    threads=cfg.threads,
                    block_size=cfg.mc.block_size,
                )
                outputs["paths"] = cfg.mc.paths
        return self._records

    def run(self) -> dict[str, Any]:
        """
        Execute the configured pipelines in order and write ``summary.json``.

        :return: The summary as written.
        :rtype: dict[str, Any]
        """
        self.output_dir.mkdir(parents=True, exist_ok=True)
        pipelines = {
            "spectral": self.run_spectral,
            "simulate": self.run_simulate,
            "exit-time": self.run_exit_time,
            "table61": self.run_table,
            "validate": self.run_validate,
        }
        for name in self.config.run:
            logger.info("Running pipeline %s", name)
            pipelines[name]()
        write_summary(self.output_dir, self.summary)
        return self.summary

    def run_spectral(self) -> None:
        cfg = self.config
        q = self.operator
        with self.monitor.stage("spectral"):
            s = self.spectrum
            start = cfg.start_point
            self.summary.update(
                mu1=s.mu1,
                lambda1=None if s.quasi_nilpotent else s.lambda1,
                quasi_nilpotent=s.quasi_nilpotent,
                mean_exit_time_spectral=mean_exit_time(q, start),
            )
            if not s.quasi_nilpotent:
                self.summary.update(
                    decay_rate=decay_rate(s),
                    q=prefactor_q(s, start),
                    multiplicity=s.multiplicity,
                    spectral_gap=s.gap,
                    index_one=s.index_one,
                )

            epsilon = cfg.diagnostics.cluster_epsilon
            self.summary["clustering_counts"] = {
                format(epsilon, "g"): eigen_clustering(q, epsilon, s.eigenvalues),
            }
            if isinstance(q, Quasipotential):
                self.summary["radon_modulus"] = [
                    {"delta": delta, "modulus": radon_modulus(q, delta)} for delta in cfg.diagnostics.radon_deltas
                ]

            times = cfg.mc.times()
            semigroup = survival_curve_semigroup(q.T if isinstance(q, Quasipotential) else q, times, start)
            if s.quasi_nilpotent:
                asymptotic = [None] * times.size
            else:
                asymptotic = self.summary["q"] * np.exp(-times / s.mu1)
            write_columns(
                self.output_dir / "prediction.csv",
                {"t": times, "semigroup": semigroup, "asymptotic": asymptotic},
            )

    def run_simulate(self, require_fit: bool = False) -> None:
        cfg = self.config
        records = self.records()
        with self.monitor.stage("survival"):
            survival = survival_curve(records, cfg.mc.times())
            try:
                fit = fit_decay_rate(survival, cfg.diagnostics.fit_window)
            except NumericalError as exc:
                if require_fit:
                    raise
                logger.warning("No decay-rate fit: %s", exc)
                fit = None
            self._survival = SurvivalEstimate(
                survival.time_grid,
                survival.survival,
                survival.stderr,
                survival.counts,
                survival.n_paths,
                survival.horizon,
                fit,
            )
            check = zero_jump_check(records, min(ZERO_JUMP_TIME, records.horizon), cfg.measure.total_mass)
            self.summary.update(
                mc_paths=records.n_paths,
                mc_censored=records.n_censored,
                fitted_rate=self._survival.fitted_rate,
                fitted_rate_stderr=self._survival.fitted_rate_stderr,
                fit_window=list(fit.window) if fit else None,
                zero_jump_check={
                    "t": check.t,
                    "empirical": check.empirical,
                    "exact": check.exact,
                    "sigma": check.sigma,
                    "within_three_sigma": check.within_three_sigma,
                },
            )
            if records.n_censored < records.n_paths:
                self.summary["mean_exit_time_mc"] = mean_exit_from_records(records)[0]
            write_columns(
                self.output_dir / "survival.csv",
                {"t": survival.time_grid, "survival": survival.survival, "stderr": survival.stderr},
            )

    def run_exit_time(self) -> None:
        with self.monitor.stage("exit-time"):
            self.summary["mean_exit_time_spectral"] = mean_exit_time(self.operator, self.config.start_point)
            self.summary["mean_exit_time_mc"] = mean_exit_from_records(self.records())[0]
            logger.info(
                "Mean exit time: spectral %.6g, Monte Carlo %.6g",
                self.summary["mean_exit_time_spectral"],
                self.summary["mean_exit_time_mc"],
            )

    def run_table(self) -> None:
        cfg = self.config
        with self.monitor.stage("table61"):
            table = reproduce_table(p=cfg.table.p, n=cfg.table.n, threads=cfg.threads)
            document = table.to_dict()
            self.summary["table61"] = document
            rows = [row.to_dict() for row in table.rows]
            header = list(rows[0])
            write_columns(self.output_dir / "table61.csv", {key: [row[key] for row in rows] for key in header})
            write_json(self.output_dir / "table61.json", document)

    def run_validate(self) -> None:
        """
        Spectral predictions against Monte Carlo: decay rate, prefactor and mean exit time.
        """
        if "mu1" not in self.summary:
            self.run_spectral()
        needs_fit = not self.spectrum.quasi_nilpotent
        if self._survival is None or (needs_fit and self._survival.fit is None):
            self.run_simulate(require_fit=needs_fit)
        if self.summary.get("mean_exit_time_mc") is None:
            self.summary["mean_exit_time_mc"] = mean_exit_from_records(self.records())[0]

        with self.monitor.stage("validate"):
            s = self.spectrum
            validation: dict[str, dict[str, Any]] = {}
            if not s.quasi_nilpotent:
                plateau = prefactor_plateau(self._survival, s.mu1, self.config.diagnostics.plateau_window)
                self.summary["prefactor_plateau"] = plateau
                validation["decay_rate"] = self._compare(self.summary["fitted_rate"], decay_rate(s), RATE_TOLERANCE)
                validation["prefactor"] = self._compare(self.summary["q"], plateau, PREFACTOR_TOLERANCE)
            validation["mean_exit_time"] = self._compare(
                self.summary["mean_exit_time_mc"],
                self.summary["mean_exit_time_spectral"],
                MEAN_EXIT_TOLERANCE,
            )
            self.summary["validation"] = validation
            for name, entry in validation.items():
                if not entry["passed"]:
                    logger.warning("Validation of %s failed: relative difference %s", name, entry["relative_difference"])

    @staticmethod
    def _compare(observed: float | None, predicted: float | None, tolerance: float) -> dict[str, Any]:
        difference = _relative(observed, predicted)
        return {
            "relative_difference": difference,
            "tolerance": tolerance,
            "passed": difference is not None and math.isfinite(difference) and difference < tolerance,
        }

    def expose(self, path: str | Path) -> "ScenarioRunner":
        self.monitor.expose(str(path))
        return self


def run_scenario(cfg: ScenarioConfig, metrics_file: str | Path | None = None) -> int:
    """
    Run a scenario end to end and map failures to process exit codes.

    :param cfg: Validated scenario.
    :type cfg: ScenarioConfig

    :param metrics_file: Optional Prometheus text-format export of the stage telemetry.
    :type metrics_file: str | Path | None

    :return: 0 on success, otherwise the exit code of the :class:`~qlab.errors.QlabError` raised;
        the error and its payload are written to ``error.json``.
    :rtype: int
    """
    runner = ScenarioRunner(cfg)
    try:
        runner.run()
        return 0
    except QlabError as exc:
        logger.error("%s: %s", exc.__class__.__name__, exc)
        write_error(cfg.output_dir, exc.to_dict())
        return exc.exit_code
    finally:
        if metrics_file is not None:
            runner.expose(metrics_file)
