from typing import Any, Iterable, Optional, Sequence

from prometheus_client import CollectorRegistry

from qlab.telemetry.base import StageContext
from qlab.telemetry.typed_bases import (
    CounterCollectorBase,
    GaugeCollectorBase,
    HistogramCollectorBase,
    LiveGaugeCollectorBase,
)

CONDITION_STATUSES = ("neumann", "nilpotent", "violated")


class StagesTotal(CounterCollectorBase):
    def __init__(
        self,
        metric_name: str = "qlab_stages_total",
        metric_doc: str = "Total number of pipeline stages by stage and outcome.",
        labelnames: Iterable[str] = ("stage", "status"),
        registry: Optional[CollectorRegistry] = None,
        **kwargs: Any,
    ):
        super().__init__(metric_name, metric_doc, labelnames=labelnames, registry=registry, **kwargs)

    def __call__(self, stage_context: StageContext):
        self.metric.labels(stage=stage_context.stage, status=stage_context.status).inc()


class StageDuration(HistogramCollectorBase):
    def __init__(
        self,
        metric_name: str = "qlab_stage_duration_seconds",
        metric_doc: str = "Histogram of pipeline stage wall times.",
        labelnames: Iterable[str] = ("stage",),
        buckets: Sequence[float | str] = (0.1, 1, 10, 60),
        registry: Optional[CollectorRegistry] = None,
        **kwargs: Any,
    ):
        super().__init__(metric_name, metric_doc, labelnames=labelnames, buckets=buckets, registry=registry, **kwargs)

    def __call__(self, stage_context: StageContext):
        self.metric.labels(stage=stage_context.stage).observe(stage_context.duration)


class PathsSimulated(CounterCollectorBase):
    """
    Counts Monte Carlo paths published by a stage under the ``paths`` output.
    """

    def __init__(
        self,
        metric_name: str = "qlab_paths_simulated_total",
        metric_doc: str = "Total number of simulated exit paths.",
        registry: Optional[CollectorRegistry] = None,
        **kwargs: Any,
    ):
        super().__init__(metric_name, metric_doc, registry=registry, **kwargs)

    def __call__(self, stage_context: StageContext):
        paths = stage_context.outputs.get("paths")
        if paths:
            self.metric.inc(paths)


class ConditionStatus(GaugeCollectorBase):
    """
    One-hot gauge of the last ‖T‖ < Ω condition status a stage reported.
    """

    def __init__(
        self,
        metric_name: str = "qlab_condition_status",
        metric_doc: str = "Condition status of the jump operator (1 for the current status).",
        labelnames: Iterable[str] = ("status",),
        registry: Optional[CollectorRegistry] = None,
        **kwargs: Any,
    ):
        super().__init__(metric_name, metric_doc, labelnames=labelnames, registry=registry, **kwargs)

    def __call__(self, stage_context: StageContext):
        current = stage_context.outputs.get("condition")
        if current is None:
            return
        if current not in CONDITION_STATUSES:
            raise ValueError(f"unknown condition status {current!r}")
        for status in CONDITION_STATUSES:
            self.metric.labels(status=status).set(1.0 if status == current else 0.0)


class ActiveStages(LiveGaugeCollectorBase):
    def __init__(
        self,
        metric_name: str = "qlab_active_stages",
        metric_doc: str = "Number of pipeline stages currently running.",
        labelnames: Iterable[str] = (),
        registry: Optional[CollectorRegistry] = None,
        **kwargs: Any,
    ):
        super().__init__(metric_name, metric_doc, labelnames=labelnames, registry=registry, **kwargs)

    def __enter__(self) -> "ActiveStages":
        self.metric.inc()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.metric.dec()
