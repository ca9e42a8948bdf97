from qlab.telemetry.base import CollectorBase, LiveCollectorBase, RegistrableCollector, StageContext
from qlab.telemetry.monitor import StageMonitor
from qlab.telemetry.stage_metrics import ActiveStages, ConditionStatus, PathsSimulated, StageDuration, StagesTotal
from qlab.telemetry.typed_bases import (
    CounterCollectorBase,
    GaugeCollectorBase,
    HistogramCollectorBase,
    LiveGaugeCollectorBase,
)


def default_monitor(registry=None) -> StageMonitor:
    """
    Monitor with the stock stage collectors on ``registry`` (a fresh one by default).
    """
    return StageMonitor(
        registry=registry,
        metrics_collectors=[StagesTotal(), StageDuration(), PathsSimulated(), ConditionStatus()],
        live_metrics_collectors=[ActiveStages()],
    )


__all__ = [
    "StageContext",
    "RegistrableCollector",
    "CollectorBase",
    "LiveCollectorBase",
    "CounterCollectorBase",
    "GaugeCollectorBase",
    "HistogramCollectorBase",
    "LiveGaugeCollectorBase",
    "StagesTotal",
    "StageDuration",
    "PathsSimulated",
    "ConditionStatus",
    "ActiveStages",
    "StageMonitor",
    "default_monitor",
]
