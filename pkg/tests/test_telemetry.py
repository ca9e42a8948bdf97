import logging

import pytest
from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram

from qlab.errors import NumericalError
from qlab.telemetry import (
    ActiveStages,
    ConditionStatus,
    CounterCollectorBase,
    GaugeCollectorBase,
    HistogramCollectorBase,
    LiveGaugeCollectorBase,
    PathsSimulated,
    RegistrableCollector,
    StageContext,
    StageDuration,
    StageMonitor,
    StagesTotal,
    default_monitor,
)


# Registry fixture for collecting metrics
@pytest.fixture
def registry():
    return CollectorRegistry()


# Dummy subclasses to satisfy the abstract __call__
class DummyCounter(CounterCollectorBase):
    def __call__(self, ctx):
        pass


class DummyGauge(GaugeCollectorBase):
    def __call__(self, ctx):
        pass


class DummyHistogram(HistogramCollectorBase):
    def __call__(self, ctx):
        pass


class LiveDummyGauge(LiveGaugeCollectorBase):
    def __enter__(self) -> "LiveDummyGauge":
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        pass


class Exploding(CounterCollectorBase):
    def __init__(self):
        super().__init__("qlab_exploding", "always fails")

    def __call__(self, ctx):
        raise RuntimeError("boom")


@pytest.mark.parametrize(
    "cls,prom_cls,name,labels",
    [
        (DummyCounter, Counter, "c1", []),
        (DummyCounter, Counter, "c2", ["stage", "status"]),
        (DummyGauge, Gauge, "g1", []),
        (DummyGauge, Gauge, "g2", ["status"]),
        (DummyHistogram, Histogram, "h1", []),
        (DummyHistogram, Histogram, "h2", ["stage"]),
        (LiveDummyGauge, Gauge, "lg1", []),
        (LiveDummyGauge, Gauge, "lg2", ["stage"]),
    ],
)
def test_typed_metric_base_init(registry, cls, prom_cls, name, labels):
    instance = cls(name=name, documentation="test doc", labelnames=labels, registry=registry)

    assert isinstance(instance.metric, prom_cls)
    assert instance.metric._name == name
    assert instance.metric._documentation == "test doc"
    assert instance.metric._labelnames == tuple(labels)

    # The provided registry should now contain this metric
    collected_names = [m.name for m in registry.collect()]
    assert name in collected_names


def test_register_needs_a_metric(registry):
    class Bare(RegistrableCollector):
        pass

    with pytest.raises(ValueError):
        Bare().register(registry)


def test_stage_context_properties():
    ctx = StageContext("spectral", 0.25, outputs={"condition": "neumann"})
    assert ctx.stage == "spectral"
    assert ctx.duration == 0.25
    assert ctx.succeeded
    assert ctx.outputs == {"condition": "neumann"}
    assert not StageContext("simulate", 1.0, status="NumericalError").succeeded


def test_stage_counter_and_duration(registry):
    monitor = StageMonitor(registry=registry, metrics_collectors=[StagesTotal(), StageDuration()])
    with monitor.stage("spectral"):
        pass
    with monitor.stage("spectral"):
        pass

    assert registry.get_sample_value("qlab_stages_total", {"stage": "spectral", "status": "ok"}) == 2.0
    assert registry.get_sample_value("qlab_stage_duration_seconds_count", {"stage": "spectral"}) == 2.0
    assert registry.get_sample_value("qlab_stage_duration_seconds_sum", {"stage": "spectral"}) >= 0.0


def test_failed_stage_is_counted_and_reraised(registry):
    monitor = StageMonitor(registry=registry, metrics_collectors=[StagesTotal()])
    with pytest.raises(NumericalError):
        with monitor.stage("simulate"):
            raise NumericalError("window underpopulated")

    assert registry.get_sample_value("qlab_stages_total", {"stage": "simulate", "status": "NumericalError"}) == 1.0
    assert registry.get_sample_value("qlab_stages_total", {"stage": "simulate", "status": "ok"}) is None
    assert monitor.active_stages == 0


def test_paths_simulated_reads_stage_outputs(registry):
    monitor = StageMonitor(registry=registry, metrics_collectors=[PathsSimulated()])
    with monitor.stage("simulate") as outputs:
        outputs["paths"] = 5000
    with monitor.stage("spectral"):
        pass

    assert registry.get_sample_value("qlab_paths_simulated_total") == 5000.0


def test_condition_status_is_one_hot(registry):
    monitor = StageMonitor(registry=registry, metrics_collectors=[ConditionStatus()])
    with monitor.stage("operator") as outputs:
        outputs["condition"] = "nilpotent"

    assert registry.get_sample_value("qlab_condition_status", {"status": "nilpotent"}) == 1.0
    assert registry.get_sample_value("qlab_condition_status", {"status": "neumann"}) == 0.0
    assert registry.get_sample_value("qlab_condition_status", {"status": "violated"}) == 0.0


def test_collector_errors_are_logged_not_raised(registry, caplog):
    monitor = StageMonitor(registry=registry, metrics_collectors=[ConditionStatus(), Exploding(), StagesTotal()])
    with caplog.at_level(logging.ERROR, logger="qlab.telemetry.monitor"):
        with monitor.stage("operator") as outputs:
            outputs["condition"] = "sideways"

    messages = [r.getMessage() for r in caplog.records]
    assert any("ConditionStatus" in m for m in messages)
    assert any("Exploding -> boom" in m for m in messages)
    # later collectors still run
    assert registry.get_sample_value("qlab_stages_total", {"stage": "operator", "status": "ok"}) == 1.0


def test_active_stages_gauge_follows_the_stage(registry):
    monitor = StageMonitor(registry=registry, live_metrics_collectors=[ActiveStages()])
    with monitor.stage("simulate"):
        assert registry.get_sample_value("qlab_active_stages") == 1.0
        assert monitor.active_stages == 1
    assert registry.get_sample_value("qlab_active_stages") == 0.0


def test_live_gauge_drops_back_after_failure(registry):
    monitor = StageMonitor(registry=registry, live_metrics_collectors=[ActiveStages()])
    with pytest.raises(RuntimeError):
        with monitor.stage("simulate"):
            raise RuntimeError("interrupted")
    assert registry.get_sample_value("qlab_active_stages") == 0.0


def test_double_registration_warns(registry, caplog):
    counter = StagesTotal(registry=registry)
    with caplog.at_level(logging.WARNING, logger="qlab.telemetry.monitor"):
        StageMonitor(registry=registry, metrics_collectors=[counter])
    assert any("already registered" in r.getMessage() for r in caplog.records)


def test_default_monitors_do_not_share_registries():
    first, second = default_monitor(), default_monitor()
    with first.stage("spectral"):
        pass
    assert first.registry.get_sample_value("qlab_stages_total", {"stage": "spectral", "status": "ok"}) == 1.0
    assert second.registry.get_sample_value("qlab_stages_total", {"stage": "spectral", "status": "ok"}) is None


def test_expose_writes_text_format(tmp_path):
    monitor = default_monitor()
    with monitor.stage("simulate") as outputs:
        outputs["paths"] = 1000
    path = tmp_path / "metrics.prom"
    assert monitor.expose(str(path)) is monitor

    text = path.read_text(encoding="utf-8")
    assert 'qlab_stages_total{stage="simulate",status="ok"} 1.0' in text
    assert "qlab_paths_simulated_total 1000.0" in text
    assert "# TYPE qlab_stage_duration_seconds histogram" in text
