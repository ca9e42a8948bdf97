import logging
import timeit
from contextlib import ExitStack, contextmanager
from typing import Any, Iterator

from prometheus_client import CollectorRegistry, write_to_textfile

from qlab.telemetry.base import CollectorBase, LiveCollectorBase, RegistrableCollector, StageContext

logger = logging.getLogger(__name__)


class StageMonitor:
    """
    Wraps each pipeline stage with live collectors, a timer and post-stage collectors.

    - Live collectors are entered for the lifetime of the stage
    - The stage's wall time and outcome are captured even when it raises
    - Post-stage collectors receive a :class:`StageContext`; their failures are logged, never raised
    """

    def __init__(
        self,
        registry: CollectorRegistry | None = None,
        metrics_collectors: list[CollectorBase] | None = None,
        live_metrics_collectors: list[LiveCollectorBase] | None = None,
    ):
        """
        :param registry: Registry the collectors are attached to. Defaults to a fresh one, so runs
            in one process never share counters.
        :type registry: Optional[CollectorRegistry]

        :param metrics_collectors: Collectors called after each stage.
        :type metrics_collectors: Optional[list[CollectorBase]]

        :param live_metrics_collectors: Collectors entered while a stage runs.
        :type live_metrics_collectors: Optional[list[LiveCollectorBase]]
        """
        self.registry: CollectorRegistry = registry if registry is not None else CollectorRegistry()
        self.metrics_collectors: list[CollectorBase] = []
        self.live_metrics_collectors: list[LiveCollectorBase] = []
        self.active_stages: int = 0

        if metrics_collectors is not None:
            self.metrics_collectors = metrics_collectors

        if live_metrics_collectors is not None:
            self.live_metrics_collectors = live_metrics_collectors

        for metric_collector in self.metrics_collectors + self.live_metrics_collectors:
            if isinstance(metric_collector, RegistrableCollector):
                if not metric_collector.register(self.registry):
                    logger.warning(
                        "Metric collector: %s has been already registered on this registry.",
                        metric_collector.__class__.__name__,
                    )

    @contextmanager
    def stage(self, name: str) -> Iterator[dict[str, Any]]:
        """
        Monitor one stage. The yielded dict collects the stage's published outputs.

        :param name: Stage name.
        :type name: str
        """
        outputs: dict[str, Any] = {}
        status = "ok"
        start_time = timeit.default_timer()
        self.active_stages += 1

        with ExitStack() as exit_stack:
            for live_metric_collector in self.live_metrics_collectors:
                live_metric_collector.update_stage(name)
                exit_stack.enter_context(live_metric_collector)

            try:
                yield outputs
            except Exception as exc:
                status = exc.__class__.__name__
                raise
            finally:
                duration = max(timeit.default_timer() - start_time, 0.0)
                self.active_stages -= 1
                stage_context = StageContext(name, duration, status, outputs)
                logger.info("Stage %s finished in %.3fs (%s)", name, duration, status)

                for metric_collector in self.metrics_collectors:
                    try:
                        metric_collector(stage_context)
                    except Exception as exc:
                        logger.error(
                            "An error occurred while processing metric. %s -> %s",
                            metric_collector.__class__.__name__,
                            exc,
                        )

    def expose(self, path: str) -> "StageMonitor":
        """
        Write the registry in the Prometheus text format.

        :param path: Destination file.
        :type path: str

        :return: The current monitor (for chaining).
        :rtype: StageMonitor
        """
        write_to_textfile(path, self.registry)
        return self
