import typing
from abc import ABC, abstractmethod

from prometheus_client.metrics import Collector, CollectorRegistry


class StageContext:
    """
    A structured context object for accessing information about a finished pipeline stage.

    It is built by :class:`~qlab.telemetry.monitor.StageMonitor` once the stage has returned or raised,
    and gives post-stage collectors typed access to the stage name, its duration, its outcome and
    the outputs the stage chose to publish (paths simulated, condition status, ...).
    """

    def __init__(
        self,
        stage: str,
        duration: float,
        status: str = "ok",
        outputs: typing.Optional[dict[str, typing.Any]] = None,
    ):
        """
        :param stage: Pipeline stage name, e.g. ``spectral``.
        :type stage: str

        :param duration: Wall time of the stage in seconds.
        :type duration: float

        :param status: ``ok`` or the class name of the exception that ended the stage.
        :type status: str

        :param outputs: Values published by the stage.
        :type outputs: Optional[dict[str, Any]]
        """
        self._stage = stage
        self._duration = duration
        self._status = status
        self._outputs: dict[str, typing.Any] = dict(outputs or {})

    @property
    def stage(self) -> str:
        return self._stage

    @property
    def duration(self) -> float:
        """
        The duration of the stage in seconds.

        :rtype: float
        """
        return self._duration

    @property
    def status(self) -> str:
        return self._status

    @property
    def succeeded(self) -> bool:
        return self._status == "ok"

    @property
    def outputs(self) -> dict[str, typing.Any]:
        return self._outputs


class RegistrableCollector(ABC):
    """
    Mixin holding a prometheus ``_metric`` and a ``register(registry)`` method that hooks it into any registry.
    """

    _metric: Collector | None = None

    def register(self, registry: CollectorRegistry) -> bool:
        """
        Register ``self._metric`` into the given registry.
        Safe to call multiple times.

        :return: False when the metric was already registered there.
        :rtype: bool
        """
        if self._metric is None:
            raise ValueError(f"{self.__class__.__name__}.metric is not initialized")
        try:
            registry.register(self._metric)
        except ValueError:
            # already registered
            return False
        return True


class CollectorBase(ABC):
    """
    Post-stage collector: called once a stage is over with its :class:`StageContext`.
    """

    @abstractmethod
    def __call__(self, stage_context: StageContext):
        """
        :param stage_context: The finished stage.
        :type stage_context: StageContext
        """


class LiveCollectorBase(ABC):
    """
    Abstract base class for live (in-stage) collectors.

    These are context managers entered when a stage starts and exited when it ends, typically to
    maintain gauges of running work. They only know the stage name.
    """

    def __init__(self):
        self._stage: str = ""

    def update_stage(self, stage: str):
        """
        :param stage: Name of the stage about to start.
        :type stage: str
        """
        self._stage = stage

    @abstractmethod
    def __enter__(self) -> "LiveCollectorBase":
        pass

    @abstractmethod
    def __exit__(self, exc_type, exc_val, exc_tb):
        pass
