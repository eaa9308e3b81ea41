"""Client stream generation: reference app profiles and Poisson arrivals.

Ten reference edge applications drive the workload; their delay, rate,
duration and accuracy figures come from published app studies, while frame
sizes are a synthetic default (30-200 KB per query) since the references do
not report them.  Clients arrive following a Poisson process with a
configurable rate of `lam` clients per minute (optionally a step schedule),
and each client contributes one stream with fields sampled uniformly within
its app's ranges.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass, field

DEFAULT_FRAME_SIZE_RANGE = (30_000.0, 200_000.0)  # bytes
DEFAULT_TASK = "object-detection"


@dataclass(frozen=True)
class AppProfile:
    name: str
    tolerated_delay: tuple[float, float]      # ms
    frame_rate: tuple[float, float]           # fps
    duration: tuple[float, float]             # s
    required_accuracy: float                  # mAP
    frame_size: tuple[float, float] = DEFAULT_FRAME_SIZE_RANGE  # bytes
    task: str = DEFAULT_TASK

    def __post_init__(self):
        for lo, hi in (self.tolerated_delay, self.frame_rate, self.duration, self.frame_size):
            if not (0 < lo <= hi):
                raise ValueError(f"{self.name}: bad range ({lo}, {hi})")


def app_table() -> list[AppProfile]:
    """The ten reference application profiles."""
    m = 60.0  # minutes to seconds
    return [
        AppProfile("pool", (95, 95), (5, 5), (5, 10), 10),
        AppProfile("workout-assistant", (300, 300), (2, 2), (90, 90), 10),
        AppProfile("ping-pong", (150, 150), (15, 20), (20, 40), 15),
        AppProfile("face-assistant", (370, 370), (5, 5), (1, 5), 30),
        AppProfile("lego-draw-sandwich", (600, 600), (10, 15), (60, 60), 25),
        AppProfile("gaming", (20, 30), (25, 25), (10 * m, 30 * m), 35),
        AppProfile("connected-cars", (150, 150), (10, 15), (15 * m, 30 * m), 40),
        AppProfile("tele-robots", (25, 35), (10, 10), (5 * m, 5 * m), 40),
        AppProfile("remote-driving", (20, 30), (20, 20), (15 * m, 30 * m), 50),
        AppProfile("interactive-ar-vr", (30, 50), (25, 25), (30, 60), 35),
    ]


def app_by_name(name: str) -> AppProfile:
    for app in app_table():
        if app.name == name:
            return app
    raise KeyError(name)


# Default client mix.  Long-lived streams (five minutes and up) are kept rare
# (3% of clients, split evenly) so that a single site converges to roughly a
# thousand queries per second at 60 clients/minute; the remaining probability
# is uniform over the six short-session apps.
_SHORT_APPS = ("pool", "workout-assistant", "ping-pong", "face-assistant",
               "lego-draw-sandwich", "interactive-ar-vr")
_LONG_APPS = ("gaming", "connected-cars", "tele-robots", "remote-driving")
DEFAULT_APP_MIX: dict[str, float] = {
    **{name: 0.97 / len(_SHORT_APPS) for name in _SHORT_APPS},
    **{name: 0.03 / len(_LONG_APPS) for name in _LONG_APPS},
}


@dataclass(frozen=True)
class Stream:
    """One client's query sequence with its sampled requirements."""

    id: int
    app: AppProfile
    task: str
    rate: float              # queries/s
    input_size: float        # bytes, constant across the stream's queries
    tolerated_delay: float   # ms, end to end
    required_accuracy: float # mAP
    access_delay: float      # ms, stream source to its scheduler site
    duration: float          # s
    arrival_time: float      # s
    site_id: str = "site-0"

    def query_count(self) -> int:
        """Queries emitted over the stream lifetime: one every 1/rate from arrival."""
        return math.ceil(self.duration * self.rate - 1e-9)

    def emit_times(self) -> list[float]:
        return [self.arrival_time + k / self.rate for k in range(self.query_count())]


@dataclass(frozen=True)
class Query:
    stream: Stream
    emit_time: float  # s
    size: float       # bytes

    @property
    def deadline(self) -> float:
        return self.emit_time + self.stream.tolerated_delay / 1000.0


@dataclass
class LambdaSchedule:
    """Step function of clients-per-minute over episode time."""

    steps: list[tuple[float, float]]  # sorted (start_s, clients/min)

    def __post_init__(self):
        if not self.steps:
            raise ValueError("empty lambda schedule")
        self.steps = sorted(self.steps)
        if self.steps[0][0] > 0:
            self.steps.insert(0, (0.0, self.steps[0][1]))
        if any(lam <= 0 for _, lam in self.steps):
            raise ValueError("lambda values must be positive")
        self._starts = [t for t, _ in self.steps]

    def rate_at(self, t: float) -> float:
        i = bisect.bisect_right(self._starts, t) - 1
        return self.steps[max(i, 0)][1]

    @classmethod
    def constant(cls, lam: float) -> "LambdaSchedule":
        return cls([(0.0, lam)])


@dataclass
class ClientGenerator:
    """Poisson client source for one scheduler site."""

    schedule: LambdaSchedule
    app_mix: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_APP_MIX))
    access_delay_range: tuple[float, float] = (1.0, 5.0)
    rng_seed: int = 0
    site_id: str = "site-0"

    def __post_init__(self):
        if abs(sum(self.app_mix.values()) - 1.0) > 1e-9:
            raise ValueError("app mix weights must sum to 1")
        self._apps = [app_by_name(name) for name in self.app_mix]
        self._weights = list(self.app_mix.values())
        self.rng = random.Random(self.rng_seed)
        self._next_stream_id = 0

    @classmethod
    def with_rate(cls, lam: float, **kw) -> "ClientGenerator":
        return cls(schedule=LambdaSchedule.constant(lam), **kw)


def next_arrival(gen: ClientGenerator, now: float) -> float:
    """Time of the next client arrival after `now` (exponential inter-arrival)."""
    lam_per_s = gen.schedule.rate_at(now) / 60.0
    return now + gen.rng.expovariate(lam_per_s)


def spawn_stream(gen: ClientGenerator, now: float, rng: random.Random | None = None) -> Stream:
    """Sample one stream: app chosen by mix weights, fields uniform in app ranges."""
    r = rng if rng is not None else gen.rng
    app = r.choices(gen._apps, weights=gen._weights)[0]
    sid = gen._next_stream_id
    gen._next_stream_id += 1
    return Stream(
        id=sid,
        app=app,
        task=app.task,
        rate=r.uniform(*app.frame_rate),
        input_size=r.uniform(*app.frame_size),
        tolerated_delay=r.uniform(*app.tolerated_delay),
        required_accuracy=app.required_accuracy,
        access_delay=r.uniform(*gen.access_delay_range),
        duration=r.uniform(*app.duration),
        arrival_time=now,
        site_id=gen.site_id,
    )
