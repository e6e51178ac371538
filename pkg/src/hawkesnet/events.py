"""Event streams: loading, validation, time scaling, chronological splits.

A stream holds every known event (context included) plus a closed observation
window [t_start, t_end]. Events before t_start are history context: they feed
intensity evaluations but are not counted or integrated over. Keeping context
in the same arrays lets later splits condition on earlier ones for free.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EventStream",
    "ScaleInfo",
    "EventDataError",
    "load_events",
    "scale_times",
    "unscale_nll",
    "split_chronological",
]


class EventDataError(ValueError):
    """Raised for malformed or inconsistent event data."""


@dataclass
class EventStream:
    times: np.ndarray  # all event times, sorted, context included
    dims: np.ndarray  # dimension index per event, same length
    D: int
    t_start: float = 0.0
    t_end: float | None = None  # defaults to the last event time
    # window membership at exactly t_start; split sub-windows use an open
    # start so adjacent closed windows never double-count a boundary event
    open_start: bool = False

    _dim_times: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.dims = np.asarray(self.dims, dtype=np.int64)
        if self.times.shape != self.dims.shape or self.times.ndim != 1:
            raise EventDataError("times and dims must be 1-d arrays of equal length")
        if self.t_end is None:
            if self.times.size == 0:
                raise EventDataError("stream has no events and no horizon")
            self.t_end = float(self.times[-1])
        self.t_start = float(self.t_start)
        self.t_end = float(self.t_end)
        if self.times.size and not np.all(np.isfinite(self.times)):
            raise EventDataError("non-finite event time")
        if np.any(np.diff(self.times) < 0.0):
            raise EventDataError("event times must be sorted non-decreasingly")
        if self.times.size:
            if self.times[0] < 0.0:
                raise EventDataError("negative event time")
            if self.times[-1] > self.t_end:
                raise EventDataError("event beyond the stream horizon")
        if self.t_end < self.t_start:
            raise EventDataError("window end before window start")
        if self.dims.size and (self.dims.min() < 0 or self.dims.max() >= self.D):
            raise EventDataError(f"dimension index outside [0, {self.D})")
        self._dim_times = [self.times[self.dims == d] for d in range(self.D)]
        for d in range(self.D):
            td = self._dim_times[d]
            if np.any(np.diff(td) <= 0.0):
                raise EventDataError(f"duplicate timestamp within dimension {d}")

    # -- window views ------------------------------------------------------

    @property
    def window_mask(self) -> np.ndarray:
        if self.open_start:
            return (self.times > self.t_start) & (self.times <= self.t_end)
        return (self.times >= self.t_start) & (self.times <= self.t_end)

    @property
    def n_events(self) -> int:
        """Number of events inside the observation window."""
        return int(np.count_nonzero(self.window_mask))

    @property
    def window_times(self) -> np.ndarray:
        return self.times[self.window_mask]

    @property
    def window_dims(self) -> np.ndarray:
        return self.dims[self.window_mask]

    def dim_times(self, d: int) -> np.ndarray:
        """All times of dimension d, context included."""
        return self._dim_times[d]

    def window_dim_times(self, d: int) -> np.ndarray:
        td = self._dim_times[d]
        if self.open_start:
            return td[(td > self.t_start) & (td <= self.t_end)]
        return td[(td >= self.t_start) & (td <= self.t_end)]

    def per_dim_counts(self) -> np.ndarray:
        return np.array([self.window_dim_times(d).size for d in range(self.D)])

    def copy_with(self, **kw) -> "EventStream":
        args = dict(times=self.times, dims=self.dims, D=self.D,
                    t_start=self.t_start, t_end=self.t_end,
                    open_start=self.open_start)
        args.update(kw)
        return EventStream(**args)


@dataclass(frozen=True)
class ScaleInfo:
    """Record of the time normalization t -> t * n_events / t_max."""

    factor: float
    t_max: float
    n_events: int


def load_events(path: str, fmt: str = "csv", D: int | None = None,
                horizon: float | None = None) -> EventStream:
    """Load an event stream from a `time,dim` CSV or a JSONL of {"t","d"}.

    The CSV header row is optional. D defaults to max(dim)+1, the horizon to
    the last event time.
    """
    times: list[float] = []
    dims: list[int] = []
    if fmt == "csv":
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                parts = line.split(",")
                if len(parts) != 2:
                    raise EventDataError(f"{path}:{lineno}: expected two fields, got {len(parts)}")
                if lineno == 1 and not _is_number(parts[0]):
                    continue  # header row
                try:
                    t = float(parts[0])
                    d = int(parts[1])
                except ValueError as exc:
                    raise EventDataError(f"{path}:{lineno}: {exc}") from None
                times.append(t)
                dims.append(d)
    elif fmt == "jsonl":
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    times.append(float(obj["t"]))
                    dims.append(int(obj["d"]))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise EventDataError(f"{path}:{lineno}: {exc}") from None
    else:
        raise EventDataError(f"unknown format {fmt!r}")
    if not times:
        raise EventDataError(f"{path}: no events")
    t_arr = np.array(times)
    d_arr = np.array(dims)
    if np.any(d_arr < 0):
        bad = int(np.argmax(d_arr < 0))
        raise EventDataError(f"{path}: negative dimension index at row {bad + 1}")
    order = np.argsort(t_arr, kind="stable")
    t_arr, d_arr = t_arr[order], d_arr[order]
    if D is None:
        D = int(d_arr.max()) + 1
    return EventStream(times=t_arr, dims=d_arr, D=D, t_start=0.0, t_end=horizon)


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def scale_times(stream: EventStream) -> tuple[EventStream, ScaleInfo]:
    """Normalize times by n_events / t_max so the mean inter-event gap is ~1.

    The factor is computed from the stream's window events; the window bounds
    scale identically, so compensators transform consistently.
    """
    n = stream.n_events
    if n == 0:
        raise EventDataError("cannot scale an empty stream")
    t_max = float(stream.window_times[-1])
    if t_max <= 0.0:
        raise EventDataError("cannot scale: last event time is not positive")
    factor = n / t_max
    scaled = stream.copy_with(times=stream.times * factor,
                              t_start=stream.t_start * factor,
                              t_end=stream.t_end * factor)
    return scaled, ScaleInfo(factor=factor, t_max=t_max, n_events=n)


def unscale_nll(nll_scaled: float, n_events: int, factor: float) -> float:
    """Map an NLL computed on the scaled axis back to the original axis.

    Rescaling time by f shifts any model's log-likelihood by -n*ln(f) through
    the log-intensity terms; integrals are invariant.
    """
    return float(nll_scaled - n_events * np.log(factor))


def split_chronological(stream: EventStream,
                        ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
                        ) -> tuple[EventStream, EventStream, EventStream]:
    """Split the window into train/val/test sub-windows preserving chronology.

    Boundaries sit at inter-event midpoints chosen so the event counts match
    the ratios; later splits keep all earlier events as history context.
    """
    r = np.asarray(ratios, dtype=float)
    if r.size != 3 or np.any(r < 0.0) or abs(r.sum() - 1.0) > 1e-9:
        raise EventDataError("ratios must be three non-negative numbers summing to 1")
    wt = stream.window_times
    n = wt.size
    k1 = _boundary_index(wt, int(round(r[0] * n)))
    k2 = _boundary_index(wt, max(k1, int(round((r[0] + r[1]) * n))))
    b1 = _boundary_time(wt, k1, stream.t_start, stream.t_end)
    b2 = _boundary_time(wt, k2, stream.t_start, stream.t_end)
    keep1 = stream.times <= b1
    keep2 = stream.times <= b2
    train = EventStream(times=stream.times[keep1], dims=stream.dims[keep1],
                        D=stream.D, t_start=stream.t_start, t_end=b1,
                        open_start=stream.open_start)
    val = EventStream(times=stream.times[keep2], dims=stream.dims[keep2],
                      D=stream.D, t_start=b1, t_end=b2, open_start=True)
    test = stream.copy_with(t_start=b2, open_start=True)
    for name, part in (("train", train), ("val", val), ("test", test)):
        if part.n_events == 0:
            warnings.warn(f"{name} split contains no events")
    return train, val, test


def _boundary_index(wt: np.ndarray, k: int) -> int:
    # advance past ties so simultaneous cross-dim events stay together
    n = wt.size
    k = min(max(k, 0), n)
    while 0 < k < n and wt[k - 1] == wt[k]:
        k += 1
    return k


def _boundary_time(wt: np.ndarray, k: int, lo: float, hi: float) -> float:
    n = wt.size
    if k <= 0:
        return lo
    if k >= n:
        return hi
    return 0.5 * (wt[k - 1] + wt[k])
