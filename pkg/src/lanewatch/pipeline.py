"""Frame-stream orchestration.

Lifecycle per stream: ingest frames at a reduced rate, extract one feature
vector per lane block, buffer vectors until the initialization quota is met,
fit K-means -> batch EM -> class tags, then settle into the steady state of
classify-every-block followed by online model updates. Ready frames yield a
TrafficStatusReport.

Report line format (one line per ready frame):

    <timestamp_ms> <lane_id>:<occupancy_bitmap>:<queue_length> ...

with block 0 (the stop-line end) leftmost in the bitmap and lanes in
configuration order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

import numpy as np

from .classifier import ClassDecision, assign_class_tags, classify
from .clustering import kmeans
from .features import FeatureParams, extract_features
from .geometry import BlockRect, LaneLayout, rasterize_blocks
from .gmm import (
    CLASS_VEHICLE,
    ComponentCollapseError,
    DEFAULT_FORGETTING,
    GmmModel,
    fit_em,
    online_update,
)

DEFAULT_FRAME_WIDTH = 352
DEFAULT_FRAME_HEIGHT = 288
DEFAULT_SOURCE_FPS = 25
DEFAULT_TARGET_FPS = 5
DEFAULT_INIT_SAMPLES = 2000

COLLECTING = "collecting"
READY = "ready"

_SHARED_SLOT = "__shared__"


class StreamError(RuntimeError):
    """Broken frame stream; carries the offending sequence number when known."""

    def __init__(self, message: str, sequence_number: int | None = None):
        if sequence_number is not None:
            message = f"frame {sequence_number}: {message}"
        super().__init__(message)
        self.sequence_number = sequence_number


@dataclass(frozen=True, eq=False)
class Frame:
    pixels: np.ndarray
    timestamp: int
    sequence_number: int


@dataclass(frozen=True, eq=False)
class BlockObservation:
    lane_id: str
    block_index: int
    features: np.ndarray
    decision: ClassDecision
    timestamp: int


@dataclass(frozen=True)
class LaneStatus:
    lane_id: str
    occupancy: tuple[bool, ...]
    queue_length: int


@dataclass(frozen=True)
class TrafficStatusReport:
    timestamp: int
    lanes: tuple[LaneStatus, ...]


@dataclass(frozen=True)
class DetectorParams:
    init_samples: int = DEFAULT_INIT_SAMPLES
    forgetting: float = DEFAULT_FORGETTING
    seed: int | None = None
    feature_params: FeatureParams = FeatureParams()
    update_margin: float | None = None  # feed only |discriminant| > margin back
    per_lane_models: bool = False
    kmeans_restarts: int = 3
    em_tol: float = 1e-6
    em_max_iter: int = 200


def ingest(frames: Iterable[Frame], target_fps: int = DEFAULT_TARGET_FPS,
           source_fps: int = DEFAULT_SOURCE_FPS) -> Iterator[Frame]:
    """Keep every (source_fps // target_fps)-th frame by sequence number.

    Timestamps pass through untouched. Raises StreamError when sequence
    numbers fail to increase.
    """
    if target_fps <= 0 or source_fps < target_fps:
        raise ValueError("need source_fps >= target_fps > 0")
    ratio = source_fps // target_fps
    last = None
    for frame in frames:
        if last is not None and frame.sequence_number <= last:
            raise StreamError("sequence number did not increase",
                              frame.sequence_number)
        last = frame.sequence_number
        if frame.sequence_number % ratio == 0:
            yield frame


def queue_length(occupancy) -> int:
    """Length of the occupied run that starts at the stop line (block 0);
    the first free block ends the queue."""
    n = 0
    for occupied in occupancy:
        if not occupied:
            break
        n += 1
    return n


def format_report(report: TrafficStatusReport) -> str:
    parts = [str(report.timestamp)]
    for lane in report.lanes:
        bitmap = "".join("1" if o else "0" for o in lane.occupancy)
        parts.append(f"{lane.lane_id}:{bitmap}:{lane.queue_length}")
    return " ".join(parts)


def parse_report(line: str) -> TrafficStatusReport:
    parts = line.split()
    if not parts:
        raise ValueError("empty report line")
    try:
        timestamp = int(parts[0])
    except ValueError:
        raise ValueError(f"bad report timestamp '{parts[0]}'") from None
    lanes = []
    for token in parts[1:]:
        pieces = token.rsplit(":", 2)
        if len(pieces) != 3 or not all(c in "01" for c in pieces[1]):
            raise ValueError(f"bad lane token '{token}'")
        occupancy = tuple(c == "1" for c in pieces[1])
        lanes.append(LaneStatus(pieces[0], occupancy, int(pieces[2])))
    return TrafficStatusReport(timestamp=timestamp, lanes=tuple(lanes))


class _ModelSlot:
    """One learning unit: a ring buffer of recent samples plus the model."""

    def __init__(self, capacity: int, seeds: np.random.SeedSequence):
        self.buffer: deque = deque(maxlen=capacity)
        self.model: GmmModel | None = None
        self.phase = COLLECTING
        self._seeds = seeds

    def next_seed(self) -> np.random.SeedSequence:
        return self._seeds.spawn(1)[0]


class Detector:
    """Owns the rasterized lanes and the evolving mixture model.

    One shared model serves all blocks by default; per-lane models are a
    configuration switch. observe_frame() is the single writer: within a
    frame every block is classified against the pre-frame model snapshot,
    and only then are the samples fed back as online updates.
    """

    def __init__(self, lanes: list[LaneLayout],
                 frame_width: int = DEFAULT_FRAME_WIDTH,
                 frame_height: int = DEFAULT_FRAME_HEIGHT,
                 params: DetectorParams = DetectorParams(),
                 model: GmmModel | None = None,
                 feature_sink: Callable[[str, int, np.ndarray], None] | None = None):
        if not lanes:
            raise ValueError("at least one lane is required")
        self.params = params
        self.frame_width = frame_width
        self.frame_height = frame_height
        self.feature_sink = feature_sink
        self._lanes: list[tuple[LaneLayout, list[BlockRect]]] = [
            (lane, rasterize_blocks(lane, frame_width, frame_height))
            for lane in lanes
        ]
        keys = ([lane.lane_id for lane, _ in self._lanes]
                if params.per_lane_models else [_SHARED_SLOT])
        children = np.random.SeedSequence(params.seed).spawn(len(keys))
        self._slots = {key: _ModelSlot(params.init_samples, child)
                       for key, child in zip(keys, children)}
        if model is not None:
            if params.per_lane_models:
                raise ValueError("preloaded models are not supported per lane")
            if not model.tagged:
                raise ValueError("preloaded model must be class-tagged")
            slot = self._slots[_SHARED_SLOT]
            slot.model = model
            slot.phase = READY

    @property
    def ready(self) -> bool:
        return all(slot.phase == READY for slot in self._slots.values())

    @property
    def buffered_samples(self) -> int:
        return sum(len(slot.buffer) for slot in self._slots.values())

    def lane_blocks(self) -> list[tuple[LaneLayout, list[BlockRect]]]:
        return list(self._lanes)

    def model_snapshot(self) -> GmmModel:
        """Current shared model (statistics, priors, masses and tags)."""
        if self.params.per_lane_models:
            raise ValueError("use lane_model_snapshot() with per-lane models")
        model = self._slots[_SHARED_SLOT].model
        if model is None:
            raise RuntimeError("model has not been fitted yet")
        return model

    def lane_model_snapshot(self, lane_id: str) -> GmmModel:
        slot = self._slots[lane_id if self.params.per_lane_models else _SHARED_SLOT]
        if slot.model is None:
            raise RuntimeError("model has not been fitted yet")
        return slot.model

    def _slot_for(self, lane_id: str) -> _ModelSlot:
        return self._slots[lane_id if self.params.per_lane_models else _SHARED_SLOT]

    def _fit(self, slot: _ModelSlot) -> None:
        points = np.asarray(slot.buffer, dtype=float)
        seed_init = kmeans(points, restarts=self.params.kmeans_restarts,
                           seed=slot.next_seed())
        model = fit_em(points, seed_init, tol=self.params.em_tol,
                       max_iter=self.params.em_max_iter)
        slot.model = assign_class_tags(model)
        slot.phase = READY

    def observe_frame(self, frame: Frame) -> list[BlockObservation]:
        """Process one frame; returns one observation per block once ready,
        an empty list while samples are still being collected."""
        pixels = np.asarray(frame.pixels)
        if pixels.shape != (self.frame_height, self.frame_width):
            raise StreamError(
                f"frame shape {pixels.shape} does not match the configured "
                f"{self.frame_height}x{self.frame_width}",
                frame.sequence_number,
            )

        extracted: list[tuple[_ModelSlot, str, BlockRect, np.ndarray]] = []
        for lane, blocks in self._lanes:
            slot = self._slot_for(lane.lane_id)
            for rect in blocks:
                patch = pixels[rect.y : rect.y + rect.height,
                               rect.x : rect.x + rect.width]
                vec = extract_features(patch, self.params.feature_params)
                if self.feature_sink is not None:
                    self.feature_sink(lane.lane_id, rect.index, vec)
                extracted.append((slot, lane.lane_id, rect, vec))

        # decide against the model as it stood when the frame arrived
        ready_at_start = {id(s): s.phase == READY for s in self._slots.values()}
        start_models = {id(s): s.model for s in self._slots.values()}

        observations: list[BlockObservation] = []
        for slot, lane_id, rect, vec in extracted:
            if ready_at_start[id(slot)]:
                decision = classify(vec, start_models[id(slot)])
                observations.append(BlockObservation(
                    lane_id=lane_id,
                    block_index=rect.index,
                    features=vec,
                    decision=decision,
                    timestamp=frame.timestamp,
                ))
                slot.buffer.append(vec)
                margin = self.params.update_margin
                if margin is None or abs(decision.discriminant) > margin:
                    try:
                        slot.model = online_update(slot.model, vec,
                                                   self.params.forgetting)
                    except ComponentCollapseError:
                        self._fit(slot)
            else:
                if slot.phase == COLLECTING:
                    slot.buffer.append(vec)
                    if len(slot.buffer) == self.params.init_samples:
                        self._fit(slot)
                else:
                    # became ready mid-frame: keep buffering, classify from
                    # the next frame on
                    slot.buffer.append(vec)
        return observations

    def build_report(self, frame: Frame,
                     observations: list[BlockObservation]) -> TrafficStatusReport:
        """Fold one frame's observations into per-lane occupancy and queue."""
        by_lane: dict[str, dict[int, bool]] = {}
        for obs in observations:
            by_lane.setdefault(obs.lane_id, {})[obs.block_index] = (
                obs.decision.label == CLASS_VEHICLE
            )
        lanes = []
        for lane, blocks in self._lanes:
            decided = by_lane.get(lane.lane_id)
            if decided is None:
                continue
            occupancy = tuple(decided[i] for i in range(len(blocks)))
            lanes.append(LaneStatus(lane.lane_id, occupancy, queue_length(occupancy)))
        return TrafficStatusReport(timestamp=frame.timestamp, lanes=tuple(lanes))
