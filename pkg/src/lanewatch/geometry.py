"""Lane geometry: operator-declared trapezoidal lanes and their rasterization
into axis-aligned detection blocks.

Configuration grammar (one record per lane; '#' starts a comment):

    lane <id>
    quad x1,y1 x2,y2 x3,y3 x4,y4
    blocks <n>
    stopline front|rear

Quad points are ordered front-left, front-right, rear-right, rear-left.
Under the usual traffic-camera perspective the front edge (near the camera)
is the wide one. ``stopline`` marks which end abuts the stop line; block
index 0 sits at that end.

Rasterization divides the lane axis into ``blocks`` equal-length slices and
inscribes the largest axis-aligned pixel rectangle in each slice. Slivers
left over along the slanted edges are dropped, never covered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_BLOCK_SIDE = 8

FRONT = "front"
REAR = "rear"


class LaneConfigError(ValueError):
    """Malformed configuration text; the message carries the line number."""


class LaneValidationError(ValueError):
    """A structurally valid record violates a lane invariant."""


class RasterizationError(ValueError):
    """A lane cannot be split into blocks of the minimum size."""


@dataclass(frozen=True)
class LaneLayout:
    lane_id: str
    quad: tuple[tuple[float, float], ...]
    block_count: int
    stop_line_end: str

    def __post_init__(self):
        quad = tuple((float(x), float(y)) for x, y in self.quad)
        object.__setattr__(self, "quad", quad)
        if len(quad) != 4:
            raise LaneValidationError(f"lane '{self.lane_id}': quad needs 4 points")
        if self.block_count < 1:
            raise LaneValidationError(
                f"lane '{self.lane_id}': block count must be at least 1"
            )
        if self.stop_line_end not in (FRONT, REAR):
            raise LaneValidationError(
                f"lane '{self.lane_id}': stop line end must be 'front' or 'rear'"
            )


@dataclass(frozen=True)
class BlockRect:
    """Axis-aligned detection block; index 0 is at the stop-line end."""

    x: int
    y: int
    width: int
    height: int
    index: int


def _orientation(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _on_segment(p, q, r) -> bool:
    return (
        min(p[0], r[0]) <= q[0] <= max(p[0], r[0])
        and min(p[1], r[1]) <= q[1] <= max(p[1], r[1])
    )


def _segments_intersect(a, b, c, d) -> bool:
    o1, o2 = _orientation(a, b, c), _orientation(a, b, d)
    o3, o4 = _orientation(c, d, a), _orientation(c, d, b)
    if ((o1 > 0) != (o2 > 0)) and ((o3 > 0) != (o4 > 0)) and o1 != 0 and o2 != 0:
        return True
    if o1 == 0 and _on_segment(a, c, b):
        return True
    if o2 == 0 and _on_segment(a, d, b):
        return True
    if o3 == 0 and _on_segment(c, a, d):
        return True
    if o4 == 0 and _on_segment(c, b, d):
        return True
    return False


def _polygon_area(points) -> float:
    s = 0.0
    n = len(points)
    for i in range(n):
        x1, y1 = points[i]
        x2, y2 = points[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return abs(s) / 2.0


def validate_lane(lane: LaneLayout, frame_w: int, frame_h: int) -> None:
    """Check frame bounds and polygon simplicity; raises LaneValidationError."""
    for x, y in lane.quad:
        if not (0 <= x < frame_w and 0 <= y < frame_h):
            raise LaneValidationError(
                f"lane '{lane.lane_id}': point ({x:g}, {y:g}) outside the "
                f"{frame_w}x{frame_h} frame"
            )
    p0, p1, p2, p3 = lane.quad
    if _polygon_area(lane.quad) == 0.0:
        raise LaneValidationError(f"lane '{lane.lane_id}': quad has zero area")
    if _segments_intersect(p0, p1, p2, p3) or _segments_intersect(p1, p2, p3, p0):
        raise LaneValidationError(
            f"lane '{lane.lane_id}': quad is self-intersecting"
        )


def _parse_point(token: str, lineno: int) -> tuple[float, float]:
    parts = token.split(",")
    if len(parts) != 2:
        raise LaneConfigError(f"line {lineno}: expected 'x,y', got '{token}'")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise LaneConfigError(f"line {lineno}: non-numeric coordinate '{token}'") from None


def parse_lane_config(text: str, frame_w: int = 352, frame_h: int = 288) -> list[LaneLayout]:
    """Parse a lane configuration document and validate every lane.

    Syntax problems raise LaneConfigError with the offending line number;
    semantic problems (out-of-bounds points, bad block counts, duplicate
    ids) raise LaneValidationError naming the lane.
    """
    records: list[dict] = []
    current: dict | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        key = fields[0]
        if key == "lane":
            if len(fields) != 2:
                raise LaneConfigError(f"line {lineno}: expected 'lane <id>'")
            if ":" in fields[1]:
                raise LaneConfigError(f"line {lineno}: lane id must not contain ':'")
            current = {"lane_id": fields[1], "line": lineno}
            records.append(current)
            continue
        if current is None:
            raise LaneConfigError(f"line {lineno}: '{key}' before any 'lane' record")
        if key == "quad":
            if "quad" in current:
                raise LaneConfigError(f"line {lineno}: duplicate 'quad'")
            if len(fields) != 5:
                raise LaneConfigError(
                    f"line {lineno}: expected 4 quad points, got {len(fields) - 1}"
                )
            current["quad"] = tuple(_parse_point(t, lineno) for t in fields[1:])
        elif key == "blocks":
            if "blocks" in current:
                raise LaneConfigError(f"line {lineno}: duplicate 'blocks'")
            if len(fields) != 2:
                raise LaneConfigError(f"line {lineno}: expected 'blocks <n>'")
            try:
                current["blocks"] = int(fields[1])
            except ValueError:
                raise LaneConfigError(
                    f"line {lineno}: block count must be an integer"
                ) from None
        elif key == "stopline":
            if "stopline" in current:
                raise LaneConfigError(f"line {lineno}: duplicate 'stopline'")
            if len(fields) != 2 or fields[1] not in (FRONT, REAR):
                raise LaneConfigError(f"line {lineno}: expected 'stopline front|rear'")
            current["stopline"] = fields[1]
        else:
            raise LaneConfigError(f"line {lineno}: unknown directive '{key}'")

    lanes = []
    seen = set()
    for rec in records:
        for field in ("quad", "blocks", "stopline"):
            if field not in rec:
                raise LaneConfigError(
                    f"line {rec['line']}: lane '{rec['lane_id']}' is missing '{field}'"
                )
        lane = LaneLayout(
            lane_id=rec["lane_id"],
            quad=rec["quad"],
            block_count=rec["blocks"],
            stop_line_end=rec["stopline"],
        )
        if lane.lane_id in seen:
            raise LaneValidationError(f"lane '{lane.lane_id}': duplicate lane id")
        seen.add(lane.lane_id)
        validate_lane(lane, frame_w, frame_h)
        lanes.append(lane)
    return lanes


def _lerp(p, q, t: float) -> tuple[float, float]:
    return (p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t)


def _row_intervals(poly, yc: float) -> list[tuple[float, float]]:
    """Even-odd x-intervals of the horizontal line y=yc inside the polygon."""
    xs = []
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if y1 == y2:
            continue
        # half-open in y so shared vertices are counted exactly once
        if (y1 <= yc < y2) or (y2 <= yc < y1):
            xs.append(x1 + (yc - y1) * (x2 - x1) / (y2 - y1))
    xs.sort()
    return [(xs[i], xs[i + 1]) for i in range(0, len(xs) - 1, 2)]


def _coverage_mask(poly) -> tuple[np.ndarray, int, int]:
    """Boolean grid of pixels whose centers fall strictly inside the polygon."""
    xs = [p[0] for p in poly]
    ys = [p[1] for p in poly]
    x_lo, x_hi = math.floor(min(xs)), math.ceil(max(xs))
    y_lo, y_hi = math.floor(min(ys)), math.ceil(max(ys))
    rows = max(y_hi - y_lo, 1)
    cols = max(x_hi - x_lo, 1)
    mask = np.zeros((rows, cols), dtype=bool)
    for r in range(rows):
        yc = y_lo + r + 0.5
        for xl, xr in _row_intervals(poly, yc):
            px_min = math.floor(xl - 0.5) + 1
            px_max = math.ceil(xr - 0.5) - 1
            a = max(px_min - x_lo, 0)
            b = min(px_max - x_lo, cols - 1)
            if a <= b:
                mask[r, a : b + 1] = True
    return mask, x_lo, y_lo


def _largest_rect_of_ones(mask: np.ndarray) -> tuple[int, int, int, int] | None:
    """Largest axis-aligned all-True rectangle (x, y, w, h) in mask coords.

    Ties are broken by scan order (topmost, then leftmost) so the result is
    deterministic.
    """
    rows, cols = mask.shape
    heights = [0] * cols
    best_area = 0
    best = None
    for r in range(rows):
        mrow = mask[r]
        for c in range(cols):
            heights[c] = heights[c] + 1 if mrow[c] else 0
        stack: list[tuple[int, int]] = []
        for c in range(cols + 1):
            h = heights[c] if c < cols else 0
            start = c
            while stack and stack[-1][1] >= h:
                s, ph = stack.pop()
                area = ph * (c - s)
                if area > best_area:
                    best_area = area
                    best = (s, r - ph + 1, c - s, ph)
                start = s
            if h > 0 and (not stack or stack[-1][1] < h):
                stack.append((start, h))
    return best


def rasterize_blocks(lane: LaneLayout, frame_w: int, frame_h: int) -> list[BlockRect]:
    """Split the lane into block_count equal axis slices and inscribe the
    largest axis-aligned rectangle in each.

    Returns blocks ordered by index, index 0 at the stop-line end. Raises
    RasterizationError (naming the block index) when an inscribed rectangle
    falls below the 8x8 minimum.
    """
    validate_lane(lane, frame_w, frame_h)
    fl, fr, rr, rl = lane.quad
    n = lane.block_count
    raw: list[tuple[int, int, int, int] | None] = []
    for k in range(n):
        t0, t1 = k / n, (k + 1) / n
        poly = (_lerp(fl, rl, t0), _lerp(fr, rr, t0), _lerp(fr, rr, t1), _lerp(fl, rl, t1))
        mask, x_lo, y_lo = _coverage_mask(poly)
        rect = _largest_rect_of_ones(mask)
        if rect is not None:
            rect = (rect[0] + x_lo, rect[1] + y_lo, rect[2], rect[3])
        raw.append(rect)

    ordered = raw if lane.stop_line_end == FRONT else list(reversed(raw))
    blocks = []
    for index, rect in enumerate(ordered):
        if rect is None or rect[2] < MIN_BLOCK_SIDE or rect[3] < MIN_BLOCK_SIDE:
            size = "empty" if rect is None else f"{rect[2]}x{rect[3]}"
            raise RasterizationError(
                f"lane '{lane.lane_id}' block {index}: inscribed rectangle "
                f"({size}) is below the {MIN_BLOCK_SIDE}x{MIN_BLOCK_SIDE} minimum"
            )
        x, y, w, h = rect
        blocks.append(BlockRect(x=x, y=y, width=w, height=h, index=index))
    return blocks
