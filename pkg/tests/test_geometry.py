import numpy as np
import pytest

from lanewatch import (
    BlockRect,
    LaneConfigError,
    LaneLayout,
    LaneValidationError,
    RasterizationError,
    parse_lane_config,
    rasterize_blocks,
)

TWO_LANE_DOC = """\
# two straight lanes
lane north-1
quad 60,100 120,100 120,220 60,220
blocks 3
stopline front

lane north-2
quad 200,40 260,40 250,260 210,260   # mild trapezoid
blocks 5
stopline rear
"""


# ------------------------------------------------------------------ parsing

def test_parse_two_lane_document():
    lanes = parse_lane_config(TWO_LANE_DOC)
    assert [l.lane_id for l in lanes] == ["north-1", "north-2"]
    assert lanes[0].quad == ((60, 100), (120, 100), (120, 220), (60, 220))
    assert lanes[0].block_count == 3
    assert lanes[0].stop_line_end == "front"
    assert lanes[1].stop_line_end == "rear"


def test_parse_out_of_bounds_point():
    doc = "lane a\nquad 400,100 10,10 20,10 20,20\nblocks 2\nstopline front\n"
    with pytest.raises(LaneValidationError, match="lane 'a'"):
        parse_lane_config(doc, 352, 288)


def test_parse_zero_blocks():
    doc = "lane a\nquad 10,10 60,10 60,60 10,60\nblocks 0\nstopline front\n"
    with pytest.raises(LaneValidationError, match="block count"):
        parse_lane_config(doc)


@pytest.mark.parametrize("doc,lineno", [
    ("lane a\nquad 1,2 3,4 5,6\nblocks 1\nstopline front\n", 2),
    ("lane a\nquad 1,2 3,4 5,6 x,8\nblocks 1\nstopline front\n", 2),
    ("lane a\nquad 1,2 3,4 5,6 7,8\nblocks one\nstopline front\n", 3),
    ("lane a\nquad 1,2 3,4 5,6 7,8\nblocks 1\nstopline sideways\n", 4),
    ("quad 1,2 3,4 5,6 7,8\n", 1),
    ("lane a\nwheels 4\n", 2),
    ("lane a\nquad 1,2 3,4 5,6 7,8\nquad 1,2 3,4 5,6 7,8\n", 3),
])
def test_parse_errors_carry_line_numbers(doc, lineno):
    with pytest.raises(LaneConfigError, match=f"line {lineno}"):
        parse_lane_config(doc)


def test_parse_missing_field():
    with pytest.raises(LaneConfigError, match="missing 'stopline'"):
        parse_lane_config("lane a\nquad 10,10 60,10 60,60 10,60\nblocks 1\n")


def test_parse_duplicate_lane_id():
    doc = ("lane a\nquad 10,10 60,10 60,60 10,60\nblocks 1\nstopline front\n"
           "lane a\nquad 110,10 160,10 160,60 110,60\nblocks 1\nstopline front\n")
    with pytest.raises(LaneValidationError, match="duplicate"):
        parse_lane_config(doc)


def test_parse_rejects_colon_in_id():
    with pytest.raises(LaneConfigError, match="':'"):
        parse_lane_config("lane a:b\nquad 10,10 60,10 60,60 10,60\nblocks 1\nstopline front\n")


def test_parse_rejects_self_intersecting_quad():
    doc = "lane bow\nquad 10,10 100,90 100,10 10,60\nblocks 1\nstopline front\n"
    with pytest.raises(LaneValidationError, match="self-intersecting"):
        parse_lane_config(doc)


def test_parse_rejects_zero_area_quad():
    doc = "lane flat\nquad 10,10 60,10 110,10 160,10\nblocks 1\nstopline front\n"
    with pytest.raises(LaneValidationError, match="zero area"):
        parse_lane_config(doc)


def test_empty_document_parses_to_no_lanes():
    assert parse_lane_config("# only comments\n\n") == []


# ------------------------------------------------------------- rasterization

def lane(quad, blocks, stop="front", lane_id="t"):
    return LaneLayout(lane_id=lane_id, quad=quad, block_count=blocks,
                      stop_line_end=stop)


def test_rectangle_quad_splits_into_equal_blocks():
    l = lane(((60, 100), (120, 100), (120, 220), (60, 220)), 3)
    blocks = rasterize_blocks(l, 352, 288)
    assert blocks == [
        BlockRect(x=60, y=100, width=60, height=40, index=0),
        BlockRect(x=60, y=140, width=60, height=40, index=1),
        BlockRect(x=60, y=180, width=60, height=40, index=2),
    ]


def test_stopline_rear_reverses_indexing():
    l = lane(((60, 100), (120, 100), (120, 220), (60, 220)), 3, stop="rear")
    blocks = rasterize_blocks(l, 352, 288)
    assert blocks[0] == BlockRect(x=60, y=180, width=60, height=40, index=0)
    assert blocks[2] == BlockRect(x=60, y=100, width=60, height=40, index=2)


def test_trapezoid_widths_non_increasing_toward_rear():
    # symmetric trapezoid: front width 100, rear width 50
    l = lane(((100, 40), (200, 40), (175, 240), (125, 240)), 2)
    blocks = rasterize_blocks(l, 352, 288)
    assert blocks[0].width > blocks[1].width


def test_too_flat_trapezoid_raises_with_block_index():
    l = lane(((100, 100), (200, 100), (200, 120), (100, 120)), 4)
    with pytest.raises(RasterizationError, match="block 0"):
        rasterize_blocks(l, 352, 288)


def test_block_count_matches_and_indexes_are_sequential():
    l = lane(((100, 40), (200, 40), (175, 240), (125, 240)), 5)
    blocks = rasterize_blocks(l, 352, 288)
    assert [b.index for b in blocks] == [0, 1, 2, 3, 4]


def _overlap(a: BlockRect, b: BlockRect) -> bool:
    return (a.x < b.x + b.width and b.x < a.x + a.width
            and a.y < b.y + b.height and b.y < a.y + a.height)


def test_rasterization_invariants_on_random_trapezoids():
    rng = np.random.default_rng(31)
    for _ in range(25):
        front_y = float(rng.integers(10, 60))
        rear_y = float(rng.integers(180, 280))
        front_cx = float(rng.integers(80, 260))
        rear_cx = front_cx + float(rng.integers(-15, 16))
        front_w = float(rng.integers(60, 90))
        rear_w = float(rng.integers(40, 60))
        quad = ((front_cx - front_w / 2, front_y), (front_cx + front_w / 2, front_y),
                (rear_cx + rear_w / 2, rear_y), (rear_cx - rear_w / 2, rear_y))
        n = int(rng.integers(2, 6))
        l = lane(quad, n)
        blocks = rasterize_blocks(l, 352, 288)
        assert len(blocks) == n
        xs = [p[0] for p in quad]
        ys = [p[1] for p in quad]
        for b in blocks:
            # inside the quad bounding box and the frame
            assert b.x >= min(xs) - 1 and b.x + b.width <= max(xs) + 1
            assert b.y >= min(ys) - 1 and b.y + b.height <= max(ys) + 1
            assert 0 <= b.x and b.x + b.width <= 352
            assert 0 <= b.y and b.y + b.height <= 288
            assert b.width >= 8 and b.height >= 8
        for i in range(n):
            for j in range(i + 1, n):
                assert not _overlap(blocks[i], blocks[j])
        # blocks progress monotonically along the (vertical) lane axis
        tops = [b.y for b in blocks]
        assert tops == sorted(tops)
        # pure function: identical re-run
        assert rasterize_blocks(l, 352, 288) == blocks


def test_slice_heights_cover_axis_for_rectangles():
    rng = np.random.default_rng(8)
    for _ in range(20):
        x0 = int(rng.integers(0, 200))
        y0 = int(rng.integers(0, 80))
        w = int(rng.integers(10, 80))
        h = int(rng.integers(60, 200))
        n = int(rng.integers(1, min(6, h // 9)))
        l = lane(((x0, y0), (x0 + w, y0), (x0 + w, y0 + h), (x0, y0 + h)), n)
        blocks = rasterize_blocks(l, 352, 288)
        total = sum(b.height for b in blocks)
        assert h - n <= total <= h
