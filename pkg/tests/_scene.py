"""Synthetic traffic scene generator: the oracle for end-to-end tests.

Vehicles are blocks filled with high-variance random texture; the road is a
flat low-noise background. The per-frame occupancy schedule (a random queue
walk plus occasional mid-lane vehicles) is the ground truth that detector
reports are judged against. Everything is a pure function of the seed, so
two generations of the same scene are byte-identical.
"""

from dataclasses import dataclass

import numpy as np

from lanewatch import Frame, LaneLayout, parse_lane_config, rasterize_blocks

BACKGROUND_MEAN = 90
BACKGROUND_SIGMA = 2.0

DEFAULT_CONFIG = """\
# synthetic test scene
lane left
quad 60,24 124,24 116,264 68,264
blocks 6
stopline front

lane right
quad 200,24 264,24 264,264 200,264
blocks 6
stopline rear
"""


@dataclass
class Scene:
    width: int
    height: int
    fps: int
    seed: int
    n_frames: int
    config_text: str
    lanes: list
    blocks: dict  # lane_id -> list[BlockRect]
    schedule: dict  # lane_id -> bool array (n_frames, block_count)


def build_scene(n_frames, seed, width=352, height=288, fps=5,
                config_text=DEFAULT_CONFIG, extra_vehicle_prob=0.15) -> Scene:
    lanes = parse_lane_config(config_text, width, height)
    blocks = {lane.lane_id: rasterize_blocks(lane, width, height) for lane in lanes}
    rng = np.random.default_rng([seed, 1])
    schedule = {}
    for lane in lanes:
        n_blocks = lane.block_count
        occ = np.zeros((n_frames, n_blocks), dtype=bool)
        q = int(rng.integers(0, n_blocks + 1))
        for t in range(n_frames):
            q = int(np.clip(q + rng.integers(-1, 2), 0, n_blocks))
            occ[t, :q] = True
            if q + 1 < n_blocks and rng.random() < extra_vehicle_prob:
                occ[t, int(rng.integers(q + 1, n_blocks))] = True
        schedule[lane.lane_id] = occ
    return Scene(width=width, height=height, fps=fps, seed=seed,
                 n_frames=n_frames, config_text=config_text, lanes=lanes,
                 blocks=blocks, schedule=schedule)


def iter_pixels(scene: Scene):
    """Deterministic frame pixel stream for the scene."""
    rng = np.random.default_rng([scene.seed, 2])
    for t in range(scene.n_frames):
        frame = np.clip(
            rng.normal(BACKGROUND_MEAN, BACKGROUND_SIGMA,
                       (scene.height, scene.width)),
            0, 255,
        ).astype(np.uint8)
        for lane in scene.lanes:
            occ = scene.schedule[lane.lane_id][t]
            for rect in scene.blocks[lane.lane_id]:
                if occ[rect.index]:
                    frame[rect.y : rect.y + rect.height,
                          rect.x : rect.x + rect.width] = rng.integers(
                        0, 256, (rect.height, rect.width), dtype=np.uint8)
        yield frame


def iter_frames(scene: Scene):
    for t, pixels in enumerate(iter_pixels(scene)):
        yield Frame(pixels=pixels, timestamp=t * 1000 // scene.fps,
                    sequence_number=t)


def write_raw(scene: Scene, path, max_frames=None) -> None:
    with open(path, "wb") as f:
        for t, pixels in enumerate(iter_pixels(scene)):
            if max_frames is not None and t >= max_frames:
                break
            f.write(pixels.tobytes())


def prefix_queue(occupancy_row) -> int:
    n = 0
    for occupied in occupancy_row:
        if not occupied:
            break
        n += 1
    return n
