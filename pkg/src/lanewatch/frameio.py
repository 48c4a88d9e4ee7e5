"""Grayscale frame sources: headerless Y-plane files and PGM directories.

Both readers synthesize millisecond timestamps from the declared source
frame rate (sequence * 1000 // fps) and number frames from zero; `skip`
consumes leading frames while keeping their sequence numbers, which lets a
run resume mid-stream with timestamps intact.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Iterator

import numpy as np

from .pipeline import DEFAULT_SOURCE_FPS, Frame, StreamError


def read_raw_frames(path: str | os.PathLike, width: int, height: int,
                    fps: int = DEFAULT_SOURCE_FPS, skip: int = 0) -> Iterator[Frame]:
    """Frames from a headerless 8-bit grayscale file: one byte per pixel,
    row-major, frames back to back. A trailing partial frame raises
    StreamError with its sequence number."""
    if width <= 0 or height <= 0 or fps <= 0:
        raise ValueError("width, height and fps must be positive")
    frame_bytes = width * height
    with open(path, "rb") as f:
        if skip:
            f.seek(skip * frame_bytes)
        seq = skip
        while True:
            buf = f.read(frame_bytes)
            if not buf:
                return
            if len(buf) < frame_bytes:
                raise StreamError(
                    f"truncated payload ({len(buf)} of {frame_bytes} bytes)", seq
                )
            pixels = np.frombuffer(buf, dtype=np.uint8).reshape(height, width)
            yield Frame(pixels=pixels, timestamp=seq * 1000 // fps,
                        sequence_number=seq)
            seq += 1


def _read_pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First `count` whitespace-separated header tokens, skipping comments;
    returns the tokens and the offset one byte past the last separator."""
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < count and i < n:
        if data[i : i + 1].isspace():
            i += 1
        elif data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        else:
            j = i
            while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    if len(tokens) < count:
        raise ValueError("unexpected end of PGM header")
    return tokens, i + 1  # one whitespace byte terminates the header


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Load a P5 (binary) or P2 (ASCII) graymap with maxval <= 255."""
    data = Path(path).read_bytes()
    try:
        (magic, w_tok, h_tok, max_tok), offset = _read_pgm_tokens(data, 4)
        if magic not in (b"P5", b"P2"):
            raise ValueError(f"unsupported magic {magic!r}")
        width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
        if width <= 0 or height <= 0:
            raise ValueError("non-positive dimensions")
        if not 0 < maxval <= 255:
            raise ValueError(f"unsupported maxval {maxval}")
        if magic == b"P5":
            raster = data[offset : offset + width * height]
            if len(raster) < width * height:
                raise ValueError("raster shorter than width*height")
            pixels = np.frombuffer(raster, dtype=np.uint8)
        else:
            values = data[offset:].split()
            if len(values) < width * height:
                raise ValueError("raster shorter than width*height")
            pixels = np.array([int(v) for v in values[: width * height]],
                              dtype=np.uint8)
        return pixels.reshape(height, width)
    except ValueError as exc:
        raise StreamError(f"bad PGM file '{path}': {exc}") from None


def write_pgm(path: str | os.PathLike, pixels: np.ndarray) -> None:
    a = np.asarray(pixels, dtype=np.uint8)
    if a.ndim != 2:
        raise ValueError("pixels must be a 2-D array")
    with open(path, "wb") as f:
        f.write(f"P5\n{a.shape[1]} {a.shape[0]}\n255\n".encode("ascii"))
        f.write(a.tobytes())


def read_pgm_dir(path: str | os.PathLike, fps: int = DEFAULT_SOURCE_FPS,
                 skip: int = 0) -> Iterator[Frame]:
    """Frames from the *.pgm files of a directory, in lexical name order."""
    if fps <= 0:
        raise ValueError("fps must be positive")
    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() == ".pgm")
    for seq, file in enumerate(files):
        if seq < skip:
            continue
        try:
            pixels = read_pgm(file)
        except StreamError as exc:
            raise StreamError(str(exc), seq) from None
        yield Frame(pixels=pixels, timestamp=seq * 1000 // fps, sequence_number=seq)
