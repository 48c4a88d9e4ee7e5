"""Texture features for lane-block patches.

A patch is a 2-D array of 8-bit gray levels (0..255). The statistical
features (local entropy, non-zero bin rate, moments) work on a histogram
quantized to 32 levels; the edge fractions run on the raw gray values.
Every feature is scaled to [0, 1] so the assembled vector plays well with
Euclidean clustering.

Feature vector layout (fixed, also used by the CSV serialization):

    index 0  E'      max local entropy / log2(levels)
    index 1  B       rate of non-zero histogram bins
    index 2  M2      normalized second central moment
    index 3  G(h4)   right-diagonal edge fraction
    index 4  G(h3)   left-diagonal edge fraction
    index 5  M1      normalized first moment (mean level)
    index 6  G(h2)   vertical edge fraction
    index 7  G(h1)   horizontal edge fraction
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

RAW_LEVELS = 256
QUANT_LEVELS = 32
EDGE_THRESHOLD = 30
ENTROPY_HALF_WIDTH = 2
ENTROPY_HALF_HEIGHT = 2
MIN_PATCH_SIDE = 8

FEATURE_SYMBOLS = ("E'", "B", "M2", "G(h4)", "G(h3)", "M1", "G(h2)", "G(h1)")
N_FEATURES = len(FEATURE_SYMBOLS)


class DegenerateClassesError(ValueError):
    """Both sample sets are constant and identical; no separability defined."""


@dataclass(frozen=True, eq=False)
class EdgeKernel:
    """3x3 zero-sum edge detection kernel."""

    kernel_id: str
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=np.int64)
        if coeffs.shape != (3, 3):
            raise ValueError("edge kernel must be 3x3")
        if int(coeffs.sum()) != 0:
            raise ValueError("edge kernel coefficients must sum to zero")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coefficients", coeffs)


HORIZONTAL_EDGE = EdgeKernel("h1", [[-1, -2, -1], [0, 0, 0], [1, 2, 1]])
VERTICAL_EDGE = EdgeKernel("h2", [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]])
LEFT_DIAGONAL_EDGE = EdgeKernel("h3", [[0, -1, -1], [1, 0, -1], [1, 1, 0]])
RIGHT_DIAGONAL_EDGE = EdgeKernel("h4", [[-1, -1, 0], [-1, 0, 1], [0, 1, 1]])
EDGE_KERNELS = {
    k.kernel_id: k
    for k in (HORIZONTAL_EDGE, VERTICAL_EDGE, LEFT_DIAGONAL_EDGE, RIGHT_DIAGONAL_EDGE)
}


@dataclass(frozen=True, eq=False)
class Histogram:
    """Counts per quantized gray level; bin i (1-based) lives at counts[i-1]."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size == 0:
            raise ValueError("histogram counts must be a non-empty 1-D array")
        if (counts < 0).any():
            raise ValueError("histogram counts must be non-negative")
        if counts.sum() == 0:
            raise ValueError("histogram is empty")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def levels(self) -> int:
        return self.counts.size

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def probabilities(self) -> np.ndarray:
        return self.counts / self.total


@dataclass(frozen=True)
class FeatureParams:
    levels: int = QUANT_LEVELS
    entropy_half_w: int = ENTROPY_HALF_WIDTH
    entropy_half_h: int = ENTROPY_HALF_HEIGHT
    edge_threshold: float = EDGE_THRESHOLD


def _validate_patch(patch) -> np.ndarray:
    a = np.asarray(patch)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("patch must be a non-empty 2-D array")
    if not np.issubdtype(a.dtype, np.integer):
        raise ValueError("patch must contain integer gray levels")
    a = np.ascontiguousarray(a, dtype=np.int64)
    if a.min() < 0 or a.max() > RAW_LEVELS - 1:
        raise ValueError("pixel values must lie in [0, 255]")
    return a


def _check_levels(levels: int) -> int:
    if levels <= 0 or RAW_LEVELS % levels != 0:
        raise ValueError(f"levels must evenly divide {RAW_LEVELS}, got {levels}")
    return RAW_LEVELS // levels


def quantize_histogram(patch, levels: int = QUANT_LEVELS) -> Histogram:
    """Histogram of the patch's gray levels over `levels` equal-width bins."""
    width = _check_levels(levels)
    a = _validate_patch(patch)
    counts = np.bincount((a // width).ravel(), minlength=levels)
    return Histogram(counts=counts)


def entropy(hist: Histogram) -> float:
    """Shannon entropy of the histogram in bits; empty bins contribute zero."""
    p = hist.probabilities()
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


@lru_cache(maxsize=None)
def _entropy_term_table(area: int) -> np.ndarray:
    """-(p*log2(p)) for p = count/area, indexed by count; term 0 is zero.

    Built with scalar operations so each entry is bit-identical to evaluating
    the expression for one histogram bin.
    """
    table = np.zeros(area + 1)
    for c in range(1, area + 1):
        p = np.int64(c) / area
        table[c] = -(p * np.log2(p))
    table.flags.writeable = False
    return table


def _window_entropy_max_numpy(q, table, levels, win_h, win_w):
    # per-level integral images give every window's exact bin count
    h, w = q.shape
    onehot = np.arange(levels, dtype=np.int64)[:, None, None] == q
    integ = np.zeros((levels, h + 1, w + 1), dtype=np.int32)
    np.cumsum(onehot, axis=1, out=integ[:, 1:, 1:])
    np.cumsum(integ, axis=2, out=integ)
    counts = (
        integ[:, win_h:, win_w:]
        - integ[:, :-win_h, win_w:]
        - integ[:, win_h:, :-win_w]
        + integ[:, :-win_h, :-win_w]
    )
    # ascending-bin, left-to-right accumulation: bit-identical to summing
    # -(p*log2(p)) over the non-empty bins of each window in a scalar loop
    ent = table[counts[0]]
    for level in range(1, levels):
        ent += table[counts[level]]
    return float(ent.max())


if _HAVE_NUMBA:

    @njit(cache=True)
    def _window_entropy_max_jit(q, table, levels, win_h, win_w):  # pragma: no cover
        h, w = q.shape
        counts = np.zeros(levels, dtype=np.int64)
        best = -1.0
        for y in range(h - win_h + 1):
            for level in range(levels):
                counts[level] = 0
            for i in range(win_h):
                for j in range(win_w):
                    counts[q[y + i, j]] += 1
            for x in range(w - win_w + 1):
                if x > 0:  # slide the window one column to the right
                    for i in range(win_h):
                        counts[q[y + i, x - 1]] -= 1
                        counts[q[y + i, x + win_w - 1]] += 1
                acc = 0.0
                for level in range(levels):
                    if counts[level] > 0:
                        acc += table[counts[level]]
                if acc > best:
                    best = acc
        return best

    @njit(cache=True)
    def _edge_hits_jit(a, coeffs, threshold):  # pragma: no cover
        h, w = a.shape
        hits = 0
        for y in range(h - 2):
            for x in range(w - 2):
                r = 0
                for i in range(3):
                    for j in range(3):
                        r += coeffs[i, j] * a[y + i, x + j]
                if abs(r) > threshold:
                    hits += 1
        return hits


def max_local_entropy(
    patch,
    half_w: int = ENTROPY_HALF_WIDTH,
    half_h: int = ENTROPY_HALF_HEIGHT,
    levels: int = QUANT_LEVELS,
) -> float:
    """Maximum quantized-histogram entropy over every fully interior window.

    The window is (2*half_w+1) x (2*half_h+1) pixels and only positions where
    it fits entirely inside the patch are evaluated (no padding). Raises
    ValueError if the patch is smaller than one window.
    """
    width = _check_levels(levels)
    a = _validate_patch(patch)
    win_h, win_w = 2 * half_h + 1, 2 * half_w + 1
    h, w = a.shape
    if h < win_h or w < win_w:
        raise ValueError(
            f"patch {w}x{h} is smaller than the {win_w}x{win_h} window"
        )
    q = a // width
    table = _entropy_term_table(win_h * win_w)
    if _HAVE_NUMBA:
        best = _window_entropy_max_jit(q, table, levels, win_h, win_w)
    else:
        best = _window_entropy_max_numpy(q, table, levels, win_h, win_w)
    return float(best) + 0.0


def edge_fraction(patch, kernel: EdgeKernel, threshold: float = EDGE_THRESHOLD) -> float:
    """Fraction of interior positions whose absolute kernel response exceeds
    the threshold.

    The kernel is evaluated only where its 3x3 support fits, so the
    denominator is (w-2)*(h-2) and the result genuinely spans [0, 1].
    """
    a = _validate_patch(patch)
    h, w = a.shape
    if h < 3 or w < 3:
        raise ValueError("patch must be at least 3x3 for edge detection")
    if _HAVE_NUMBA:
        hits = int(_edge_hits_jit(a, kernel.coefficients, float(threshold)))
    else:
        resp = np.zeros((h - 2, w - 2), dtype=np.int64)
        k = kernel.coefficients
        for i in range(3):
            for j in range(3):
                c = int(k[i, j])
                if c:
                    resp += c * a[i : i + h - 2, j : j + w - 2]
        hits = int((np.abs(resp) > threshold).sum())
    return hits / ((h - 2) * (w - 2))


def nonzero_bin_rate(hist: Histogram) -> float:
    """Fraction of histogram bins that hold at least one pixel."""
    return int((hist.counts > 0).sum()) / hist.levels


def first_moment(hist: Histogram) -> float:
    """Mean quantized level divided by the level count; lands in (0, 1]."""
    p = hist.probabilities()
    i = np.arange(1, hist.levels + 1)
    return float((i * p).sum() / hist.levels)


def second_moment_normalized(hist: Histogram) -> float:
    """Variance of the quantized level, scaled by its maximum (levels-1)^2/4.

    The inner mean is the raw (unnormalized) first moment; that is what makes
    the two-extreme-bins histogram attain exactly 1.0.
    """
    p = hist.probabilities()
    i = np.arange(1, hist.levels + 1)
    mean = (i * p).sum()
    var = (i * i * p).sum() - mean * mean
    value = 4.0 * var / (hist.levels - 1) ** 2
    # fp noise can push a zero variance fractionally outside [0, 1]
    return float(min(max(value, 0.0), 1.0))


def extract_features(patch, params: FeatureParams = FeatureParams()) -> np.ndarray:
    """Assemble the 8-component feature vector for one block patch.

    Raises ValueError for patches under 8x8; every component is in [0, 1].
    """
    a = _validate_patch(patch)
    if a.shape[0] < MIN_PATCH_SIDE or a.shape[1] < MIN_PATCH_SIDE:
        raise ValueError(
            f"patch {a.shape[1]}x{a.shape[0]} is below the "
            f"{MIN_PATCH_SIDE}x{MIN_PATCH_SIDE} minimum"
        )
    hist = quantize_histogram(a, params.levels)
    e_norm = (
        max_local_entropy(a, params.entropy_half_w, params.entropy_half_h, params.levels)
        / math.log2(params.levels)
    )
    g = {
        kid: edge_fraction(a, kern, params.edge_threshold)
        for kid, kern in EDGE_KERNELS.items()
    }
    return np.array(
        [
            e_norm,
            nonzero_bin_rate(hist),
            second_moment_normalized(hist),
            g["h4"],
            g["h3"],
            first_moment(hist),
            g["h2"],
            g["h1"],
        ]
    )


def fisher_score(class_a, class_b) -> float:
    """Two-class separability: squared mean gap over summed population variances.

    Returns +inf when both classes are constant but different; raises
    DegenerateClassesError when they are constant and equal.
    """
    a = np.asarray(class_a, dtype=float)
    b = np.asarray(class_b, dtype=float)
    if a.ndim != 1 or b.ndim != 1 or a.size < 2 or b.size < 2:
        raise ValueError("each class needs at least 2 scalar samples")
    mu_a, mu_b = a.mean(), b.mean()
    denom = a.var() + b.var()
    if denom == 0.0:
        if mu_a == mu_b:
            raise DegenerateClassesError("both classes are constant and equal")
        return math.inf
    return float((mu_a - mu_b) ** 2 / denom)


def format_feature_vector(vec) -> str:
    """Serialize as 8 comma-separated decimal floats (round-trips exactly)."""
    v = np.asarray(vec, dtype=float)
    if v.shape != (N_FEATURES,):
        raise ValueError(f"feature vector must have shape ({N_FEATURES},)")
    return ",".join(repr(float(x)) for x in v)


def parse_feature_vector(text: str) -> np.ndarray:
    parts = text.strip().split(",")
    if len(parts) != N_FEATURES:
        raise ValueError(f"expected {N_FEATURES} comma-separated values")
    return np.array([float(p) for p in parts])
