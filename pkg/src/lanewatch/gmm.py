"""Two-component diagonal-covariance Gaussian mixture.

Covers density evaluation, batch EM fitting from a K-means seed, and
single-sample online updates with a forgetting cap on the accumulated
responsibility masses.

Models are immutable snapshots: every update returns a new GmmModel, so a
classification reader can keep the snapshot it was handed while the learning
loop publishes successors (reference swaps are atomic under CPython).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .clustering import KmeansResult

VARIANCE_FLOOR = 1e-6
COLLAPSE_THRESHOLD = 1e-8
DEFAULT_FORGETTING = 0.05

CLASS_LANE = "lane"
CLASS_VEHICLE = "vehicle"
CLASS_UNASSIGNED = "unassigned"

SNAPSHOT_FORMAT = "lanewatch-gmm"
SNAPSHOT_VERSION = 1

_LOG_2PI = math.log(2.0 * math.pi)


class ComponentCollapseError(RuntimeError):
    """A component lost essentially all responsibility mass; the caller
    should re-initialize from K-means on recent samples."""


@dataclass(frozen=True, eq=False)
class GaussianComponent:
    mean: np.ndarray
    diag_var: np.ndarray
    class_tag: str = CLASS_UNASSIGNED

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        var = np.array(self.diag_var, dtype=float)
        if mean.ndim != 1 or var.shape != mean.shape:
            raise ValueError("mean and diag_var must be 1-D arrays of equal length")
        if (var < VARIANCE_FLOOR).any():
            raise ValueError(f"variances must be at least {VARIANCE_FLOOR}")
        if self.class_tag not in (CLASS_LANE, CLASS_VEHICLE, CLASS_UNASSIGNED):
            raise ValueError(f"unknown class tag '{self.class_tag}'")
        mean.flags.writeable = False
        var.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "diag_var", var)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True, eq=False)
class GmmModel:
    components: tuple[GaussianComponent, GaussianComponent]
    priors: np.ndarray
    masses: np.ndarray
    sample_count: int

    def __post_init__(self):
        if len(self.components) != 2:
            raise ValueError("model must have exactly 2 components")
        if self.components[0].dim != self.components[1].dim:
            raise ValueError("components must share one dimensionality")
        priors = np.array(self.priors, dtype=float)
        masses = np.array(self.masses, dtype=float)
        if priors.shape != (2,) or masses.shape != (2,):
            raise ValueError("priors and masses must have shape (2,)")
        if (priors <= 0).any() or abs(priors.sum() - 1.0) > 1e-6:
            raise ValueError("priors must be positive and sum to 1")
        if (masses < 0).any():
            raise ValueError("masses must be non-negative")
        if self.sample_count < 0:
            raise ValueError("sample_count must be non-negative")
        priors.flags.writeable = False
        masses.flags.writeable = False
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "masses", masses)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def tagged(self) -> bool:
        return all(c.class_tag != CLASS_UNASSIGNED for c in self.components)


def log_density(x, component: GaussianComponent) -> float:
    """Log of the diagonal-covariance Gaussian density at x."""
    x = np.asarray(x, dtype=float)
    diff = x - component.mean
    return float(
        -0.5
        * (
            component.dim * _LOG_2PI
            + np.log(component.diag_var).sum()
            + (diff * diff / component.diag_var).sum()
        )
    )


def _log_joint(points: np.ndarray, model: GmmModel) -> np.ndarray:
    """log(prior * density) per sample and component, shape (n, 2)."""
    out = np.empty((points.shape[0], 2))
    for c, comp in enumerate(model.components):
        diff = points - comp.mean
        quad = (diff * diff / comp.diag_var).sum(axis=1)
        out[:, c] = (
            math.log(model.priors[c])
            - 0.5 * (comp.dim * _LOG_2PI + np.log(comp.diag_var).sum() + quad)
        )
    return out


def e_step(points, model: GmmModel) -> np.ndarray:
    """Responsibility of each component for each sample, normalized per row.

    Computed in log space; the same exponentials are shared by both columns,
    so swapping the components swaps the output bit-for-bit.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    logw = _log_joint(X, model)
    peak = logw.max(axis=1, keepdims=True)
    u = np.exp(logw - peak)
    return u / u.sum(axis=1, keepdims=True)


def mean_log_likelihood(points, model: GmmModel) -> float:
    X = np.atleast_2d(np.asarray(points, dtype=float))
    logw = _log_joint(X, model)
    peak = logw.max(axis=1)
    return float((peak + np.log(np.exp(logw - peak[:, None]).sum(axis=1))).mean())


def m_step(points, responsibilities) -> GmmModel:
    """Re-estimate priors, masses, means and diagonal variances from soft
    responsibilities; variances are floored. Raises ComponentCollapseError
    when a component's mass drops below the collapse threshold."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    R = np.atleast_2d(np.asarray(responsibilities, dtype=float))
    if R.shape != (X.shape[0], 2):
        raise ValueError("responsibilities must have shape (n_points, 2)")
    masses = R.sum(axis=0)
    if (masses < COLLAPSE_THRESHOLD).any():
        raise ComponentCollapseError(
            f"component mass collapsed to {masses.min():g}"
        )
    n = X.shape[0]
    priors = masses / n
    comps = []
    for c in range(2):
        w = R[:, c][:, None]
        mu = (w * X).sum(axis=0) / masses[c]
        var = (w * (X - mu) ** 2).sum(axis=0) / masses[c]
        comps.append(GaussianComponent(mu, np.maximum(var, VARIANCE_FLOOR)))
    return GmmModel(tuple(comps), priors=priors, masses=masses, sample_count=n)


def fit_em(points, init: KmeansResult, tol: float = 1e-6, max_iter: int = 200,
           callback=None) -> GmmModel:
    """Batch EM from a K-means seed.

    Starts with equal priors, the seed centroids as means and unit variances,
    then alternates E/M steps until the per-sample mean log-likelihood gain
    drops below `tol`. The likelihood is asserted non-decreasing (1e-9
    slack); `callback`, if given, receives the mean log-likelihood after
    every iteration.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2:
        raise ValueError("points must be a 2-D array")
    counts = np.bincount(init.labels, minlength=2)
    if (counts < 10).any():
        raise ValueError("need at least 10 points per seed cluster")
    n, d = X.shape
    comps = tuple(
        GaussianComponent(init.centroids[c], np.ones(d)) for c in range(2)
    )
    model = GmmModel(comps, priors=np.array([0.5, 0.5]),
                     masses=np.array([n / 2, n / 2]), sample_count=n)
    ll = mean_log_likelihood(X, model)
    for _ in range(max_iter):
        model = m_step(X, e_step(X, model))
        new_ll = mean_log_likelihood(X, model)
        if callback is not None:
            callback(new_ll)
        if new_ll < ll - 1e-9:
            raise RuntimeError(
                f"EM log-likelihood decreased: {ll!r} -> {new_ll!r}"
            )
        gain, ll = new_ll - ll, new_ll
        if gain < tol:
            break
    return model


def online_update(model: GmmModel, x, forgetting: float = DEFAULT_FORGETTING) -> GmmModel:
    """One incremental EM step on a single sample.

    Responsibilities come from the current (pre-update) parameters. Each
    accumulated mass is capped at 1/forgetting before the convex update, so
    the component a sample belongs to always gives it at least roughly a
    `forgetting` share of the new statistics; without the cap the step size
    decays like 1/m and the model stops tracking scene changes. Priors are
    recomputed from the capped masses, variances stay floored, and the new
    variance uses the already-updated mean.
    """
    if not 0.0 < forgetting < 1.0:
        raise ValueError("forgetting factor must be in (0, 1)")
    x = np.asarray(x, dtype=float)
    if x.shape != (model.dim,):
        raise ValueError(f"sample must have shape ({model.dim},)")
    resp = e_step(x[None, :], model)[0]
    capped = np.minimum(model.masses, 1.0 / forgetting)
    new_masses = capped + resp
    if (new_masses < COLLAPSE_THRESHOLD).any():
        raise ComponentCollapseError(
            f"component mass collapsed to {new_masses.min():g}"
        )
    comps = []
    for c, comp in enumerate(model.components):
        mu = (comp.mean * capped[c] + resp[c] * x) / new_masses[c]
        var = (comp.diag_var * capped[c] + resp[c] * (x - mu) ** 2) / new_masses[c]
        comps.append(replace(comp, mean=mu, diag_var=np.maximum(var, VARIANCE_FLOOR)))
    return GmmModel(
        tuple(comps),
        priors=new_masses / new_masses.sum(),
        masses=new_masses,
        sample_count=model.sample_count + 1,
    )


def model_to_dict(model: GmmModel) -> dict:
    return {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "sample_count": model.sample_count,
        "components": [
            {
                "class_tag": comp.class_tag,
                "prior": float(model.priors[c]),
                "mass": float(model.masses[c]),
                "mean": [float(v) for v in comp.mean],
                "diag_var": [float(v) for v in comp.diag_var],
            }
            for c, comp in enumerate(model.components)
        ],
    }


def model_from_dict(data: dict) -> GmmModel:
    if data.get("format") != SNAPSHOT_FORMAT:
        raise ValueError("not a model snapshot file")
    if data.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {data.get('version')!r}")
    comps = tuple(
        GaussianComponent(
            mean=np.array(c["mean"], dtype=float),
            diag_var=np.array(c["diag_var"], dtype=float),
            class_tag=c["class_tag"],
        )
        for c in data["components"]
    )
    priors = np.array([c["prior"] for c in data["components"]])
    masses = np.array([c["mass"] for c in data["components"]])
    return GmmModel(comps, priors=priors, masses=masses,
                    sample_count=int(data["sample_count"]))


def save_model(model: GmmModel, path: str | os.PathLike) -> None:
    """Write a JSON snapshot. Float fields use repr-style decimals, so a
    reload restores the model bit-for-bit."""
    with open(path, "w", encoding="ascii") as f:
        json.dump(model_to_dict(model), f, indent=1)
        f.write("\n")


def load_model(path: str | os.PathLike) -> GmmModel:
    with open(path, "r", encoding="ascii") as f:
        return model_from_dict(json.load(f))
