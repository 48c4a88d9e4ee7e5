"""Bayes decisions over the two-component mixture.

The discriminant is the log posterior ratio vehicle/lane; its sign is the
decision, with ties resolved to "lane" (a false vehicle on an empty road is
the costlier error for queue estimation). The reported vehicle posterior is
the logistic of the discriminant, so sign(f) and posterior > 0.5 can never
disagree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .gmm import CLASS_LANE, CLASS_VEHICLE, GaussianComponent, GmmModel


class UntaggedModelError(RuntimeError):
    """The model's components have not been named vehicle/lane yet."""


class AmbiguousTagsError(RuntimeError):
    """The components cannot be told apart by the entropy feature."""


@dataclass(frozen=True)
class ClassDecision:
    label: str
    discriminant: float
    posterior_vehicle: float


def assign_class_tags(model: GmmModel) -> GmmModel:
    """Name the anonymous components.

    Vehicles are textured while bare lane surface is flat, so the component
    with the larger mean on the leading entropy feature becomes "vehicle".
    Raises AmbiguousTagsError when the means are equal to within 1e-12.
    """
    c0, c1 = model.components
    gap = float(c0.mean[0] - c1.mean[0])
    if abs(gap) <= 1e-12:
        raise AmbiguousTagsError(
            "components have equal entropy-feature means; cannot name clusters"
        )
    tags = (CLASS_VEHICLE, CLASS_LANE) if gap > 0 else (CLASS_LANE, CLASS_VEHICLE)
    comps = tuple(replace(c, class_tag=t) for c, t in zip(model.components, tags))
    return replace(model, components=comps)


def _tagged_pair(model: GmmModel) -> tuple[tuple[GaussianComponent, float],
                                           tuple[GaussianComponent, float]]:
    vehicle = lane = None
    for c, comp in enumerate(model.components):
        if comp.class_tag == CLASS_VEHICLE:
            vehicle = (comp, float(model.priors[c]))
        elif comp.class_tag == CLASS_LANE:
            lane = (comp, float(model.priors[c]))
    if vehicle is None or lane is None:
        raise UntaggedModelError("model components are not class-tagged")
    return vehicle, lane


def discriminant(x, model: GmmModel) -> float:
    """Log posterior ratio vehicle vs lane; positive means vehicle."""
    (veh, phi_v), (lan, phi_l) = _tagged_pair(model)
    x = np.asarray(x, dtype=float)
    d_l = x - lan.mean
    d_v = x - veh.mean
    return float(
        math.log(phi_v / phi_l)
        + 0.5 * (np.log(lan.diag_var).sum() - np.log(veh.diag_var).sum())
        + 0.5 * (d_l * d_l / lan.diag_var).sum()
        - 0.5 * (d_v * d_v / veh.diag_var).sum()
    )


def _logistic(f: float) -> float:
    if f >= 0.0:
        return 1.0 / (1.0 + math.exp(-f))
    e = math.exp(f)
    return e / (1.0 + e)


def posterior(x, model: GmmModel) -> tuple[float, float]:
    """(vehicle, lane) posterior probabilities; they sum to 1 exactly."""
    p_vehicle = _logistic(discriminant(x, model))
    return p_vehicle, 1.0 - p_vehicle


def classify(x, model: GmmModel) -> ClassDecision:
    f = discriminant(x, model)
    return ClassDecision(
        label=CLASS_VEHICLE if f > 0.0 else CLASS_LANE,
        discriminant=f,
        posterior_vehicle=_logistic(f),
    )
