"""Neuron-perturbation measures: activation x weight contribution curves,
class confidence bands, the band-gap ranking and single-neuron substitution.
"""

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .errors import InsufficientMembersError, InvalidInputError
from .nn.model import forward_batch, softmax

DEFAULT_CONFIDENCE = 0.95


@dataclass
class ContributionVector:
    values: np.ndarray  # (n,) pooled[k] * W[class][k]
    class_id: int


@dataclass
class ClassBand:
    lower: np.ndarray  # (n,)
    upper: np.ndarray
    class_id: int
    role: str  # benign | adversarial
    member_count: int
    confidence: float


def contribution(model, trace, class_id):
    """Per-neuron activation x weight terms; sums (plus bias) to the logit."""
    c = model.spec.class_count
    if not 0 <= class_id < c:
        raise InvalidInputError(f"class must be in [0, {c})")
    values = trace.pooled * model.dense_weights[class_id]
    return ContributionVector(values=values, class_id=class_id)


def class_band(model, pairs, role, class_id, confidence=DEFAULT_CONFIDENCE):
    """mean +- z(confidence) * population stddev of member contributions.

    Benign role: benign images with true label == class. Adversarial role:
    adversarial images whose predicted label == class. The weight row is the
    band's own class.
    """
    if role not in ("benign", "adversarial"):
        raise InvalidInputError("role must be 'benign' or 'adversarial'")
    if not 0 < confidence < 1:
        raise InvalidInputError("confidence must be in (0, 1)")
    if role == "benign":
        members = [p.benign for p in pairs if p.y == class_id]
    else:
        members = [p.adversarial for p in pairs if p.adv_label == class_id]
    if len(members) < 2:
        raise InsufficientMembersError(
            f"{role} band for class {class_id} has {len(members)} member(s); need >= 2"
        )
    pooled = forward_batch(model, np.stack(members)).pooled
    contrib = pooled * model.dense_weights[class_id]
    mean = contrib.mean(axis=0, dtype=np.float64)
    std = contrib.std(axis=0, dtype=np.float64)  # population stddev
    z = NormalDist().inv_cdf((1 + confidence) / 2)
    return ClassBand(
        lower=mean - z * std,
        upper=mean + z * std,
        class_id=class_id,
        role=role,
        member_count=len(members),
        confidence=confidence,
    )


def band_gap(adv_band, benign_band):
    """Signed per-neuron gap between the adversarial and benign bands.

    BG = CU_a - CL_b when the benign band lies entirely above the adversarial
    one, CL_a - CU_b when entirely below, 0 on overlap.
    """
    cl_a, cu_a = np.asarray(adv_band[0]), np.asarray(adv_band[1])
    cl_b, cu_b = np.asarray(benign_band[0]), np.asarray(benign_band[1])
    if not (cl_a.shape == cu_a.shape == cl_b.shape == cu_b.shape):
        raise InvalidInputError("bands must cover the same neurons")
    gap = np.zeros(cl_a.shape, dtype=np.float64)
    above = cl_b > cu_a
    below = cl_a > cu_b
    gap[above] = (cu_a - cl_b)[above]
    gap[below] = (cl_a - cu_b)[below]
    return gap


def rank_by_gap(adv_band, benign_band):
    """Neuron ids by signed band gap, descending (excited first); ties by id."""
    gaps = band_gap((adv_band.lower, adv_band.upper), (benign_band.lower, benign_band.upper))
    order = sorted(range(len(gaps)), key=lambda k: (-gaps[k], k))
    return order, gaps


def neuron_substitution_delta(model, trace_benign, trace_adversarial, neuron):
    """Probability change from swapping one benign pooled value for the
    adversarial one, recomputing only the dense layer and softmax.

    Returns (delta p over all classes, patched probabilities).
    """
    n = trace_benign.pooled.shape[0]
    if not 0 <= neuron < n:
        raise InvalidInputError(f"neuron must be in [0, {n})")
    pooled = trace_benign.pooled.copy()
    pooled[neuron] = trace_adversarial.pooled[neuron]
    logits = pooled @ model.dense_weights.T + model.dense_bias
    probs = softmax(logits)
    return probs - trace_benign.probabilities, probs
