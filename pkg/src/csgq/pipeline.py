"""End-to-end helpers: draw an instance, encode it, decode what was received."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .admm import ConstraintGroup, DecoderConfig, ReconstructionResult, side_decode
from .quantizer import (
    Description,
    Partition,
    QuantizerPair,
    combine_central,
    dequantize_description,
    dynamic_range,
    encode_descriptions,
    epsilon_central_sq,
    epsilon_l2,
    make_partition,
)
from .signal_model import (
    SensingModel,
    SparseSignal,
    distortion,
    gen_gaussian_sensing,
    gen_sparse_signal,
    measure,
    measurement_std,
)


@dataclass(frozen=True)
class Instance:
    signal: SparseSignal
    model: SensingModel
    y: np.ndarray
    r: float


def draw_instance(n: int, k: int, m: int, seed: int, spread: float = 8.0) -> Instance:
    signal = gen_sparse_signal(n, k, seed)
    model = gen_gaussian_sensing(m, n, seed)
    y = measure(model, signal)
    return Instance(signal, model, y, dynamic_range(measurement_std(model, signal), spread))


def side_groups(d: Description, model: SensingModel) -> list[ConstraintGroup]:
    """Fine and coarse constraint groups for one received description."""
    values, fine, half = dequantize_description(d)
    q = d.quantizer
    A = model.A
    groups = []
    f = np.flatnonzero(fine)
    if f.size:
        groups.append(ConstraintGroup(A[f], values[f], epsilon_l2(f.size, q.delta_B), half[f], label="fine"))
    c = np.flatnonzero(~fine & d.present)
    if c.size:
        groups.append(ConstraintGroup(A[c], values[c], epsilon_l2(c.size, q.delta_b), half[c], label="coarse"))
    return groups


def central_groups(d1: Description, d2: Description, model: SensingModel) -> list[ConstraintGroup]:
    """Single constraint group built from both descriptions."""
    q = d1.quantizer
    y_c, bins = combine_central(d1, d2)
    lower = np.array([b.lower for b in bins])
    upper = np.array([b.upper for b in bins])
    if q.split:
        eps = epsilon_l2(len(y_c), q.delta_B)
    else:
        eps = float(np.sqrt(epsilon_central_sq(len(y_c), q.r, q.B, q.b)))
    return [ConstraintGroup(model.A, y_c, eps, (upper - lower) / 2, label="central")]


def decode_side(d: Description, model: SensingModel, config: DecoderConfig | None = None) -> ReconstructionResult:
    return side_decode(side_groups(d, model), model.n, config)


def decode_central(d1: Description, d2: Description, model: SensingModel,
                   config: DecoderConfig | None = None) -> ReconstructionResult:
    return side_decode(central_groups(d1, d2, model), model.n, config)


@dataclass
class TrialOutcome:
    side1: float
    side2: float
    central: float
    failures: int


def tradeoff_trial(n: int, k: int, m: int, B: int, b: int, seed: int,
                   config: DecoderConfig | None = None, partition: Partition | None = None) -> TrialOutcome:
    """Encode one instance at ``(B, b)`` and measure both side and the central distortion."""
    inst = draw_instance(n, k, m, seed)
    q = QuantizerPair(B, b, inst.r)
    part = partition or make_partition(m)
    d1, d2 = encode_descriptions(inst.y, part, q)
    results = [decode_side(d1, inst.model, config), decode_side(d2, inst.model, config),
               decode_central(d1, d2, inst.model, config)]
    ds = [distortion(inst.signal.theta, res.theta_hat) for res in results]
    return TrialOutcome(ds[0], ds[1], ds[2], sum(not res.converged for res in results))
