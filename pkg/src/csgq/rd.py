"""Average distortion under description loss and choice of the coarse rate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OperatingPoint:
    b: int
    B: int
    side_distortion: float
    central_distortion: float
    side_stderr: float = 0.0
    central_stderr: float = 0.0
    failures: int = 0
    trials: int = 0
    # per-trial distortions (side decoder of description 1 and 2, central)
    side1: np.ndarray = field(default=None, repr=False)
    side2: np.ndarray = field(default=None, repr=False)
    central: np.ndarray = field(default=None, repr=False)

    @property
    def R(self) -> int:
        return self.B + self.b


@dataclass(frozen=True)
class LossModel:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"loss probability must lie in [0, 1], got {self.p}")


def average_distortion(p: float, d_s: float, d_c: float) -> float:
    """``p^2 + 2p(1-p) d_s + (1-p)^2 d_c``; losing both descriptions costs 1."""
    LossModel(p)
    if d_s < 0 or d_c < 0:
        raise ValueError("distortions must be non-negative")
    return p * p + 2 * p * (1 - p) * d_s + (1 - p) ** 2 * d_c


def oracle_objective(R: int, b: int, p: float) -> float:
    """Oracle-decoder average distortion for ``(B, b) = (R - b, b)``, up to a common factor.

    At b = 0 the coarse side term ``2**(-2b)`` is 1, i.e. the uncoded half
    contributes full distortion, and the central factor reduces to the plain
    uniform quantizer of ``R`` bits.
    """
    B = R - b
    side = 2.0 ** (-2 * B) + 2.0 ** (-2 * b)
    central = 2.0 ** (-2 * B) * (2 ** (B + 1) - 2**b + 1) / (2**B + 2**b - 1)
    return 2 * p * side + (1 - p) * central


def optimize_b_oracle(R: int, p: float) -> int:
    """Exhaustive search of the oracle objective over ``b = 0 .. R // 2``."""
    if R < 2:
        raise ValueError(f"total rate must be at least 2 bits, got R={R}")
    LossModel(p)
    best_b, best = 0, oracle_objective(R, 0, p)
    for b in range(1, R // 2 + 1):
        value = oracle_objective(R, b, p)
        if value < best:  # strict: ties stay with the smaller b
            best_b, best = b, value
    return best_b


def optimize_b_operational(points: list[OperatingPoint], p: float) -> int:
    """Pick the measured operating point with the lowest average distortion."""
    if not points:
        raise ValueError("no operating points supplied")
    LossModel(p)
    ranked = sorted(points, key=lambda pt: pt.b)
    best = ranked[0]
    best_value = average_distortion(p, best.side_distortion, best.central_distortion)
    for pt in ranked[1:]:
        value = average_distortion(p, pt.side_distortion, pt.central_distortion)
        if value < best_value:
            best, best_value = pt, value
    return best.b


def _oracle_scale(k: int, m: int, r: float) -> float:
    if m <= k + 1:
        raise ValueError(f"need m > k + 1, got m={m}, k={k}")
    return k * r**2 / (m - k - 1) * m / 24.0


def theorem2_side_distortion(k: int, m: int, r: float, B: int, b: int) -> float:
    """Expected squared side error of the oracle decoder (high-rate regime)."""
    if b < 1 or B < b:
        raise ValueError("need B >= b >= 1")
    return _oracle_scale(k, m, r) * (2.0 ** (-2 * B) + 2.0 ** (-2 * b))


def theorem2_central_distortion(k: int, m: int, r: float, B: int, b: int) -> float:
    """Expected squared central error of the oracle decoder (high-rate regime)."""
    if b < 1 or B < b:
        raise ValueError("need B >= b >= 1")
    return _oracle_scale(k, m, r) * 2.0 ** (-2 * B) * (2 ** (B + 1) - 2**b + 1) / (2**B + 2**b - 1)


def _stderr(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0


def point_from_trials(b: int, B: int, side1, side2, central, failures: int = 0) -> OperatingPoint:
    """Aggregate per-trial distortions; the side value per trial is the mean of both descriptions."""
    side1, side2, central = (np.asarray(x, dtype=float) for x in (side1, side2, central))
    side = (side1 + side2) / 2
    return OperatingPoint(b=b, B=B, side_distortion=float(side.mean()), central_distortion=float(central.mean()),
                          side_stderr=_stderr(side), central_stderr=_stderr(central), failures=failures,
                          trials=len(central), side1=side1, side2=side2, central=central)


def _tradeoff_job(args):
    from .pipeline import tradeoff_trial

    n, k, m, B, b, seed, config = args
    return tradeoff_trial(n, k, m, B, b, seed, config)


def sweep_tradeoff(n: int, k: int, m: int, R: int, trials: int = 100, seed: int = 0,
                   config=None, workers: int = 1) -> list[OperatingPoint]:
    """Operating points ``(D_s(b), D_c(b))`` for every ``b = 0 .. R // 2``.

    Trial ``t`` uses seed ``seed + t`` at every ``b``, so the points share
    signals and sensing matrices.  Non-converged decodes are counted in
    ``failures`` but still enter the averages.
    """
    from .parallel import map_trials

    if R < 2:
        raise ValueError(f"total rate must be at least 2 bits, got R={R}")
    if trials < 1:
        raise ValueError("trials must be positive")
    points = []
    for b in range(R // 2 + 1):
        jobs = [(n, k, m, R - b, b, seed + t, config) for t in range(trials)]
        out = map_trials(_tradeoff_job, jobs, workers)
        points.append(point_from_trials(b, R - b, [o.side1 for o in out], [o.side2 for o in out],
                                        [o.central for o in out], sum(o.failures for o in out)))
    return points
