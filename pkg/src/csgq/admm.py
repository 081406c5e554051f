"""Constrained l1 decoders for graded descriptions.

The side decoder minimizes ``||theta||_1`` subject to, for every constraint
group ``g``, an l2 ball ``||M_g theta - c_g||_2 <= eps_g`` and a per-component
box ``|M_g theta - c_g| <= h_g``.  It runs ADMM with one auxiliary copy of
``M_g theta`` per constraint (l2 copy ``w``, box copy ``p``, scaled duals
``u`` and ``s``); the theta-subproblem is solved by proximal-gradient
(soft-thresholding) iterations.  With two groups (fine, coarse) this is the
classic graded-quantization side decoder; the central decoder is the
one-group case with per-cell boxes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .quantizer import CentralBin

log = logging.getLogger(__name__)

POWER_ITERATIONS = 50


@dataclass
class ConstraintGroup:
    matrix: np.ndarray
    values: np.ndarray
    l2_radius: float
    box_halfwidth: np.ndarray
    label: str = ""
    box_center: np.ndarray | None = None  # defaults to ``values``

    def __post_init__(self):
        self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        self.values = np.asarray(self.values, dtype=float).ravel()
        self.box_halfwidth = np.broadcast_to(np.asarray(self.box_halfwidth, dtype=float),
                                             self.values.shape).copy()
        if self.box_center is None:
            self.box_center = self.values
        self.box_center = np.asarray(self.box_center, dtype=float).ravel()
        rows = self.matrix.shape[0]
        if self.values.shape[0] != rows or self.box_center.shape[0] != rows:
            raise ValueError(f"group {self.label!r}: {rows} rows but {self.values.shape[0]} values")
        if self.l2_radius < 0:
            raise ValueError("l2 radius must be non-negative")
        if np.any(self.box_halfwidth <= 0):
            raise ValueError("box half-widths must be positive")

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    def violation(self, theta: np.ndarray) -> float:
        """Largest l2 or box constraint excess at ``theta`` (0 when feasible)."""
        Ath = self.matrix @ theta
        box = float(np.max(np.abs(Ath - self.box_center) - self.box_halfwidth, initial=0.0))
        ball = float(np.linalg.norm(Ath - self.values) - self.l2_radius)
        return max(box, ball, 0.0)


@dataclass(frozen=True)
class DecoderConfig:
    rho: float = 10.0
    alpha: float | None = None  # None: 1 / (rho * L), L from power iteration
    lam: float | None = None  # None: equal to alpha
    inner_tol: float = 1e-4
    outer_tol: float = 1e-4
    max_inner: int = 200
    max_outer: int = 2000

    def __post_init__(self):
        for name in ("rho", "inner_tol", "outer_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.inner_tol >= 1 or self.outer_tol >= 1:
            raise ValueError("tolerances must be below 1")
        if self.max_inner < 1 or self.max_outer < 1:
            raise ValueError("iteration caps must be positive")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lam must be positive")


@dataclass
class ReconstructionResult:
    theta_hat: np.ndarray
    outer_iterations: int
    converged: bool
    max_constraint_violation: float
    inner_iterations: int = 0
    diagnostics: dict = field(default_factory=dict)


def soft_threshold(v, lam: float) -> np.ndarray:
    if lam < 0:
        raise ValueError("threshold must be non-negative")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def project_l2_ball(v, center, radius: float) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    center = np.asarray(center, dtype=float)
    d = v - center
    norm = np.linalg.norm(d)
    if norm > radius:
        return center + radius * d / norm
    return v


def clip_box(v, center, halfwidth) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    center = np.asarray(center, dtype=float)
    halfwidth = np.asarray(halfwidth, dtype=float)
    return np.clip(v - center, -halfwidth, halfwidth) + center


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    step = np.linalg.norm(new - old)
    ref = np.linalg.norm(old)
    # zero iterate (the initializer): fall back to the absolute change
    return float(step / ref) if ref > 0 else float(step)


def lipschitz_estimate(A: np.ndarray, iterations: int = POWER_ITERATIONS) -> float:
    """Largest eigenvalue of ``2 A^T A`` by power iteration."""
    x = np.ones(A.shape[1]) / np.sqrt(A.shape[1])
    lam = 0.0
    for _ in range(iterations):
        y = 2.0 * (A.T @ (A @ x))
        lam = float(np.linalg.norm(y))
        if lam == 0.0:
            return 0.0
        x = y / lam
    return lam


def side_decode(groups: list[ConstraintGroup], n: int, config: DecoderConfig | None = None) -> ReconstructionResult:
    """Minimize ``||theta||_1`` under every group's l2-ball and box constraint."""
    config = config or DecoderConfig()
    if not groups:
        raise ValueError("at least one constraint group is required")
    for g in groups:
        if g.matrix.shape[1] != n:
            raise ValueError(f"group {g.label!r} has {g.matrix.shape[1]} columns, expected {n}")

    # every row belongs to exactly one group, so the groups stack into one system
    A = np.vstack([g.matrix for g in groups])
    c = np.concatenate([g.values for g in groups])
    box_c = np.concatenate([g.box_center for g in groups])
    half = np.concatenate([g.box_halfwidth for g in groups])
    bounds = np.cumsum([0] + [g.rows for g in groups])
    slices = [slice(bounds[i], bounds[i + 1]) for i in range(len(groups))]
    radii = [g.l2_radius for g in groups]

    rho = config.rho
    if config.alpha is None:
        L = lipschitz_estimate(A)
        alpha = 1.0 / (rho * L) if L > 0 else 1.0
    else:
        alpha = config.alpha
    lam = alpha if config.lam is None else config.lam

    rows = A.shape[0]
    theta = np.zeros(n)
    w = np.zeros(rows)
    p = np.zeros(rows)
    u = np.zeros(rows)
    s = np.zeros(rows)

    def zero_feasible() -> bool:
        return max(g.violation(np.zeros(n)) for g in groups) == 0.0

    converged = False
    inner_total = 0
    outer = 0
    for outer in range(1, config.max_outer + 1):
        theta_start = theta
        target = w + u + p + s
        for _ in range(config.max_inner):
            grad = A.T @ (2.0 * (A @ theta) - target)
            new = soft_threshold(theta - alpha * rho * grad, lam)
            inner_total += 1
            done = _relative_change(new, theta) < config.inner_tol
            theta = new
            if done:
                break

        Ath = A @ theta
        v = Ath - u
        w = v.copy()
        for sl, radius in zip(slices, radii):
            w[sl] = project_l2_ball(v[sl], c[sl], radius)
        p = clip_box(Ath - s, box_c, half)
        u = u + w - Ath
        s = s + p - Ath

        if _relative_change(theta, theta_start) < config.outer_tol:
            # a stalled zero iterate only counts when zero is actually feasible
            if np.any(theta) or zero_feasible():
                converged = True
                break

    violation = max(g.violation(theta) for g in groups)
    if not converged:
        log.debug("side_decode stopped at max_outer=%d, violation %.3g", config.max_outer, violation)
    return ReconstructionResult(
        theta_hat=theta,
        outer_iterations=outer,
        converged=converged,
        max_constraint_violation=violation,
        inner_iterations=inner_total,
        diagnostics={"alpha": alpha, "lam": lam, "rho": rho},
    )


def central_group(A: np.ndarray, bins: list[CentralBin] | tuple[np.ndarray, np.ndarray],
                  epsilon_c: float, label: str = "central") -> ConstraintGroup:
    """One constraint group whose boxes are the central cells."""
    if isinstance(bins, tuple):
        lower, upper = (np.asarray(x, dtype=float) for x in bins)
    else:
        lower = np.array([b.lower for b in bins])
        upper = np.array([b.upper for b in bins])
    mid = (lower + upper) / 2
    return ConstraintGroup(A, mid, epsilon_c, (upper - lower) / 2, label=label, box_center=mid)


def central_decode(A, y_c, epsilon_c: float, bins, config: DecoderConfig | None = None) -> ReconstructionResult:
    """l1 decoding with an l2 ball around ``y_c`` and per-cell consistency boxes."""
    A = np.asarray(A, dtype=float)
    y_c = np.asarray(y_c, dtype=float)
    if A.shape[0] != len(y_c) or len(bins) != len(y_c):
        raise ValueError("matrix rows, central values and bins must agree")
    if epsilon_c < 0:
        raise ValueError("epsilon_c must be non-negative")
    group = central_group(A, bins, epsilon_c)
    group = ConstraintGroup(A, y_c, epsilon_c, group.box_halfwidth, label="central", box_center=group.box_center)
    return side_decode([group], A.shape[1], config)


def oracle_decode(A, y, support) -> np.ndarray:
    """Least squares restricted to the true support (pseudo-inverse decoder)."""
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    support = np.asarray(support, dtype=np.intp)
    theta = np.zeros(A.shape[1])
    if support.size == 0:
        return theta
    if support.size > A.shape[0]:
        raise ValueError("support larger than the number of measurements")
    As = A[:, support]
    if np.linalg.matrix_rank(As) < support.size:
        raise np.linalg.LinAlgError("restricted matrix is rank deficient")
    theta[support] = np.linalg.lstsq(As, y, rcond=None)[0]
    return theta


def stability_bound(delta_2k: float, sigma_k_l1: float, k: int, eps_B: float, eps_b: float,
                    deltaB: float, deltab: float, m_B: int, m_b: int) -> float:
    """Worst-case side reconstruction error for an RIP(2k) matrix with delta_2k < sqrt(2) - 1."""
    if not 0 <= delta_2k < np.sqrt(2) - 1:
        raise ValueError(f"delta_2k={delta_2k} violates 0 <= delta_2k < sqrt(2) - 1")
    if k < 1:
        raise ValueError("k must be positive")
    denom = 1 - (1 + np.sqrt(2)) * delta_2k
    c0 = 2 * (1 - (1 - np.sqrt(2)) * delta_2k) / denom
    c2 = 4 * np.sqrt(1 + delta_2k) / denom
    noise = min(eps_B, deltaB / 2 * np.sqrt(m_B)) + min(eps_b, deltab / 2 * np.sqrt(m_b))
    return float(c0 * sigma_k_l1 / np.sqrt(k) + c2 * noise)


def sigma_k_l1(theta, k: int) -> float:
    """l1 norm of everything outside the k largest-magnitude entries."""
    mags = np.sort(np.abs(np.asarray(theta, dtype=float)))[::-1]
    return float(mags[k:].sum())
