"""Test signals, Gaussian sensing operators, measurements and distortion.

All randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence([seed, stream])``; Gaussian draws use
``Generator.standard_normal`` (ziggurat).  Each generator uses its own
stream tag so that a signal and a sensing matrix built from the same seed
are independent.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np

SIGNAL_STREAM = 0
SENSING_STREAM = 1
CHANNEL_STREAM = 2
LOSS_STREAM = 3

RIP_SUBSET_CAP = 10**6


def make_rng(seed: int, stream: int) -> np.random.Generator:
    """PCG64 generator for ``(seed, stream)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2**64 - 1), stream])))


@dataclass(frozen=True)
class SparseSignal:
    n: int
    k: int
    support: np.ndarray
    theta: np.ndarray


@dataclass(frozen=True)
class SensingModel:
    phi: np.ndarray
    psi: np.ndarray | None = None
    _A: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        object.__setattr__(self, "phi", phi)
        if self.psi is None:
            A = phi
        else:
            psi = np.asarray(self.psi, dtype=float)
            if psi.shape != (phi.shape[1], phi.shape[1]):
                raise ValueError("psi must be n x n")
            if not np.allclose(psi @ psi.T, np.eye(psi.shape[0]), atol=1e-10):
                raise ValueError("psi must be orthogonal")
            object.__setattr__(self, "psi", psi)
            A = phi @ psi
        object.__setattr__(self, "_A", A)

    @property
    def m(self) -> int:
        return self.phi.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    @property
    def A(self) -> np.ndarray:
        """Effective sensing matrix ``phi @ psi``."""
        return self._A


def gen_sparse_signal(n: int, k: int, seed: int) -> SparseSignal:
    """Draw a k-sparse vector: uniform support, standard Gaussian amplitudes."""
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    rng = make_rng(seed, SIGNAL_STREAM)
    support = np.sort(rng.choice(n, size=k, replace=False))
    values = rng.standard_normal(k)
    # a zero draw would break the sparsity count
    values[values == 0.0] = 1.0
    theta = np.zeros(n)
    theta[support] = values
    return SparseSignal(n=n, k=k, support=support, theta=theta)


def gen_gaussian_sensing(m: int, n: int, seed: int) -> SensingModel:
    """i.i.d. N(0, 1/m) sensing matrix with identity sparsity basis."""
    if m < 1 or n < 1:
        raise ValueError(f"dimensions must be positive, got m={m}, n={n}")
    rng = make_rng(seed, SENSING_STREAM)
    return SensingModel(phi=rng.standard_normal((m, n)) / np.sqrt(m))


def measure(model: SensingModel, signal: SparseSignal | np.ndarray) -> np.ndarray:
    theta = signal.theta if isinstance(signal, SparseSignal) else np.asarray(signal, dtype=float)
    if theta.shape != (model.n,):
        raise ValueError(f"signal length {theta.shape} does not match n={model.n}")
    return model.A @ theta


def distortion(truth, estimate) -> float:
    """Normalized l2 error ``||truth - estimate|| / ||truth||``."""
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape:
        raise ValueError("truth and estimate must have equal length")
    norm = np.linalg.norm(truth)
    if norm == 0:
        raise ValueError("truth has zero norm")
    return float(np.linalg.norm(truth - estimate) / norm)


def measurement_std(model: SensingModel, signal: SparseSignal) -> float:
    """Analytic std of a Gaussian measurement: ||psi theta|| / sqrt(m)."""
    x = signal.theta if model.psi is None else model.psi @ signal.theta
    return float(np.linalg.norm(x) / np.sqrt(model.m))


def estimate_rip_constant(model: SensingModel | np.ndarray, order: int, cap: int = RIP_SUBSET_CAP,
                          chunk: int = 20000) -> float:
    """Exact RIP constant of the given order by enumerating every column subset.

    Raises ``ValueError`` when ``C(n, order)`` exceeds ``cap``.
    """
    A = model.A if isinstance(model, SensingModel) else np.asarray(model, dtype=float)
    n = A.shape[1]
    if not 1 <= order <= n:
        raise ValueError(f"order must lie in [1, n], got {order}")
    total = comb(n, order)
    if total > cap:
        raise ValueError(f"{total} column subsets exceed the exhaustive cap {cap}; shrink n or order")
    subsets = itertools.combinations(range(n), order)
    delta = 0.0
    while True:
        block = np.array(list(itertools.islice(subsets, chunk)), dtype=np.intp)
        if block.size == 0:
            break
        sub = np.moveaxis(A[:, block], 1, 0)  # (subsets, m, order)
        sv = np.linalg.svd(sub, compute_uv=False)
        smin2 = sv[:, -1] ** 2 if order <= A.shape[0] else np.zeros(len(block))
        delta = max(delta, float(np.max(1.0 - smin2)), float(np.max(sv[:, 0] ** 2 - 1.0)))
    return max(delta, 0.0)
