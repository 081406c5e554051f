"""Staggered fine/coarse scalar quantizers and the two graded descriptions.

Codes are unsigned integers offset by ``2**(bits-1)`` so that they pack
without a sign bit.  Out-of-range inputs saturate to the outermost code.
The coarse grid is the fine grid shifted by half a fine step, so a fine bin
and a coarse bin intersect either in a full fine bin or in half of one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

FIRST_HALF = "first-half"
EVEN_ODD = "even-odd"
INTERLEAVED = "interleaved"


@dataclass(frozen=True)
class QuantizerPair:
    B: int
    b: int
    r: float

    def __post_init__(self):
        if self.B < 1 or not 0 <= self.b <= self.B:
            raise ValueError(f"need B >= b >= 0 and B >= 1, got B={self.B}, b={self.b}")
        if not self.r > 0:
            raise ValueError(f"dynamic range must be positive, got {self.r}")

    @property
    def delta_B(self) -> float:
        return self.r * 2.0 ** (-self.B)

    @property
    def delta_b(self) -> float:
        return self.r * 2.0 ** (-self.b)

    @property
    def split(self) -> bool:
        """True for b = 0: coarse samples are not coded at all."""
        return self.b == 0


@dataclass(frozen=True)
class Partition:
    m: int
    omega1: np.ndarray
    omega2: np.ndarray
    mode: str = FIRST_HALF

    def fine_mask(self, description: int) -> np.ndarray:
        """Boolean mask of the indices coded finely by ``description``."""
        mask = np.zeros(self.m, dtype=bool)
        mask[self.omega1 if description == 1 else self.omega2] = True
        return mask


@dataclass(frozen=True)
class Description:
    id: int
    codes: np.ndarray  # -1 where the sample is not coded (b = 0)
    fine: np.ndarray  # bool per index
    quantizer: QuantizerPair

    @property
    def m(self) -> int:
        return len(self.codes)

    @property
    def present(self) -> np.ndarray:
        return self.codes >= 0


@dataclass(frozen=True)
class CentralBin:
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


def make_partition(m: int, mode: Literal["first-half", "even-odd"] = FIRST_HALF,
                   m_fine: int | None = None) -> Partition:
    if m < 2:
        raise ValueError(f"need at least two measurements, got m={m}")
    if mode == FIRST_HALF:
        order = np.arange(m)
    elif mode == EVEN_ODD:
        order = np.concatenate([np.arange(0, m, 2), np.arange(1, m, 2)])
    else:
        raise ValueError(f"unknown partition mode {mode!r}")
    size = (m + 1) // 2 if m_fine is None else m_fine
    if not 0 <= size <= m:
        raise ValueError(f"m_fine must lie in [0, {m}], got {size}")
    return Partition(m=m, omega1=np.sort(order[:size]), omega2=np.sort(order[size:]), mode=mode)


def partition_from_mask(fine1: np.ndarray, mode: str) -> Partition:
    fine1 = np.asarray(fine1, dtype=bool)
    idx = np.arange(len(fine1))
    return Partition(m=len(fine1), omega1=idx[fine1], omega2=idx[~fine1], mode=mode)


# --- scalar quantizers -----------------------------------------------------

def quantize_fine(y, q: QuantizerPair):
    levels = 2**q.B
    code = np.floor(np.asarray(y, dtype=float) / q.delta_B) + levels // 2
    return np.clip(code, 0, levels - 1).astype(np.int64)


def dequantize_fine(code, q: QuantizerPair):
    return (np.asarray(code) - 2 ** (q.B - 1)) * q.delta_B + q.delta_B / 2


def quantize_coarse(y, q: QuantizerPair):
    if q.b == 0:
        raise ValueError("b = 0: coarse samples are not coded")
    levels = 2**q.b
    code = np.floor((np.asarray(y, dtype=float) - q.delta_B / 2) / q.delta_b) + levels // 2
    return np.clip(code, 0, levels - 1).astype(np.int64)


def dequantize_coarse(code, q: QuantizerPair):
    if q.b == 0:
        raise ValueError("b = 0: coarse samples are not coded")
    return (np.asarray(code) - 2 ** (q.b - 1)) * q.delta_b + q.delta_b / 2 + q.delta_B / 2


def fine_bin(code, q: QuantizerPair):
    lower = (np.asarray(code) - 2 ** (q.B - 1)) * q.delta_B
    return lower, lower + q.delta_B


def coarse_bin(code, q: QuantizerPair, open_ends: bool = False):
    """Coarse cell edges; with ``open_ends`` the two outermost cells are unbounded."""
    code = np.asarray(code)
    lower = (code - 2 ** (q.b - 1)) * q.delta_b + q.delta_B / 2
    upper = lower + q.delta_b
    if open_ends:
        lower = np.where(code == 0, -np.inf, lower)
        upper = np.where(code == 2**q.b - 1, np.inf, upper)
    return lower, upper


# --- descriptions ------------------------------------------------------------

def encode_descriptions(y, part: Partition, q: QuantizerPair) -> tuple[Description, Description]:
    """Graded descriptions: d1 codes omega1 fine / omega2 coarse, d2 the dual."""
    y = np.asarray(y, dtype=float)
    if y.shape != (part.m,):
        raise ValueError(f"measurement length {y.shape} does not match partition m={part.m}")
    fine_codes = quantize_fine(y, q)
    coarse_codes = np.full(part.m, -1, dtype=np.int64) if q.split else quantize_coarse(y, q)
    out = []
    for d in (1, 2):
        fine = part.fine_mask(d)
        out.append(Description(d, np.where(fine, fine_codes, coarse_codes), fine, q))
    return out[0], out[1]


def dequantize_description(d: Description):
    """Per-index reconstruction values, resolution mask and box half-widths.

    Indices that carry no code (coarse samples when b = 0) get NaN.
    """
    q = d.quantizer
    values = np.full(d.m, np.nan)
    half = np.full(d.m, np.nan)
    f = d.fine
    values[f] = dequantize_fine(d.codes[f], q)
    half[f] = q.delta_B / 2
    c = ~f & d.present
    if c.any():
        values[c] = dequantize_coarse(d.codes[c], q)
        half[c] = q.delta_b / 2
    return values, f.copy(), half


def central_bounds(fine_codes, coarse_codes, q: QuantizerPair):
    """Vectorized central-cell intersection; returns ``(lower, upper)`` arrays."""
    fl, fu = fine_bin(fine_codes, q)
    if q.split:
        return fl, fu
    cl, cu = coarse_bin(coarse_codes, q, open_ends=True)
    lower = np.maximum(fl, cl)
    upper = np.minimum(fu, cu)
    empty = lower >= upper
    lower = np.where(empty, fl, lower)
    upper = np.where(empty, fu, upper)
    return lower, upper


def combine_central(d1: Description, d2: Description):
    """Merge two dual descriptions into central reconstructions and cells."""
    if d1.quantizer != d2.quantizer or d1.m != d2.m or {d1.id, d2.id} != {1, 2}:
        raise ValueError("descriptions do not come from the same encoding")
    if np.any(d1.fine == d2.fine):
        raise ValueError("descriptions are not duals: resolution maps overlap")
    q = d1.quantizer
    fine_codes = np.where(d1.fine, d1.codes, d2.codes)
    coarse_codes = np.where(d1.fine, d2.codes, d1.codes)
    lower, upper = central_bounds(fine_codes, coarse_codes, q)
    y_c = (lower + upper) / 2
    return y_c, [CentralBin(float(lo), float(hi)) for lo, hi in zip(lower, upper)]


# --- noise norms -------------------------------------------------------------

def epsilon_l2(count: int, delta: float) -> float:
    """Expected l2 norm of uniform quantization noise over ``count`` samples."""
    if count < 0 or not delta > 0:
        raise ValueError("need count >= 0 and delta > 0")
    return float(np.sqrt(count * delta**2 / 12.0))


def epsilon_central_sq(m: int, r: float, B: int, b: int) -> float:
    """Expected squared error norm of the staggered central quantizer."""
    if b < 1 or B < b:
        raise ValueError("need B >= b >= 1; use m * delta_B**2 / 12 for b = 0")
    return m * r**2 / 24.0 * 2.0 ** (-2 * B) * (2 ** (B + 1) - 2**b + 1) / (2**B + 2**b - 1)


def central_cell_count(B: int, b: int) -> tuple[int, int]:
    """(# cells of width delta_B, # cells of width delta_B / 2)."""
    return 2**B - 2**b + 1, 2 * (2**b - 1)


def dynamic_range(std: float, spread: float = 8.0) -> float:
    """Range covering +-spread/2 standard deviations."""
    return spread * std
