"""MTU-limited packetization, erasure channels and reassembly.

Wire format (big-endian)::

    offset size field
    0      4    magic b"CSGQ"
    4      1    version (1)
    5      1    description id (1 or 2)
    6      2    sequence number within the description
    8      2    m
    10     1    B
    11     1    b
    12     2    first measurement index
    14     2    number of measurement indices covered
    16     1    pattern phase (0 fine-first, 1 coarse-first)
    17     1    reserved (0)
    18     ...  codes of the covered indices, in index order, bit-packed
                MSB first and zero-padded to a byte boundary

Coarse samples of a b = 0 description are not coded and take no bits.
A trace file is a sequence of packets, each prefixed by its size as a
2-byte big-endian integer.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .admm import ConstraintGroup
from .quantizer import (
    INTERLEAVED,
    Description,
    Partition,
    QuantizerPair,
    central_bounds,
    dequantize_coarse,
    dequantize_fine,
    epsilon_central_sq,
    epsilon_l2,
    partition_from_mask,
)
from .signal_model import CHANNEL_STREAM, SensingModel, make_rng

MAGIC = b"CSGQ"
VERSION = 1
HEADER = struct.Struct(">4sBBHHBBHHBB")
HEADER_SIZE = HEADER.size  # 18
DEFAULT_MTU = 100

FINE_FIRST = 0
COARSE_FIRST = 1

# reception states, ordered by information content
MISSING, COARSE_ONLY, FINE_ONLY, BOTH = 0, 1, 2, 3


class DataIntegrityError(ValueError):
    """Received packets disagree about a code."""


class NoDataError(ValueError):
    """Nothing was received for any measurement."""


@dataclass(frozen=True)
class Packet:
    description_id: int
    sequence: int
    m: int
    B: int
    b: int
    start: int
    count: int
    pattern_phase: int
    payload: bytes

    @property
    def byte_size(self) -> int:
        return HEADER_SIZE + len(self.payload)

    @property
    def index_range(self) -> tuple[int, int]:
        return self.start, self.count

    def to_bytes(self) -> bytes:
        head = HEADER.pack(MAGIC, VERSION, self.description_id, self.sequence, self.m, self.B, self.b,
                           self.start, self.count, self.pattern_phase, 0)
        return head + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "Packet":
        if len(data) < HEADER_SIZE:
            raise ValueError("truncated packet header")
        magic, version, did, seq, m, B, b, start, count, phase, _ = HEADER.unpack_from(data)
        if magic != MAGIC or version != VERSION:
            raise ValueError("not a version-1 CSGQ packet")
        if did not in (1, 2):
            raise ValueError(f"bad description id {did}")
        return cls(did, seq, m, B, b, start, count, phase, bytes(data[HEADER_SIZE:]))


@dataclass(frozen=True)
class ChannelModel:
    kind: str = "memoryless"
    p: float = 0.0
    q: float = 1.0
    initial_state: str = "stationary"

    def __post_init__(self):
        if self.kind not in ("memoryless", "gilbert"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if not (0 <= self.p <= 1 and 0 <= self.q <= 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.kind == "gilbert" and self.p + self.q == 0:
            raise ValueError("gilbert channel needs p + q > 0")
        if self.initial_state not in ("G", "B", "stationary"):
            raise ValueError(f"unknown initial state {self.initial_state!r}")

    @property
    def loss_rate(self) -> float:
        return self.p if self.kind == "memoryless" else gilbert_stationary(self.p, self.q)


@dataclass
class ReceivedSet:
    m: int
    quantizer: QuantizerPair
    fine_codes: np.ndarray  # -1 where not received
    coarse_codes: np.ndarray

    @property
    def state(self) -> np.ndarray:
        fine = self.fine_codes >= 0
        coarse = self.coarse_codes >= 0
        return np.where(fine & coarse, BOTH, np.where(fine, FINE_ONLY, np.where(coarse, COARSE_ONLY, MISSING)))


# --- bit packing ---------------------------------------------------------------

def pack_codes(codes: Iterable[int], widths: Iterable[int]) -> bytes:
    acc = 0
    nbits = 0
    for code, width in zip(codes, widths):
        width = int(width)
        if width == 0:
            continue
        code = int(code)
        if not 0 <= code < (1 << width):
            raise ValueError(f"code {code} does not fit in {width} bits")
        acc = (acc << width) | code
        nbits += width
    pad = (-nbits) % 8
    return (acc << pad).to_bytes((nbits + pad) // 8, "big")


def unpack_codes(payload: bytes, widths: list[int]) -> list[int]:
    total = sum(widths)
    if 8 * len(payload) < total:
        raise ValueError("payload shorter than the declared codes")
    acc = int.from_bytes(payload, "big")
    shift = 8 * len(payload)
    out = []
    for width in widths:
        width = int(width)
        shift -= width
        out.append((acc >> shift) & ((1 << width) - 1) if width else -1)
    return out


def _bit_widths(fine: np.ndarray, present: np.ndarray, q: QuantizerPair) -> np.ndarray:
    return np.where(fine, q.B, np.where(present, q.b, 0)).astype(np.int64)


# --- segmentation ----------------------------------------------------------------

def even_ranges(m: int, parts: int) -> list[tuple[int, int]]:
    """Split ``range(m)`` into ``parts`` contiguous runs whose sizes differ by at most one."""
    base, extra = divmod(m, parts)
    out, start = [], 0
    for j in range(parts):
        count = base + (1 if j < extra else 0)
        out.append((start, count))
        start += count
    return out


def _min_ranges(m: int, fits) -> list[tuple[int, int]]:
    for parts in range(1, m + 1):
        ranges = even_ranges(m, parts)
        if all(fits(start, count) for start, count in ranges):
            return ranges
    raise ValueError("MTU too small for a single measurement")


def _check_mtu(mtu_bytes: int, q: QuantizerPair):
    if 8 * (mtu_bytes - HEADER_SIZE) < q.B + q.b:
        raise ValueError(f"MTU of {mtu_bytes} bytes cannot hold the {HEADER_SIZE}-byte header and one code pair")


def alternating_ranges(m: int, q: QuantizerPair, mtu_bytes: int = DEFAULT_MTU) -> list[tuple[int, int]]:
    """Packet index ranges when codes alternate fine/coarse inside every packet."""
    _check_mtu(mtu_bytes, q)
    budget = 8 * (mtu_bytes - HEADER_SIZE)
    return _min_ranges(m, lambda start, count: ((count + 1) // 2) * q.B + (count // 2) * q.b <= budget)


def interleaved_partition(m: int, q: QuantizerPair, mtu_bytes: int = DEFAULT_MTU) -> Partition:
    """Partition whose descriptions alternate fine/coarse inside each packet.

    Description 1 starts fine-first in even-numbered packets and
    coarse-first in odd-numbered ones; description 2 is its dual.
    """
    if m < 2:
        raise ValueError(f"need at least two measurements, got m={m}")
    fine1 = np.zeros(m, dtype=bool)
    for j, (start, count) in enumerate(alternating_ranges(m, q, mtu_bytes)):
        offset = 0 if j % 2 == 0 else 1
        fine1[start + offset:start + count:2] = True
    return partition_from_mask(fine1, INTERLEAVED)


def packetize(d1: Description, d2: Description, mtu_bytes: int = DEFAULT_MTU) -> list[Packet]:
    """Cut two dual descriptions into dual packets of at most ``mtu_bytes`` each.

    Both descriptions are cut at the same index boundaries, using the fewest
    near-equal contiguous runs that fit either description.  Packets that
    would carry no code (b = 0 runs without fine samples) are not emitted.
    """
    q = d1.quantizer
    if d2.quantizer != q or d1.m != d2.m or (d1.id, d2.id) != (1, 2):
        raise ValueError("packetize expects description 1 and its dual description 2")
    if np.any(d1.fine == d2.fine):
        raise ValueError("descriptions are not duals")
    _check_mtu(mtu_bytes, q)
    budget = 8 * (mtu_bytes - HEADER_SIZE)
    m = d1.m
    widths = [_bit_widths(d.fine, d.present, q) for d in (d1, d2)]
    prefix = [np.concatenate([[0], np.cumsum(w)]) for w in widths]

    def fits(start, count):
        return all(pre[start + count] - pre[start] <= budget for pre in prefix)

    ranges = _min_ranges(m, fits)
    packets = []
    for d, w in zip((d1, d2), widths):
        seq = 0
        for start, count in ranges:
            sl = slice(start, start + count)
            if not w[sl].any():
                continue
            phase = FINE_FIRST if d.fine[start] else COARSE_FIRST
            payload = pack_codes(d.codes[sl], w[sl])
            packets.append(Packet(d.id, seq, m, q.B, q.b, start, count, phase, payload))
            seq += 1
    return packets


# --- channels --------------------------------------------------------------------

def gilbert_stationary(p: float, q: float) -> float:
    """Stationary probability of the Bad state."""
    if p + q <= 0:
        raise ValueError("p + q must be positive")
    return p / (p + q)


class GilbertState:
    """Two-state chain that persists across several packet sequences."""

    def __init__(self, channel: ChannelModel, rng: np.random.Generator):
        self.channel = channel
        self.rng = rng
        if channel.kind == "memoryless":
            self.bad = False
        elif channel.initial_state == "stationary":
            self.bad = bool(rng.random() < gilbert_stationary(channel.p, channel.q))
        else:
            self.bad = channel.initial_state == "B"

    def step(self, count: int) -> np.ndarray:
        ch = self.channel
        draws = self.rng.random(count)
        if ch.kind == "memoryless":
            return draws < ch.p
        lost = np.empty(count, dtype=bool)
        bad = self.bad
        for i in range(count):
            # one chain step per packet, then the packet sees the new state
            bad = (draws[i] >= ch.q) if bad else (draws[i] < ch.p)
            lost[i] = bad
        self.bad = bad
        return lost


def loss_trace(count: int, channel: ChannelModel, rng: np.random.Generator) -> np.ndarray:
    """Boolean loss indicator for ``count`` consecutive packets."""
    return GilbertState(channel, rng).step(count)


def transmit(packets: list[Packet], channel: ChannelModel, seed: int) -> list[Packet]:
    """Received subset of ``packets`` (sent in list order) after the erasure channel."""
    lost = loss_trace(len(packets), channel, make_rng(seed, CHANNEL_STREAM))
    return [pkt for pkt, gone in zip(packets, lost) if not gone]


# --- reassembly ------------------------------------------------------------------

def empty_received(m: int, q: QuantizerPair) -> ReceivedSet:
    return ReceivedSet(m, q, np.full(m, -1, dtype=np.int64), np.full(m, -1, dtype=np.int64))


def add_packet(rs: ReceivedSet, pkt: Packet, part: Partition) -> None:
    q = rs.quantizer
    if (pkt.m, pkt.B, pkt.b) != (rs.m, q.B, q.b) or part.m != rs.m:
        raise DataIntegrityError("packet belongs to a different encoding")
    if pkt.start + pkt.count > rs.m:
        raise DataIntegrityError("packet index range exceeds m")
    sl = slice(pkt.start, pkt.start + pkt.count)
    fine = part.fine_mask(pkt.description_id)[sl]
    present = fine | (q.b > 0)
    widths = _bit_widths(fine, np.broadcast_to(present, fine.shape), q)
    codes = np.array(unpack_codes(pkt.payload, widths.tolist()), dtype=np.int64)
    for target, mask in ((rs.fine_codes, fine), (rs.coarse_codes, ~fine & present)):
        view = target[sl]
        new = codes[mask]
        old = view[mask]
        clash = (old >= 0) & (old != new)
        if clash.any():
            raise DataIntegrityError("conflicting duplicate codes for the same measurement")
        view[mask] = new


def reassemble(received: list[Packet], m: int, q: QuantizerPair, part: Partition) -> ReceivedSet:
    """Per-index best available data from the received packets."""
    rs = empty_received(m, q)
    for pkt in received:
        add_packet(rs, pkt, part)
    return rs


def received_descriptions(rs: ReceivedSet, part: Partition) -> tuple[Description, Description]:
    """Rebuild description code vectors (-1 where missing) from a reception set."""
    out = []
    for d in (1, 2):
        fine = part.fine_mask(d)
        out.append(Description(d, np.where(fine, rs.fine_codes, rs.coarse_codes), fine, rs.quantizer))
    return out[0], out[1]


def build_constraint_groups(rs: ReceivedSet, model: SensingModel, q: QuantizerPair | None = None) -> list[ConstraintGroup]:
    """Decoder input: combined, fine-only and coarse-only groups (empty ones dropped)."""
    q = q or rs.quantizer
    if model.m != rs.m:
        raise ValueError(f"sensing model has {model.m} rows, reception set covers {rs.m}")
    state = rs.state
    if not (state != MISSING).any():
        raise NoDataError("no measurement was received")
    A = model.A
    groups = []
    both = np.flatnonzero(state == BOTH)
    if both.size:
        lower, upper = central_bounds(rs.fine_codes[both], rs.coarse_codes[both], q)
        mid = (lower + upper) / 2
        radius = np.sqrt(epsilon_central_sq(both.size, q.r, q.B, q.b))
        groups.append(ConstraintGroup(A[both], mid, radius, (upper - lower) / 2, label="combined"))
    fine_only = np.flatnonzero(state == FINE_ONLY)
    if fine_only.size:
        groups.append(ConstraintGroup(A[fine_only], dequantize_fine(rs.fine_codes[fine_only], q),
                                      epsilon_l2(fine_only.size, q.delta_B), q.delta_B / 2, label="fine"))
    coarse_only = np.flatnonzero(state == COARSE_ONLY)
    if coarse_only.size:
        groups.append(ConstraintGroup(A[coarse_only], dequantize_coarse(rs.coarse_codes[coarse_only], q),
                                      epsilon_l2(coarse_only.size, q.delta_b), q.delta_b / 2, label="coarse"))
    return groups


# --- trace files -----------------------------------------------------------------

def write_trace(path, packets: Iterable[Packet]) -> None:
    with open(path, "wb") as fh:
        for pkt in packets:
            data = pkt.to_bytes()
            fh.write(struct.pack(">H", len(data)))
            fh.write(data)


def read_trace(path) -> list[Packet]:
    data = Path(path).read_bytes()
    packets, pos = [], 0
    while pos < len(data):
        if pos + 2 > len(data):
            raise ValueError("truncated trace length prefix")
        (size,) = struct.unpack_from(">H", data, pos)
        pos += 2
        if pos + size > len(data):
            raise ValueError("truncated packet in trace")
        packets.append(Packet.from_bytes(data[pos:pos + size]))
        pos += size
    return packets
