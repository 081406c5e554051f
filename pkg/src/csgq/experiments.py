"""Monte Carlo experiments behind the command-line harness.

Every experiment returns an :class:`ExperimentResult` whose ``rows`` follow
the CSV column order in ``columns``.  Trial ``t`` always uses seed
``seed + t`` for its signal and sensing matrix, so runs are reproducible
and the compared methods see the same instances.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .admm import DecoderConfig, oracle_decode, side_decode
from .parallel import map_trials
from .pipeline import draw_instance
from .quantizer import (
    QuantizerPair,
    combine_central,
    dequantize_description,
    encode_descriptions,
    make_partition,
)
from .rd import (
    average_distortion,
    optimize_b_operational,
    optimize_b_oracle,
    sweep_tradeoff,
    theorem2_central_distortion,
    theorem2_side_distortion,
)
from .signal_model import CHANNEL_STREAM, LOSS_STREAM, distortion, make_rng
from .transport import (
    DEFAULT_MTU,
    ChannelModel,
    GilbertState,
    NoDataError,
    build_constraint_groups,
    gilbert_stationary,
    interleaved_partition,
    packetize,
    reassemble,
)

log = logging.getLogger(__name__)

EXPERIMENTS = ("tradeoff", "opt-distortion", "memoryless", "gilbert", "oracle-validate")
P_GRID = tuple(round(0.05 * i, 2) for i in range(11))
GILBERT_PAIRS = ((0.05, 0.5), (0.05, 0.3), (0.05, 0.15), (0.01, 0.3), (0.01, 0.15))
FAILURE_FLAG_RATE = 0.5
ORACLE_TOLERANCE = 0.05

COLUMNS = {
    "tradeoff": ("b", "B", "D_s_mean", "D_s_stderr", "D_c_mean", "D_c_stderr"),
    "opt-distortion": ("p", "b_oracle", "D_avg_oracle", "b_operational", "D_avg_operational"),
    "memoryless": ("p", "D_csgq", "D_segmentation"),
    "gilbert": ("p", "q", "D_segmentation", "D_csgq"),
    "oracle-validate": ("quantity", "formula", "monte_carlo", "relative_gap"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n: int = 256
    k: int = 10
    m: int = 120
    R: int = 8
    b: int | None = None
    p: tuple[float, ...] = P_GRID
    q: tuple[float, ...] = ()
    mtu: int = DEFAULT_MTU
    trials: int = 100
    seed: int = 0
    output_path: str | None = None
    batch: int = 100  # vectors sent back to back over the Gilbert channel
    workers: int = 1
    decoder: DecoderConfig = field(default_factory=DecoderConfig)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        for name in ("n", "k", "m", "R", "mtu", "trials", "batch", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.k >= self.n:
            raise ValueError("need k < n")
        if self.R < 2:
            raise ValueError("total rate R must be at least 2")
        if self.b is not None and not 0 <= self.b <= self.R // 2:
            raise ValueError(f"b must lie in [0, {self.R // 2}]")
        if any(not 0 <= x <= 1 for x in self.p + self.q):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.experiment == "oracle-validate":
            if self.m <= self.k + 1:
                raise ValueError(f"oracle validation needs m > k + 1, got m={self.m}, k={self.k}")
            if self.b is None or self.b < 1:
                raise ValueError("oracle validation needs b >= 1")
        if self.experiment == "gilbert" and len(self.p) != len(self.q):
            raise ValueError("gilbert needs matching p and q lists")


# desk-scale defaults per experiment; full scale enlarges only the large-scale runs
DEFAULTS = {
    "tradeoff": dict(n=256, k=10, m=120, R=8, trials=100),
    "opt-distortion": dict(n=256, k=10, m=120, R=8, trials=100, p=P_GRID),
    "memoryless": dict(n=256, k=40, m=160, R=10, trials=1000, p=P_GRID),
    "gilbert": dict(n=250, k=50, m=180, R=10, trials=1, batch=100,
                    p=tuple(x for x, _ in GILBERT_PAIRS), q=tuple(y for _, y in GILBERT_PAIRS)),
    "oracle-validate": dict(n=256, k=10, m=120, R=8, b=2, trials=10_000),
}
FULL_SCALE = {
    "memoryless": dict(trials=100_000),
    "gilbert": dict(n=1000, k=200, m=720, trials=1, batch=1000),
}


def default_config(experiment: str, full_scale: bool = False, **overrides) -> ExperimentConfig:
    values = dict(DEFAULTS[experiment])
    if full_scale:
        values.update(FULL_SCALE.get(experiment, {}))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(experiment=experiment, **values)


@dataclass
class ExperimentResult:
    columns: tuple[str, ...]
    rows: list[tuple]
    flagged: list[bool]
    passed: bool = True
    extras: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.passed and not any(self.flagged)


def _stderr(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0


# --- tradeoff and optimized distortion ---------------------------------------

def run_tradeoff(config: ExperimentConfig) -> ExperimentResult:
    points = sweep_tradeoff(config.n, config.k, config.m, config.R, config.trials, config.seed,
                            config.decoder, config.workers)
    rows, flagged = [], []
    for pt in points:
        rows.append((pt.b, pt.B, pt.side_distortion, pt.side_stderr, pt.central_distortion, pt.central_stderr))
        flagged.append(pt.failures > FAILURE_FLAG_RATE * 3 * pt.trials)
    return ExperimentResult(COLUMNS["tradeoff"], rows, flagged, extras={"points": points})


def simulate_average(point, p: float, seed: int) -> float:
    """Monte Carlo average distortion when each description is lost with probability ``p``.

    Loss draws come from per-trial uniforms shared by every ``p`` and ``b``.
    """
    out = np.empty(point.trials)
    for t in range(point.trials):
        lost1, lost2 = make_rng(seed + t, LOSS_STREAM).random(2) < p
        if lost1 and lost2:
            out[t] = 1.0
        elif lost1:
            out[t] = point.side2[t]
        elif lost2:
            out[t] = point.side1[t]
        else:
            out[t] = point.central[t]
    return float(out.mean())


def run_optimized_distortion(config: ExperimentConfig) -> ExperimentResult:
    points = sweep_tradeoff(config.n, config.k, config.m, config.R, config.trials, config.seed,
                            config.decoder, config.workers)
    by_b = {pt.b: pt for pt in points}
    rows, flagged = [], []
    for p in config.p:
        b_or = optimize_b_oracle(config.R, p)
        b_op = optimize_b_operational(points, p)
        rows.append((p, b_or, simulate_average(by_b[b_or], p, config.seed),
                     b_op, simulate_average(by_b[b_op], p, config.seed)))
        flagged.append(any(by_b[b].failures > FAILURE_FLAG_RATE * 3 * by_b[b].trials for b in (b_or, b_op)))
    expected = {p: {pt.b: average_distortion(p, pt.side_distortion, pt.central_distortion) for pt in points}
                for p in config.p}
    return ExperimentResult(COLUMNS["opt-distortion"], rows, flagged,
                            extras={"points": points, "expected": expected})


# --- packetized channels -------------------------------------------------------

def _csgq_b(config: ExperimentConfig, loss_rate: float) -> int:
    """Coarse rate for CS-GQ: ``config.b`` when given, else the oracle rule at the packet loss rate."""
    return optimize_b_oracle(config.R, loss_rate) if config.b is None else config.b


@dataclass
class _Encoded:
    quantizer: QuantizerPair
    partition: object
    packets: list


def _encode_packets(inst, B: int, b: int, mtu: int) -> _Encoded:
    q = QuantizerPair(B, b, inst.r)
    part = interleaved_partition(len(inst.y), q, mtu)
    d1, d2 = encode_descriptions(inst.y, part, q)
    return _Encoded(q, part, packetize(d1, d2, mtu))


def decode_received(received, enc: _Encoded, inst, decoder: DecoderConfig):
    """Distortion and convergence flag for one reception; nothing received costs 1."""
    rs = reassemble(received, len(inst.y), enc.quantizer, enc.partition)
    try:
        groups = build_constraint_groups(rs, inst.model, enc.quantizer)
    except NoDataError:
        return 1.0, True
    res = side_decode(groups, inst.model.n, decoder)
    return distortion(inst.signal.theta, res.theta_hat), res.converged


class _DecodeCache:
    """Decodes keyed by which packets arrived; loss patterns repeat across p."""

    def __init__(self, inst, enc: _Encoded, decoder: DecoderConfig):
        self.inst, self.enc, self.decoder = inst, enc, decoder
        self.memo = {}

    def __call__(self, lost: np.ndarray):
        key = tuple(np.flatnonzero(lost))
        if key not in self.memo:
            received = [pkt for pkt, gone in zip(self.enc.packets, lost) if not gone]
            self.memo[key] = decode_received(received, self.enc, self.inst, self.decoder)
        return self.memo[key]


def _memoryless_job(args):
    n, k, m, R, b_fixed, mtu, ps, seed, decoder = args
    inst = draw_instance(n, k, m, seed)
    caches = {}
    csgq, seg, fails = [], [], 0
    for p in ps:
        b = optimize_b_oracle(R, p) if b_fixed is None else b_fixed
        out = []
        for method_b in (b, 0):
            if method_b not in caches:
                caches[method_b] = _DecodeCache(inst, _encode_packets(inst, R - method_b, method_b, mtu), decoder)
            cache = caches[method_b]
            # the same uniforms for every p and both methods
            u = make_rng(seed, CHANNEL_STREAM).random(len(cache.enc.packets))
            d, conv = cache(u < p)
            fails += not conv
            out.append(d)
        csgq.append(out[0])
        seg.append(out[1])
    return np.array(csgq), np.array(seg), fails


def run_memoryless(config: ExperimentConfig) -> ExperimentResult:
    """CS-GQ (oracle-chosen b) against CS-SPLIT segmentation over an i.i.d. packet-erasure channel."""
    jobs = [(config.n, config.k, config.m, config.R, config.b, config.mtu, tuple(config.p), config.seed + t,
             config.decoder)
            for t in range(config.trials)]
    out = map_trials(_memoryless_job, jobs, config.workers)
    csgq = np.array([o[0] for o in out])  # trials x len(p)
    seg = np.array([o[1] for o in out])
    fails = sum(o[2] for o in out)
    rows = [(p, float(csgq[:, j].mean()), float(seg[:, j].mean())) for j, p in enumerate(config.p)]
    flagged = [fails > FAILURE_FLAG_RATE * 2 * len(config.p) * config.trials] * len(rows)
    diff = seg - csgq
    extras = {
        "csgq_stderr": [_stderr(csgq[:, j]) for j in range(len(config.p))],
        "segmentation_stderr": [_stderr(seg[:, j]) for j in range(len(config.p))],
        "gap": diff.mean(axis=0).tolist(),
        "gap_stderr": [_stderr(diff[:, j]) for j in range(len(config.p))],
        "b": [_csgq_b(config, p) for p in config.p],
        "failures": fails,
    }
    return ExperimentResult(COLUMNS["memoryless"], rows, flagged, extras=extras)


def _gilbert_job(args):
    """One batch: ``batch`` vectors sent back to back, chain state carried across them."""
    n, k, m, R, b, mtu, p, q, batch_index, batch, seed, decoder = args
    channel = ChannelModel("gilbert", p, q)
    results = {}
    fails = 0
    for method, method_b in (("csgq", b), ("segmentation", 0)):
        # both methods face the same channel realization
        chain = GilbertState(channel, make_rng(seed + batch_index * batch, CHANNEL_STREAM))
        values = np.empty(batch)
        for j in range(batch):
            inst = draw_instance(n, k, m, seed + batch_index * batch + j)
            enc = _encode_packets(inst, R - method_b, method_b, mtu)
            lost = chain.step(len(enc.packets))
            received = [pkt for pkt, gone in zip(enc.packets, lost) if not gone]
            values[j], conv = decode_received(received, enc, inst, decoder)
            fails += not conv
        results[method] = values
    return results["csgq"], results["segmentation"], fails


def run_gilbert(config: ExperimentConfig) -> ExperimentResult:
    """CS-GQ against segmentation over a bursty two-state erasure channel.

    ``trials`` independent batches of ``batch`` vectors are simulated per
    ``(p, q)`` pair.  The 95% confidence interval of the mean difference uses
    batch means when there are at least two batches.
    """
    rows, flagged, extras = [], [], {"ci95": [], "b": [], "failures": []}
    for p, q in zip(config.p, config.q):
        b = _csgq_b(config, gilbert_stationary(p, q))
        jobs = [(config.n, config.k, config.m, config.R, b, config.mtu, p, q, i, config.batch, config.seed,
                 config.decoder) for i in range(config.trials)]
        out = map_trials(_gilbert_job, jobs, config.workers)
        csgq = np.concatenate([o[0] for o in out])
        seg = np.concatenate([o[1] for o in out])
        fails = sum(o[2] for o in out)
        if config.trials >= 2:
            diff = np.array([o[1].mean() - o[0].mean() for o in out])
        else:
            diff = seg - csgq
        half = 1.96 * _stderr(diff)
        rows.append((p, q, float(seg.mean()), float(csgq.mean())))
        flagged.append(fails > FAILURE_FLAG_RATE * 2 * len(csgq))
        extras["ci95"].append((float(diff.mean() - half), float(diff.mean() + half)))
        extras["b"].append(b)
        extras["failures"].append(fails)
    return ExperimentResult(COLUMNS["gilbert"], rows, flagged, extras=extras)


# --- oracle validation -----------------------------------------------------------

def _oracle_job(args):
    n, k, m, B, b, seed = args
    inst = draw_instance(n, k, m, seed)
    q = QuantizerPair(B, b, inst.r)
    d1, d2 = encode_descriptions(inst.y, make_partition(m), q)
    theta = inst.signal.theta
    A, support = inst.model.A, inst.signal.support
    side = []
    for d in (d1, d2):
        values, _, _ = dequantize_description(d)
        side.append(float(np.sum((oracle_decode(A, values, support) - theta) ** 2)))
    y_c, _ = combine_central(d1, d2)
    central = float(np.sum((oracle_decode(A, y_c, support) - theta) ** 2))
    return (np.mean(side), central, theorem2_side_distortion(k, m, inst.r, B, b),
            theorem2_central_distortion(k, m, inst.r, B, b))


def run_oracle_validate(config: ExperimentConfig) -> ExperimentResult:
    """Closed-form oracle-decoder distortions against a Monte Carlo estimate.

    The dynamic range differs per trial, so the formula is averaged over the
    same trials as the simulation.
    """
    B = config.R - config.b
    jobs = [(config.n, config.k, config.m, B, config.b, config.seed + t) for t in range(config.trials)]
    out = np.array(map_trials(_oracle_job, jobs, config.workers))
    rows, gaps = [], []
    for name, mc_col, f_col in (("side", 0, 2), ("central", 1, 3)):
        mc, formula = float(out[:, mc_col].mean()), float(out[:, f_col].mean())
        gap = abs(mc - formula) / formula
        gaps.append(gap)
        rows.append((name, formula, mc, gap))
    extras = {"side_stderr": _stderr(out[:, 0]), "central_stderr": _stderr(out[:, 1]), "B": B}
    return ExperimentResult(COLUMNS["oracle-validate"], rows, [False, False],
                            passed=all(g < ORACLE_TOLERANCE for g in gaps), extras=extras)


RUNNERS = {
    "tradeoff": run_tradeoff,
    "opt-distortion": run_optimized_distortion,
    "memoryless": run_memoryless,
    "gilbert": run_gilbert,
    "oracle-validate": run_oracle_validate,
}


def run(config: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[config.experiment](config)

