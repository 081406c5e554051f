"""Command-line harness: ``csgq <experiment> [flags]``.

Flags override values read from ``--config`` (``key = value`` lines).
Results go to a CSV file (``--out``) with a PNG figure next to it, or to
stdout when no output path is given.  The exit status is 0 only when every
validation passes and no row is flagged.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .admm import DecoderConfig, side_decode
from .experiments import EXPERIMENTS, ExperimentResult, default_config, run
from .pipeline import draw_instance
from .quantizer import QuantizerPair, encode_descriptions
from .signal_model import distortion
from .transport import (
    DEFAULT_MTU,
    ChannelModel,
    NoDataError,
    build_constraint_groups,
    interleaved_partition,
    packetize,
    read_trace,
    reassemble,
    transmit,
    write_trace,
)

log = logging.getLogger("csgq")

# config-file keys and the type used to parse them
CONFIG_KEYS = {
    "n": int, "k": int, "m": int, "rate": int, "b": int, "mtu": int, "trials": int, "seed": int,
    "batch": int, "workers": int, "p": str, "q": str, "out": str, "rho": float, "tol": float,
}


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def read_config_file(path) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string("[run]\n" + Path(path).read_text())
    values = {}
    for key, raw in parser["run"].items():
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ValueError(f"unknown config key {key!r}")
        values[key] = CONFIG_KEYS[key](raw)
    return values


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.6g" % v
    return str(v)


def to_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def _common_flags(sub: argparse.ArgumentParser):
    sub.add_argument("--n", type=int)
    sub.add_argument("--k", type=int)
    sub.add_argument("--m", type=int)
    sub.add_argument("--rate", type=int, help="total bits per measurement over both descriptions")
    sub.add_argument("--b", type=int, help="coarse rate in bits")
    sub.add_argument("--p", help="loss probability, comma-separated list allowed")
    sub.add_argument("--q", help="Bad-to-Good probability (gilbert), comma-separated list allowed")
    sub.add_argument("--mtu", type=int)
    sub.add_argument("--trials", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--out", help="output path")
    sub.add_argument("--config", help="key = value file; flags win over it")
    sub.add_argument("--rho", type=float, help="ADMM penalty")
    sub.add_argument("--tol", type=float, help="inner and outer stopping tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csgq", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sub = subs.add_parser(name)
        _common_flags(sub)
        sub.add_argument("--batch", type=int, help="vectors per Gilbert batch")
        sub.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")
        sub.add_argument("--full-scale", action="store_true", help="use the large published parameters")
        sub.add_argument("--no-plot", action="store_true")
    enc = subs.add_parser("encode", help="encode one random instance into a packet trace file")
    _common_flags(enc)
    enc.add_argument("--channel", choices=("none", "memoryless", "gilbert"), default="none")
    dec = subs.add_parser("decode", help="decode a packet trace written by 'encode'")
    dec.add_argument("trace")
    dec.add_argument("--rho", type=float)
    dec.add_argument("--tol", type=float)
    return parser


def _merged(args, parser) -> dict:
    values = {}
    if getattr(args, "config", None):
        try:
            values.update(read_config_file(args.config))
        except (OSError, ValueError) as exc:
            parser.error(f"config file: {exc}")
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return values


def _decoder(values: dict) -> DecoderConfig:
    kw = {}
    if "rho" in values:
        kw["rho"] = values["rho"]
    if "tol" in values:
        kw["inner_tol"] = kw["outer_tol"] = values["tol"]
    return DecoderConfig(**kw)


def _run_experiment(args, parser) -> int:
    values = _merged(args, parser)
    try:
        config = default_config(
            args.command, full_scale=args.full_scale,
            n=values.get("n"), k=values.get("k"), m=values.get("m"), R=values.get("rate"), b=values.get("b"),
            p=_floats(values["p"]) if "p" in values else None,
            q=_floats(values["q"]) if "q" in values else None,
            mtu=values.get("mtu"), trials=values.get("trials"), seed=values.get("seed"),
            output_path=values.get("out"), batch=values.get("batch"), workers=values.get("workers"),
            decoder=_decoder(values),
        )
    except ValueError as exc:
        parser.error(str(exc))
    log.info("running %s: %s", config.experiment, config)
    result = run(config)
    text = to_csv(result)
    if config.output_path:
        out = Path(config.output_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        if not args.no_plot:
            from .plotting import plot_result

            fig = plot_result(config.experiment, result.rows, out.with_suffix(".png"))
            if fig:
                log.info("figure written to %s", fig)
        log.info("results written to %s", out)
    else:
        sys.stdout.write(text)
    for row, flag in zip(result.rows, result.flagged):
        if flag:
            log.warning("row %s flagged: decoder failure rate above 50%%", row[0])
    if not result.passed:
        log.error("validation failed")
    return 0 if result.ok else 1


def _encode(args, parser) -> int:
    values = _merged(args, parser)
    n, k, m = values.get("n", 256), values.get("k", 10), values.get("m", 120)
    R, seed = values.get("rate", 8), values.get("seed", 0)
    b = values.get("b", 2)
    mtu = values.get("mtu", DEFAULT_MTU)
    out = values.get("out")
    if not out:
        parser.error("encode needs --out")
    try:
        inst = draw_instance(n, k, m, seed)
        q = QuantizerPair(R - b, b, inst.r)
        part = interleaved_partition(m, q, mtu)
        packets = packetize(*encode_descriptions(inst.y, part, q), mtu)
        if args.channel != "none":
            ps = _floats(values.get("p", "0"))
            qs = _floats(values.get("q", "1"))
            packets = transmit(packets, ChannelModel(args.channel, ps[0], qs[0]), seed)
    except ValueError as exc:
        parser.error(str(exc))
    write_trace(out, packets)
    # r and the partition travel out of band
    meta = dict(n=n, k=k, m=m, B=R - b, b=b, r=inst.r, mtu=mtu, seed=seed)
    Path(str(out) + ".json").write_text(json.dumps(meta, indent=2) + "\n")
    log.info("wrote %d packets to %s", len(packets), out)
    return 0


def _decode(args, parser) -> int:
    meta = json.loads(Path(args.trace + ".json").read_text())
    packets = read_trace(args.trace)
    inst = draw_instance(meta["n"], meta["k"], meta["m"], meta["seed"])
    q = QuantizerPair(meta["B"], meta["b"], meta["r"])
    part = interleaved_partition(meta["m"], q, meta["mtu"])
    rs = reassemble(packets, meta["m"], q, part)
    try:
        groups = build_constraint_groups(rs, inst.model, q)
    except NoDataError:
        print("received=0 distortion=1")
        return 0
    res = side_decode(groups, inst.model.n, _decoder({k: v for k, v in vars(args).items() if v is not None}))
    d = distortion(inst.signal.theta, res.theta_hat)
    print(f"received={len(packets)} groups={','.join(g.label for g in groups)} "
          f"distortion={d:.6g} converged={int(res.converged)}")
    return 0 if res.converged else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "encode":
        return _encode(args, parser)
    if args.command == "decode":
        return _decode(args, parser)
    return _run_experiment(args, parser)


if __name__ == "__main__":
    sys.exit(main())
