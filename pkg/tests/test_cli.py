import numpy as np
import pytest

from csgq.cli import format_value, main, read_config_file, to_csv
from csgq.experiments import (
    COLUMNS,
    ExperimentConfig,
    ExperimentResult,
    default_config,
    run_gilbert,
    run_memoryless,
    run_optimized_distortion,
    run_tradeoff,
)

SMALL = dict(n=48, k=2, m=24, R=6, trials=3)


def test_value_formatting():
    assert format_value(0.123456789) == "0.123457"
    assert format_value(np.float64(1e-7)) == "1e-07"
    assert format_value(np.int64(4)) == "4"
    assert format_value("side") == "side"


def test_csv_header_and_rows():
    res = ExperimentResult(("p", "D_csgq", "D_segmentation"), [(0.1, 0.5, 1 / 3)], [False])
    assert to_csv(res) == "p,D_csgq,D_segmentation\n0.1,0.5,0.333333\n"


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("nope")
    with pytest.raises(ValueError):
        ExperimentConfig("oracle-validate", n=64, k=10, m=11, b=2)
    with pytest.raises(ValueError):
        ExperimentConfig("tradeoff", b=9)
    with pytest.raises(ValueError):
        ExperimentConfig("gilbert", p=(0.1,), q=())


def test_full_scale_defaults():
    cfg = default_config("gilbert", full_scale=True)
    assert (cfg.n, cfg.k, cfg.m, cfg.batch) == (1000, 200, 720, 1000)
    assert default_config("memoryless").trials == 1000


def test_tradeoff_rows():
    res = run_tradeoff(default_config("tradeoff", **SMALL))
    assert res.columns == COLUMNS["tradeoff"]
    assert [r[0] for r in res.rows] == [0, 1, 2, 3]
    assert all(r[0] + r[1] == 6 for r in res.rows)


def test_optimized_distortion_rows():
    res = run_optimized_distortion(default_config("opt-distortion", **SMALL))
    assert len(res.rows) == 11
    p0 = res.rows[0]
    assert p0[0] == 0 and p0[1] == 0
    # with no loss the simulated average is the central distortion of the chosen point
    points = {pt.b: pt for pt in res.extras["points"]}
    assert p0[2] == pytest.approx(points[0].central_distortion)
    assert p0[4] == pytest.approx(points[p0[3]].central_distortion)


def test_memoryless_without_loss_methods_agree():
    res = run_memoryless(default_config("memoryless", n=48, k=2, m=24, R=6, trials=2, p=(0.0, 0.4)))
    assert res.rows[0][1] == res.rows[0][2]
    assert len(res.rows) == 2


def test_gilbert_runs():
    res = run_gilbert(default_config("gilbert", n=48, k=2, m=24, R=6, trials=2, batch=3,
                                     p=(0.05,), q=(0.3,)))
    assert res.columns == ("p", "q", "D_segmentation", "D_csgq")
    lo, hi = res.extras["ci95"][0]
    assert lo <= hi


def test_cli_is_byte_reproducible_and_worker_independent(tmp_path):
    args = ["tradeoff", "--n", "48", "--k", "2", "--m", "24", "--rate", "6", "--trials", "4", "--seed", "9"]
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--no-plot"]) == 0
    assert main(args + ["--out", str(c), "--workers", "2", "--no-plot"]) == 0
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    assert a.with_suffix(".png").exists() and not b.with_suffix(".png").exists()
    assert a.read_text().splitlines()[0] == "b,B,D_s_mean,D_s_stderr,D_c_mean,D_c_stderr"


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# desk run\nn = 48\nk = 2\nm = 24\nrate = 6\ntrials = 2\np = 0.0, 0.3\n")
    assert read_config_file(cfg)["p"] == "0.0, 0.3"
    out = tmp_path / "mem.csv"
    assert main(["memoryless", "--config", str(cfg), "--p", "0.2", "--out", str(out), "--no-plot"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "p,D_csgq,D_segmentation"
    assert len(lines) == 2 and lines[1].startswith("0.2,")
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    with pytest.raises(SystemExit) as exc:
        main(["tradeoff", "--config", str(bad)])
    assert exc.value.code == 2


def test_oracle_validate_usage_error_and_exit_status(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["oracle-validate", "--k", "10", "--m", "11"])
    assert exc.value.code == 2
    assert main(["oracle-validate", "--trials", "400"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "quantity,formula,monte_carlo,relative_gap"
    assert out[1].startswith("side,") and out[2].startswith("central,")


def test_oracle_validate_fails_on_large_gap():
    # at one bit the high-rate formula does not hold
    assert main(["oracle-validate", "--rate", "2", "--b", "1", "--trials", "200"]) == 1


def test_encode_decode_trace(tmp_path, capsys):
    trace = tmp_path / "t.bin"
    assert main(["encode", "--n", "64", "--k", "3", "--m", "40", "--rate", "8", "--b", "2",
                 "--mtu", "40", "--out", str(trace)]) == 0
    assert (tmp_path / "t.bin.json").exists()
    assert main(["decode", str(trace)]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("received=") and "groups=combined" in line
    lossy = tmp_path / "l.bin"
    main(["encode", "--n", "64", "--k", "3", "--m", "40", "--mtu", "40", "--out", str(lossy),
          "--channel", "memoryless", "--p", "1.0"])
    main(["decode", str(lossy)])
    assert capsys.readouterr().out.strip() == "received=0 distortion=1"
