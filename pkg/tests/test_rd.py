import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from csgq.rd import (
    LossModel,
    OperatingPoint,
    average_distortion,
    optimize_b_operational,
    optimize_b_oracle,
    oracle_objective,
    point_from_trials,
    sweep_tradeoff,
    theorem2_central_distortion,
    theorem2_side_distortion,
)

probs = st.floats(0, 1)


def brute_force_b(R, p):
    """Independent evaluation of the objective, written out term by term."""
    values = []
    for b in range(R // 2 + 1):
        B = R - b
        side = 2.0 ** (-2 * B) + (1.0 if b == 0 else 2.0 ** (-2 * b))
        central = 2.0 ** (-2 * B) * (2.0 ** (B + 1) - 2.0**b + 1) / (2.0**B + 2.0**b - 1)
        values.append(2 * p * side + (1 - p) * central)
    return int(np.argmin(values))  # first minimum = smallest b


def test_average_distortion_examples():
    assert average_distortion(0.0, 0.3, 0.1) == 0.1
    assert average_distortion(1.0, 0.3, 0.1) == 1.0
    assert average_distortion(0.5, 0.2, 0.1) == pytest.approx(0.375)
    with pytest.raises(ValueError):
        average_distortion(1.5, 0.1, 0.1)
    with pytest.raises(ValueError):
        average_distortion(0.5, -0.1, 0.1)


@given(probs)
def test_loss_weights_sum_to_one(p):
    assert average_distortion(p, 1.0, 1.0) == pytest.approx(1.0)


@given(probs, st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_average_distortion_affine(p, a, c, t):
    mix = average_distortion(p, t * a, t * c) - p * p
    assert mix == pytest.approx(t * (average_distortion(p, a, c) - p * p), abs=1e-12)


def test_loss_model_validates():
    LossModel(0.3)
    with pytest.raises(ValueError):
        LossModel(-0.1)


def test_oracle_b_examples():
    assert optimize_b_oracle(8, 0.0) == 0
    assert optimize_b_oracle(8, 0.99) == 4
    with pytest.raises(ValueError):
        optimize_b_oracle(1, 0.1)


def test_oracle_b_matches_brute_force_on_grid():
    for p in np.linspace(0, 0.99, 100):
        assert optimize_b_oracle(8, p) == brute_force_b(8, p)


@given(st.integers(2, 24), probs)
def test_oracle_b_in_range_and_brute_force(R, p):
    b = optimize_b_oracle(R, p)
    assert 0 <= b <= R // 2
    assert b == brute_force_b(R, p)


def test_oracle_objective_at_zero_b_is_plain_quantizer():
    R = 8
    assert oracle_objective(R, 0, 0.0) == pytest.approx(2 * 2.0 ** (-2 * R))
    assert oracle_objective(R, 0, 1.0) == pytest.approx(2 * (1 + 2.0 ** (-2 * R)))


def _pt(b, ds, dc):
    return OperatingPoint(b=b, B=8 - b, side_distortion=ds, central_distortion=dc)


def test_operational_b():
    pts = [_pt(0, 0.5, 0.01), _pt(1, 0.2, 0.02), _pt(2, 0.1, 0.05)]
    assert optimize_b_operational(pts[:1], 0.7) == 0
    assert optimize_b_operational(pts, 0.0) == 0
    assert optimize_b_operational(pts, 0.5) == 2
    with pytest.raises(ValueError):
        optimize_b_operational([], 0.1)


def test_operational_ties_go_to_smaller_b():
    assert optimize_b_operational([_pt(2, 0.1, 0.1), _pt(1, 0.1, 0.1)], 0.3) == 1


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=5), probs)
def test_operational_b_is_minimizer(values, p):
    pts = [_pt(b, ds, dc) for b, (ds, dc) in enumerate(values)]
    best = optimize_b_operational(pts, p)
    chosen = average_distortion(p, *values[best])
    assert all(chosen <= average_distortion(p, ds, dc) for ds, dc in values)


def test_oracle_formula_values():
    side = 10 / 109 * 120 / 24 * (2.0**-12 + 2.0**-4)
    assert theorem2_side_distortion(10, 120, 1.0, 6, 2) == pytest.approx(side, rel=1e-12)
    assert theorem2_side_distortion(10, 120, 1.0, 6, 2) == pytest.approx(0.028782, abs=5e-7)
    # (2^7 - 2^2 + 1) / (2^6 + 2^2 - 1) = 125 / 67
    central = 10 / 109 * 5 * 2.0**-12 * 125 / 67
    assert theorem2_central_distortion(10, 120, 1.0, 6, 2) == pytest.approx(central, rel=1e-12)
    assert theorem2_central_distortion(10, 120, 1.0, 6, 2) == pytest.approx(2.0894e-4, rel=1e-4)
    with pytest.raises(ValueError):
        theorem2_side_distortion(10, 11, 1.0, 6, 2)
    with pytest.raises(ValueError):
        theorem2_central_distortion(10, 120, 1.0, 6, 0)


@given(st.integers(1, 12).flatmap(lambda B: st.tuples(st.just(B), st.integers(1, B))),
       st.floats(0.1, 10), st.integers(1, 20))
def test_oracle_formula_scaling(Bb, r, k):
    B, b = Bb
    m = 3 * k + 5
    for f in (theorem2_side_distortion, theorem2_central_distortion):
        assert f(k, m, 2 * r, B, b) == pytest.approx(4 * f(k, m, r, B, b))
    assert theorem2_central_distortion(k, m, r, B, b) <= theorem2_side_distortion(k, m, r, B, b)


def test_central_formula_shares_noise_core():
    from csgq.quantizer import epsilon_central_sq
    k, m, r, B = 10, 120, 1.7, 5
    assert theorem2_central_distortion(k, m, r, B, B) == pytest.approx(
        epsilon_central_sq(m, r, B, B) * k / (m - k - 1))


def test_point_from_trials():
    pt = point_from_trials(1, 7, [0.1, 0.3], [0.3, 0.1], [0.05, 0.07])
    assert pt.side_distortion == pytest.approx(0.2) and pt.side_stderr == 0.0
    assert pt.central_distortion == pytest.approx(0.06)
    assert pt.R == 8 and pt.trials == 2


def test_sweep_tradeoff_shape_and_determinism():
    pts = sweep_tradeoff(64, 3, 32, 6, trials=3, seed=5)
    assert [p.b for p in pts] == [0, 1, 2, 3]
    assert all(p.B + p.b == 6 for p in pts)
    again = sweep_tradeoff(64, 3, 32, 6, trials=3, seed=5)
    assert [p.central_distortion for p in pts] == [p.central_distortion for p in again]
    with pytest.raises(ValueError):
        sweep_tradeoff(64, 3, 32, 1, trials=3)
