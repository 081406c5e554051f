"""Shared test utilities: an independent convex solver and small instances."""

import cvxpy as cp
import numpy as np

from csgq.pipeline import draw_instance, side_groups
from csgq.quantizer import QuantizerPair, encode_descriptions, make_partition


def cvx_decode(groups, n):
    """Reference solution of the constrained l1 problem with a conic solver."""
    theta = cp.Variable(n)
    cons = []
    for g in groups:
        cons.append(cp.norm(g.matrix @ theta - g.values, 2) <= g.l2_radius)
        cons.append(cp.abs(g.matrix @ theta - g.box_center) <= g.box_halfwidth)
    prob = cp.Problem(cp.Minimize(cp.norm1(theta)), cons)
    prob.solve(solver=cp.CLARABEL)
    return theta.value, prob.value


def small_side_problem(seed, n=64, k=3, m=32, B=8, b=4):
    inst = draw_instance(n, k, m, seed)
    q = QuantizerPair(B, b, inst.r)
    d1, _ = encode_descriptions(inst.y, make_partition(m), q)
    return inst, side_groups(d1, inst.model)


def partial_orthogonal(m, n, seed):
    """Random rows of an orthogonal matrix, columns rescaled to unit norm (small RIP constants)."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    A = Q[rng.choice(n, m, replace=False)]
    return A / np.linalg.norm(A, axis=0)


def bound_trial(A, seed, B=6, b=2):
    """Side-decode a 1-sparse signal through ``A``; return (error, bound) or None when the RIP precondition fails."""
    from csgq.admm import DecoderConfig, side_decode, sigma_k_l1, stability_bound
    from csgq.quantizer import epsilon_l2
    from csgq.signal_model import SensingModel, estimate_rip_constant, gen_sparse_signal, measure, measurement_std
    from csgq.quantizer import dynamic_range

    m, n = A.shape
    delta = estimate_rip_constant(A, 2)
    if not delta < np.sqrt(2) - 1:
        return None, delta
    model = SensingModel(A)
    sig = gen_sparse_signal(n, 1, seed)
    y = measure(model, sig)
    q = QuantizerPair(B, b, dynamic_range(measurement_std(model, sig)))
    d1, _ = encode_descriptions(y, make_partition(m), q)
    res = side_decode(side_groups(d1, model), n, DecoderConfig(inner_tol=1e-8, outer_tol=1e-8, max_outer=20000))
    m_B = int(d1.fine.sum())
    m_b = m - m_B
    bound = stability_bound(delta, sigma_k_l1(sig.theta, 1), 1, epsilon_l2(m_B, q.delta_B), epsilon_l2(m_b, q.delta_b),
                            q.delta_B, q.delta_b, m_B, m_b)
    return (float(np.linalg.norm(res.theta_hat - sig.theta)), bound), delta
