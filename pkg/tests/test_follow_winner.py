import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from olps.engine import run_backtest
from olps.follow_winner import (AggregatingStocks, FTLVariant, ONSState,
                                OnlineNewtonStep, SwitchingPortfolio, UniversalPortfolio, UPSpec,
                                expconcave_ftl_decide, follow_leader_decide, gradient_family_update,
                                ons_update, switching_portfolio_update, up_decide, up_wealth_identity)
from olps.market import synthetic_cg86, synthetic_iid
from olps.simplex import crp_wealth, is_feasible, simplex_grid, uniform


# universal portfolio -----------------------------------------------------------

def test_up_empty_history_is_uniform():
    assert np.allclose(up_decide(np.zeros((0, 3)), UPSpec(), m=3), uniform(3))


def test_up_enumerated_grid():
    spec = UPSpec(mode="grid", grid_step=0.5)
    b = up_decide(synthetic_cg86(2).relatives, spec)
    expected = (1 * np.array([1, 0]) + 9 / 8 * np.array([0.5, 0.5]) + 1 * np.array([0, 1])) / (25 / 8)
    assert np.allclose(b, expected, atol=1e-15)
    assert up_wealth_identity(synthetic_cg86(2).relatives, spec) == pytest.approx(25 / 24, abs=1e-15)


def test_up_single_node_is_ucrp():
    spec = UPSpec(mode="grid", grid_step=1.0)
    # step 1 on m=2 gives the two vertices only; a single interior node needs m=1
    assert len(spec.nodes(2)[0]) == 2
    seq = synthetic_iid(1, 5, seed=0)
    assert up_wealth_identity(seq.relatives, UPSpec(mode="grid", grid_step=1.0)) == pytest.approx(
        crp_wealth([1.0], seq))


def test_up_all_ones_market():
    ones = np.ones((7, 3))
    assert up_wealth_identity(ones, UPSpec(mode="grid")) == pytest.approx(1.0, abs=1e-14)


def test_up_grid_matches_naive_average():
    # oracle: explicit enumeration of node wealths
    seq = synthetic_iid(3, 15, seed=9)
    nodes = simplex_grid(3, 0.1)
    w = np.array([crp_wealth(b, seq) for b in nodes])
    assert up_wealth_identity(seq.relatives, UPSpec(mode="grid", grid_step=0.1)) == pytest.approx(w.mean(), rel=1e-12)
    assert np.allclose(up_decide(seq.relatives, UPSpec(mode="grid", grid_step=0.1)), w @ nodes / w.sum())


def test_up_monte_carlo_is_seeded():
    seq = synthetic_iid(5, 20, seed=1)
    a = run_backtest(UniversalPortfolio(mode="monte_carlo", samples=500, seed=4), seq).final_wealth
    b = run_backtest(UniversalPortfolio(mode="monte_carlo", samples=500, seed=4), seq).final_wealth
    c = run_backtest(UniversalPortfolio(mode="monte_carlo", samples=500, seed=5), seq).final_wealth
    assert a == b and a != c
    ident = up_wealth_identity(seq.relatives, UPSpec(mode="monte_carlo", samples=500, seed=4))
    assert a == pytest.approx(ident, rel=1e-10)


def test_up_dirichlet_half_prior():
    seq = synthetic_iid(2, 30, seed=3)
    res = run_backtest(UniversalPortfolio(prior="dirichlet_half", samples=2000), seq)
    spec = UPSpec(mode="auto", samples=2000, prior="dirichlet_half")
    assert spec.resolved_mode(2) == "monte_carlo"
    assert res.final_wealth == pytest.approx(up_wealth_identity(seq.relatives, spec), rel=1e-10)


def test_up_spec_validation():
    with pytest.raises(ValueError):
        UPSpec(grid_step=0.0)
    with pytest.raises(ValueError):
        UPSpec(samples=0)


def test_up_long_history_does_not_underflow():
    seq = synthetic_iid(2, 3000, seed=0, low=0.3, high=0.9)
    b = up_decide(seq.relatives, UPSpec(mode="grid"))
    assert is_feasible(b)


# gradient family ---------------------------------------------------------------

@pytest.mark.parametrize("mode", ["EG", "GP", "EM"])
def test_gradient_family_fixed_by_flat_market(mode):
    b = np.array([0.2, 0.3, 0.5])
    assert np.allclose(gradient_family_update(b, np.ones(3), 0.3, mode), b, atol=1e-15)


def test_eg_formula():
    got = gradient_family_update([0.5, 0.5], [1.0, 2.0], 0.05, "EG")
    w = np.array([0.5 * np.exp(0.05 / 1.5), 0.5 * np.exp(0.1 / 1.5)])
    assert np.allclose(got, w / w.sum(), atol=1e-15)


def test_gp_em_formulas():
    b, x, eta = np.array([0.4, 0.6]), np.array([1.1, 0.9]), 0.05
    r = x / (b @ x)
    assert np.allclose(gradient_family_update(b, x, eta, "GP"), b + eta * (r - r.mean()), atol=1e-15)
    assert np.allclose(gradient_family_update(b, x, eta, "EM"), b * (eta * (r - 1) + 1), atol=1e-15)


def test_em_matches_eg_to_first_order():
    b, x = np.array([0.2, 0.5, 0.3]), np.array([1.3, 0.8, 1.05])
    gap = [np.linalg.norm(gradient_family_update(b, x, eta, "EM") - gradient_family_update(b, x, eta, "EG"))
           for eta in (1e-3, 5e-4)]
    assert 3.5 < gap[0] / gap[1] < 4.5


def test_gp_large_step_is_projected():
    out = gradient_family_update([0.5, 0.5], [1.0, 3.0], 10.0, "GP")
    assert is_feasible(out) and np.allclose(out, [0.0, 1.0])


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from(["EG", "GP", "EM"]), st.floats(1e-4, 5.0))
def test_gradient_family_feasible(seed, mode, eta):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 6))
    out = gradient_family_update(rng.dirichlet(np.ones(m)), rng.uniform(0.2, 3.0, m), eta, mode)
    assert is_feasible(out)


# follow the leader --------------------------------------------------------------

def test_ftl_examples():
    assert np.allclose(follow_leader_decide(np.array([[1.0, 2.0]])), [0, 1], atol=1e-9)
    assert np.allclose(follow_leader_decide(synthetic_cg86(2).relatives), [0.5, 0.5], atol=1e-6)
    prev = np.array([0.9, 0.1])
    assert np.allclose(follow_leader_decide(synthetic_cg86(4).relatives, FTLVariant("WSCRP", gamma=1.0), prev), prev)


def test_vrp_uses_window():
    hist = np.vstack([np.tile([1.0, 2.0], (10, 1)), np.tile([2.0, 1.0], (3, 1))])
    assert np.allclose(follow_leader_decide(hist, FTLVariant("VRP", window=3)), [1, 0], atol=1e-9)
    assert np.allclose(follow_leader_decide(hist, FTLVariant("VRP", window=100)),
                       follow_leader_decide(hist, FTLVariant("FTL")), atol=1e-12)


def test_ordentlich_mixture():
    hist = np.array([[1.0, 2.0], [1.0, 2.0]])
    got = follow_leader_decide(hist, FTLVariant("MixedOrdentlich"))
    assert np.allclose(got, 2 / 3 * np.array([0, 1]) + 1 / 3 * np.array([0.5, 0.5]), atol=1e-9)


def test_ftl_variant_validation():
    with pytest.raises(ValueError):
        FTLVariant("nope")
    with pytest.raises(ValueError):
        FTLVariant("WSCRP", gamma=1.5)
    with pytest.raises(ValueError):
        FTLVariant("VRP", window=0)


# ONS ----------------------------------------------------------------------------

def test_ons_first_update_statistics():
    state = ONSState.initial(2)
    new, b = ons_update(state, [0.5, 0.5], [1.0, 1.0])
    assert np.allclose(new.A, np.eye(2) + np.ones((2, 2)))
    assert np.allclose(new.p, 2.0 * np.ones(2))
    assert is_feasible(b)


def test_ons_first_decision_uniform():
    res = run_backtest(OnlineNewtonStep(), synthetic_iid(3, 4))
    assert np.allclose(res.portfolios[0], uniform(3))


def test_ons_eigenvalues_stay_above_one():
    seq = synthetic_iid(4, 60, seed=2)
    state, b = ONSState.initial(4), uniform(4)
    for x in seq.relatives:
        state, b = ons_update(state, b, x)
        assert np.linalg.eigvalsh(state.A).min() >= 1 - 1e-12
        assert is_feasible(b)


def test_ons_projection_oracle():
    # the returned point minimizes the A-norm distance to delta A^-1 p (grid oracle)
    state, b = ONSState.initial(3), uniform(3)
    for x in synthetic_iid(3, 10, seed=6).relatives:
        state, b = ons_update(state, b, x)
    y = state.delta * np.linalg.solve(state.A, state.p)
    f = lambda q: (q - y) @ state.A @ (q - y)
    assert f(b) <= min(f(g) for g in simplex_grid(3, 0.01)) + 1e-9


# exp-concave FTL -------------------------------------------------------------------

def test_expconcave_ftl_examples():
    assert np.allclose(expconcave_ftl_decide(np.zeros((0, 3)), m=3), uniform(3))
    assert np.allclose(expconcave_ftl_decide(np.ones((6, 3))), uniform(3), atol=1e-8)
    # one (1, 2) row: the regularizer keeps b off the vertex, b_2 = (sqrt(17) - 1) / 4
    b = expconcave_ftl_decide(np.array([[1.0, 2.0]]))
    assert b[1] == pytest.approx((np.sqrt(17) - 1) / 4, abs=1e-8)
    # ten rows: the log term dominates and the vertex is optimal
    assert np.allclose(expconcave_ftl_decide(np.tile([1.0, 2.0], (10, 1))), [0, 1], atol=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_expconcave_ftl_vs_grid(seed):
    hist = synthetic_iid(2, 8, seed=seed).relatives
    b = expconcave_ftl_decide(hist)
    f = lambda q: np.log(hist @ q).sum() - 0.5 * q @ q
    best = max(f(np.array([1 - v, v])) for v in np.linspace(0, 1, 10001))
    assert f(b) >= best - 1e-9


# AA over stocks and SP ------------------------------------------------------------

def test_aa_eta_one_is_bah():
    seq = synthetic_iid(3, 30, seed=8)
    res = run_backtest(AggregatingStocks(), seq)
    h = uniform(3)
    for t, x in enumerate(seq.relatives):
        assert np.allclose(res.portfolios[t], h, atol=1e-12)
        h = h * x / (h @ x)


def test_sp_update_examples():
    b = np.array([0.2, 0.8])
    assert np.array_equal(switching_portfolio_update(b, 0.0), b)
    assert np.allclose(switching_portfolio_update([1.0, 0.0], 0.1), [0.9, 0.1])
    assert np.allclose(switching_portfolio_update(uniform(4), 0.3), uniform(4))
    with pytest.raises(ValueError):
        switching_portfolio_update([1.0], 0.1)


def test_sp_from_vertex_drifts_to_uniform():
    res = run_backtest(SwitchingPortfolio(gamma=0.1, b=(1.0, 0.0, 0.0)), synthetic_iid(3, 200, seed=0))
    assert np.allclose(res.next_portfolio, uniform(3), atol=1e-6)
