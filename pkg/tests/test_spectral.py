import numpy as np
import pytest
from hypothesis import given, settings

from kemeny.generators import (
    complete_bidirectional,
    cycle_with_chord,
    directed_cycle,
    random_k_out,
    two_cliques,
)
from kemeny.graph import Digraph, graph_stats
from kemeny.spectral import (
    DenseLimitError,
    SpectralError,
    absorbing_inverse,
    dense_transition,
    exact_kemeny,
    exact_submatrix_trace,
    exact_walk_centrality,
    fundamental_matrix,
    second_eigenvalue_modulus,
    spectral_info,
    stationary_distribution,
    truncated_fundamental,
)

from conftest import hitting_times, scc_graphs

PAIR = complete_bidirectional(2)


def test_cycle_stationary_is_uniform():
    pi, _, res = stationary_distribution(directed_cycle(5))
    np.testing.assert_allclose(pi, 0.2, atol=1e-12)
    assert res <= 1e-12


def test_periodic_chain_without_damping_reports_residual():
    star = Digraph.from_edges([0, 0, 1, 2], [1, 2, 0, 0])  # period 2
    with pytest.raises(SpectralError) as info:
        stationary_distribution(star, lazy=False, max_iter=50)
    assert info.value.residual > 0.1


def test_eulerian_k4_stationary():
    g = complete_bidirectional(4)
    pi, _, _ = stationary_distribution(g)
    np.testing.assert_allclose(pi, 0.25, atol=1e-12)
    np.testing.assert_allclose(pi @ dense_transition(g), pi, atol=1e-12)


def test_star_stationary():
    g = Digraph.from_edges([0, 0, 1, 2], [1, 2, 0, 0])
    pi, _, _ = stationary_distribution(g)
    np.testing.assert_allclose(pi, [0.5, 0.25, 0.25], atol=1e-12)


def test_stationary_invariants_on_random_graph():
    g = random_k_out(300, 3, seed=2)
    info = spectral_info(g)
    assert np.all(info.pi > 0)
    assert abs(info.pi.sum() - 1) <= 1e-12
    assert info.pi_residual <= 1e-12
    p = dense_transition(g)
    assert np.abs(info.pi @ p - info.pi).sum() <= 1e-10


@pytest.mark.parametrize("n", [3, 4, 6, 9])
def test_complete_graph_lambda(n):
    g = complete_bidirectional(n)
    pi, _, _ = stationary_distribution(g)
    lam = second_eigenvalue_modulus(g, pi).lam
    assert lam == pytest.approx(1 / (n - 1), abs=1e-9)


def _dense_second_modulus(g):
    ev = np.sort(np.abs(np.linalg.eigvals(dense_transition(g))))[::-1]
    return ev[1]


def test_two_cliques_lambda_matches_dense():
    g = two_cliques(4)
    pi, _, _ = stationary_distribution(g)
    lam = second_eigenvalue_modulus(g, pi).lam
    assert lam == pytest.approx(_dense_second_modulus(g), abs=1e-6)
    assert lam > 0.7


@pytest.mark.parametrize("seed", range(6))
def test_lambda_matches_dense_on_random_graphs(seed):
    g = random_k_out(40, 2, seed=seed)
    pi, _, _ = stationary_distribution(g)
    lam = second_eigenvalue_modulus(g, pi).lam
    assert lam == pytest.approx(_dense_second_modulus(g), abs=1e-6)


def test_periodic_cycle_lambda_is_flagged():
    g = directed_cycle(3)
    pi, _, _ = stationary_distribution(g)
    try:
        lam = second_eigenvalue_modulus(g, pi, max_iter=2000, fallback=False).lam
        assert lam >= 1 - 1e-9
    except SpectralError:
        pass
    info = spectral_info(g)
    assert info.lam >= 1 - 1e-9
    assert not info.lambda_valid


def test_stalled_iteration_falls_back_to_dense():
    g = random_k_out(40, 2, seed=1)
    pi, _, _ = stationary_distribution(g)
    with pytest.raises(SpectralError, match="--lambda"):
        second_eigenvalue_modulus(g, pi, max_iter=5, fallback=False)
    res = second_eigenvalue_modulus(g, pi, max_iter=5)
    assert res.method == "dense"
    assert res.lam == pytest.approx(_dense_second_modulus(g), abs=1e-9)


def test_stalled_iteration_falls_back_to_arnoldi():
    g = random_k_out(2600, 4, seed=3)
    pi, _, _ = stationary_distribution(g)
    ref = second_eigenvalue_modulus(g, pi)
    res = second_eigenvalue_modulus(g, pi, max_iter=20)
    assert ref.method == "subspace" and res.method == "arnoldi"
    assert res.lam == pytest.approx(ref.lam, abs=1e-6)


def test_pair_fundamental_matrix():
    np.testing.assert_allclose(fundamental_matrix(PAIR), [[0.25, -0.25], [-0.25, 0.25]], atol=1e-12)


@pytest.mark.parametrize(
    "g, k",
    [(directed_cycle(3), 1.0), (complete_bidirectional(4), 2.25), (PAIR, 0.5)],
)
def test_exact_kemeny_closed_forms(g, k):
    assert exact_kemeny(g) == pytest.approx(k, abs=1e-12)


def test_walk_centrality_examples():
    assert exact_walk_centrality(PAIR, 0) == pytest.approx(0.5)
    for s in range(3):
        assert exact_walk_centrality(directed_cycle(3), s) == pytest.approx(1.0)
    k4 = complete_bidirectional(4)
    vals = [exact_walk_centrality(k4, s) for s in range(4)]
    assert np.ptp(vals) < 1e-12


def test_submatrix_trace_examples():
    np.testing.assert_allclose(absorbing_inverse(directed_cycle(3), 0), [[1, 1], [0, 1]], atol=1e-12)
    assert exact_submatrix_trace(directed_cycle(3), 0) == pytest.approx(2.0)
    assert exact_submatrix_trace(PAIR, 1) == pytest.approx(1.0)
    assert exact_submatrix_trace(PAIR, 1) - exact_walk_centrality(PAIR, 1) == pytest.approx(0.5)


def test_dense_limit_refused():
    with pytest.raises(DenseLimitError):
        exact_kemeny(directed_cycle(30), limit=20)


@settings(max_examples=40, deadline=None)
@given(scc_graphs())
def test_null_spaces(g):
    f = fundamental_matrix(g)
    pi, _, _ = stationary_distribution(g)
    assert np.abs(f @ np.ones(g.n)).max() <= 1e-8
    assert np.abs(pi @ f).max() <= 1e-8


@settings(max_examples=40, deadline=None)
@given(scc_graphs())
def test_submatrix_identity_every_root(g):
    k = exact_kemeny(g)
    for s in range(g.n):
        assert exact_submatrix_trace(g, s) - exact_walk_centrality(g, s) == pytest.approx(k, abs=1e-7)


@settings(max_examples=30, deadline=None)
@given(scc_graphs(max_n=25))
def test_walk_centrality_equals_mean_hitting_time(g):
    pi, _, _ = stationary_distribution(g)
    for s in range(0, g.n, max(1, g.n // 4)):
        h = hitting_times(g, s)
        assert exact_walk_centrality(g, s) == pytest.approx(pi @ h, rel=1e-8, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(scc_graphs(max_n=12))
def test_hitting_times_below_diameter_bound(g):
    st_ = graph_stats(g)
    bound = st_.tau * float(st_.d_max) ** st_.tau
    for s in range(g.n):
        assert hitting_times(g, s).max() <= bound + 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_truncation_bound(seed):
    g = random_k_out(25, 3, seed=seed)
    info = spectral_info(g)
    k = exact_kemeny(g)
    for l in range(0, 51, 5):
        tr = np.trace(truncated_fundamental(g, l, info.pi))
        bound = g.n * info.lam ** (l + 1) / (1 - info.lam)
        assert abs(k - tr) <= bound + 1e-10


def test_cycle_with_chord_is_aperiodic():
    info = spectral_info(cycle_with_chord(6))
    assert info.lambda_valid


@pytest.mark.parametrize("n", [3, 5, 8])
def test_growth_rate_lambda_on_complete_graphs(n):
    g = complete_bidirectional(n)
    pi, _, _ = stationary_distribution(g)
    res = second_eigenvalue_modulus(g, pi, method="growth")
    assert res.method == "growth"
    assert res.lam == pytest.approx(1 / (n - 1), abs=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_growth_rate_lambda_matches_dense(seed):
    g = random_k_out(300, 3, seed=seed)
    pi, _, _ = stationary_distribution(g)
    res = second_eigenvalue_modulus(g, pi, method="growth")
    assert res.lam == pytest.approx(_dense_second_modulus(g), rel=3e-3)


def test_growth_rate_lambda_matches_subspace_at_scale():
    g = random_k_out(10_000, 3, seed=0)
    pi, _, _ = stationary_distribution(g)
    ref = second_eigenvalue_modulus(g, pi)
    res = second_eigenvalue_modulus(g, pi, method="growth")
    assert ref.method == "subspace"
    assert res.lam == pytest.approx(ref.lam, rel=1e-3)


def test_growth_rate_flags_periodic_cycle():
    g = directed_cycle(4)
    pi, _, _ = stationary_distribution(g)
    assert second_eigenvalue_modulus(g, pi, method="growth").lam == pytest.approx(1.0, abs=1e-9)


def test_unknown_lambda_method_rejected():
    with pytest.raises(ValueError):
        second_eigenvalue_modulus(PAIR, np.array([0.5, 0.5]), method="qr")
