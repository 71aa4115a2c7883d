import numpy as np
import pytest

from conftest import power_iteration, random_ergodic
from ttsalab.chains import (
    ChainError,
    FiniteChain,
    Graph,
    GraphError,
    Sampler,
    SamplerSpec,
    SamplerState,
    augment_chain,
    chain_of_sampler,
    cycle_graph,
    iid_next,
    nbrw_next,
    path_graph,
    random_connected_graph,
    read_edge_list,
    single_shuffle_next,
    srw_next,
    star_graph,
)


# --- stationary distributions ------------------------------------------------

def test_symmetric_two_state():
    np.testing.assert_allclose(FiniteChain([[0.5, 0.5], [0.5, 0.5]]).pi, [0.5, 0.5], atol=1e-15)


def test_two_state_hand_solution_and_power_iteration():
    P = np.array([[0.9, 0.1], [0.2, 0.8]])
    pi = FiniteChain(P).pi
    np.testing.assert_allclose(pi, [2 / 3, 1 / 3], atol=1e-14)
    np.testing.assert_allclose(pi, power_iteration(P), atol=1e-12)


def test_srw_path_degree_proportional():
    chain = chain_of_sampler("srw", path_graph(3))
    np.testing.assert_allclose(chain.pi, [0.25, 0.5, 0.25], atol=1e-15)
    np.testing.assert_allclose(power_iteration(chain.P), [0.25, 0.5, 0.25], atol=1e-12)


def test_random_chains_are_stationary(rng):
    for _ in range(20):
        P = random_ergodic(int(rng.integers(2, 30)), rng)
        ch = FiniteChain(P)
        assert np.abs(ch.pi @ P - ch.pi).max() <= 1e-10
        assert abs(ch.pi.sum() - 1) < 1e-12 and (ch.pi > 0).all()


def test_large_chain_uses_power_path(rng):
    P = random_ergodic(600, rng, density=0.01)
    ch = FiniteChain(P)
    assert np.abs(ch.pi @ P - ch.pi).max() <= 1e-10


@pytest.mark.parametrize("P, word", [
    ([[1.0, 0.0], [0.0, 1.0]], "reducible"),
    ([[0.0, 1.0], [1.0, 0.0]], "periodic"),
    ([[0.5, 0.5], [0.0, 1.0]], "reducible"),
])
def test_non_ergodic_rejected(P, word):
    with pytest.raises(ChainError, match=word):
        FiniteChain(P)


def test_bad_matrices_rejected():
    with pytest.raises(ChainError):
        FiniteChain([[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(ChainError):
        FiniteChain([[1.5, -0.5], [0.5, 0.5]])
    with pytest.raises(ChainError):
        FiniteChain(np.ones((2, 3)) / 3)


def test_period_detection():
    ch = FiniteChain(chain_of_sampler("srw", cycle_graph(6)).P, require="irreducible")
    assert ch.period == 2 and not ch.ergodic
    assert FiniteChain(chain_of_sampler("srw", cycle_graph(5)).P, require="irreducible").period == 1


# --- graphs -----------------------------------------------------------------

def test_graph_invariants():
    g = random_connected_graph(40, 4.0, seed=3)
    for u in range(g.n_nodes):
        for v in g.adjacency[u]:
            assert u in g.adjacency[v] and u != v
        assert list(g.adjacency[u]) == sorted(g.adjacency[u])
    assert g.degrees.sum() == 2 * g.n_edges
    assert abs(g.degree_distribution().sum() - 1) < 1e-15


def test_graph_rejects_disconnected_and_loops():
    with pytest.raises(GraphError, match="2 components"):
        Graph(4, [(0, 1), (2, 3)])
    with pytest.raises(GraphError):
        Graph(2, [(0, 0), (0, 1)])


def test_edge_list_parsing(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# comment\n1 2\n2 3  # trailing\n2 1\n3 3\n")
    g = read_edge_list(p)
    assert g.n_nodes == 3 and g.n_edges == 2
    assert g.dropped == {"self_loops": 1, "duplicates": 1}
    p.write_text("0 1\n1 2\n")
    assert read_edge_list(p).n_nodes == 3
    p.write_text("0 1\n2 3\n")
    with pytest.raises(GraphError, match="components"):
        read_edge_list(p)
    p.write_text("0 x\n")
    with pytest.raises(GraphError, match=":1:"):
        read_edge_list(p)


# --- per-step samplers --------------------------------------------------------

def _counts(step, n=20_000):
    out = {}
    for _ in range(n):
        k = step()
        out[k] = out.get(k, 0) + 1
    return out


def test_srw_next_path_middle():
    g = path_graph(3)
    st = SamplerState("srw", current=1, rng_seed=1)
    c = _counts(lambda: (srw_next(g, st), setattr(st, "current", 1))[0])
    assert set(c) == {0, 2} and abs(c[0] / 20_000 - 0.5) < 0.02


def test_srw_next_endpoint_and_star():
    g = path_graph(3)
    st = SamplerState("srw", current=0, rng_seed=2)
    assert srw_next(g, st) == 1
    s = star_graph(4)
    st = SamplerState("srw", current=0, rng_seed=3)
    c = _counts(lambda: (srw_next(s, st), setattr(st, "current", 0))[0])
    assert set(c) == {1, 2, 3, 4}
    assert all(abs(v / 20_000 - 0.25) < 0.02 for v in c.values())


def test_nbrw_rules():
    g = path_graph(3)
    st = SamplerState("nbrw", current=1, rng_seed=4, previous=0)
    assert nbrw_next(g, st) == 2
    st = SamplerState("nbrw", current=2, rng_seed=4, previous=1)
    assert nbrw_next(g, st) == 1
    c = cycle_graph(5)
    st = SamplerState("nbrw", current=2, rng_seed=5, previous=1)
    assert [nbrw_next(c, st) for _ in range(6)] == [3, 4, 0, 1, 2, 3]


def test_nbrw_first_step_is_srw():
    g = star_graph(3)
    st = SamplerState("nbrw", current=0, rng_seed=6)
    assert nbrw_next(g, st) in (1, 2, 3) and st.previous == 0


def test_single_shuffle_identity():
    st = SamplerState("single-shuffle", current=0, rng_seed=0, permutation=np.arange(3))
    assert [single_shuffle_next(st, 3) for _ in range(6)] == [1, 2, 0, 1, 2, 0]
    with pytest.raises(ValueError):
        single_shuffle_next(st, 0)


def test_single_shuffle_windows_and_determinism():
    a, b = Sampler("single-shuffle", n=17, seed=9), Sampler("single-shuffle", n=17, seed=9)
    np.testing.assert_array_equal(a.state.permutation, b.state.permutation)
    s = a.stream(17 * 5)
    for k in range(17 * 4):
        assert sorted(s[k:k + 17]) == list(range(17))


def test_iid_next():
    st = SamplerState("iid", current=0, rng_seed=7)
    assert {iid_next([1.0, 0.0, 0.0], st) for _ in range(100)} == {0}
    s = Sampler("iid", mu=np.full(5, 0.2), seed=8).stream(200_000)
    np.testing.assert_allclose(np.bincount(s) / 200_000, 0.2, atol=0.004)
    with pytest.raises(ValueError, match="1e-12"):
        iid_next([0.5, 0.4], st)


def test_streams_reproducible():
    g = random_connected_graph(30, 3.0, seed=1)
    for kind in ("srw", "nbrw"):
        spec = SamplerSpec(kind, graph=g)
        np.testing.assert_array_equal(spec.build(11).stream(1000), spec.build(11).stream(1000))
        assert not np.array_equal(spec.build(11).stream(1000), spec.build(12).stream(1000))


def test_stream_matches_per_step_next():
    g = random_connected_graph(25, 3.0, seed=2)
    P = random_ergodic(6, np.random.default_rng(0))
    for spec in (SamplerSpec("srw", graph=g), SamplerSpec("nbrw", graph=g), SamplerSpec("iid", mu=np.full(7, 1 / 7)),
                 SamplerSpec("single-shuffle", n=9), SamplerSpec("random-shuffle", n=9),
                 SamplerSpec("finite-chain", chain=FiniteChain(P))):
        a, b = spec.build(3), spec.build(3)
        np.testing.assert_array_equal(a.stream(500), [b.next() for _ in range(500)])


def test_controlled_kernel_sampler():
    def kernel(x, y):
        p = 0.5 + 0.4 * np.tanh(float(np.sum(x)))
        return np.array([[p, 1 - p], [1 - p, p]])

    s = Sampler("controlled-kernel", kernel=kernel, equilibrium=(np.zeros(1), np.zeros(1)), seed=1)
    np.testing.assert_allclose(s.target(), [0.5, 0.5])
    assert not s.compiled
    stay = 0
    for _ in range(2000):
        prev = s.state.current
        stay += s.next(np.array([50.0]), None) == prev
    assert stay / 2000 > 0.85
    assert len(s.stream(10)) == 10


def test_srw_occupancy_matches_degree():
    g = random_connected_graph(20, 3.0, seed=4)
    n = 1_000_000
    pi = g.degree_distribution()
    se = np.sqrt(pi * (1 - pi) / n) * 10  # autocorrelation inflation allowance
    for kind in ("srw", "nbrw"):
        freq = np.bincount(Sampler(kind, graph=g, seed=5).stream(n), minlength=20) / n
        assert np.all(np.abs(freq - pi) <= 3 * se)


# --- augmented chain and chain_of_sampler -------------------------------------

def test_augment_two_state():
    aug = augment_chain(FiniteChain([[0.5, 0.5], [0.5, 0.5]]))
    assert len(aug.edges) == 4
    np.testing.assert_allclose(aug.pi, 0.25)


def test_augment_drops_zero_transitions_and_matches_power(rng):
    P = np.array([[0.3, 0.0, 0.7], [0.5, 0.2, 0.3], [0.4, 0.6, 0.0]])
    ch = FiniteChain(P)
    aug = augment_chain(ch)
    assert (0, 1) not in {tuple(e) for e in aug.edges}
    np.testing.assert_allclose(aug.pi, power_iteration(aug.P), atol=1e-12)
    for e, (i, j) in enumerate(aug.edges):
        for f, (k, l) in enumerate(aug.edges):
            assert aug.P[e, f] == (P[k, l] if j == k else 0.0)
    marg = np.zeros(3)
    np.add.at(marg, aug.edges[:, 0], aug.pi)
    np.testing.assert_allclose(marg, ch.pi, atol=1e-15)


def test_chain_of_sampler_forms():
    mu = np.array([0.2, 0.3, 0.5])
    np.testing.assert_array_equal(chain_of_sampler("iid", mu).P, np.tile(mu, (3, 1)))
    np.testing.assert_array_equal(chain_of_sampler("srw", path_graph(3)).P,
                                  [[0, 1, 0], [0.5, 0, 0.5], [0, 1, 0]])
    nb = chain_of_sampler("nbrw", cycle_graph(5))
    assert nb.n_states == 10
    assert set(np.unique(nb.P)) == {0.0, 1.0} and np.all(nb.P.sum(axis=0) == 1)
    with pytest.raises(ValueError, match="Monte Carlo"):
        chain_of_sampler("single-shuffle", None)


def test_nbrw_edge_chain_matches_sampler_in_distribution():
    g = random_connected_graph(8, 2.5, seed=6)
    nb = chain_of_sampler("nbrw", g)
    # two-step joint frequencies of the reported node
    n = 400_000
    s = Sampler("nbrw", graph=g, seed=7).stream(n)
    emp = np.zeros((8, 8))
    np.add.at(emp, (s[:-1], s[1:]), 1.0)
    emp /= n - 1
    theo = np.zeros((8, 8))
    for e, (i, j) in enumerate(nb.edges):
        theo[i, j] += nb.pi[e]
    assert np.abs(emp - theo).max() < 0.005
