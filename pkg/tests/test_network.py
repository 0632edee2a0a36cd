import numpy as np
import pytest

from asyncnet.errors import EmptyNetworkError, UnconnectedTopologyError
from asyncnet.moments import mean_matrix
from asyncnet.network import (BernoulliAsyncModel, build_topology, combination_matrices,
                              combine_vectors, draw_link_activity, nominal_weights,
                              parse_descriptor, sample_realization)
from asyncnet.rng import stream


def test_ring3_is_triangle():
    topo = build_topology("ring(3)")
    assert [sorted(n) for n in topo.neighborhoods] == [[0, 1, 2]] * 3


def test_full4_neighborhoods():
    topo = build_topology("full(4)")
    assert all(sorted(n) == [0, 1, 2, 3] for n in topo.neighborhoods)


def test_edge_list_line(line3):
    assert sorted(line3.neighborhoods[1]) == [0, 1, 2]
    assert sorted(line3.neighborhoods[0]) == [0, 1]


@pytest.mark.parametrize("spec", ["ring(6)", "full(5)", "line(4)", "random-geometric(15, 0.5, 2)"])
def test_neighborhoods_symmetric_with_self(spec):
    topo = build_topology(spec)
    for k, nb in enumerate(topo.neighborhoods):
        assert k in nb
        for l in nb:
            assert k in topo.neighborhoods[l]


def test_empty_network():
    with pytest.raises(EmptyNetworkError, match="empty network"):
        build_topology("full(0)")


def test_unconnected_edge_list():
    with pytest.raises(UnconnectedTopologyError, match="unconnected topology"):
        build_topology({"kind": "edges", "n_agents": 4, "edges": [(0, 1), (2, 3)]})


def test_rgg_too_small_radius():
    with pytest.raises(UnconnectedTopologyError):
        build_topology("random-geometric(30, 0.01, 0)")


def test_rgg_is_seeded():
    a = build_topology("random-geometric(20, 0.4, 5)")
    b = build_topology("random-geometric(20, 0.4, 5)")
    assert a.edges == b.edges


def test_parse_descriptor_roundtrip():
    assert parse_descriptor("random-geometric(10, 0.3, 4)") == {
        "kind": "random-geometric", "n_agents": 10, "radius": 0.3, "seed": 4}
    with pytest.raises(ValueError):
        parse_descriptor("torus(3)")


def test_nominal_weights_line(line3):
    w = nominal_weights(line3)
    assert w[(0, 1)] == pytest.approx(1 / 3)
    assert w[(2, 1)] == pytest.approx(1 / 3)


def test_nominal_weights_full4():
    w = nominal_weights(build_topology("full(4)"))
    assert set(w.values()) == {0.25}
    # every column k has |N_k| - 1 off-diagonal entries
    assert sum(1 for (_, k) in w if k == 2) == 3


def test_all_links_on_column(line3):
    model = BernoulliAsyncModel.from_topology(line3, eta=1.0)
    real = sample_realization(model, rng=0)
    np.testing.assert_allclose(real.matrix[:, 1], [1 / 3, 1 / 3, 1 / 3])


def test_q_one_step_sizes(line3):
    model = BernoulliAsyncModel.from_topology(line3, q=1.0, eta=0.5, mu=[0.1, 0.2, 0.3])
    for s in range(5):
        np.testing.assert_array_equal(sample_realization(model, rng=s).step_sizes, [0.1, 0.2, 0.3])


@pytest.mark.parametrize("spec", ["ring(5)", "random-geometric(12, 0.5, 1)"])
def test_realizations_left_stochastic(spec):
    topo = build_topology(spec)
    model = BernoulliAsyncModel.from_topology(topo, q=0.5, eta=0.3, mu=0.01)
    rng = stream(1, "test")
    pattern = topo.adjacency() + np.eye(topo.n_agents)
    for _ in range(50):
        real = sample_realization(model, rng)
        assert np.all(real.matrix >= 0)
        assert np.max(np.abs(real.matrix.sum(axis=0) - 1)) <= 1e-12
        assert np.all(real.matrix[pattern == 0] == 0)
        assert set(np.unique(real.step_sizes)) <= {0.0, 0.01}


def test_empirical_mean_matches_mean_matrix(line3_half):
    rng = stream(0, "mean")
    active = draw_link_activity(line3_half, rng, 100_000)
    emp = combination_matrices(line3_half, active).mean(axis=0)
    assert np.max(np.abs(emp - mean_matrix(line3_half))) < 0.01


def test_combine_vectors_matches_matrix_product(ring4_async):
    rng = stream(0, "cv")
    active = draw_link_activity(ring4_async, rng, 30)
    v = rng.random((30, 4))
    mats = combination_matrices(ring4_async, active)
    np.testing.assert_allclose(combine_vectors(ring4_async, active, v),
                               np.einsum("tij,tj->ti", mats, v), atol=1e-14)


@pytest.mark.parametrize("field,value", [("q", 0.0), ("q", 1.2), ("eta", -0.1), ("eta", 1.5)])
def test_probabilities_validated(line3, field, value):
    with pytest.raises(ValueError):
        BernoulliAsyncModel.from_topology(line3, **{field: value})


def test_model_arrays_read_only(line3_half):
    with pytest.raises(ValueError):
        line3_half.q[0] = 0.5
