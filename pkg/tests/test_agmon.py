import heapq

import numpy as np
import pytest

from landscapelab.agmon import agmon_distance_field, agmon_graph, stencil_offsets, sublevel_set
from landscapelab.estimators import AgmonDistance
from landscapelab.grid import Grid, ScalarField


def heap_dijkstra(G, source):
    """Textbook binary-heap Dijkstra on a scipy CSR graph (undirected), oracle."""
    G = G.tocsr()
    Gt = G.T.tocsr()
    dist = np.full(G.shape[0], np.inf)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for M in (G, Gt):
            for k in range(M.indptr[v], M.indptr[v + 1]):
                nb, w = M.indices[k], M.data[k]
                if d + w < dist[nb]:
                    dist[nb] = d + w
                    heapq.heappush(heap, (d + w, nb))
    return dist


def test_stencil_counts():
    assert len(stencil_offsets(2, 1)) == 4
    assert len(stencil_offsets(3, 1)) == 13
    assert len(stencil_offsets(2, 2)) == 8


def test_matches_heap_dijkstra_oracle():
    g = Grid.cube(1.0, 0.125, 2)
    w = ScalarField(g, np.random.default_rng(4).uniform(0, 3, size=g.shape))
    src = g.ravel_index((3, 5))
    field = agmon_distance_field(w, [src])
    oracle = heap_dijkstra(agmon_graph(w), src)
    np.testing.assert_allclose(field.rho.values.ravel(), oracle, rtol=1e-12)


@pytest.mark.parametrize("dim,tol", [(2, 0.08), (3, 0.08)])
def test_constant_weight_euclidean(dim, tol):
    g = Grid.cube(2.0, 0.125 if dim == 2 else 0.25, dim)
    c = 2.5
    src = tuple(s // 2 for s in g.shape)
    rho = agmon_distance_field(ScalarField(g, np.full(g.shape, c)), [g.ravel_index(src)]).rho.values
    d = np.linalg.norm(g.coordinates - g.coordinates[src], axis=-1)
    nz = d > 0
    assert np.max(np.abs(rho[nz] / (np.sqrt(c) * d[nz]) - 1)) <= tol
    axis = [slice(None) if j == 0 else src[j] for j in range(dim)]
    np.testing.assert_allclose(rho[tuple(axis)], np.sqrt(c) * d[tuple(axis)], rtol=1e-10, atol=1e-12)


def test_1d_quadratic_weight_exact():
    g = Grid.box([-2.0], [2.0], 0.01)
    x = g.coordinates[..., 0]
    a = g.nearest_index([0.5])
    rho = agmon_distance_field(ScalarField(g, x ** 2), [g.ravel_index(a)]).rho.values
    same_side = np.abs(x ** 2 - 0.25) / 2
    crossing = (x ** 2 + 0.25) / 2  # the geodesic passes through the zero of w
    oracle = np.where(x >= 0, same_side, crossing)
    assert np.max(np.abs(rho - oracle)) < 1e-3


def test_zero_weight_is_free_travel():
    g = Grid.cube(1.0, 0.25, 2)
    rho = agmon_distance_field(g.zeros(), [0]).rho.values
    assert np.all(rho == 0)


def test_lipschitz_slack_small_for_smooth_weight():
    g = Grid.cube(2.0, 0.0625, 2)
    w = ScalarField(g, 1 + np.sum(g.coordinates ** 2, -1))
    field = agmon_distance_field(w, [g.ravel_index((32, 32))])
    assert field.lipschitz_slack < 0.25


def test_sublevel_set_components_and_weight():
    g = Grid.box([-3.0], [3.0], 0.01)
    x = g.coordinates[..., 0]
    u = ScalarField(g, np.where(g.interior_mask, 1.0 / (1 + (x ** 2 - 1) ** 2), 0.0))
    level = sublevel_set(u, 1.5)
    assert level.components == 2
    inner = g.interior_mask
    np.testing.assert_allclose(level.w.values[inner], np.maximum(1 / u.values[inner] - 1.5, 0))
    assert np.isfinite(level.w.values).all()


def test_estimator_wrapper():
    g = Grid.cube(1.0, 0.25, 2)
    est = AgmonDistance().fit(g.ones(), [g.ravel_index((4, 4))])
    assert est.predict([[4, 4]])[0] == 0.0
    assert est.predict([[4, 8]])[0] == pytest.approx(1.0)
