"""Tests for the p-modulus solver, its certificates, and the level scan."""

import math

import numpy as np
import pytest

import pillowspace as ps
from pillowspace import modulus as M

P_GRID = [1.0, 1.5, 2.0, 2.0959, 2.5, 3.0]

# crossing modulus of the replacement graphs, doubled center engaged,
# pinned from certified runs (certificate gap below 3e-6 relative)
PINNED = {
    (1, 1.0): 4.0,
    (1, 1.5): 2.8284271247,
    (1, 2.0): 2.0,
    (1, 2.0959): 1.8713767051,
    (1, 2.5): 1.4142135624,
    (1, 3.0): 1.0,
    (2, 1.0): 12.0,
    (2, 1.5): 4.4273484027,
    (2, 2.0): 1.5548135039,
    (2, 2.0959): 1.2721919183,
    (2, 2.5): 0.5474593561,
    (2, 3.0): 0.1935634201,
    (3, 1.0): 32.0,
    (3, 2.0): 1.5215533734,
    (3, 2.0959): 1.1119183114,
}


@pytest.fixture(scope="module")
def crossing():
    """Level -> (network, left face, right face)."""
    out = {}
    for n in (1, 2, 3):
        g = ps.build_graph(n)
        out[n] = (
            M.Network.from_graph(g),
            frozenset(ps.boundary_face(g, "left")),
            frozenset(ps.boundary_face(g, "right")),
        )
    return out


def solve(net, src, tgt, p, **kw):
    return M.solve_modulus(M.ModulusProblem(net, frozenset(src), frozenset(tgt), p, **kw))


# ---------------------------------------------------------------------------
# analytic families


@pytest.mark.parametrize("p", P_GRID)
@pytest.mark.parametrize("k", [1, 2, 5])
def test_single_path_value(p, k):
    net, src, tgt = M.path_network(k)
    res = solve(net, src, tgt, p)
    want = k ** (1.0 - p)
    assert res.converged
    assert abs(res.value - want) <= 1e-6 * want
    assert res.value_lower <= want * (1 + 1e-9)
    assert res.value_upper >= want * (1 - 1e-9)


@pytest.mark.parametrize("p", P_GRID)
@pytest.mark.parametrize("m,k", [(3, 1), (2, 4), (4, 3)])
def test_parallel_paths_value(p, m, k):
    net, src, tgt = M.parallel_network(m, k)
    res = solve(net, src, tgt, p)
    want = m * k ** (1.0 - p)
    assert res.converged
    assert abs(res.value - want) <= 1e-6 * want


def test_extreme_exponent_still_certified():
    net, src, tgt = M.parallel_network(2, 3)
    res = solve(net, src, tgt, 12.0)  # beyond the harmonic seeding range
    want = 2 * 3**-11.0
    assert res.converged
    assert abs(res.value - want) <= 1e-6 * want


# ---------------------------------------------------------------------------
# oracle agreement


@pytest.mark.parametrize("rows", [2, 3, 4, 5])
@pytest.mark.parametrize("cols", [2, 3, 4, 5])
def test_unit_exponent_matches_mincut(rows, cols):
    net, src, tgt = M.grid_network(rows, cols)
    res = solve(net, src, tgt, 1.0)
    cut = M.mincut_oracle(net, src, tgt)
    assert res.converged
    assert abs(res.value - cut) <= 1e-6 * cut


@pytest.mark.parametrize("rows", [2, 3, 4, 5])
@pytest.mark.parametrize("cols", [2, 3, 4, 5])
def test_square_exponent_matches_conductance(rows, cols):
    net, src, tgt = M.grid_network(rows, cols)
    res = solve(net, src, tgt, 2.0)
    cond = M.effective_conductance(net, src, tgt)
    assert res.converged
    assert abs(res.value - cond) <= 1e-6 * max(cond, 1.0)


def test_replacement_graph_oracles(crossing):
    net, src, tgt = crossing[1]
    assert M.mincut_oracle(net, src, tgt) == 4
    net3, src3, tgt3 = crossing[3]
    assert M.mincut_oracle(net3, src3, tgt3) == 32
    assert abs(M.effective_conductance(net3, src3, tgt3) - 1.5215533734) < 1e-8


# ---------------------------------------------------------------------------
# certificates


@pytest.mark.parametrize("p", [1.5, 2.0959, 3.0])
def test_certificate_sandwich(crossing, p):
    net, src, tgt = crossing[2]
    tol = 1e-6
    res = solve(net, src, tgt, p, tolerance=tol)
    assert res.converged
    assert res.value_lower <= res.value_upper * (1 + 1e-12)
    assert res.value_upper - res.value_lower <= 5 * tol * res.value_lower


def test_upper_certificate_is_admissible(crossing):
    # the rescaled density really has every crossing path at length >= 1
    net, src, tgt = crossing[2]
    res = solve(net, src, tgt, 1.5)
    length, _, _ = M._shortest_path(net, res.density, src, tgt)
    assert length >= 1.0 - 2e-6
    for vpath in res.active_paths:
        assert vpath[0] in src and vpath[-1] in tgt


def test_coarser_tolerance_still_brackets(crossing):
    net, src, tgt = crossing[2]
    loose = solve(net, src, tgt, 2.5, tolerance=1e-3)
    tight = solve(net, src, tgt, 2.5, tolerance=1e-6)
    assert loose.value_lower <= tight.value_upper * (1 + 1e-9)
    assert loose.value_upper >= tight.value_lower * (1 - 1e-9)


# ---------------------------------------------------------------------------
# structural identities


@pytest.mark.parametrize("p", [1.0, 1.5, 2.5])
def test_duplicated_edges_double_the_value(p):
    net, src, tgt = M.grid_network(3, 4)
    doubled = M.Network(net.n_vertices, net.edge_list + net.edge_list)
    base = solve(net, src, tgt, p)
    twice = solve(doubled, src, tgt, p)
    assert abs(twice.value - 2 * base.value) <= 2e-5 * base.value


def test_flip_relabeling_preserves_value(crossing):
    net, src, tgt = crossing[2]
    g = ps.build_graph(2)
    perm = ps.flip_permutation(g, "10")
    assert ps.is_automorphism(g, perm)
    relabeled = M.Network(
        net.n_vertices, [(int(perm[u]), int(perm[v])) for u, v in net.edge_list]
    )
    # center sheets swap, the boundary faces stay put
    a = solve(net, src, tgt, 2.5)
    b = solve(relabeled, src, tgt, 2.5)
    assert abs(a.value - b.value) <= 2e-5 * a.value


def test_smaller_target_never_increases(crossing):
    net, src, tgt = crossing[1]
    sub = frozenset(sorted(tgt)[:1])
    full = solve(net, src, tgt, 2.0)
    part = solve(net, src, sub, 2.0)
    assert part.value <= full.value * (1 + 1e-9)


def test_monotone_in_exponent(crossing):
    for n in (1, 2):
        net, src, tgt = crossing[n]
        values = [solve(net, src, tgt, p).value for p in P_GRID]
        for a, b in zip(values, values[1:]):
            assert b <= a * (1 + 2e-5)


def test_disconnected_pair_is_zero():
    net = M.Network(4, [(0, 1), (2, 3)])
    res = solve(net, {0}, {2}, 2.0)
    assert res.converged
    assert res.value == 0.0


def test_seeding_with_known_paths_matches(crossing):
    net, src, tgt = crossing[1]
    first = solve(net, src, tgt, 1.5)
    again = M.solve_modulus(
        M.ModulusProblem(net, src, tgt, 1.5), seed_paths=first.active_paths
    )
    assert again.converged
    assert abs(again.value - first.value) <= 2e-5 * first.value


# ---------------------------------------------------------------------------
# pinned crossing values


@pytest.mark.parametrize("n,p", sorted(PINNED))
def test_pinned_crossing_modulus(crossing, n, p):
    net, src, tgt = crossing[n]
    res = solve(net, src, tgt, p)
    want = PINNED[(n, p)]
    assert res.converged
    assert res.value_lower <= want * (1 + 2e-5)
    assert res.value_upper >= want * (1 - 2e-5)
    assert abs(res.value - want) <= 2e-5 * want


# ---------------------------------------------------------------------------
# the scan


def test_scan_rows_and_ratios():
    table = M.conformal_scan([1, 2], [1.5, 2.0, 2.5])
    assert len(table.rows) == 6
    assert table.monotone_ok
    by_cell = {(r.level, r.p): r for r in table.rows}
    assert by_cell[(1, 2.0)].ratio_to_previous_level is None
    r2 = by_cell[(2, 2.0)]
    assert r2.converged
    want = PINNED[(2, 2.0)] / PINNED[(1, 2.0)]
    assert abs(r2.ratio_to_previous_level - want) < 1e-4
    assert set(table.critical_p) == {2}
    assert table.critical_p[2] in {1.5, 2.0, 2.5}


def test_scan_input_validation():
    with pytest.raises(ValueError):
        M.conformal_scan([1, 5], [2.0])
    with pytest.raises(ValueError):
        M.conformal_scan([1], [0.5])


# ---------------------------------------------------------------------------
# input validation and guards


def test_problem_validation():
    net, src, tgt = M.path_network(2)
    with pytest.raises(ValueError):
        M.ModulusProblem(net, frozenset(src), frozenset(tgt), 0.5)
    with pytest.raises(ValueError):
        M.ModulusProblem(net, frozenset(src), frozenset(tgt), 100.0)
    with pytest.raises(ValueError):
        M.ModulusProblem(net, frozenset({0}), frozenset({0}), 2.0)
    with pytest.raises(ValueError):
        M.ModulusProblem(net, frozenset(), frozenset(tgt), 2.0)
    with pytest.raises(ValueError):
        M.ModulusProblem(net, frozenset({9}), frozenset(tgt), 2.0)
    with pytest.raises(ValueError):
        M.ModulusProblem(net, frozenset(src), frozenset(tgt), 2.0, tolerance=0.5)


def test_network_validation():
    with pytest.raises(ValueError):
        M.Network(2, [(0, 0)])
    with pytest.raises(ValueError):
        M.Network(2, [(0, 2)])
    net = M.Network(2, [(0, 1), (0, 1)])  # parallel edges are fine
    assert net.n_edges == 2


def test_negative_weights_rejected_by_search():
    net, src, tgt = M.path_network(2)
    with pytest.raises(ValueError):
        M._shortest_path(net, np.array([0.5, -1e-9]), src, tgt)


# ---------------------------------------------------------------------------
# harmonic warm start internals


def test_harmonic_seed_paths_are_crossings(crossing):
    net, src, tgt = crossing[2]
    phi, _ = M._p_harmonic_potential(net, src, tgt, 1.5)
    paths = M._flow_decomposition(net, phi, src, tgt, 1.5)
    assert paths
    for vpath, epath, width in paths:
        assert vpath[0] in src and vpath[-1] in tgt
        assert len(epath) == len(vpath) - 1
        assert width > 0
        for w, (u, v) in zip(epath, zip(vpath, vpath[1:])):
            assert set(net.edge_list[w]) == {u, v}


def test_flow_decomposition_conserves_value(crossing):
    # path widths never exceed the outflow from the target side, and the
    # dead-end crumbs shed along the way stay negligible
    net, src, tgt = crossing[2]
    p = 1.5
    phi, _ = M._p_harmonic_potential(net, src, tgt, p)
    paths = M._flow_decomposition(net, phi, src, tgt, p)
    total = math.fsum(w for _, _, w in paths)
    boundary_flow = 0.0
    for u, v in net.edge_list:
        if (u in tgt) != (v in tgt):
            d = phi[u] - phi[v]
            signed = abs(d) ** (p - 1.0)
            boundary_flow += signed if (u in tgt and d > 0) or (v in tgt and d < 0) else -signed
    assert total <= boundary_flow * (1 + 1e-9)
    assert total >= boundary_flow * (1 - 1e-4)
