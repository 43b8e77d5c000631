import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zetar.belief import policy_from_row, policy_from_square
from zetar.errors import DimensionTooLarge
from zetar.geometry import (PolytopeHRep, PolytopeVRep, cell_of_policy, ct_polytope_vertices, cube_vertices,
                            enumerate_vertices, hrep_vertices, in_ct, pt_halfspaces, vrep_to_hrep,
                            write_grid_membership_csv, write_polytope_json)
from zetar.insider import CT, CU, classify_policy, recommendation_trustworthy
from zetar.metrics import asal
from zetar.scenario import ScenarioModel, random_scenario


def sort_rows(a):
    a = np.round(np.asarray(a, float), 9)
    return a[np.lexsort(a.T[::-1])]


def dominant(K=2, I=2, d=0):
    v = np.zeros((1, I, K))
    v[..., d] = 1.0
    return ScenarioModel(("y",), tuple(f"x{i}" for i in range(I)), tuple(f"a{k}" for k in range(K)),
                         [1.0], [np.full(I, 1.0 / I)], v, v)


def test_single_action_region_is_the_cube():
    h = pt_halfspaces(dominant(K=1), 0)
    assert len(h.inequalities) == 4
    np.testing.assert_array_equal(sort_rows(hrep_vertices(h)), sort_rows(cube_vertices(2)))


def test_dominant_action_region_is_the_cube():
    m = dominant(K=3, I=3, d=1)
    np.testing.assert_array_equal(sort_rows(ct_polytope_vertices(m, 1).vertices), sort_rows(cube_vertices(3)))
    for p in np.random.default_rng(0).random((20, 3)):
        assert pt_halfspaces(m, 1).contains(p)


def test_halfspaces_match_trust_checks(averse):
    for k in range(2):
        h = pt_halfspaces(averse, k)
        for p1 in np.linspace(0, 1, 21):
            for p2 in np.linspace(0, 1, 21):
                p = np.array([p1, p2])
                assert h.contains(p) == recommendation_trustworthy(averse, policy_from_row(p, k, 2), k)


def test_crossing_on_square_edge(averse):
    # the co row lives at 1 - (square coordinates); its crossing on the
    # (1,0)-(1,1) row edge is the square point (0, w) with 5/8 < w < 3/4
    verts = ct_polytope_vertices(averse, 1).vertices
    inner = [v for v in verts if 0 < v[1] < 1]
    assert len(inner) == 1 and inner[0][0] == 1.0
    w = 1.0 - inner[0][1]
    assert 5 / 8 < w < 3 / 4
    assert w == pytest.approx(1 - 1.68 / 4.88, abs=1e-12)


def test_edge_crossing_height(averse):
    # hand-computed weighted utilities: sa -> (ic -1.28, co 0.40), ta -> (ic 3.68, co -1.20),
    # so the ic row is trusted iff -1.68 p1 + 4.88 p2 >= 0
    verts = ct_polytope_vertices(averse, 0).vertices
    expected = sort_rows([[0, 0], [0, 1], [1, 1], [1, 1.68 / 4.88]])
    np.testing.assert_allclose(sort_rows(verts), expected, atol=1e-9)


def test_vertices_match_grid_boundary(averse):
    g = np.linspace(0, 1, 101)
    for k in range(2):
        h = pt_halfspaces(averse, k)
        verts = ct_polytope_vertices(averse, k).vertices
        for v in verts:
            for i in range(2):
                if 0 < v[i] < 1:
                    # scan the same cube edge on the 0.01 grid and find the membership switch
                    flags = []
                    for t in g:
                        p = v.copy()
                        p[i] = t
                        flags.append(h.contains(p))
                    switch = [g[j] for j in range(100) if flags[j] != flags[j + 1]]
                    assert min(abs(s - v[i]) for s in switch) <= 0.01


def test_square_and_triangle_hreps():
    sq = vrep_to_hrep(PolytopeVRep(2, cube_vertices(2)))
    assert len(sq.inequalities) == 4
    tri = vrep_to_hrep(PolytopeVRep(2, np.array([[0, 0], [1, 0], [0, 1.0]])))
    assert len(tri.inequalities) == 3
    assert tri.contains([0.5, 0.5]) and not tri.contains([0.6, 0.6])
    rows = [np.append(n / np.abs(n).max(), o / np.abs(n).max()) for n, o in tri.inequalities]
    assert any(np.allclose(r, [-1, -1, -1]) for r in rows)


def test_round_trip(averse, seeking):
    for m in (averse, seeking):
        for k in range(2):
            v = ct_polytope_vertices(m, k)
            back = hrep_vertices(vrep_to_hrep(v))
            np.testing.assert_allclose(sort_rows(back), sort_rows(v.vertices), atol=1e-9)


def test_lower_dimensional_hull():
    seg = vrep_to_hrep(PolytopeVRep(2, np.array([[0, 0.5], [1, 0.5]])))
    assert seg.lower_dimensional
    assert seg.contains([0.3, 0.5]) and not seg.contains([0.3, 0.6])
    pt = vrep_to_hrep(PolytopeVRep(3, np.array([[0.2, 0.2, 0.2]])))
    assert pt.contains([0.2, 0.2, 0.2]) and not pt.contains([0.2, 0.2, 0.3])


def test_dimension_guard():
    with pytest.raises(DimensionTooLarge):
        vrep_to_hrep(PolytopeVRep(5, cube_vertices(5)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_vertex_hull_matches_halfspaces(seed):
    rng = np.random.default_rng(seed)
    m = random_scenario(rng, I=int(rng.integers(2, 4)))
    k = int(rng.integers(m.K))
    h = pt_halfspaces(m, k)
    v = ct_polytope_vertices(m, k)
    if v.vertices.shape[0] <= m.I:
        return  # lower-dimensional region; covered elsewhere
    hull = vrep_to_hrep(v)
    for p in rng.random((50, m.I)):
        if abs(min(h.normals @ p - h.offsets)) < 1e-6:
            continue
        assert hull.contains(p) == h.contains(p)


def test_cells_ct_and_cu(seeking):
    for p1 in np.linspace(0, 1, 21):
        for p2 in np.linspace(0, 1, 21):
            pi = policy_from_square(p1, p2)
            cell = cell_of_policy(seeking, pi)
            label = classify_policy(seeking, pi).label
            if None in cell:
                continue
            if label == CT:
                assert cell == (0, 1)
            if label == CU:
                assert cell[0] != 0 and cell[1] != 1


def test_seeking_cells(seeking):
    cells = set()
    for p1 in np.linspace(0.01, 0.99, 50):
        for p2 in np.linspace(0.01, 0.99, 50):
            cells.add(cell_of_policy(seeking, policy_from_square(p1, p2)))
    assert cells == {(0, 1), (1, 1), (1, 0)}


def test_cells_partition_grid(averse):
    h = [pt_halfspaces(averse, k) for k in range(2)]
    for p1 in np.linspace(0, 1, 21):
        for p2 in np.linspace(0, 1, 21):
            pi = policy_from_square(p1, p2)
            cell = cell_of_policy(averse, pi)
            assert sum(cell == c for c in [(a, b) for a in (0, 1, None) for b in (0, 1, None)]) == 1
            assert in_ct(h, pi) == (classify_policy(averse, pi).label == CT)


def test_asal_convex_along_segments(averse, rng):
    for _ in range(100):
        a, b = policy_from_square(*rng.random(2)), policy_from_square(*rng.random(2))
        t = rng.random()
        mid = asal(averse, t * a + (1 - t) * b)
        assert mid <= t * asal(averse, a) + (1 - t) * asal(averse, b) + 1e-10


def test_dumps(averse, tmp_path):
    v = ct_polytope_vertices(averse, 0)
    write_polytope_json(tmp_path / "p.json", v, vrep_to_hrep(v))
    doc = json.loads((tmp_path / "p.json").read_text())
    assert doc["dim"] == 2 and len(doc["vertices"]) == 4
    write_grid_membership_csv(tmp_path / "g.csv", averse, 0.05)
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "p1,p2,trusted_0,trusted_1,label,cell" and len(lines) == 21 * 21 + 1


def test_enumerate_simplex():
    h = PolytopeHRep(2, np.array([[1.0, 0], [0, 1.0], [-1.0, -1.0]]), np.array([0, 0, -1.0]))
    np.testing.assert_allclose(sort_rows(enumerate_vertices(h)), sort_rows([[0, 0], [0, 1], [1, 0]]))
