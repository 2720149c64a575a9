import numpy as np
import pytest
from scipy.integrate import quad

from conftest import K3_TOTAL_TRANSMISSION, k3_transmission
from graphscatter.graph import ConfigurationError, LeadConfig, automorphisms, complete_graph, grid9
from graphscatter.solver import ScatteringProblem
from graphscatter.spectra import (
    KGrid,
    band_integral,
    find_total_reflections,
    rank_exit_vertices,
    sweep,
    total_transmission,
)

SQRT3 = np.sqrt(3.0)


def test_kgrid_validation():
    with pytest.raises(ConfigurationError):
        KGrid(0.0, 1.0, 10)
    with pytest.raises(ConfigurationError):
        KGrid(0.5, 2.0, 10)
    with pytest.raises(ConfigurationError):
        KGrid(0.5, 1.0, 1)
    g = KGrid()
    assert g.points[0] == 1e-3 and g.points[-1] == 2 - 1e-3 and g.points.size == 2000


def test_k3_sweep_conservation_and_dip(k3):
    s = sweep(k3, KGrid(), 2)
    assert np.max(np.abs(s.conservation_residual)) <= 1e-9
    t = s.power(1)
    nearest = np.argmin(np.abs(s.k - SQRT3))
    assert t[nearest] < 1e-6
    np.testing.assert_allclose(t, k3_transmission(s.k), atol=1e-12)
    assert not s.resonant.any()


def test_p2_sweep_transparent(p2):
    s = sweep(p2, KGrid(), 1)
    np.testing.assert_allclose(s.power(2), 1.0, atol=1e-12)
    assert np.max(s.reflection) <= 1e-10


def test_half_impedance_dip():
    p = ScatteringProblem(complete_graph(3), LeadConfig((3, 1)), 0.5)
    s = sweep(p, KGrid(), 2)
    nearest = np.argmin(np.abs(s.k - SQRT3 / 2))
    assert s.power(1)[nearest] < 1e-5
    assert np.argmin(s.power(1)) == nearest


def test_total_transmission_p2(p2):
    assert total_transmission(sweep(p2, KGrid(), 1), 2) == pytest.approx(2.0, abs=1e-3)


def test_total_transmission_rejects_input_lead(k3):
    with pytest.raises(ConfigurationError):
        total_transmission(sweep(k3, KGrid(count=10), 2), 2)


def test_k3_total_transmission_against_quadrature(k3):
    # independent oracle: adaptive quadrature of the closed-form transmission
    exact, _ = quad(k3_transmission, 0, 2, epsabs=1e-13)
    assert exact == pytest.approx(K3_TOTAL_TRANSMISSION, abs=1e-12)
    values = [total_transmission(sweep(k3, KGrid(count=c), 2), 1) for c in (1000, 1999, 3997)]
    # Richardson on doubled resolutions
    richardson = values[2] + (values[2] - values[1]) / 3
    assert abs(richardson - values[2]) <= 1e-4
    # residual error is the constant continuation over the 1e-3 end gaps
    assert values[2] == pytest.approx(exact, abs=1e-5)


def test_quadrature_convergence_order(k3):
    # nested grids: spacing halves with 2N-1 and 4N-3 points
    base = 200
    t = [total_transmission(sweep(k3, KGrid(count=c), 2), 1) for c in (base, 2 * base - 1, 4 * base - 3)]
    e1, e2 = abs(t[0] - t[2]), abs(t[1] - t[2])
    assert e1 / e2 >= 3


def test_band_integral_constant():
    ks = np.linspace(0.1, 1.9, 7)
    assert band_integral(ks, np.ones_like(ks)) == pytest.approx(2.0, abs=1e-14)


def test_k3_ranking_vertex_transitive():
    report = rank_exit_vertices(complete_graph(3), 1, [2, 3], 1.0, KGrid(count=800))
    t = report.as_dict()
    assert abs(t[2] - t[3]) <= 1e-6
    for _, value in report.entries:
        assert 0 <= value <= 2


def test_ranking_errors():
    g = complete_graph(3)
    with pytest.raises(ConfigurationError):
        rank_exit_vertices(g, 1, [], 1.0)
    with pytest.raises(ConfigurationError):
        rank_exit_vertices(g, 1, [1, 2], 1.0)


def test_grid_ranking_symmetry_and_order():
    g = grid9()
    report = rank_exit_vertices(g, 1, range(2, 10), 1.0, KGrid())
    t = report.as_dict()
    for a, b in ((2, 3), (4, 6), (7, 9)):
        assert abs(t[a] - t[b]) <= 1e-6
    assert t[8] > t[9] > t[2] > t[4] > t[5]
    values = [v for _, v in report.entries]
    assert values == sorted(values, reverse=True)


def test_automorphism_invariance_generic():
    g = grid9()
    grid = KGrid(count=600)
    t = rank_exit_vertices(g, 5, [1, 2, 3, 4, 6, 7, 8, 9], 1.0, grid).as_dict()
    for mapping in automorphisms(g, fixed=(5,)):
        for j in t:
            assert abs(t[j] - t[mapping[j]]) <= 1e-6


def test_g14_impedance_comparison(data_dir):
    from graphscatter.io import parse_graph_file

    g, _, _ = parse_graph_file(data_dir / "g14.json")
    grid = KGrid(count=800)
    full = np.array([t for _, t in rank_exit_vertices(g, 1, range(2, 15), 1.0, grid).entries])
    quarter = np.array([t for _, t in rank_exit_vertices(g, 1, range(2, 15), 0.25, grid).entries])
    assert full.max() > quarter.max()
    assert quarter.std() < full.std()


@pytest.mark.parametrize("v", [1.0, 0.5, 0.25])
def test_total_reflection_tracks_impedance(v):
    p = ScatteringProblem(complete_graph(3), LeadConfig((3, 1)), v)
    s = sweep(p, KGrid(), 2)
    found = find_total_reflections(s, 1, threshold=1e-2)
    assert len(found) == 1
    point = found[0]
    assert abs(point.k - v * SQRT3) <= 2 * s.grid.spacing
    assert abs(point.k - v * SQRT3) <= 1e-6
    assert point.eigenvalue == pytest.approx(3.0)
    assert point.predicted_k == pytest.approx(v * SQRT3)
    assert point.transmission <= 1e-12


def test_no_reflections_for_chain(p2):
    assert find_total_reflections(sweep(p2, KGrid(), 1), 2, threshold=0.5) == []


def test_threshold_validation(k3):
    s = sweep(k3, KGrid(count=10), 2)
    with pytest.raises(ConfigurationError):
        find_total_reflections(s, 1, threshold=1.5)
