from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import k3_transmission
from graphscatter.graph import ConfigurationError, Graph, LeadConfig, complete_graph, grid9, random_connected_graph
from graphscatter.solver import (
    DomainError,
    GraphResonanceError,
    ScatteringProblem,
    assemble_block_system,
    dispersion_alpha,
    graph_resonances,
    is_graph_resonance,
    neumann_bound_state_check,
    neumann_candidates,
    s_matrix,
    solve_many,
    solve_point,
)

SQRT3 = np.sqrt(3.0)


# dispersion ---------------------------------------------------------------

@pytest.mark.parametrize("k, alpha", [(0.0, 0.0), (2.0, np.pi), (1.0, np.pi / 3)])
def test_dispersion_values(k, alpha):
    assert dispersion_alpha(k) == pytest.approx(alpha, abs=1e-15)


def test_dispersion_residual_on_dense_grid():
    ks = np.linspace(0, 2, 10_000)
    alpha = dispersion_alpha(ks)
    assert np.max(np.abs(2 - ks ** 2 - 2 * np.cos(alpha))) <= 1e-12
    char = -2 + np.exp(-1j * alpha) + np.exp(1j * alpha) + ks ** 2
    assert np.max(np.abs(char)) <= 1e-12


@pytest.mark.parametrize("k", [-0.1, 2.0001, np.nan])
def test_dispersion_domain(k):
    with pytest.raises(DomainError):
        dispersion_alpha(k)


# assembly -----------------------------------------------------------------

def test_k3_block_system_matches_worked_example(k3):
    k = 0.8
    e = np.exp(-1j * dispersion_alpha(k))
    m, rhs = assemble_block_system(k3, k, np.array([0, 1]))
    expected = np.array(
        [
            [k * k - 3, 1, 1, 0, 1],
            [1, k * k - 2, 1, 0, 0],
            [1, 1, k * k - 3, 1, 0],
            [0, 0, 1, -e, 0],
            [1, 0, 0, 0, -e],
        ]
    )
    np.testing.assert_allclose(m, expected, atol=1e-15)
    np.testing.assert_allclose(rhs, [-1, 0, 0, 0, np.conj(e)], atol=1e-15)


def test_p2_block(p2):
    m, _ = assemble_block_system(p2, 0.5, np.array([1, 0]))
    np.testing.assert_allclose(m[:2, :2], [[0.25 - 2, 1], [1, 0.25 - 2]])


def test_single_vertex_block():
    p = ScatteringProblem(Graph(1), LeadConfig((1,)))
    k = 1.3
    m, _ = assemble_block_system(p, k, np.array([1]))
    np.testing.assert_allclose(m, [[k * k - 1, 1], [1, -np.exp(-1j * dispersion_alpha(k))]])


def test_assembly_dimension_mismatch(k3):
    with pytest.raises(ConfigurationError):
        assemble_block_system(k3, 1.0, np.array([1, 0, 0]))


# point solves -------------------------------------------------------------

def test_k3_total_reflection_at_sqrt3(k3):
    s = solve_point(k3, SQRT3, np.array([0, 1]))
    assert abs(s.outgoing[0]) ** 2 <= 1e-20
    assert abs(s.outgoing[1]) == pytest.approx(1, abs=1e-12)
    assert not s.resonant


def test_k3_unit_wavenumber_matches_symbolic(k3):
    s = solve_point(k3, 1.0, np.array([0, 1]))
    # 4/7 and 3/7 from exact elimination of the 5x5 system at alpha = pi/3
    assert abs(s.outgoing[0]) ** 2 == pytest.approx(4 / 7, abs=1e-13)
    assert abs(s.outgoing[1]) ** 2 == pytest.approx(3 / 7, abs=1e-13)


def test_k3_matches_closed_form_everywhere(k3):
    ks = np.linspace(0.01, 1.99, 397)
    t = np.array([abs(s.outgoing[0]) ** 2 for s in solve_many(k3, ks, np.array([0, 1]))])
    np.testing.assert_allclose(t, k3_transmission(ks), atol=1e-12)


def test_k3_exact_amplitudes_from_elimination(k3):
    # symbolic solution: t = z^3 (z^2+z+1)/(2z+1), r = z^3 (z-1)(z+1)/(2z+1), z = e^{i alpha}
    for k in (0.3, 1.0, 1.6):
        z = np.exp(1j * dispersion_alpha(k))
        s = solve_point(k3, k, np.array([0, 1]))
        assert s.outgoing[0] == pytest.approx(z ** 3 * (z * z + z + 1) / (2 * z + 1), abs=1e-12)
        assert s.outgoing[1] == pytest.approx(z ** 3 * (z - 1) * (z + 1) / (2 * z + 1), abs=1e-12)


def test_p2_chain_is_reflectionless(p2):
    ks = np.linspace(1e-3, 2 - 1e-3, 501)
    for s in solve_many(p2, ks, np.array([1, 0])):
        assert abs(s.outgoing[0]) ** 2 <= 1e-10
        assert abs(s.outgoing[1]) == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("k", [0.0, 2.0, -1.0, 2.5])
def test_solver_rejects_band_edges(k3, k):
    with pytest.raises(DomainError):
        solve_point(k3, k, np.array([0, 1]))


def test_alpha_invariant(k3):
    s = solve_point(k3, 0.77, np.array([0, 1]))
    assert s.alpha == pytest.approx(2 * np.arcsin(0.77 / 2), abs=1e-15)


def test_embedded_bound_state_flagged_and_continuous(grid_problem):
    # antisymmetric grid mode with eigenvalue 1 vanishes on vertices 1 and 8
    a = grid_problem.unit_incident(1)
    at = solve_point(grid_problem, 1.0, a)
    assert at.resonant
    near = [solve_point(grid_problem, 1.0 + d, a) for d in (-1e-7, 1e-7)]
    for s in near:
        assert not s.resonant
        np.testing.assert_allclose(at.outgoing, s.outgoing, atol=1e-6)
    assert abs(at.conservation_residual) <= 1e-9


def test_dirichlet_policy_reports_total_reflection(grid_problem):
    a = grid_problem.unit_incident(1)
    s = solve_point(grid_problem, 1.0, a, policy="dirichlet")
    assert s.resonant
    np.testing.assert_array_equal(s.outgoing, -a)


def test_unknown_policy(k3):
    with pytest.raises(ConfigurationError):
        solve_point(k3, 1.0, np.array([0, 1]), policy="perturb")


def test_concurrent_evaluation_is_order_independent(grid_problem):
    ks = np.linspace(0.05, 1.95, 64)
    a = grid_problem.unit_incident(1)
    serial = [solve_point(grid_problem, k, a).outgoing for k in ks]
    order = np.random.default_rng(3).permutation(len(ks))
    with ThreadPoolExecutor(4) as pool:
        shuffled = list(pool.map(lambda i: (i, solve_point(grid_problem, ks[i], a).outgoing), order))
    for i, out in shuffled:
        np.testing.assert_array_equal(out, serial[i])


# scattering matrix --------------------------------------------------------

def test_p2_s_matrix(p2):
    s = s_matrix(p2, 1.3).entries
    np.testing.assert_allclose(np.abs(s), [[0, 1], [1, 0]], atol=1e-12)


def test_p2_s_matrix_fails_at_graph_resonance(p2):
    with pytest.raises(GraphResonanceError) as err:
        s_matrix(p2, 1.0)
    assert err.value.nullity == 1
    # the chain is still transparent there
    s = solve_point(p2, 1.0, np.array([1, 0]))
    assert abs(s.outgoing[1]) == pytest.approx(1, abs=1e-12)


def test_k3_s_matrix_at_total_reflection(k3):
    s = s_matrix(k3, SQRT3).entries
    np.testing.assert_allclose(np.abs(s), [[1, 0], [0, 1]], atol=1e-10)


def test_random_graph_s_matrix(rng):
    g = random_connected_graph(6, rng)
    p = ScatteringProblem(g, LeadConfig(rng.choice(np.arange(1, 7), 3, replace=False)))
    s = s_matrix(p, 0.7)
    assert s.unitarity_error() <= 1e-8
    for lead in (1, 2, 3):
        a = p.unit_incident(lead)
        np.testing.assert_allclose(solve_point(p, 0.7, a).outgoing, s.entries @ a, atol=1e-8)


def _random_problem(seed: int, n_max=12, l_max=4, impedance=None):
    r = np.random.default_rng(seed)
    n = int(r.integers(1, n_max + 1))
    g = random_connected_graph(n, r)
    nl = int(r.integers(1, min(l_max, n) + 1))
    leads = r.choice(np.arange(1, n + 1), nl, replace=False)
    v = float(r.uniform(0.25, 1.5)) if impedance is None else impedance
    return ScatteringProblem(g, LeadConfig(leads), v), r


def _away_from_resonances(p, ks, gap=1e-6):
    res = graph_resonances(p)
    if res.size == 0:
        return ks
    return ks[np.min(np.abs(ks[:, None] - res[None, :]), axis=1) > gap]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_unitarity_reciprocity_consistency(seed):
    p, r = _random_problem(seed)
    ks = _away_from_resonances(p, r.uniform(0.01, 1.99, 20))
    for k in ks:
        s = s_matrix(p, k)
        assert s.unitarity_error() <= 1e-8
        assert s.reciprocity_error() <= 1e-8
        for lead in range(1, p.n_leads + 1):
            a = p.unit_incident(lead)
            b = solve_point(p, k, a).outgoing
            assert np.linalg.norm(b - s.entries @ a) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_solution_linearity_and_energy(seed):
    p, r = _random_problem(seed)
    k = float(r.uniform(0.01, 1.99))
    a1 = r.normal(size=p.n_leads) + 1j * r.normal(size=p.n_leads)
    a2 = r.normal(size=p.n_leads) + 1j * r.normal(size=p.n_leads)
    c1, c2 = 0.3 - 1.1j, 2.0 + 0.5j
    s1, s2 = solve_point(p, k, a1), solve_point(p, k, a2)
    s12 = solve_point(p, k, c1 * a1 + c2 * a2)
    combo = c1 * s1.outgoing + c2 * s2.outgoing
    assert np.linalg.norm(s12.outgoing - combo) <= 1e-10 * max(1.0, np.linalg.norm(combo))
    for s in (s1, s2, s12):
        assert abs(s.conservation_residual) <= 1e-9 * np.sum(np.abs(s.incident) ** 2)


# resonance classification -------------------------------------------------

def test_p2_graph_resonances(p2):
    np.testing.assert_allclose(graph_resonances(p2), [1.0, SQRT3], atol=1e-12)
    for k in (1.0, SQRT3):
        flag, null = is_graph_resonance(p2, k)
        assert flag and null.shape == (2, 1)
    assert not is_graph_resonance(p2, 1.2)[0]


def test_single_vertex_graph_resonance():
    p = ScatteringProblem(Graph(1), LeadConfig((1,)))
    assert is_graph_resonance(p, 1.0)[0]
    assert not is_graph_resonance(p, 1.1)[0]


def test_k3_graph_resonances_and_lead_field(k3):
    # k^2 must lie in the spectrum of D~ - L0
    w = k3.lead_matrix
    shifted = np.linalg.eigvalsh(w @ w.T - (-np.array([[2, -1, -1], [-1, 2, -1], [-1, -1, 2]])))
    expected = np.sqrt(shifted[(shifted > 0) & (shifted < 4)])
    found = graph_resonances(k3)
    np.testing.assert_allclose(found, np.sort(expected), atol=1e-12)
    for k in found:
        flag, null = is_graph_resonance(k3, k)
        assert flag
        for a in (np.array([0, 1]), np.array([1, 0.5j])):
            s = solve_point(k3, k, a)
            psi0 = s.incident + s.outgoing
            # the lead field is orthogonal to the null mode seen from the leads
            assert np.max(np.abs((w.T @ null).T @ psi0)) <= 1e-10
            assert abs(s.conservation_residual) <= 1e-9 * np.sum(np.abs(a) ** 2)


def test_neumann_checks():
    p = ScatteringProblem(complete_graph(3), LeadConfig((3, 1)))
    assert neumann_bound_state_check(p, SQRT3)
    assert not neumann_bound_state_check(p, 1.0)
    half = ScatteringProblem(complete_graph(3), LeadConfig((3, 1)), 0.5)
    assert neumann_bound_state_check(half, SQRT3 / 2)
    assert not neumann_bound_state_check(half, SQRT3)
    np.testing.assert_allclose(neumann_candidates(half), [SQRT3 / 2])


def test_impedance_validation():
    with pytest.raises(ConfigurationError):
        ScatteringProblem(complete_graph(3), LeadConfig((1,)), 0.0)
    with pytest.raises(ConfigurationError):
        ScatteringProblem(complete_graph(3), LeadConfig((5,)))


def test_grid_problem_resonant_points_are_finite(grid_problem):
    for k in graph_resonances(grid_problem):
        s = solve_point(grid_problem, float(k), grid_problem.unit_incident(1))
        assert np.all(np.isfinite(s.outgoing))
        assert abs(s.conservation_residual) <= 1e-9
