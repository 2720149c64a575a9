"""Wave scattering on finite graphs with semi-infinite chain leads.

Frequency-domain solves, S-matrices, transmission spectra, interior source
signatures and a leapfrog time-domain check on truncated leads.
"""
from .graph import ConfigurationError, Graph, LeadConfig, complete_graph, grid9, path_graph
from .solver import DomainError, GraphResonanceError, ScatteringProblem, s_matrix, solve_many, solve_point
from .source import SourceSpec, defect_signature, localize_source
from .spectra import KGrid, find_total_reflections, rank_exit_vertices, sweep, total_transmission
from .timedomain import PacketSpec, WindowError, build_assembly, compare_with_spectral, simulate_packet

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DomainError",
    "Graph",
    "GraphResonanceError",
    "KGrid",
    "LeadConfig",
    "PacketSpec",
    "ScatteringProblem",
    "SourceSpec",
    "WindowError",
    "build_assembly",
    "compare_with_spectral",
    "complete_graph",
    "defect_signature",
    "find_total_reflections",
    "grid9",
    "localize_source",
    "path_graph",
    "rank_exit_vertices",
    "s_matrix",
    "simulate_packet",
    "solve_many",
    "solve_point",
    "sweep",
    "total_transmission",
]
