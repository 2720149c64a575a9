"""Wavenumber sweeps, total transmission and exit-vertex ranking."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .graph import ConfigurationError, Graph, LeadConfig, eigenpairs
from .solver import ScatteringProblem, SpectralSolution, solve_many, solve_point

DEFAULT_K_MIN = 1e-3
DEFAULT_K_MAX = 2 - 1e-3
DEFAULT_COUNT = 2000


@dataclass(frozen=True)
class KGrid:
    k_min: float = DEFAULT_K_MIN
    k_max: float = DEFAULT_K_MAX
    count: int = DEFAULT_COUNT

    def __post_init__(self):
        if not 0 < self.k_min < self.k_max < 2:
            raise ConfigurationError(
                f"grid bounds must satisfy 0 < k_min < k_max < 2, got ({self.k_min}, {self.k_max})"
            )
        if int(self.count) != self.count or self.count < 2:
            raise ConfigurationError(f"grid needs at least 2 points, got {self.count!r}")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.k_min, self.k_max, int(self.count))

    @property
    def spacing(self) -> float:
        return (self.k_max - self.k_min) / (self.count - 1)


@dataclass(frozen=True)
class SweepResult:
    problem: ScatteringProblem
    grid: KGrid
    input_lead: int
    k: np.ndarray
    alpha: np.ndarray
    incident: np.ndarray  # (count, l) complex
    outgoing: np.ndarray  # (count, l) complex
    resonant: np.ndarray  # (count,) bool

    @property
    def incident_power(self) -> np.ndarray:
        return np.abs(self.incident) ** 2

    @property
    def outgoing_power(self) -> np.ndarray:
        return np.abs(self.outgoing) ** 2

    @property
    def conservation_residual(self) -> np.ndarray:
        return self.outgoing_power.sum(axis=1) - self.incident_power.sum(axis=1)

    def power(self, lead: int) -> np.ndarray:
        """Outgoing power on ``lead`` (1-based): transmission or, on the input lead, reflection."""
        if not 1 <= lead <= self.problem.n_leads:
            raise ConfigurationError(f"lead index {lead} outside [1, {self.problem.n_leads}]")
        return self.outgoing_power[:, lead - 1]

    @property
    def reflection(self) -> np.ndarray:
        return self.power(self.input_lead)


@dataclass(frozen=True)
class TransmissionReport:
    input_vertex: int
    entries: list[tuple[int, float]] = field(default_factory=list)

    def as_dict(self) -> dict[int, float]:
        return dict(self.entries)


@dataclass(frozen=True)
class ReflectionPoint:
    k: float
    transmission: float
    predicted_k: float | None = None
    eigenvalue: float | None = None


def _stack(solutions: list[SpectralSolution]):
    return (
        np.array([s.alpha for s in solutions]),
        np.array([s.incident for s in solutions]),
        np.array([s.outgoing for s in solutions]),
        np.array([s.resonant for s in solutions]),
    )


def sweep(p: ScatteringProblem, grid: KGrid, input_lead: int, forcing=None) -> SweepResult:
    """Unit incident wave on ``input_lead`` at every grid node.

    ``forcing`` (optional, shape ``(count, n)``) adds an interior source per node.
    """
    a = p.unit_incident(input_lead)
    ks = grid.points
    alpha, incident, outgoing, resonant = _stack(solve_many(p, ks, a, forcing=forcing))
    return SweepResult(
        problem=p,
        grid=grid,
        input_lead=input_lead,
        k=ks,
        alpha=alpha,
        incident=incident,
        outgoing=outgoing,
        resonant=resonant,
    )


def band_integral(ks: np.ndarray, values: np.ndarray) -> float:
    """Trapezoid rule on the grid plus constant continuation out to 0 and 2."""
    inner = float(np.sum((values[1:] + values[:-1]) * np.diff(ks)) / 2.0)
    return inner + float(ks[0] * values[0]) + float((2.0 - ks[-1]) * values[-1])


def total_transmission(s: SweepResult, exit_lead: int) -> float:
    """Integral of transmitted power on ``exit_lead`` over the whole band."""
    if exit_lead == s.input_lead:
        raise ConfigurationError("exit lead equals input lead; total transmission needs a distinct exit")
    return band_integral(s.k, s.power(exit_lead))


def rank_exit_vertices(
    g: Graph,
    input_vertex: int,
    candidates,
    v: float = 1.0,
    grid: KGrid | None = None,
) -> TransmissionReport:
    """Total transmission for each two-lead layout ``(input_vertex, j)``, best first."""
    candidates = [int(c) for c in candidates]
    if not candidates:
        raise ConfigurationError("candidate list is empty")
    if input_vertex in candidates:
        raise ConfigurationError(f"candidates must exclude the input vertex {input_vertex}")
    grid = grid or KGrid()
    entries = []
    for j in candidates:
        p = ScatteringProblem(g, LeadConfig((input_vertex, j)), v)
        entries.append((j, total_transmission(sweep(p, grid, 1), 2)))
    # stable sort keeps candidate order on exact ties
    entries.sort(key=lambda e: -e[1])
    return TransmissionReport(input_vertex=input_vertex, entries=entries)


def find_total_reflections(s: SweepResult, exit_lead: int, threshold: float = 1e-2) -> list[ReflectionPoint]:
    """Local minima of transmitted power below ``threshold``, refined by golden section."""
    if not 0 < threshold < 1:
        raise ConfigurationError(f"threshold must lie in (0, 1), got {threshold}")
    t = s.power(exit_lead)
    p = s.problem
    a = p.unit_incident(s.input_lead)
    spacing = s.grid.spacing
    values = eigenpairs(p.graph).values
    predicted = p.impedance * np.sqrt(values)

    def power_at(k: float) -> float:
        return float(np.abs(solve_point(p, k, a).outgoing[exit_lead - 1]) ** 2)

    found = []
    for i in range(1, len(t) - 1):
        if not (t[i] < threshold and t[i] <= t[i - 1] and t[i] < t[i + 1]):
            continue
        try:
            res = minimize_scalar(
                power_at,
                bracket=(s.k[i - 1], s.k[i], s.k[i + 1]),
                method="golden",
                options={"xtol": 1e-12},
            )
            k_star = float(res.x)
        except ValueError:  # flat bracket (equal neighbours)
            k_star = float(s.k[i])
        if not s.k[i - 1] <= k_star <= s.k[i + 1]:
            k_star = float(s.k[i])
        t_star = power_at(k_star)
        j = int(np.argmin(np.abs(predicted - k_star)))
        match = abs(predicted[j] - k_star) <= spacing
        found.append(
            ReflectionPoint(
                k=k_star,
                transmission=t_star,
                predicted_k=float(predicted[j]) if match else None,
                eigenvalue=float(values[j]) if match else None,
            )
        )
    return found
