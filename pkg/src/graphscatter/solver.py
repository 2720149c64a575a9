"""Single-wavenumber scattering of chain waves off a graph.

On every lead the field is ``psi_j = a exp(-i alpha j) + b exp(i alpha j)``
with ``2 - k^2 = 2 cos(alpha)``; ``a`` is the incident amplitude and ``b``
the outgoing one. The interior values ``phi`` and the outgoing amplitudes
solve the bordered system

    [ v^2 L0 - W W^T + k^2 I    W              ] [phi]   [ -W a          ]
    [ W^T                      -e^{-i alpha} I ] [ b ] = [ e^{i alpha} a ]
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .graph import ConfigurationError, Graph, LeadConfig, eigenpairs, laplacian, lead_matrix

SINGULAR_COND = 1e12

ResonancePolicy = Literal["lstsq", "dirichlet"]


class DomainError(ValueError):
    """Wavenumber outside the propagating band."""


class GraphResonanceError(ArithmeticError):
    """The interior operator ``v^2 L0 - D~ + k^2 I`` is singular at ``k``."""

    def __init__(self, k: float, nullity: int):
        super().__init__(f"interior operator singular at k={k!r} (null space dimension {nullity})")
        self.k = k
        self.nullity = nullity


@dataclass(frozen=True)
class ScatteringProblem:
    graph: Graph
    leads: LeadConfig
    impedance: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.impedance) or self.impedance <= 0:
            raise ConfigurationError(f"impedance must be positive, got {self.impedance!r}")
        self.leads.validate_for(self.graph)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def n_leads(self) -> int:
        return len(self.leads)

    @property
    def lead_matrix(self) -> np.ndarray:
        return lead_matrix(self.graph, self.leads)

    def interior_operator(self, k: float) -> np.ndarray:
        """``v^2 L0 - W W^T + k^2 I``, i.e. ``-F``."""
        w = self.lead_matrix
        return self.impedance ** 2 * laplacian(self.graph) - w @ w.T + k * k * np.eye(self.n)

    def unit_incident(self, lead: int) -> np.ndarray:
        """Unit amplitude on ``lead`` (1-based), zero on the others."""
        if not 1 <= lead <= self.n_leads:
            raise ConfigurationError(f"lead index {lead} outside [1, {self.n_leads}]")
        a = np.zeros(self.n_leads, dtype=complex)
        a[lead - 1] = 1.0
        return a


@dataclass(frozen=True)
class SpectralSolution:
    k: float
    alpha: float
    phi: np.ndarray
    incident: np.ndarray
    outgoing: np.ndarray
    resonant: bool = False

    @property
    def incident_power(self) -> np.ndarray:
        return np.abs(self.incident) ** 2

    @property
    def outgoing_power(self) -> np.ndarray:
        return np.abs(self.outgoing) ** 2

    @property
    def conservation_residual(self) -> float:
        return float(self.outgoing_power.sum() - self.incident_power.sum())


@dataclass(frozen=True)
class SMatrix:
    entries: np.ndarray
    k: float

    def unitarity_error(self) -> float:
        s = self.entries
        eye = np.eye(s.shape[0])
        return float(max(np.linalg.norm(s @ s.conj().T - eye, 2), np.linalg.norm(s.conj().T @ s - eye, 2)))

    def reciprocity_error(self) -> float:
        return float(np.linalg.norm(self.entries - self.entries.T, 2))


def dispersion_alpha(k):
    """Phase advance per chain node, ``2 arcsin(k/2)``, for ``0 <= k <= 2``."""
    k_arr = np.asarray(k, dtype=float)
    if np.any(~np.isfinite(k_arr)) or np.any(k_arr < 0) or np.any(k_arr > 2):
        raise DomainError(f"k must lie in [0, 2] (propagating band), got {k!r}")
    alpha = 2.0 * np.arcsin(k_arr / 2.0)
    return float(alpha) if np.ndim(alpha) == 0 else alpha


def _check_open_band(ks: np.ndarray) -> None:
    if np.any(~np.isfinite(ks)) or np.any(ks <= 0) or np.any(ks >= 2):
        bad = ks[~((ks > 0) & (ks < 2))]
        raise DomainError(f"k must lie in the open band (0, 2), got {bad[:3].tolist()}")


def assemble_block_system(
    p: ScatteringProblem, k: float, incident, forcing=None
) -> tuple[np.ndarray, np.ndarray]:
    """Return the ``(n+l) x (n+l)`` matrix and right-hand side for wavenumber ``k``.

    ``forcing`` is an optional length-``n`` interior source added to the
    graph rows of the right-hand side.
    """
    _check_open_band(np.array([k], dtype=float))
    matrices, rhs = _assemble(p, np.array([k], dtype=float), incident, forcing)
    return matrices[0], rhs[0]


def _assemble(p: ScatteringProblem, ks: np.ndarray, incident, forcing=None):
    n, nl = p.n, p.n_leads
    a = np.asarray(incident, dtype=complex)
    if a.shape != (nl,):
        raise ConfigurationError(f"incident vector must have length {nl}, got shape {a.shape}")
    w = p.lead_matrix
    alpha = dispersion_alpha(ks)
    base = p.impedance ** 2 * laplacian(p.graph) - w @ w.T

    m = np.zeros((ks.size, n + nl, n + nl), dtype=complex)
    m[:, :n, :n] = base
    m[:, np.arange(n), np.arange(n)] += (ks * ks)[:, None]
    m[:, :n, n:] = w
    m[:, n:, :n] = w.T
    m[:, np.arange(n, n + nl), np.arange(n, n + nl)] = -np.exp(-1j * alpha)[:, None]

    rhs = np.zeros((ks.size, n + nl), dtype=complex)
    rhs[:, :n] = -(w @ a)
    rhs[:, n:] = np.exp(1j * alpha)[:, None] * a
    if forcing is not None:
        f = np.asarray(forcing, dtype=complex)
        if f.ndim == 1:
            f = np.broadcast_to(f, (ks.size, n))
        if f.shape != (ks.size, n):
            raise ConfigurationError(f"forcing must have shape ({n},) or ({ks.size}, {n})")
        rhs[:, :n] += f
    return m, rhs


def solve_many(
    p: ScatteringProblem,
    ks,
    incident,
    forcing=None,
    policy: ResonancePolicy = "lstsq",
) -> list[SpectralSolution]:
    """Solve the block system at every wavenumber in ``ks``.

    Numerically singular points (2-norm condition number above
    ``SINGULAR_COND``) are flagged ``resonant``. A singular block matrix means
    an interior mode that vanishes on every lead vertex; the system is still
    consistent for lead excitation, so ``policy="lstsq"`` returns the
    minimum-norm solution whose outgoing amplitudes are the continuous limit.
    ``policy="dirichlet"`` instead reports ``phi`` from least squares and
    ``b = -a`` (perfect Dirichlet reflection).
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=float))
    _check_open_band(ks)
    if policy not in ("lstsq", "dirichlet"):
        raise ConfigurationError(f"unknown resonance policy {policy!r}")
    m, rhs = _assemble(p, ks, incident, forcing)
    n = p.n
    a = np.asarray(incident, dtype=complex)
    alpha = dispersion_alpha(ks)

    sv = np.linalg.svd(m, compute_uv=False)
    with np.errstate(divide="ignore"):
        cond = sv[:, 0] / sv[:, -1]
    singular = ~(cond <= SINGULAR_COND)

    x = np.empty_like(rhs)
    regular = ~singular
    if regular.any():
        x[regular] = np.linalg.solve(m[regular], rhs[regular][..., None])[..., 0]
    for idx in np.flatnonzero(singular):
        x[idx] = np.linalg.lstsq(m[idx], rhs[idx], rcond=None)[0]
        if policy == "dirichlet":
            x[idx, n:] = -a

    return [
        SpectralSolution(
            k=float(ks[i]),
            alpha=float(alpha[i]),
            phi=x[i, :n].copy(),
            incident=a.copy(),
            outgoing=x[i, n:].copy(),
            resonant=bool(singular[i]),
        )
        for i in range(ks.size)
    ]


def solve_point(
    p: ScatteringProblem, k: float, incident, policy: ResonancePolicy = "lstsq"
) -> SpectralSolution:
    return solve_many(p, [k], incident, policy=policy)[0]


def is_graph_resonance(p: ScatteringProblem, k: float, rtol: float = 1e-10) -> tuple[bool, np.ndarray]:
    """Check whether ``v^2 L0 - D~ + k^2 I`` is singular.

    Returns the flag and an orthonormal null-space basis (``n x 0`` when the
    operator is regular).
    """
    _check_open_band(np.array([k], dtype=float))
    op = p.interior_operator(k)
    vals, vecs = np.linalg.eigh(op)
    scale = max(np.abs(vals).max(), 1.0)
    null = np.abs(vals) < rtol * scale
    return bool(null.any()), vecs[:, null]


def graph_resonances(p: ScatteringProblem) -> np.ndarray:
    """Wavenumbers in (0, 2) where the interior operator is singular, ascending."""
    w = p.lead_matrix
    shifted = np.linalg.eigvalsh(w @ w.T - p.impedance ** 2 * laplacian(p.graph))
    shifted = shifted[(shifted > 0) & (shifted < 4)]
    return np.unique(np.round(np.sqrt(shifted), 14))


def neumann_bound_state_check(p: ScatteringProblem, k: float, rtol: float = 1e-9) -> bool:
    """True when ``k^2 / v^2`` is an eigenvalue of ``D0 - A0``."""
    _check_open_band(np.array([k], dtype=float))
    values = eigenpairs(p.graph).values
    target = k * k / p.impedance ** 2
    return bool(np.any(np.abs(values - target) <= rtol * max(1.0, values[-1])))


def neumann_candidates(p: ScatteringProblem) -> np.ndarray:
    """Predicted total-reflection wavenumbers ``v sqrt(lambda)`` inside (0, 2)."""
    values = eigenpairs(p.graph).values
    ks = p.impedance * np.sqrt(values[values > 0])
    return np.unique(np.round(ks[ks < 2], 14))


def s_matrix(p: ScatteringProblem, k: float) -> SMatrix:
    """Scattering matrix from the lead-reduced formula.

    Raises ``GraphResonanceError`` when ``F`` is singular at ``k``.
    """
    resonant, null = is_graph_resonance(p, k)
    if resonant:
        raise GraphResonanceError(k, null.shape[1])
    alpha = dispersion_alpha(k)
    w = p.lead_matrix
    f = -p.interior_operator(k)
    reduced = w.T @ np.linalg.solve(f, w)
    eye = np.eye(p.n_leads)
    lhs = eye * np.exp(-1j * alpha) - reduced
    rhs = eye * np.exp(1j * alpha) - reduced
    return SMatrix(entries=-np.linalg.solve(lhs, rhs), k=float(k))
