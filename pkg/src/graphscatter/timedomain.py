"""Leapfrog integration of the graph wave equation with long truncated leads.

Used as an independent check on the frequency-domain solver: a wavepacket is
launched down one lead, scatters off the graph, and the energy carried away
on each lead is compared with the spectrally weighted transmission.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TextIO

import numpy as np
import scipy.sparse as sp

from .graph import ConfigurationError
from .solver import ScatteringProblem, dispersion_alpha
from .spectra import SweepResult

DEFAULT_DT = 0.05
DEFAULT_LEAD_LENGTH = 2000
MAX_BANDWIDTH = 0.2


class WindowError(RuntimeError):
    """The wavepacket reached a truncated lead end before the run finished."""


@dataclass(frozen=True)
class TruncatedAssembly:
    """Graph plus ``lead_length`` chain nodes per lead.

    Node order: graph vertices ``0..n-1``, then lead ``l`` (0-based) occupies
    ``n + l*N .. n + (l+1)*N - 1`` with the node nearest the graph first.
    """

    problem: ScatteringProblem
    lead_length: int
    laplacian: sp.csr_matrix
    edge_i: np.ndarray
    edge_j: np.ndarray
    edge_w: np.ndarray

    @property
    def size(self) -> int:
        return self.problem.n + self.problem.n_leads * self.lead_length

    def lead_nodes(self, lead: int) -> np.ndarray:
        """Global indices of ``lead`` (1-based), graph side first."""
        start = self.problem.n + (lead - 1) * self.lead_length
        return np.arange(start, start + self.lead_length)


@dataclass(frozen=True)
class PacketSpec:
    """Gaussian envelope (std ``width`` nodes) on a carrier moving toward the graph."""

    carrier: float
    width: float
    center: int
    amplitude: float = 1.0

    def __post_init__(self):
        if not 0 < self.carrier < 2:
            raise ConfigurationError(f"carrier must lie in (0, 2), got {self.carrier!r}")
        if not self.width > 0:
            raise ConfigurationError("packet width must be positive")
        if self.bandwidth > MAX_BANDWIDTH:
            raise ConfigurationError(
                f"packet bandwidth {self.bandwidth:.3g} exceeds {MAX_BANDWIDTH}; widen the envelope"
            )

    @classmethod
    def from_bandwidth(cls, carrier: float, bandwidth: float, center: int, amplitude: float = 1.0) -> "PacketSpec":
        alpha0 = dispersion_alpha(carrier)
        return cls(carrier, np.cos(alpha0 / 2) / (np.sqrt(2.0) * bandwidth), center, amplitude)

    @property
    def alpha(self) -> float:
        return dispersion_alpha(self.carrier)

    @property
    def group_velocity(self) -> float:
        return float(np.cos(self.alpha / 2))

    @property
    def bandwidth(self) -> float:
        """RMS spread in k of the packet's power spectrum (linearized)."""
        return float(np.cos(dispersion_alpha(self.carrier) / 2) / (np.sqrt(2.0) * self.width))

    def spectral_power(self, k: np.ndarray) -> np.ndarray:
        """Energy density per unit k carried by the packet (unnormalized)."""
        k = np.asarray(k, dtype=float)
        alpha = dispersion_alpha(k)
        dalpha_dk = 1.0 / np.sqrt(1.0 - k * k / 4.0)
        return k * k * np.exp(-(self.width ** 2) * (alpha - self.alpha) ** 2) * dalpha_dk


@dataclass(frozen=True)
class PacketResult:
    incident: float
    reflected: float
    transmitted: np.ndarray  # per lead, zero on the input lead
    retained: float  # left near the graph at the end of the run
    energy_drift: float
    t_end: float

    @property
    def transmitted_ratio(self) -> float:
        return float(self.transmitted.sum() / self.incident)

    @property
    def reflected_ratio(self) -> float:
        return float(self.reflected / self.incident)


@dataclass(frozen=True)
class CrossCheck:
    simulated: float
    predicted: float
    relative_error: float
    result: PacketResult


def build_assembly(p: ScatteringProblem, lead_length: int = DEFAULT_LEAD_LENGTH) -> TruncatedAssembly:
    if lead_length < 100:
        raise ConfigurationError(f"lead length must be at least 100 nodes, got {lead_length}")
    n, nl, N = p.n, p.n_leads, lead_length
    ii, jj, ww = [], [], []
    for a, b in p.graph.sorted_edges():
        ii.append(a - 1)
        jj.append(b - 1)
        ww.append(p.impedance ** 2)
    for l, vertex in enumerate(p.leads.attachments):
        base = n + l * N
        ii.append(vertex - 1)
        jj.append(base)
        ww.append(1.0)
        ii.extend(range(base, base + N - 1))
        jj.extend(range(base + 1, base + N))
        ww.extend([1.0] * (N - 1))
    i = np.array(ii)
    j = np.array(jj)
    w = np.array(ww, dtype=float)
    size = n + nl * N
    adj = sp.coo_matrix((np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(size, size))
    deg = np.asarray(adj.sum(axis=1)).ravel()
    lap = (adj - sp.diags(deg)).tocsr()
    return TruncatedAssembly(problem=p, lead_length=N, laplacian=lap, edge_i=i, edge_j=j, edge_w=w)


def _stable_dt(a: TruncatedAssembly, dt: float) -> None:
    # Gershgorin: spectral radius of -L is at most twice the largest weighted degree
    radius = 2.0 * float(np.max(-a.laplacian.diagonal()))
    if dt * dt * radius >= 4.0:
        raise ConfigurationError(f"dt={dt} violates the leapfrog stability bound for this assembly")


def step(lap: sp.csr_matrix, prev: np.ndarray, cur: np.ndarray, dt: float, steps: int, forcing=None, t0: float = 0.0):
    """Advance ``q_{n+1} = 2 q_n - q_{n-1} + dt^2 (L q_n + f(t_n))`` by ``steps``.

    Returns the final ``(prev, cur)`` pair. Swapping the pair and stepping
    again runs time backwards.
    """
    h2 = dt * dt
    for s in range(steps):
        nxt = 2.0 * cur - prev + h2 * (lap @ cur)
        if forcing is not None:
            forcing(nxt, t0 + s * dt, h2)
        prev, cur = cur, nxt
    return prev, cur


def _edge_energy(a: TruncatedAssembly, q0: np.ndarray, q1: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-node kinetic and per-edge potential parts of the conserved leapfrog energy."""
    kinetic = 0.5 * ((q1 - q0) / dt) ** 2
    d0 = q0[a.edge_i] - q0[a.edge_j]
    d1 = q1[a.edge_i] - q1[a.edge_j]
    return kinetic, 0.5 * a.edge_w * d0 * d1


def total_energy(a: TruncatedAssembly, q0: np.ndarray, q1: np.ndarray, dt: float) -> float:
    kinetic, potential = _edge_energy(a, q0, q1, dt)
    return float(kinetic.sum() + potential.sum())


def region_energies(a: TruncatedAssembly, q0: np.ndarray, q1: np.ndarray, dt: float, margin: int) -> tuple[np.ndarray, float]:
    """Energy on each lead beyond ``margin`` nodes, and the remainder near the graph."""
    kinetic, potential = _edge_energy(a, q0, q1, dt)
    n, N = a.problem.n, a.lead_length
    lead_of = np.full(a.size, -1)
    for l in range(a.problem.n_leads):
        nodes = a.lead_nodes(l + 1)[margin:]
        lead_of[nodes] = l
    per_lead = np.zeros(a.problem.n_leads)
    np.add.at(per_lead, lead_of[lead_of >= 0], kinetic[lead_of >= 0])
    both = (lead_of[a.edge_i] == lead_of[a.edge_j]) & (lead_of[a.edge_i] >= 0)
    np.add.at(per_lead, lead_of[a.edge_i[both]], potential[both])
    total = float(kinetic.sum() + potential.sum())
    return per_lead, total - float(per_lead.sum())


def launch(a: TruncatedAssembly, packet: PacketSpec, dt: float = DEFAULT_DT, input_lead: int = 1):
    """Two consecutive time levels ``(q_{-1}, q_0)`` of a packet moving toward the graph.

    Each Fourier mode is advanced with the exact discrete leapfrog frequency.
    The odd branch ``2 arcsin(dt sin(kappa/2))`` sends every mode toward the
    graph and, unlike ``arccos`` of ``|kappa|``, is smooth at ``kappa = 0`` so
    the previous level stays local.
    """
    N = a.lead_length
    if not 0 < packet.center < N:
        raise ConfigurationError(f"packet center {packet.center} outside the lead (length {N})")
    j = np.arange(N)
    z = packet.amplitude * np.exp(-((j - packet.center) ** 2) / (2 * packet.width ** 2)) * np.exp(1j * packet.alpha * j)
    wavenumbers = 2 * np.pi * np.fft.fftfreq(N)
    theta = 2 * np.arcsin(dt * np.sin(wavenumbers / 2))
    z_prev = np.fft.ifft(np.fft.fft(z) * np.exp(-1j * theta))
    q_prev = np.zeros(a.size)
    q_cur = np.zeros(a.size)
    nodes = a.lead_nodes(input_lead)
    q_prev[nodes] = z_prev.real
    q_cur[nodes] = z.real
    return q_prev, q_cur


def default_t_end(packet: PacketSpec) -> float:
    """Time for the packet to reach the graph and travel the same distance back out."""
    return 2.0 * packet.center / packet.group_velocity


def simulate_packet(
    a: TruncatedAssembly,
    packet: PacketSpec,
    t_end: float | None = None,
    dt: float = DEFAULT_DT,
    input_lead: int = 1,
    margin: int | None = None,
    trace: TextIO | None = None,
    check_every: int = 200,
) -> PacketResult:
    """Run one scattering experiment and partition the final energy by lead.

    ``trace`` receives CSV rows ``t, energy_lead_1..l, energy_near_graph``
    every ``check_every`` steps. Raises ``WindowError`` when energy shows up
    in the guard zone at the far end of any lead.
    """
    _stable_dt(a, dt)
    if t_end is None:
        t_end = default_t_end(packet)
    margin = min(200, a.lead_length // 10) if margin is None else margin
    guard = max(20, a.lead_length // 20)
    steps = int(round(t_end / dt))
    prev, cur = launch(a, packet, dt, input_lead)
    e0 = total_energy(a, prev, cur, dt)
    guard_nodes = np.concatenate([a.lead_nodes(l + 1)[-guard:] for l in range(a.problem.n_leads)])

    writer = None
    if trace is not None:
        writer = csv.writer(trace)
        writer.writerow(["t"] + [f"energy_lead_{l + 1}" for l in range(a.problem.n_leads)] + ["energy_near_graph"])

    drift = 0.0
    done = 0
    while done < steps:
        chunk = min(check_every, steps - done)
        prev, cur = step(a.laplacian, prev, cur, dt, chunk)
        done += chunk
        e = total_energy(a, prev, cur, dt)
        drift = max(drift, abs(e - e0) / e0)
        far = 0.5 * np.sum(cur[guard_nodes] ** 2 + ((cur[guard_nodes] - prev[guard_nodes]) / dt) ** 2)
        if far > 1e-10 * e0:
            raise WindowError(
                f"packet reached the truncated lead end at t={done * dt:.1f}; increase the lead length"
            )
        if writer is not None:
            per_lead, rest = region_energies(a, prev, cur, dt, margin)
            writer.writerow([f"{done * dt:.17g}"] + [f"{x:.17g}" for x in per_lead] + [f"{rest:.17g}"])

    per_lead, rest = region_energies(a, prev, cur, dt, margin)
    transmitted = per_lead.copy()
    transmitted[input_lead - 1] = 0.0
    return PacketResult(
        incident=e0,
        reflected=float(per_lead[input_lead - 1]),
        transmitted=transmitted,
        retained=rest,
        energy_drift=drift,
        t_end=steps * dt,
    )


def spectral_prediction(packet: PacketSpec, sweep: SweepResult) -> float:
    """Packet-power weighted average of the transmitted power over exit leads."""
    lo = packet.carrier - 5 * packet.bandwidth
    hi = packet.carrier + 5 * packet.bandwidth
    if lo < sweep.k[0] or hi > sweep.k[-1]:
        raise ConfigurationError(
            f"packet band [{lo:.4g}, {hi:.4g}] not covered by sweep [{sweep.k[0]:.4g}, {sweep.k[-1]:.4g}]"
        )
    weight = packet.spectral_power(sweep.k)
    exit_power = sweep.outgoing_power.sum(axis=1) - sweep.reflection
    return float(np.trapezoid(weight * exit_power, sweep.k) / np.trapezoid(weight, sweep.k))


def compare_with_spectral(
    a: TruncatedAssembly,
    packet: PacketSpec,
    sweep: SweepResult,
    dt: float = DEFAULT_DT,
    t_end: float | None = None,
) -> CrossCheck:
    if sweep.problem != a.problem:
        raise ConfigurationError("sweep and assembly describe different scattering problems")
    predicted = spectral_prediction(packet, sweep)
    result = simulate_packet(a, packet, t_end=t_end, dt=dt, input_lead=sweep.input_lead)
    simulated = result.transmitted_ratio
    return CrossCheck(
        simulated=simulated,
        predicted=predicted,
        relative_error=abs(simulated - predicted) / max(abs(predicted), 1e-300),
        result=result,
    )


def drive_vertex(
    a: TruncatedAssembly,
    vertex: int,
    k: float,
    amplitude: float = 1.0,
    t_end: float = 800.0,
    ramp: float = 150.0,
    probe: int = 50,
    dt: float = DEFAULT_DT,
) -> tuple[np.ndarray, float]:
    """Drive ``amplitude * cos(k t)`` at a graph vertex and measure the steady lead amplitudes.

    Returns the wave amplitude seen ``probe`` nodes down each lead (fitted over
    the last quarter of the run) and the effective wavenumber of the discrete
    time stepping, ``2 sin(k dt / 2) / dt``, at which the frequency-domain
    solver should be compared.
    """
    _stable_dt(a, dt)
    if t_end + probe >= a.lead_length:
        raise WindowError("drive would reach the truncated lead ends; increase the lead length")
    idx = vertex - 1
    h = dt

    def force(nxt, t, h2):
        envelope = np.sin(0.5 * np.pi * min(t / ramp, 1.0)) ** 2
        nxt[idx] += h2 * amplitude * envelope * np.cos(k * t)

    steps = int(round(t_end / h))
    record_from = int(0.75 * steps)
    probes = np.array([a.lead_nodes(l + 1)[probe] for l in range(a.problem.n_leads)])
    prev = np.zeros(a.size)
    cur = np.zeros(a.size)
    prev, cur = step(a.laplacian, prev, cur, h, record_from, forcing=force)
    times, samples = [], []
    for s in range(record_from, steps):
        prev, cur = step(a.laplacian, prev, cur, h, 1, forcing=force, t0=s * h)
        times.append((s + 1) * h)
        samples.append(cur[probes].copy())
    times = np.array(times)
    basis = np.column_stack([np.cos(k * times), np.sin(k * times)])
    coef, *_ = np.linalg.lstsq(basis, np.array(samples), rcond=None)
    k_eff = 2.0 * np.sin(k * h / 2.0) / h
    return np.hypot(coef[0], coef[1]), float(k_eff)
