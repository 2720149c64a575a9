"""Command-line entry point: ``graphscatter <subcommand> GRAPH.json ...``."""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .graph import ConfigurationError, LeadConfig, eigenpairs
from .io import (
    atomic_write,
    emit_plot_svg,
    emit_signature_csv,
    emit_sweep_csv,
    parse_graph_file,
    read_signature_csv,
    sweep_columns,
    write_columns,
)
from .solver import DomainError, GraphResonanceError, ScatteringProblem, s_matrix
from .source import SourceSpec, defect_signature, localize_source
from .spectra import KGrid, rank_exit_vertices, sweep, total_transmission
from .timedomain import PacketSpec, WindowError, build_assembly, compare_with_spectral


def parse_vertex_list(text: str) -> list[int]:
    """``"2-9"``, ``"2,4,5"`` or a mix such as ``"2-4,8"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            try:
                lo_i, hi_i = int(lo), int(hi)
            except ValueError:
                raise ConfigurationError(f"bad vertex range {part!r}") from None
            if hi_i < lo_i:
                raise ConfigurationError(f"empty vertex range {part!r}")
            out.extend(range(lo_i, hi_i + 1))
        else:
            try:
                out.append(int(part))
            except ValueError:
                raise ConfigurationError(f"bad vertex {part!r}") from None
    if not out:
        raise ConfigurationError("empty vertex list")
    return out


def _problem(args) -> ScatteringProblem:
    g, leads, v = parse_graph_file(args.graph)
    if getattr(args, "leads", None):
        leads = LeadConfig(parse_vertex_list(args.leads))
    if leads is None:
        raise ConfigurationError(f"{args.graph}: no leads given (file or --leads)")
    if args.impedance is not None:
        v = args.impedance
    return ScatteringProblem(g, leads, v)


def _grid(args) -> KGrid:
    return KGrid(args.kmin, args.kmax, args.grid)


def _emit(payload, args, text_lines: list[str]) -> None:
    if args.format == "json":
        out = json.dumps(payload, indent=2)
    else:
        out = "\n".join(text_lines)
    if args.output:
        try:
            with atomic_write(args.output) as fh:
                fh.write(out + "\n")
        except OSError as exc:
            raise ConfigurationError(f"{args.output}: cannot write ({exc.strerror})") from None
    else:
        print(out)


def cmd_eig(args) -> int:
    g, _, v = parse_graph_file(args.graph)
    if args.impedance is not None:
        v = args.impedance
    values = eigenpairs(g).values
    ks = v * np.sqrt(values)
    lines = ["index,eigenvalue,k_neumann"] + [
        f"{i + 1},{lam:.17g},{k:.17g}" for i, (lam, k) in enumerate(zip(values, ks))
    ]
    _emit({"eigenvalues": values.tolist(), "k_neumann": ks.tolist(), "impedance": v}, args, lines)
    return 0


def cmd_sweep(args) -> int:
    p = _problem(args)
    s = sweep(p, _grid(args), args.lead)
    if args.format == "json":
        _emit({name: col.tolist() for name, col in sweep_columns(s)}, args, [])
    elif args.output:
        emit_sweep_csv(s, args.output)
    else:
        write_columns(sys.stdout, sweep_columns(s))
    if args.plot:
        series = []
        for l in range(p.n_leads):
            name = "reflected" if l + 1 == args.lead else f"lead {l + 1}"
            series.append((f"|b|² {name}", s.k, s.power(l + 1)))
        emit_plot_svg(series, args.plot, ticks=args.tick or (), ylabel="power")
    return 0


def cmd_smatrix(args) -> int:
    p = _problem(args)
    s = s_matrix(p, args.k)
    u, r = s.unitarity_error(), s.reciprocity_error()
    lines = [f"k = {args.k:.17g}"]
    for row in s.entries:
        lines.append("  ".join(f"{z.real:+.12f}{z.imag:+.12f}j" for z in row))
    lines.append(f"unitarity error ||S S^H - I|| = {u:.3e}")
    lines.append(f"reciprocity error ||S - S^T|| = {r:.3e}")
    payload = {
        "k": args.k,
        "real": s.entries.real.tolist(),
        "imag": s.entries.imag.tolist(),
        "unitarity_error": u,
        "reciprocity_error": r,
    }
    _emit(payload, args, lines)
    return 0


def cmd_transmit(args) -> int:
    p = _problem(args)
    s = sweep(p, _grid(args), args.lead)
    t = total_transmission(s, args.exit)
    _emit({"input_lead": args.lead, "exit_lead": args.exit, "total_transmission": t}, args, [f"{t:.17g}"])
    return 0


def cmd_optimize(args) -> int:
    g, _, v = parse_graph_file(args.graph)
    if args.impedance is not None:
        v = args.impedance
    candidates = parse_vertex_list(args.candidates)
    report = rank_exit_vertices(g, args.input, candidates, v, _grid(args))
    lines = ["vertex,T"] + [f"{j},{t:.6f}" for j, t in report.entries]
    _emit({"input_vertex": report.input_vertex, "entries": [[j, t] for j, t in report.entries]}, args, lines)
    return 0


def _source_template(args, vertex=None) -> SourceSpec:
    return SourceSpec(vertex, center=args.kd, amplitude=args.d, width=args.wd)


def cmd_defect(args) -> int:
    p = _problem(args)
    sig = defect_signature(p, _grid(args), args.lead, _source_template(args, args.vertex))
    if args.output:
        emit_signature_csv(sig, args.output)
    else:
        print("k,rho")
        for k, r in zip(sig.k, sig.rho):
            print(f"{k:.17g},{r:.17g}")
    if args.plot:
        emit_plot_svg(
            [(f"source at {args.vertex}", sig.k, sig.rho + 1.0)],
            args.plot,
            ticks=args.tick or (),
            ylabel="|a|² + |b|²",
        )
    return 0


def cmd_locate(args) -> int:
    p = _problem(args)
    observed = read_signature_csv(args.observed)
    ranked = localize_source(p, observed, parse_vertex_list(args.candidates), _source_template(args), args.lead)
    lines = ["vertex,misfit"] + [f"{v},{m:.6e}" for v, m in ranked]
    _emit({"ranking": [[v, m] for v, m in ranked]}, args, lines)
    return 0


def cmd_simulate(args) -> int:
    p = _problem(args)
    a = build_assembly(p, args.lead_length)
    center = args.center if args.center is not None else args.lead_length // 2
    packet = PacketSpec.from_bandwidth(args.kc, args.bandwidth, center)
    s = sweep(p, _grid(args), args.lead)
    check = compare_with_spectral(a, packet, s, dt=args.dt)
    r = check.result
    lines = [
        f"carrier k_c           {args.kc:.6g}",
        f"bandwidth (rms)       {packet.bandwidth:.6g}",
        f"simulated transmitted {check.simulated:.8f}",
        f"spectral prediction   {check.predicted:.8f}",
        f"relative difference   {check.relative_error:.3e}",
        f"reflected ratio       {r.reflected_ratio:.8f}",
        f"energy drift          {r.energy_drift:.3e}",
    ]
    payload = {
        "carrier": args.kc,
        "bandwidth": packet.bandwidth,
        "simulated": check.simulated,
        "predicted": check.predicted,
        "relative_error": check.relative_error,
        "reflected_ratio": r.reflected_ratio,
        "energy_drift": r.energy_drift,
    }
    _emit(payload, args, lines)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphscatter", description="Wave scattering on graphs with chain leads")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, grid=True, fmt=True):
        p.add_argument("graph", help="graph JSON file")
        p.add_argument("--impedance", "-v", type=float, default=None, help="override the file's impedance")
        if grid:
            p.add_argument("--grid", type=int, default=2000, help="number of k samples")
            p.add_argument("--kmin", type=float, default=1e-3)
            p.add_argument("--kmax", type=float, default=2 - 1e-3)
        if fmt:
            p.add_argument("--format", choices=("csv", "json"), default="csv")
            p.add_argument("-o", "--output", default=None)

    def leads(p):
        p.add_argument("--leads", default=None, help="override lead vertices, e.g. 3,1")

    p = sub.add_parser("eig", help="Laplacian spectrum and Neumann resonance wavenumbers")
    common(p, grid=False)
    p.set_defaults(func=cmd_eig)

    p = sub.add_parser("sweep", help="per-lead spectra over a k grid")
    common(p)
    leads(p)
    p.add_argument("--lead", type=int, default=1, help="input lead (1-based)")
    p.add_argument("--plot", default=None, help="SVG output path")
    p.add_argument("--tick", action="append", help="extra x tick, e.g. sqrt3")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("smatrix", help="scattering matrix at one k")
    common(p, grid=False)
    leads(p)
    p.add_argument("--k", type=float, required=True)
    p.set_defaults(func=cmd_smatrix)

    p = sub.add_parser("transmit", help="total transmission into one exit lead")
    common(p)
    leads(p)
    p.add_argument("--lead", type=int, default=1)
    p.add_argument("--exit", type=int, default=2)
    p.set_defaults(func=cmd_transmit)

    p = sub.add_parser("optimize", help="rank exit vertices by total transmission")
    common(p)
    p.add_argument("--input", type=int, required=True)
    p.add_argument("--candidates", required=True, help="e.g. 2-9 or 2,4,5")
    p.set_defaults(func=cmd_optimize)

    def source_args(p):
        p.add_argument("--kd", type=float, default=1.0, help="source center wavenumber")
        p.add_argument("--wd", type=float, default=50.0, help="source width parameter")
        p.add_argument("--d", type=float, default=1.0, help="source amplitude")

    p = sub.add_parser("defect", help="defect signature rho(k)")
    common(p, fmt=False)
    leads(p)
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--lead", type=int, default=1)
    p.add_argument("--vertex", type=int, required=True)
    source_args(p)
    p.add_argument("--plot", default=None)
    p.add_argument("--tick", action="append")
    p.set_defaults(func=cmd_defect)

    p = sub.add_parser("locate", help="rank candidate source vertices against an observed signature")
    common(p, grid=False)
    leads(p)
    p.add_argument("--observed", required=True, help="signature CSV (k,rho)")
    p.add_argument("--candidates", required=True)
    p.add_argument("--lead", type=int, default=1)
    source_args(p)
    p.set_defaults(func=cmd_locate)

    p = sub.add_parser("simulate", help="time-domain wavepacket cross-check")
    common(p)
    leads(p)
    p.add_argument("--lead", type=int, default=1)
    p.add_argument("--kc", type=float, default=1.0, help="carrier wavenumber")
    p.add_argument("--bandwidth", type=float, default=0.1, help="rms k bandwidth")
    p.add_argument("--lead-length", type=int, default=2000)
    p.add_argument("--center", type=int, default=None, help="launch node on the input lead")
    p.add_argument("--dt", type=float, default=0.05)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DomainError) as exc:
        print(f"graphscatter {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (GraphResonanceError, WindowError) as exc:
        print(f"graphscatter {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
