"""Graph files, CSV results and SVG plots.

Every writer goes through a temporary file in the target directory and an
atomic rename, so a failure never leaves a partial output behind.
"""
from __future__ import annotations

import csv
import io
import json
import os
import re
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .graph import ConfigurationError, Graph, LeadConfig
from .source import DefectSignature
from .spectra import KGrid, SweepResult


class GraphFileError(ConfigurationError):
    pass


class DegenerateRangeError(ConfigurationError):
    pass


_EDGE_RE = re.compile(r"\[\s*(-?\d+)\s*,\s*(-?\d+)\s*\]")


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def _key_pos(text: str, key: str) -> int:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return m.end() if m else 0


def parse_graph_file(path) -> tuple[Graph, LeadConfig | None, float]:
    """Load ``{"n", "edges", "leads", "impedance"}``; leads and impedance are optional."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise GraphFileError(f"{path}: file not found") from None
    except OSError as exc:
        raise GraphFileError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFileError(f"{path}:{exc.lineno}: malformed JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise GraphFileError(f"{path}:1: top level must be an object")

    def fail(key: str, msg: str, pos: int | None = None):
        line = _line_of(text, pos if pos is not None else _key_pos(text, key))
        raise GraphFileError(f"{path}:{line}: {msg}")

    n = doc.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        fail("n", f"'n' must be a positive integer, got {n!r}")
    edges = doc.get("edges", [])
    if not isinstance(edges, list):
        fail("edges", "'edges' must be a list of [i, j] pairs")

    start = _key_pos(text, "edges")
    edge_positions = [m.start() for m in _EDGE_RE.finditer(text, start)]
    seen = set()
    for idx, e in enumerate(edges):
        pos = edge_positions[idx] if idx < len(edge_positions) else start
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) and not isinstance(x, bool) for x in e)):
            fail("edges", f"edge #{idx + 1} must be a pair of integers, got {e!r}", pos)
        i, j = e
        if i == j:
            fail("edges", f"edge #{idx + 1} {e}: self-loop at vertex {i}", pos)
        for x in (i, j):
            if not 1 <= x <= n:
                fail("edges", f"edge #{idx + 1} {e}: vertex {x} outside [1, {n}]", pos)
        pair = (min(i, j), max(i, j))
        if pair in seen:
            fail("edges", f"edge #{idx + 1} {e}: duplicate edge", pos)
        seen.add(pair)

    leads = None
    if "leads" in doc:
        raw = doc["leads"]
        if not (isinstance(raw, list) and raw and all(isinstance(x, int) and not isinstance(x, bool) for x in raw)):
            fail("leads", f"'leads' must be a non-empty list of vertex indices, got {raw!r}")
        for x in raw:
            if not 1 <= x <= n:
                fail("leads", f"lead vertex {x} outside [1, {n}]")
        dup = sorted({x for x in raw if raw.count(x) > 1})
        if dup:
            fail("leads", f"duplicate lead vertex {dup[0]}: at most one lead per vertex")
        leads = LeadConfig(raw)

    impedance = doc.get("impedance", 1.0)
    if not isinstance(impedance, (int, float)) or isinstance(impedance, bool) or not impedance > 0:
        fail("impedance", f"'impedance' must be a positive number, got {impedance!r}")
    return Graph(n, edges), leads, float(impedance)


def graph_document(g: Graph, leads: LeadConfig | None = None, impedance: float = 1.0) -> dict:
    doc = {"n": g.n, "edges": [list(e) for e in g.sorted_edges()]}
    if leads is not None:
        doc["leads"] = list(leads.attachments)
    doc["impedance"] = impedance
    return doc


@contextmanager
def atomic_write(path, mode: str = "w") -> Iterator[io.IOBase]:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def sweep_columns(s: SweepResult) -> list[tuple[str, np.ndarray]]:
    cols = [("k", s.k), ("alpha", s.alpha)]
    for l in range(s.problem.n_leads):
        cols += [
            (f"a2_{l + 1}", s.incident_power[:, l]),
            (f"b2_{l + 1}", s.outgoing_power[:, l]),
            (f"arg_a_{l + 1}", np.angle(s.incident[:, l])),
            (f"arg_b_{l + 1}", np.angle(s.outgoing[:, l])),
        ]
    cols.append(("conservation_residual", s.conservation_residual))
    return cols


def write_columns(fh, cols: Sequence[tuple[str, np.ndarray]]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow([name for name, _ in cols])
    for row in zip(*(values for _, values in cols)):
        writer.writerow([_fmt(x) for x in row])


def emit_sweep_csv(s: SweepResult, path) -> None:
    if s.k.size == 0:
        raise ConfigurationError("refusing to write an empty sweep")
    try:
        with atomic_write(path) as fh:
            write_columns(fh, sweep_columns(s))
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot write ({exc.strerror})") from None


def read_csv_columns(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


read_sweep_csv = read_csv_columns


def emit_signature_csv(sig: DefectSignature, path) -> None:
    if sig.rho.size == 0:
        raise ConfigurationError("refusing to write an empty signature")
    try:
        with atomic_write(path) as fh:
            write_columns(fh, [("k", sig.k), ("rho", sig.rho)])
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot write ({exc.strerror})") from None


def read_signature_csv(path) -> DefectSignature:
    try:
        cols = read_csv_columns(path)
    except FileNotFoundError:
        raise ConfigurationError(f"{path}: file not found") from None
    if set(cols) != {"k", "rho"}:
        raise ConfigurationError(f"{path}: expected columns k,rho")
    k = cols["k"]
    if k.size < 2:
        raise ConfigurationError(f"{path}: signature needs at least two rows")
    grid = KGrid(float(k[0]), float(k[-1]), int(k.size))
    if not np.allclose(grid.points, k, rtol=0, atol=1e-12):
        raise ConfigurationError(f"{path}: k column is not a uniform grid")
    return DefectSignature(grid=grid, rho=cols["rho"])


_TICK_RE = re.compile(r"^(?:(\d*\.?\d+)\*)?sqrt\(?(\d*\.?\d+)\)?(?:/(\d*\.?\d+))?$")


def parse_tick(token: str) -> tuple[float, str]:
    """Resolve ``1.5``, ``sqrt3``, ``sqrt(3)/2`` or ``2*sqrt5`` to ``(value, label)``."""
    token = token.strip().replace(" ", "")
    try:
        return float(token), token
    except ValueError:
        pass
    m = _TICK_RE.match(token)
    if not m:
        raise ConfigurationError(f"cannot parse tick {token!r}")
    coef, radicand, denom = m.groups()
    value = (float(coef) if coef else 1.0) * np.sqrt(float(radicand)) / (float(denom) if denom else 1.0)
    label = (coef or "") + "√" + radicand + (f"/{denom}" if denom else "")
    return float(value), label


def plot_limits(series) -> tuple[tuple[float, float], tuple[float, float]]:
    xs = np.concatenate([np.asarray(x, dtype=float) for _, x, _ in series])
    ys = np.concatenate([np.asarray(y, dtype=float) for _, _, y in series])
    if xs.size < 2 or xs.max() == xs.min():
        raise DegenerateRangeError("plot needs at least two distinct x values")
    lo, hi = float(ys.min()), float(ys.max())
    if lo >= 0 and hi <= 1:
        ylim = (0.0, 1.0)
    elif hi == lo:
        ylim = (lo - 0.5, hi + 0.5)
    else:
        pad = 0.05 * (hi - lo)
        ylim = (lo - pad, hi + pad)
    return (float(xs.min()), float(xs.max())), ylim


def emit_plot_svg(series, path, ticks: Sequence[str] = (), xlabel: str = "k", ylabel: str = "", title: str = ""):
    """Line plot of ``[(label, x, y), ...]`` written as SVG.

    ``ticks`` adds labelled x-axis marks (see ``parse_tick``). Returns the
    axis limits used.
    """
    if not series:
        raise ConfigurationError("nothing to plot")
    for label, x, y in series:
        if len(x) != len(y):
            raise ConfigurationError(f"series {label!r}: x and y lengths differ")
        if len(x) < 2:
            raise DegenerateRangeError(f"series {label!r} has fewer than two points")
    xlim, ylim = plot_limits(series)
    resolved = [parse_tick(t) for t in ticks]

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "graphscatter"
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, x, y in series:
        ax.plot(x, y, label=label, lw=1.2)
    ax.set_xlim(*xlim)
    ax.set_ylim(*ylim)
    ax.set_xlabel(xlabel)
    if ylabel:
        ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if resolved:
        base = [t for t in ax.get_xticks() if xlim[0] <= t <= xlim[1]]
        values = list(base) + [v for v, _ in resolved]
        labels = [f"{t:g}" for t in base] + [lab for _, lab in resolved]
        ax.set_xticks(values, labels)
    ax.legend()
    fig.tight_layout()
    try:
        with atomic_write(path, "wb") as fh:
            fig.savefig(fh, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot write ({exc.strerror})") from None
    finally:
        plt.close(fig)
    return xlim, ylim
