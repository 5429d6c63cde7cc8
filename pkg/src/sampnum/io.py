"""Plain-text formats: key=value configs, CSV tables and frame files.

Floats are written with ``repr`` (shortest round-trip decimal) and complex
numbers as adjacent ``re,im`` columns, so every file reads back bit-exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .density import NodeSet
from .spectrum import TORUS, SpectralBasis, legendre_orthonormal


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def read_config(path) -> dict[str, str]:
    """Read ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def write_config(path, values: dict) -> None:
    lines = [f"{k} = {fmt(v)}" for k, v in values.items() if v is not None]
    Path(path).write_text("\n".join(lines) + "\n")


def write_nodes_csv(fh, nodes: NodeSet) -> None:
    d = nodes.points.shape[1]
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow([f"x{j + 1}" for j in range(d)] + ["density"])
    for p, rho in zip(nodes.points, nodes.density_values):
        writer.writerow([fmt(v) for v in p] + [fmt(rho)])


def read_nodes_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, :-1], data[:, -1]


def write_frame_csv(fh, rows: np.ndarray) -> None:
    """One row per frame vector, complex entries as ``re,im`` column pairs."""
    rows = np.asarray(rows, dtype=complex)
    writer = csv.writer(fh, lineterminator="\n")
    header = []
    for j in range(rows.shape[1]):
        header += [f"re{j + 1}", f"im{j + 1}"]
    writer.writerow(header)
    for r in rows:
        writer.writerow([fmt(v) for z in r for v in (z.real, z.imag)])


def read_frame_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] % 2:
        raise ValueError("frame CSV must have an even number of columns (re,im pairs)")
    return data[:, 0::2] + 1j * data[:, 1::2]


def parse_function(text: str, d: int = 1) -> list[tuple[tuple[int, ...], complex]]:
    """Parse ``"label:coef,label:coef"`` into ``(label, coefficient)`` pairs.

    A label is a frequency vector with components separated by ``/`` (torus)
    or a polynomial degree (interval). Coefficients accept Python complex
    literals such as ``0.5`` or ``1-2j``.
    """
    terms = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise ValueError(f"term {part!r} must look like label:coefficient")
        label, coef = part.split(":", 1)
        k = tuple(int(v) for v in label.split("/"))
        if len(k) != d:
            raise ValueError(f"label {label!r} needs {d} components")
        terms.append((k, complex(coef.replace(" ", ""))))
    if not terms:
        raise ValueError("empty function description")
    return terms


def evaluate_function(basis: SpectralBasis, terms, x) -> np.ndarray:
    """Samples of ``sum coef * eta_label`` at the rows of ``x``."""
    x = basis.as_points(x)
    out = np.zeros(len(x), dtype=complex)
    if basis.model.family == TORUS:
        for k, c in terms:
            out += c * np.exp(2j * np.pi * (x @ np.asarray(k, dtype=float)))
        return out
    top = max(k[0] for k, _ in terms)
    if min(k[0] for k, _ in terms) < 0:
        raise ValueError("polynomial degrees must be non-negative")
    P = legendre_orthonormal(x[:, 0], top + 1)
    for k, c in terms:
        out += c * P[:, k[0]]
    return out
