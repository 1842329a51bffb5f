"""CSV tables with ``#`` metadata lines, as written by every CLI command."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__

COMPARISON_COLUMNS = ("theta_deg", "cdf_sim", "cdf_pred", "diff", "err_2sigma")


def fmt(v: float) -> str:
    """Six significant digits, stable under parse/format round trips."""
    return f"{float(v):.6g}"


@dataclass
class Table:
    columns: tuple
    data: dict                      # column -> np.ndarray
    meta: dict = field(default_factory=dict)
    comments: list = field(default_factory=list)

    def __getitem__(self, col) -> np.ndarray:
        return self.data[col]

    def __len__(self) -> int:
        return len(next(iter(self.data.values()))) if self.data else 0


def render(table: Table) -> str:
    buf = io.StringIO()
    buf.write(f"# sawlab {__version__}\n")
    if table.meta:
        buf.write("# " + " ".join(f"{k}={v}" for k, v in table.meta.items()) + "\n")
    for c in table.comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for i in range(len(table)):
        w.writerow([fmt(table.data[c][i]) for c in table.columns])
    return buf.getvalue()


def write_table(path, table: Table) -> str:
    text = render(table)
    if path in (None, "-"):
        print(text, end="")
    else:
        Path(path).write_text(text)
    return text


def parse(text: str) -> Table:
    meta, comments, body = {}, [], []
    for line in text.splitlines():
        if line.startswith("#"):
            content = line[1:].strip()
            if content.startswith("sawlab "):
                continue
            toks = content.split()
            if toks and all("=" in t for t in toks):
                meta.update(t.split("=", 1) for t in toks)
            else:
                comments.append(content)
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise ValueError("table has no header")
    columns = tuple(rows[0])
    values = np.array([[float(x) for x in r] for r in rows[1:]], dtype=np.float64).reshape(-1, len(columns))
    return Table(columns, {c: values[:, j] for j, c in enumerate(columns)}, meta, comments)


def read_table(path) -> Table:
    return parse(Path(path).read_text())


def comparison_table(theta_deg, cdf_sim, cdf_pred, err_2sigma, meta=None, comments=()) -> Table:
    cdf_sim = np.asarray(cdf_sim, dtype=np.float64)
    cdf_pred = np.asarray(cdf_pred, dtype=np.float64)
    data = {
        "theta_deg": np.asarray(theta_deg, dtype=np.float64),
        "cdf_sim": cdf_sim,
        "cdf_pred": cdf_pred,
        "diff": cdf_sim - cdf_pred,
        "err_2sigma": np.asarray(err_2sigma, dtype=np.float64),
    }
    return Table(COMPARISON_COLUMNS, data, dict(meta or {}), list(comments))


def same_grid(tables: Sequence[Table], col: str = "theta_deg") -> bool:
    first = tables[0][col]
    return all(t[col].shape == first.shape and np.array_equal(t[col], first) for t in tables[1:])
