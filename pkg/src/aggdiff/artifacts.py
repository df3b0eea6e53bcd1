"""CSV, JSON, manifest and SVG writers.

CSV files are UTF-8 with LF line endings and a header row; floats are written
with ``repr`` (shortest round-trip form), so identical runs give identical
bytes. JSON uses the same float formatting through :mod:`json`.
"""

from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return v


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def to_jsonable(obj):
    """Convert numpy scalars/arrays and tuples; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    return obj


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(to_jsonable(data), indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


@dataclass
class RunManifest:
    config: dict
    started: str = field(default_factory=lambda: _now())
    finished: str | None = None
    files: list[str] = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)

    def add(self, path) -> Path:
        self.files.append(str(path))
        return Path(path)

    def write(self, prefix) -> Path:
        """Write ``<prefix>_manifest.json``; call once, after all outputs exist."""
        self.finished = _now()
        path = Path(f"{prefix}_manifest.json")
        return write_json(path, {
            "config": self.config,
            "tool_version": __version__,
            "python": platform.python_version(),
            "started": self.started,
            "finished": self.finished,
            "files": self.files,
            "verdicts": self.verdicts,
        })


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def write_svg_lines(path, series: dict, title: str = "", width: int = 640, height: int = 400,
                    logy: bool = False) -> Path:
    """Minimal line chart: ``series`` maps a label to ``(x, y)`` arrays."""
    pad = 50
    pts = {}
    for name, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if logy:
            keep = y > 0
            x, y = x[keep], np.log10(y[keep])
        pts[name] = (x, y)
    allx = np.concatenate([p[0] for p in pts.values()]) if pts else np.array([0.0, 1.0])
    ally = np.concatenate([p[1] for p in pts.values()]) if pts else np.array([0.0, 1.0])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
        'fill="none" stroke="black"/>',
        f'<text x="{width / 2}" y="{pad / 2}" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<text x="{pad}" y="{height - pad / 3}" font-size="10">{x0:.4g}</text>',
        f'<text x="{width - pad}" y="{height - pad / 3}" text-anchor="end" font-size="10">{x1:.4g}</text>',
        f'<text x="{pad - 4}" y="{height - pad}" text-anchor="end" font-size="10">{_ylab(y0, logy)}</text>',
        f'<text x="{pad - 4}" y="{pad + 10}" text-anchor="end" font-size="10">{_ylab(y1, logy)}</text>',
    ]
    for i, (name, (x, y)) in enumerate(pts.items()):
        colour = _PALETTE[i % len(_PALETTE)]
        path_pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{path_pts}"/>')
        out.append(f'<text x="{width - pad + 4}" y="{pad + 14 * (i + 1)}" font-size="10" '
                   f'fill="{colour}">{_esc(str(name))}</text>')
    out.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path


def _ylab(v: float, logy: bool) -> str:
    return f"1e{v:.3g}" if logy else f"{v:.4g}"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
