"""Report rendering helpers: atomic file writes and a dependency-free SVG
line chart (actual vs predicted)."""

from __future__ import annotations

import os
import tempfile
from datetime import date
from pathlib import Path
from typing import Sequence

from .errors import IoError


def atomic_write_text(path, text: str) -> None:
    """Write via temp file + rename so interrupted runs never leave partial files."""
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoError(f"failed to write {path}: {exc}") from exc


def _escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


_COLORS = ("#1f77b4", "#d62728")


def line_chart_svg(
    dates: Sequence[date],
    series: Sequence[tuple[str, Sequence[float]]],
    title: str,
    y_label: str,
    width: int = 960,
    height: int = 540,
) -> str:
    """Self-contained SVG chart with one polyline per series."""
    if not dates:
        raise IoError("nothing to plot: empty date axis")
    for label, ys in series:
        if len(ys) != len(dates):
            raise IoError(f"series {label!r} length {len(ys)} != {len(dates)} dates")

    ml, mr, mt, mb = 80, 30, 50, 70
    pw, ph = width - ml - mr, height - mt - mb
    all_y = [float(v) for _, ys in series for v in ys]
    y_lo, y_hi = min(all_y), max(all_y)
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    def px(i: int) -> float:
        if len(dates) == 1:
            return ml + pw / 2
        return ml + i * pw / (len(dates) - 1)

    def py(v: float) -> float:
        return mt + ph - (v - y_lo) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="#ffffff"/>',
        f'<text x="{width / 2:.0f}" y="28" text-anchor="middle" font-size="18" '
        f'font-family="sans-serif">{_escape(title)}</text>',
        # axes
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="#333"/>',
        f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="#333"/>',
        f'<text x="18" y="{mt + ph / 2:.0f}" text-anchor="middle" font-size="13" '
        f'font-family="sans-serif" transform="rotate(-90 18 {mt + ph / 2:.0f})">'
        f'{_escape(y_label)}</text>',
        f'<text x="{ml + pw / 2:.0f}" y="{height - 12}" text-anchor="middle" '
        f'font-size="13" font-family="sans-serif">date</text>',
    ]
    # y ticks
    for k in range(5):
        v = y_lo + k * (y_hi - y_lo) / 4
        y = py(v)
        parts.append(f'<line x1="{ml - 4}" y1="{y:.1f}" x2="{ml}" y2="{y:.1f}" stroke="#333"/>')
        parts.append(f'<text x="{ml - 8}" y="{y + 4:.1f}" text-anchor="end" font-size="11" '
                     f'font-family="sans-serif">{v:,.1f}</text>')
    # x ticks: first, middle, last
    for i in sorted({0, len(dates) // 2, len(dates) - 1}):
        x = px(i)
        parts.append(f'<line x1="{x:.1f}" y1="{mt + ph}" x2="{x:.1f}" y2="{mt + ph + 4}" stroke="#333"/>')
        parts.append(f'<text x="{x:.1f}" y="{mt + ph + 18}" text-anchor="middle" font-size="11" '
                     f'font-family="sans-serif">{dates[i].isoformat()}</text>')
    # series + legend
    for s, (label, ys) in enumerate(series):
        color = _COLORS[s % len(_COLORS)]
        points = " ".join(f"{px(i):.1f},{py(float(v)):.1f}" for i, v in enumerate(ys))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{points}"/>')
        lx, ly = ml + 12, mt + 16 + 18 * s
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 30}" y="{ly}" font-size="12" '
                     f'font-family="sans-serif">{_escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
