"""Dependency-free SVG output: fingerprint radar pages and the style space.

Output is deterministic: fixed element order, fixed float formatting, no
timestamps. Identical inputs give byte-identical documents.
"""

from __future__ import annotations

import math

from .atlas import PoetProfile, Projection
from .errors import ConfigError

AXIS_LABELS = {
    "hardness": "hardness",
    "sonority": "sonority",
    "sibilance": "sibilance",
    "vowel_ratio": "vowel ratio",
    "entropy": "entropy",
    "cluster_ratio": "cluster ratio",
}
#: fixed axis order shared by every fingerprint panel
AXIS_ORDER = ("hardness", "sonority", "sibilance", "vowel_ratio", "entropy", "cluster_ratio")

_PANEL_W = 240
_PANEL_H = 250
_RADIUS = 72
_GRID_COLS = 4

_POINT_FMT = "{:.2f}"


def _esc(text: str) -> str:
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _axis_angle(k: int) -> float:
    # axis 0 points up; axes proceed clockwise in fixed order
    return -math.pi / 2 + 2 * math.pi * k / len(AXIS_ORDER)


def _panel(profile: PoetProfile, x0: float, y0: float) -> tuple[list[str], bool]:
    cx, cy = x0 + _PANEL_W / 2, y0 + 118
    parts: list[str] = []
    has_missing = False
    # rings at 0.25/0.5/0.75/1.0 plus spokes
    for frac in (0.25, 0.5, 0.75, 1.0):
        pts = []
        for k in range(len(AXIS_ORDER)):
            a = _axis_angle(k)
            pts.append(
                f"{_POINT_FMT.format(cx + _RADIUS * frac * math.cos(a))},{_POINT_FMT.format(cy + _RADIUS * frac * math.sin(a))}"
            )
        parts.append(f'<polygon points="{" ".join(pts)}" fill="none" stroke="#dddddd" stroke-width="0.7"/>')
    for k, metric in enumerate(AXIS_ORDER):
        a = _axis_angle(k)
        ex, ey = cx + _RADIUS * math.cos(a), cy + _RADIUS * math.sin(a)
        parts.append(
            f'<line x1="{_POINT_FMT.format(cx)}" y1="{_POINT_FMT.format(cy)}" x2="{_POINT_FMT.format(ex)}" y2="{_POINT_FMT.format(ey)}" stroke="#bbbbbb" stroke-width="0.7"/>'
        )
        lx, ly = cx + (_RADIUS + 14) * math.cos(a), cy + (_RADIUS + 12) * math.sin(a)
        parts.append(
            f'<text x="{_POINT_FMT.format(lx)}" y="{_POINT_FMT.format(ly)}" text-anchor="middle" font-size="8" font-family="monospace" fill="#555555">{_esc(AXIS_LABELS[metric])}</text>'
        )
    # the value polygon; missing axes sit at 0 and get an open marker
    pts = []
    markers: list[str] = []
    for k, metric in enumerate(AXIS_ORDER):
        value = profile.normalized[metric]
        if value is None:
            value = 0.0
            has_missing = True
            a = _axis_angle(k)
            mx, my = cx + 4 * math.cos(a), cy + 4 * math.sin(a)
            markers.append(
                f'<circle cx="{_POINT_FMT.format(mx)}" cy="{_POINT_FMT.format(my)}" r="3" fill="none" stroke="#cc3333" stroke-width="1"/>'
            )
        a = _axis_angle(k)
        pts.append(
            f"{_POINT_FMT.format(cx + _RADIUS * value * math.cos(a))},{_POINT_FMT.format(cy + _RADIUS * value * math.sin(a))}"
        )
    parts.append(
        f'<polygon points="{" ".join(pts)}" fill="#3366aa" fill-opacity="0.25" stroke="#3366aa" stroke-width="1.4"/>'
    )
    parts.extend(markers)
    parts.append(
        f'<text x="{_POINT_FMT.format(x0 + _PANEL_W / 2)}" y="{_POINT_FMT.format(y0 + 16)}" text-anchor="middle" font-size="11" font-family="monospace">{_esc(profile.poet_id)}</text>'
    )
    return parts, has_missing


def render_fingerprint(profiles: list[PoetProfile] | PoetProfile, per_page: int = 12) -> list[str]:
    """Radar fingerprint pages, 8-12 panels per page, fixed axis order.

    Returns one SVG document per page. Missing normalized values are
    drawn at radius 0 with an open marker and a legend note.
    """
    if isinstance(profiles, PoetProfile):
        profiles = [profiles]
    if not profiles:
        raise ConfigError("no profiles to render")
    if not (8 <= per_page <= 12):
        raise ConfigError(f"per_page must be within [8, 12], got {per_page}")
    pages: list[str] = []
    n_pages = math.ceil(len(profiles) / per_page)
    for page_idx in range(n_pages):
        chunk = profiles[page_idx * per_page : (page_idx + 1) * per_page]
        cols = min(_GRID_COLS, len(chunk))
        rows = math.ceil(len(chunk) / cols)
        width = cols * _PANEL_W
        height = rows * _PANEL_H + 24
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
            '<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>',
        ]
        any_missing = False
        for i, profile in enumerate(chunk):
            r, c = divmod(i, cols)
            panel_parts, has_missing = _panel(profile, c * _PANEL_W, r * _PANEL_H)
            parts.extend(panel_parts)
            any_missing = any_missing or has_missing
        if any_missing:
            parts.append(
                f'<text x="8" y="{height - 8}" font-size="9" font-family="monospace" fill="#cc3333">open marker: metric undefined for this poet (axis drawn at 0)</text>'
            )
        parts.append("</svg>")
        pages.append("\n".join(parts) + "\n")
    return pages


_SPACE_W = 720
_SPACE_H = 520
_SPACE_MARGIN = 60
_SPACE_LEGEND_W = 170

_HIGHLIGHT_COLORS = ("#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2")


def render_space(projection: Projection, highlight: list[str] | None = None) -> str:
    """PC1/PC2 scatter: grey field, colored labeled highlights, legend outside.

    The svg root carries the affine viewport mapping as data attributes
    (data-xmin/xmax/ymin/ymax and the pixel box) so coordinates can be
    recovered from the document.
    """
    highlight = sorted(highlight) if highlight else []
    coords = projection.coordinate_pairs()
    xs = [c[0] for c in coords.values()]
    ys = [c[1] for c in coords.values()]
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = min(ys), max(ys)
    if xmax <= xmin:
        xmin, xmax = xmin - 1.0, xmax + 1.0
    if ymax <= ymin:
        ymin, ymax = ymin - 1.0, ymax + 1.0
    pad_x = 0.05 * (xmax - xmin)
    pad_y = 0.05 * (ymax - ymin)
    xmin, xmax = xmin - pad_x, xmax + pad_x
    ymin, ymax = ymin - pad_y, ymax + pad_y

    left, top = _SPACE_MARGIN, 40
    right = _SPACE_W - _SPACE_LEGEND_W
    bottom = _SPACE_H - _SPACE_MARGIN

    def sx(x: float) -> float:
        return left + (x - xmin) / (xmax - xmin) * (right - left)

    def sy(y: float) -> float:
        return bottom - (y - ymin) / (ymax - ymin) * (bottom - top)

    ratios = projection.explained_variance_ratio
    pc1_share = ratios[0] * 100 if len(ratios) else 0.0
    pc2_share = ratios[1] * 100 if len(ratios) > 1 else 0.0
    parts = [
        (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SPACE_W}" height="{_SPACE_H}" '
            f'viewBox="0 0 {_SPACE_W} {_SPACE_H}" data-xmin="{xmin!r}" data-xmax="{xmax!r}" '
            f'data-ymin="{ymin!r}" data-ymax="{ymax!r}" data-left="{left}" data-right="{right}" '
            f'data-top="{top}" data-bottom="{bottom}">'
        ),
        '<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>',
        f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" fill="none" stroke="#cccccc"/>',
        f'<text x="{(left + right) / 2:.1f}" y="{_SPACE_H - 18}" text-anchor="middle" font-size="12" font-family="monospace">PC1 ({pc1_share:.1f}% of variance)</text>',
        f'<text x="18" y="{(top + bottom) / 2:.1f}" text-anchor="middle" font-size="12" font-family="monospace" transform="rotate(-90 18 {(top + bottom) / 2:.1f})">PC2 ({pc2_share:.1f}% of variance)</text>',
    ]
    highlighted = [p for p in highlight if p in coords]
    grey = [p for p in sorted(coords) if p not in set(highlighted)]
    for poet in grey:
        x, y = coords[poet]
        parts.append(
            f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="#a0a0a0" fill-opacity="0.7" data-poet="{_esc(poet)}"/>'
        )
    for idx, poet in enumerate(highlighted):
        x, y = coords[poet]
        color = _HIGHLIGHT_COLORS[idx % len(_HIGHLIGHT_COLORS)]
        parts.append(
            f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="5" fill="{color}" data-poet="{_esc(poet)}"/>'
        )
        parts.append(
            f'<text x="{sx(x) + 7:.2f}" y="{sy(y) - 6:.2f}" font-size="10" font-family="monospace" fill="{color}">{_esc(poet)}</text>'
        )
    # legend outside the plotting box
    lx = right + 18
    ly = top + 10
    parts.append(
        f'<text x="{lx}" y="{ly}" font-size="11" font-family="monospace" fill="#444444">legend</text>'
    )
    parts.append(
        f'<circle cx="{lx + 6}" cy="{ly + 18}" r="3" fill="#a0a0a0" fill-opacity="0.7"/>'
    )
    parts.append(
        f'<text x="{lx + 16}" y="{ly + 22}" font-size="10" font-family="monospace" fill="#444444">field</text>'
    )
    for idx, poet in enumerate(highlighted):
        color = _HIGHLIGHT_COLORS[idx % len(_HIGHLIGHT_COLORS)]
        yy = ly + 36 + idx * 16
        parts.append(f'<circle cx="{lx + 6}" cy="{yy}" r="4" fill="{color}"/>')
        parts.append(
            f'<text x="{lx + 16}" y="{yy + 4}" font-size="10" font-family="monospace" fill="#444444">{_esc(poet)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
