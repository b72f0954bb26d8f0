"""Plain-text renderings of point configurations (SVG and CSV).

Outputs are deterministic: fixed float precision, points emitted in
stored order, no timestamps.
"""

from __future__ import annotations

from .points import PointConfiguration

SVG_SCALE = 24.0


def _as_list(configs):
    if isinstance(configs, PointConfiguration):
        return [configs]
    configs = list(configs)
    if not configs:
        raise ValueError("nothing to render")
    return configs


def svg_document(configs, radius: float) -> str:
    """One SVG document: per sample, the region border plus a circle of
    radius r/2 around each point, so interacting pairs visibly overlap.
    Several samples are laid out left to right."""
    configs = _as_list(configs)
    gap = 0.5
    total_w = sum(c.region.width for c in configs) + gap * (len(configs) - 1)
    total_h = max(c.region.height for c in configs)
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{total_w * SVG_SCALE:.0f}" height="{total_h * SVG_SCALE:.0f}" '
        f'viewBox="0 0 {total_w:.4f} {total_h:.4f}">'
    ]
    half = radius / 2.0
    stroke = max(half / 12.0, 0.004)
    offset = 0.0
    for config in configs:
        w = config.region.width
        h = config.region.height
        lines.append(
            f'<rect x="{offset:.4f}" y="0" width="{w:.4f}" height="{h:.4f}" '
            f'fill="white" stroke="black" stroke-width="{0.01 * max(w, h):.4f}"/>'
        )
        for x, y in config.points:
            # SVG's y axis points down; flip so plots match math axes.
            lines.append(
                f'<circle cx="{offset + x:.4f}" cy="{h - y:.4f}" r="{half:.4f}" '
                f'fill="none" stroke="black" stroke-width="{stroke:.5f}"/>'
            )
        offset += w + gap
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(configs, path, radius: float) -> None:
    with open(path, "w") as fh:
        fh.write(svg_document(configs, radius))


def write_csv(configs, path) -> None:
    """One line per point: sample_index,x,y (no header)."""
    configs = _as_list(configs)
    with open(path, "w") as fh:
        for ix, config in enumerate(configs):
            for x, y in config.points:
                fh.write(f"{ix},{x:.9f},{y:.9f}\n")
