import math

from typing import Dict, Optional, Sequence

from .exceptions import ResultError
from .fitness import CoverageMetrics
from .gridworld import CellTag, Scenario
from .visibility import Gene


CELL_FILLS: Dict[CellTag, str] = {
    CellTag.OBSTACLE: '#404040',
    CellTag.BLOCKED: '#a0a0a0',
    CellTag.STREET: '#d9d9d9',
    CellTag.FREE: '#ffffff',
    CellTag.SENSOR: '#ffffff',
}
PRIORITY_FILL = '#f4c28f'
OPACITY_FILL = '#9db4d8'
WEDGE_FILL = '#1f77b4'
SENSOR_FILL = '#c00000'

LEGEND_HEIGHT = 24


class SvgCanvas:
    """Accumulates SVG elements as text."""

    def __init__(self, width: float, height: float):
        self.width = width
        self.height = height
        self._elements = []

    def rect(self, x: float, y: float, width: float, height: float, fill: str):
        self._elements.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{width:.2f}" '
            f'height="{height:.2f}" fill="{fill}"/>'
        )

    def circle(
        self,
        cx: float,
        cy: float,
        r: float,
        fill: str,
        extra: str = ''
    ):
        self._elements.append(
            f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{r:.2f}" '
            f'fill="{fill}" {extra}/>'
        )

    def path(self, d: str, fill: str, extra: str = ''):
        self._elements.append(f'<path d="{d}" fill="{fill}" {extra}/>')

    def text(self, x: float, y: float, string: str, extra: str = ''):
        self._elements.append(
            f'<text x="{x:.2f}" y="{y:.2f}" {extra}>{string}</text>'
        )

    def get_svg(self) -> str:
        head = (
            '<?xml version="1.0" standalone="no"?>\n'
            f'<svg version="1.1" width="{self.width:.0f}" '
            f'height="{self.height:.0f}" '
            f'viewBox="0 0 {self.width:.0f} {self.height:.0f}" '
            'xmlns="http://www.w3.org/2000/svg">\n'
        )
        return head + '\n'.join(self._elements) + '\n</svg>\n'


def _wedge(
    canvas: SvgCanvas,
    cx: float,
    cy: float,
    radius: float,
    phi: float,
    fov: float
):
    style = f'class="wedge" fill-opacity="0.25" stroke="{WEDGE_FILL}"'
    if fov >= 2 * math.pi - 1e-9:
        canvas.circle(cx, cy, radius, WEDGE_FILL, style)
        return
    start = phi - fov / 2
    end = phi + fov / 2
    x0 = cx + radius * math.cos(start)
    y0 = cy + radius * math.sin(start)
    x1 = cx + radius * math.cos(end)
    y1 = cy + radius * math.sin(end)
    large = 1 if fov > math.pi else 0
    canvas.path(
        f'M {cx:.2f} {cy:.2f} L {x0:.2f} {y0:.2f} '
        f'A {radius:.2f} {radius:.2f} 0 {large} 1 {x1:.2f} {y1:.2f} Z',
        WEDGE_FILL,
        style
    )


def render_svg(
    scenario: Scenario,
    genes: Sequence[Gene],
    metrics: Optional[CoverageMetrics] = None,
    *,
    cell_px: float = 10.0
) -> str:
    """Draw the map with one field of view wedge per sensor.

    Raises:
        ResultError: If a gene lies outside the grid.
    """
    for gene in genes:
        if not scenario.in_bounds(gene.pos):
            raise ResultError('gene {} outside the grid'.format(gene.pos))

    width = scenario.width * cell_px
    height = scenario.height * cell_px
    canvas = SvgCanvas(width, height + LEGEND_HEIGHT)

    for y in range(scenario.height):
        for x in range(scenario.width):
            cell = (x, y)
            if cell in scenario.priority:
                fill = PRIORITY_FILL
            elif cell in scenario.opacity:
                fill = OPACITY_FILL
            else:
                fill = CELL_FILLS[scenario.tag(cell)]
            canvas.rect(x * cell_px, y * cell_px, cell_px, cell_px, fill)

    spec = scenario.sensor_spec
    radius = spec.range_m / scenario.grid_len * cell_px
    for gene in genes:
        cx = (gene.x + 0.5) * cell_px
        cy = (gene.y + 0.5) * cell_px
        _wedge(canvas, cx, cy, radius, gene.phi, spec.fov_rad)
        canvas.circle(cx, cy, cell_px / 3, SENSOR_FILL, 'class="sensor"')

    if metrics is not None:
        c_eff = 'n/a' if metrics.c_eff is None else f'{metrics.c_eff:.3f}'
        legend = f'c={metrics.c:.3f} c_eff={c_eff} N_sens={metrics.n_sens}'
    else:
        legend = f'N_sens={len(genes)}'
    canvas.text(
        4,
        height + LEGEND_HEIGHT - 8,
        legend,
        'class="legend" font-family="sans-serif" font-size="12"'
    )
    return canvas.get_svg()
