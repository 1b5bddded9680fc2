import functools
import math

from typing import Iterator, Tuple


TWO_PI = 2.0 * math.pi

# Slack applied to inclusive range and wedge boundaries.
EPS = 1e-9

Cell = Tuple[int, int]


@functools.lru_cache(maxsize=65536)
def bearing(dx: int, dy: int) -> float:
    """Angle of the offset (dx, dy) relative to +x, y pointing down."""
    return math.atan2(dy, dx)


def in_wedge(angle: float, phi: float, half_fov: float) -> bool:
    if half_fov + EPS >= math.pi:
        return True
    low = phi - half_fov - EPS
    high = phi + half_fov + EPS
    return any(
        low <= value <= high
        for value in (angle - TWO_PI, angle, angle + TWO_PI)
    )


def within_range(d2: int, range_sq: float, cell_area: float) -> bool:
    return d2 * cell_area <= range_sq


def supercover(start: Cell, end: Cell) -> Iterator[Cell]:
    """Yield every cell whose closed square the segment between the two
    cell centers touches, starting with `start` and ending with `end`.

    Where the segment passes exactly through a cell corner both side cells
    are yielded, so sight never leaks between diagonal neighbours.
    """
    x, y = start
    x1, y1 = end
    dx = x1 - x
    dy = y1 - y
    xstep = 1 if dx >= 0 else -1
    ystep = 1 if dy >= 0 else -1
    dx = abs(dx)
    dy = abs(dy)
    ddx = 2 * dx
    ddy = 2 * dy

    yield x, y
    if ddx >= ddy:
        error = errorprev = dx
        for _ in range(dx):
            x += xstep
            error += ddy
            if error > ddx:
                y += ystep
                error -= ddx
                if error + errorprev < ddx:
                    yield x, y - ystep
                elif error + errorprev > ddx:
                    yield x - xstep, y
                else:
                    yield x, y - ystep
                    yield x - xstep, y
            yield x, y
            errorprev = error
    else:
        error = errorprev = dy
        for _ in range(dy):
            y += ystep
            error += ddx
            if error > ddy:
                x += xstep
                error -= ddy
                if error + errorprev < ddy:
                    yield x - xstep, y
                elif error + errorprev > ddy:
                    yield x, y - ystep
                else:
                    yield x - xstep, y
                    yield x, y - ystep
            yield x, y
            errorprev = error
