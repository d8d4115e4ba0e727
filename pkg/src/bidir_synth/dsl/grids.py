"""Six grid operations for ARC symmetry tasks.

Rotations and flips are directly invertible; the two stacking operations are
conditionally invertible given either block.
"""
from __future__ import annotations

import numpy as np

from ..registry import FunctionDef, Registry
from ..values import GRID, DomainError, Grid


def rotate_cw(g: Grid) -> Grid:
    return Grid._trusted(np.rot90(g.cells, -1))


def rotate_ccw(g: Grid) -> Grid:
    return Grid._trusted(np.rot90(g.cells, 1))


def flip_h(g: Grid) -> Grid:
    return Grid._trusted(g.cells[:, ::-1])


def flip_v(g: Grid) -> Grid:
    return Grid._trusted(g.cells[::-1, :])


def hstack(left: Grid, right: Grid) -> Grid:
    if left.height != right.height:
        raise DomainError(f"hstack: heights {left.height} and {right.height} differ")
    return Grid._trusted(np.hstack([left.cells, right.cells]))


def vstack(top: Grid, bottom: Grid) -> Grid:
    if top.width != bottom.width:
        raise DomainError(f"vstack: widths {top.width} and {bottom.width} differ")
    return Grid._trusted(np.vstack([top.cells, bottom.cells]))


def hstack_cond_inverse(out: Grid, known: Grid, known_position: int) -> Grid:
    """The block that, stacked with ``known``, reproduces ``out``."""
    h, w = out.shape
    kh, kw = known.shape
    if kh != h or kw >= w:
        raise DomainError(f"hstack^-1: known block {known.shape} does not fit {out.shape}")
    if known_position == 0:
        if not np.array_equal(out.cells[:, :kw], known.cells):
            raise DomainError("hstack^-1: left block does not match")
        return Grid._trusted(out.cells[:, kw:])
    if not np.array_equal(out.cells[:, w - kw:], known.cells):
        raise DomainError("hstack^-1: right block does not match")
    return Grid._trusted(out.cells[:, : w - kw])


def vstack_cond_inverse(out: Grid, known: Grid, known_position: int) -> Grid:
    h, w = out.shape
    kh, kw = known.shape
    if kw != w or kh >= h:
        raise DomainError(f"vstack^-1: known block {known.shape} does not fit {out.shape}")
    if known_position == 0:
        if not np.array_equal(out.cells[:kh], known.cells):
            raise DomainError("vstack^-1: top block does not match")
        return Grid._trusted(out.cells[kh:])
    if not np.array_equal(out.cells[h - kh:], known.cells):
        raise DomainError("vstack^-1: bottom block does not match")
    return Grid._trusted(out.cells[: h - kh])


def _stack_def(name, fwd, cond):
    return FunctionDef(
        name,
        (GRID, GRID),
        GRID,
        fwd,
        cond_inverses={
            (0,): lambda out, known: (cond(out, known[0], 0),),
            (1,): lambda out, known: (cond(out, known[0], 1),),
        },
    )


def grid_registry() -> Registry:
    return Registry(
        "grids",
        [
            FunctionDef("rotate_cw", (GRID,), GRID, rotate_cw, inverse=lambda o: (rotate_ccw(o),)),
            FunctionDef("rotate_ccw", (GRID,), GRID, rotate_ccw, inverse=lambda o: (rotate_cw(o),)),
            FunctionDef("flip_h", (GRID,), GRID, flip_h, inverse=lambda o: (flip_h(o),)),
            FunctionDef("flip_v", (GRID,), GRID, flip_v, inverse=lambda o: (flip_v(o),)),
            _stack_def("hstack", hstack, hstack_cond_inverse),
            _stack_def("vstack", vstack, vstack_cond_inverse),
        ],
    )
