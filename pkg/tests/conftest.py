"""Shared fixtures: small deterministic assets so module tests stay fast.

Heavy builds (the 512-squared demo) are session-scoped and only constructed
by the tests that need them.
"""

import numpy as np
import pytest

from geofield.descriptor import KernelSpec, affinity_field
from geofield.energy import PartAsset
from geofield.scenes import get_scene, grid_for_pair, random_polygon

SEED = 20260814


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


def indicator_assets(fixed, moving, grid):
    """Indicator-spectrum asset pair (compact support, exact overlap algebra)."""
    from geofield.descriptor import indicator_field

    a1 = PartAsset.from_field("fixed", indicator_field(fixed, grid),
                              solid_box=fixed.bbox)
    a2 = PartAsset.from_field("moving", indicator_field(moving, grid),
                              movable=True, solid_box=moving.bbox)
    return a1, a2


def lattice_rotations_2d():
    out = []
    for k in range(4):
        c, s = np.cos(np.pi / 2 * k), np.sin(np.pi / 2 * k)
        out.append(np.round(np.array([[c, -s], [s, c]])))
    return out


def lattice_rotations_3d():
    """The 24 proper rotations of the cube (signed permutation, det +1)."""
    from itertools import permutations

    out = []
    for perm in permutations(range(3)):
        for signs in np.ndindex(2, 2, 2):
            R = np.zeros((3, 3))
            for row, col in enumerate(perm):
                R[row, col] = -1.0 if signs[row] else 1.0
            if np.linalg.det(R) > 0.5:
                out.append(R)
    return out


def clean_translations(grid, asset1, asset2, R, count, rng):
    """Integer-cell translations that keep the pair off the wrap seam."""
    from geofield.energy import _rotated_box

    glo, ghi = grid.box()
    rlo, rhi = _rotated_box(asset2.solid_box, R)
    r1 = 0.5 * float(np.linalg.norm(asset1.solid_box[1] - asset1.solid_box[0]))
    lo = glo + r1 - rlo
    hi = ghi - r1 - rhi
    klo = np.ceil(lo / grid.spacing).astype(int)
    khi = np.floor(hi / grid.spacing).astype(int)
    if np.any(khi < klo):
        raise ValueError("no clean translations for this pair")
    ks = np.stack(
        [rng.integers(klo[a], khi[a] + 1, size=count) for a in range(grid.dimension)],
        axis=1,
    )
    return ks * grid.spacing


@pytest.fixture(scope="session")
def small_pair_2d():
    """Two random simple polygons on a shared 32-squared grid, skeletal kernel."""
    rng = np.random.default_rng(SEED)
    fixed = random_polygon(rng, n_vertices=9, r_min=0.45, r_max=0.8)
    moving = random_polygon(rng, n_vertices=7, r_min=0.3, r_max=0.55)
    grid = grid_for_pair(fixed, moving, 32)
    kernel = KernelSpec(sigma=0.5, lambda_in=1.0, lambda_out=3.0)
    f1 = affinity_field(fixed, grid, kernel)
    f2 = affinity_field(moving, grid, kernel)
    a1 = PartAsset.from_field("fixed", f1, solid_box=fixed.bbox)
    a2 = PartAsset.from_field("moving", f2, movable=True, solid_box=moving.bbox)
    return {"fixed": fixed, "moving": moving, "grid": grid, "kernel": kernel,
            "fields": (f1, f2), "assets": (a1, a2)}


@pytest.fixture(scope="session")
def demo_scene_256():
    """The 2D demo pair at service resolution; one build per test session.

    Routed through the service-side cache so websocket tests reuse the same
    build instead of paying for a second one.
    """
    from geofield.service import scene_assets

    scene, a1, a2 = scene_assets("peg2d", 256)
    return {"scene": scene, "grid": a1.grid, "assets": (a1, a2)}
