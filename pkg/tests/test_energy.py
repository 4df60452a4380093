"""Cross-correlation scores: cascade vs real-space and direct-sum references."""

import numpy as np
import pytest

from conftest import clean_translations, indicator_assets, lattice_rotations_2d, lattice_rotations_3d
from geofield import oracle
from geofield.descriptor import ComplexField, KernelSpec, SampleGrid, indicator_field
from geofield.energy import (
    Configuration,
    PartAsset,
    evaluate,
    rotational_gradient,
    score_at,
    score_field,
    translational_gradient,
    _wrap_mask,
)
from geofield.scenes import box_mesh, grid_for_pair, random_polygon
from geofield.spectral import forward_dft, inverse_dft, truncate, zero_padded

SEED = 20260814


def small_kernel():
    return KernelSpec(sigma=0.5, lambda_in=1.0, lambda_out=3.0)


# ---------------------------------------------------------------------------
# configuration and asset contracts


def test_configuration_from_angle():
    cfg = Configuration.from_angle(np.pi / 2, [1.0, -2.0])
    np.testing.assert_allclose(cfg.rotation, [[0, -1], [1, 0]], atol=1e-12)
    assert cfg.dimension == 2


def test_configuration_rejects_reflection():
    with pytest.raises(ValueError):
        Configuration(np.diag([1.0, -1.0]), [0.0, 0.0])


def test_asset_vector_spectrum_contract(small_pair_2d):
    f1, f2 = small_pair_2d["fields"]
    fixed = PartAsset.from_field("fixed", f1)
    assert not fixed.movable and fixed.vector is None
    moving = PartAsset.from_field("moving", f2, movable=True)
    assert moving.vector is not None
    with pytest.raises(ValueError):
        PartAsset("x", fixed.spectrum, movable=True)
    with pytest.raises(ValueError):
        PartAsset("x", fixed.spectrum, vector=moving.vector, movable=False)
    assert fixed.full_available
    assert fixed.max_modes() == f1.grid.node_count


def test_asset_budget_errors(small_pair_2d):
    f1, _ = small_pair_2d["fields"]
    capped = PartAsset.from_field("fixed", f1, m_prime=64)
    # a stored full spectrum travels alongside; drop it to model a lean asset
    capped.spectrum = capped.truncated
    assert capped.max_modes() == 64
    capped.window(64)
    capped.window(16)
    with pytest.raises(ValueError):
        capped.window(256)
    with pytest.raises(ValueError):
        capped.window(None)


def test_grid_mismatch_rejected(small_pair_2d, rng):
    a1, _ = small_pair_2d["assets"]
    other_grid = SampleGrid(2, (8, 8), (-1.0, -1.0), 0.25)
    vals = rng.standard_normal(64) + 0j
    stranger = PartAsset.from_field("stranger", ComplexField(other_grid, vals), movable=True)
    with pytest.raises(ValueError):
        score_at(a1, stranger, Configuration.from_angle(0.0, [0, 0]))


# ---------------------------------------------------------------------------
# score vs real-space brute sum (exact at lattice rotations + node translations)


def test_score_matches_brute_2d(small_pair_2d, rng):
    """Compact-support pair: the zero-extended real-space sum is exact."""
    grid = small_pair_2d["grid"]
    fixed, moving = small_pair_2d["fixed"], small_pair_2d["moving"]
    a1, a2 = indicator_assets(fixed, moving, grid)
    f1 = indicator_field(fixed, grid)
    f2 = indicator_field(moving, grid)
    for R in lattice_rotations_2d():
        for t in clean_translations(grid, a1, a2, R, 3, rng):
            got = score_at(a1, a2, Configuration(R, t))
            want = oracle.brute_score(f1, f2, R, t, wrap=False)
            assert got == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_score_matches_brute_wrapping_translation(small_pair_2d):
    """Circular algebra: wrapping node translations agree with the mod-N sum."""
    a1, a2 = small_pair_2d["assets"]
    f1, f2 = small_pair_2d["fields"]
    grid = small_pair_2d["grid"]
    t = np.asarray([25 * grid.spacing, -13 * grid.spacing])
    R = lattice_rotations_2d()[1]
    got = score_at(a1, a2, Configuration(R, t))
    want = oracle.brute_score(f1, f2, R, t, wrap=True)
    assert got == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_score_matches_brute_3d(rng):
    fixed = box_mesh((1.2, 0.8, 0.6))
    moving = box_mesh((0.5, 0.5, 0.9))
    grid = grid_for_pair(fixed, moving, 16)
    a1, a2 = indicator_assets(fixed, moving, grid)
    f1 = indicator_field(fixed, grid)
    f2 = indicator_field(moving, grid)
    for R in [lattice_rotations_3d()[k] for k in (0, 7, 16, 23)]:
        for t in clean_translations(grid, a1, a2, R, 2, rng):
            got = score_at(a1, a2, Configuration(R, t))
            want = oracle.brute_score(f1, f2, R, t, wrap=False)
            assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


# ---------------------------------------------------------------------------
# score vs direct mode sum (exact in t at any budget; exact in R on the lattice)


def test_truncated_score_matches_direct_sum(small_pair_2d, rng):
    """Truncation reads zero outside the window; low-passing the fields first
    makes the naive resum adopt the same convention, and then the two routes
    must agree to roundoff at lattice rotations for any real translation."""
    a1, a2 = small_pair_2d["assets"]
    f1, f2 = small_pair_2d["fields"]
    for m_prime in (16, 64, 256):
        lp1 = inverse_dft(zero_padded(truncate(forward_dft(f1), m_prime)))
        lp2 = inverse_dft(zero_padded(truncate(forward_dft(f2), m_prime)))
        for R in lattice_rotations_2d():
            t = rng.uniform(-0.7, 0.7, size=2)  # any real t, no node snapping
            got = score_at(a1, a2, Configuration(R, t), m_prime)
            want = oracle.cascade_dft(lp1, lp2, R, t, m_prime)
            assert got == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_generic_rotation_tracks_direct_sum(small_pair_2d):
    """Interpolated rotation against the exact band-limited resum.

    Two deliberate approximations separate the routes off the lattice:
    multilinear interpolation of the rotated window and the zero read for
    modes rotated past the window edge. Track, do not equate."""
    a1, a2 = small_pair_2d["assets"]
    f1, f2 = small_pair_2d["fields"]
    cfg = Configuration.from_angle(0.37, [0.25, -0.1])
    got = score_at(a1, a2, cfg, 64)
    want = oracle.cascade_dft(f1, f2, cfg.rotation, cfg.translation, 64)
    assert got == pytest.approx(want, rel=0.3)
    assert got.real * want.real > 0  # same energy sign


def test_full_budget_equals_default(small_pair_2d):
    a1, a2 = small_pair_2d["assets"]
    cfg = Configuration.from_angle(0.0, [0.3, 0.4])
    assert score_at(a1, a2, cfg) == pytest.approx(
        score_at(a1, a2, cfg, a1.grid.node_count), rel=1e-12
    )


# ---------------------------------------------------------------------------
# gradients


def test_translational_gradient_matches_fd(small_pair_2d):
    a1, a2 = small_pair_2d["assets"]
    cfg = Configuration.from_angle(0.6, [0.2, 0.35])

    def scorer(R, t):
        return score_at(a1, a2, Configuration(R, t), 256)

    tg = translational_gradient(a1, a2, cfg, 256)
    fd_t, _ = oracle.fd_gradient(scorer, cfg)
    np.testing.assert_allclose(tg, fd_t, rtol=1e-5, atol=1e-9)


def test_rotational_gradient_matches_fd(small_pair_2d):
    a1, a2 = small_pair_2d["assets"]
    cfg = Configuration.from_angle(0.6, [0.2, 0.35])

    def scorer(R, t):
        return score_at(a1, a2, Configuration(R, t), 256)

    rg = rotational_gradient(a1, a2, cfg, 256)
    _, fd_r = oracle.fd_gradient(scorer, cfg)
    np.testing.assert_allclose(rg, fd_r, rtol=1e-4, atol=1e-9)


def test_rotational_gradient_vector_path_cross_check(small_pair_2d):
    """Moment-spectrum route vs the interp route, full budget.

    Interpolation does not commute with the coordinate weighting, so the
    vector path only tracks; it is kept because it shares no differentiation
    code with the interp path."""
    a1, a2 = small_pair_2d["assets"]
    cfg = Configuration.from_angle(0.45, [0.3, 0.2])

    def scorer(R, t):
        return score_at(a1, a2, Configuration(R, t))

    vector = rotational_gradient(a1, a2, cfg, path="vector")
    _, fd = oracle.fd_gradient(scorer, cfg)
    assert abs(vector[0] - fd[0]) < 0.2 * abs(fd[0])
    assert vector[0].real * fd[0].real > 0
    with pytest.raises(ValueError):
        rotational_gradient(a1, a2, cfg, path="nope")


def test_gradients_3d_match_fd(rng):
    fixed = box_mesh((1.0, 0.7, 0.5))
    moving = box_mesh((0.5, 0.4, 0.8))
    grid = grid_for_pair(fixed, moving, 8)
    a1, a2 = indicator_assets(fixed, moving, grid)
    R = oracle._axis_rotation(3, 2, 0.4) @ oracle._axis_rotation(3, 0, -0.2)
    cfg = Configuration(R, [0.2, -0.1, 0.15])

    def scorer(Rm, t):
        return score_at(a1, a2, Configuration(Rm, t))

    tg = translational_gradient(a1, a2, cfg)
    rg = rotational_gradient(a1, a2, cfg)
    fd_t, fd_r = oracle.fd_gradient(scorer, cfg)
    np.testing.assert_allclose(tg, fd_t, rtol=1e-5, atol=1e-8)
    np.testing.assert_allclose(rg, fd_r, rtol=1e-4, atol=1e-8)


def test_evaluate_packaging(small_pair_2d):
    a1, a2 = small_pair_2d["assets"]
    cfg = Configuration.from_angle(0.2, [0.4, 0.1])
    res = evaluate(a1, a2, cfg, 64)
    assert res.energy == pytest.approx(-res.score.real)
    assert res.modes_used == 64
    assert res.eval_time_us > 0
    assert res.force.shape == (2,) and res.torque.shape == (1,)
    tg = translational_gradient(a1, a2, cfg, 64)
    np.testing.assert_allclose(res.force, np.real(tg), rtol=1e-12)


# ---------------------------------------------------------------------------
# landscapes


def test_score_field_matches_score_at(small_pair_2d, rng):
    a1, a2 = small_pair_2d["assets"]
    grid = small_pair_2d["grid"]
    R = Configuration.from_angle(0.3, [0, 0]).rotation
    land = score_field(a1, a2, R, 64).values.reshape(grid.dims)
    P = grid.points().reshape(grid.dims + (2,))
    for _ in range(12):
        i, j = rng.integers(0, grid.dims[0]), rng.integers(0, grid.dims[1])
        direct = score_at(a1, a2, Configuration(R, P[i, j]), 64)
        assert land[i, j] == pytest.approx(direct, rel=1e-9, abs=1e-12)


def test_score_field_full_matches_brute(rng):
    """Landscape nodes vs the real-space circular sum.

    A node-origin grid makes node coordinates integer multiples of h, so the
    brute sum samples exact nodes and the identity is roundoff-exact at every
    landscape entry, wrapped ones included."""
    fixed = random_polygon(rng, n_vertices=8, r_min=0.5, r_max=0.9)
    moving = random_polygon(rng, n_vertices=6, r_min=0.3, r_max=0.6)
    grid = grid_for_pair(fixed, moving, 16, center="node")
    kernel = small_kernel()
    from geofield.descriptor import affinity_field

    f1 = affinity_field(fixed, grid, kernel)
    f2 = affinity_field(moving, grid, kernel)
    a1 = PartAsset.from_field("fixed", f1)
    a2 = PartAsset.from_field("moving", f2, movable=True)
    R = lattice_rotations_2d()[3]
    land = score_field(a1, a2, R).values.reshape(grid.dims)
    P = grid.points().reshape(grid.dims + (2,))
    scale = np.max(np.abs(land))
    for idx in [(0, 0), (3, 14), (8, 8), (15, 1)]:
        want = oracle.brute_score(f1, f2, R, P[idx], wrap=True)
        assert land[idx] == pytest.approx(want, abs=1e-11 * scale)


def test_wrap_mask_marks_only_seam_touching(small_pair_2d, rng):
    """On unmasked nodes the wrapped and zero-extended sums must coincide
    exactly, compact support being the point of the mask rule."""
    grid = small_pair_2d["grid"]
    fixed, moving = small_pair_2d["fixed"], small_pair_2d["moving"]
    a1, a2 = indicator_assets(fixed, moving, grid)
    f1 = indicator_field(fixed, grid)
    f2 = indicator_field(moving, grid)
    R = lattice_rotations_2d()[1]
    mask = _wrap_mask(grid, a1, a2, R)
    assert mask.shape == grid.dims
    assert mask.any() and not mask.all()
    P = grid.points().reshape(grid.dims + (2,))
    clean_idx = np.argwhere(~mask)
    pick = clean_idx[rng.integers(0, len(clean_idx), size=10)]
    for i, j in pick:
        a = oracle.brute_score(f1, f2, R, P[i, j], wrap=True)
        b = oracle.brute_score(f1, f2, R, P[i, j], wrap=False)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_wrap_mask_empty_without_support_info(small_pair_2d):
    f1, f2 = small_pair_2d["fields"]
    a1 = PartAsset.from_field("fixed", f1)
    a2 = PartAsset.from_field("moving", f2, movable=True)
    assert not _wrap_mask(f1.grid, a1, a2, np.eye(2)).any()


def test_score_field_deterministic(small_pair_2d):
    a1, a2 = small_pair_2d["assets"]
    R = Configuration.from_angle(1.1, [0, 0]).rotation
    v1 = score_field(a1, a2, R, 64).values
    v2 = score_field(a1, a2, R, 64).values
    np.testing.assert_array_equal(v1, v2)


# ---------------------------------------------------------------------------
# indicator algebra: the score of two indicators is the overlap measure


def test_indicator_score_is_overlap_area(rng):
    fixed = random_polygon(rng, n_vertices=8, r_min=0.5, r_max=0.9)
    moving = random_polygon(rng, n_vertices=6, r_min=0.3, r_max=0.6)
    grid = grid_for_pair(fixed, moving, 64)
    a1, a2 = indicator_assets(fixed, moving, grid)
    got = score_at(a1, a2, Configuration.from_angle(0.0, [0.0, 0.0]))
    # counting overlap nodes is an independent estimate of the same area
    n1 = indicator_field(fixed, grid).values.real.astype(bool)
    n2 = indicator_field(moving, grid).values.real.astype(bool)
    count = float(np.sum(n1 & n2)) * grid.cell_volume
    assert got.imag == pytest.approx(0.0, abs=1e-9)
    assert got.real == pytest.approx(count, rel=1e-9, abs=1e-12)
