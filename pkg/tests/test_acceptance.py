"""Release gate: one test per acceptance criterion, each a single PASS/FAIL.

Every criterion is asserted exactly as stated, including the two that fail
for structural reasons on this kernel family (the sigma limit is not the
indicator for the z^-2 kernel, and truncated landscapes are dominated by the
exterior-tail penalty in 2D). Those stay red on purpose; companion tests
freeze the measured behavior so any silent drift still fails the suite.
"""

import base64
import json
import time

import numpy as np
import pytest

from conftest import (
    SEED,
    clean_translations,
    indicator_assets,
    lattice_rotations_2d,
    lattice_rotations_3d,
)
from geofield import backend, oracle
from geofield.cli import main as cli_main
from geofield.descriptor import (
    ComplexField,
    IntegrationPolicy,
    KernelSpec,
    affinity_field,
    indicator_field,
    point_membership,
)
from geofield.energy import (
    Configuration,
    PartAsset,
    score_at,
    score_field,
    rotational_gradient,
    translational_gradient,
)
from geofield.scenes import (
    box_mesh,
    get_scene,
    grid_for_pair,
    icosphere,
    lbracket,
    random_polygon,
)
from geofield.spectral import forward_dft, inverse_dft


def report(label, ok, detail):
    print(f"[{label}] {'PASS' if ok else 'FAIL'}  {detail}")
    return detail


def rot2(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def masked_argmax(land, dims):
    re = np.real(land.values).reshape(dims)
    re = np.where(land.wrap_mask, -np.inf, re)
    return np.unravel_index(np.argmax(re), dims)


@pytest.fixture(scope="module")
def demo512():
    scene = get_scene("peg2d")
    a1, a2 = scene.build_assets(512)
    return {"scene": scene, "grid": a1.grid, "assets": (a1, a2)}


@pytest.fixture(scope="module")
def bench_manifests(tmp_path_factory):
    d3 = tmp_path_factory.mktemp("peg3d32")
    d2 = tmp_path_factory.mktemp("peg2d256")
    assert cli_main(["precompute", "--scene", "peg3d", "--grid", "32",
                     "--modes", "4096", "--out", str(d3)]) == 0
    assert cli_main(["precompute", "--scene", "peg2d", "--grid", "256",
                     "--modes", "16384", "--out", str(d2)]) == 0
    return {"3d": str(d3), "2d": str(d2)}


def test_criterion_01_full_spectrum_matches_brute_oracle():
    """Engine score vs direct spatial resum on 7 part pairs, 100 configs each."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED + 1)
    pairs = []
    for k in range(5):
        fixed = random_polygon(rng, n_vertices=int(rng.integers(6, 11)),
                               r_min=0.45, r_max=0.85)
        moving = random_polygon(rng, n_vertices=int(rng.integers(5, 9)),
                                r_min=0.3, r_max=0.6)
        pairs.append((f"poly{k}", fixed, moving))
    pairs.append(("box+icosphere", box_mesh((1.0, 1.2, 0.8)), icosphere(0.5)))
    pairs.append(("lbracket+box", lbracket(0.4), box_mesh((0.5, 0.4, 0.3))))

    worst = 0.0
    for name, fixed, moving in pairs:
        grid = grid_for_pair(fixed, moving, 32)
        a1, a2 = indicator_assets(fixed, moving, grid)
        f1, f2 = indicator_field(fixed, grid), indicator_field(moving, grid)
        rots = lattice_rotations_2d() if grid.dimension == 2 else lattice_rotations_3d()
        n, errs, scale = 0, 0.0, 0.0
        while n < 100:
            R = rots[rng.integers(len(rots))]
            for t in clean_translations(grid, a1, a2, R, 10, rng):
                s = score_at(a1, a2, Configuration(R, t))
                b = oracle.brute_score(f1, f2, R, t)
                errs = max(errs, abs(s - b))
                scale = max(scale, abs(b))
                n += 1
        worst = max(worst, errs / scale)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 120.0
    detail = report("criterion 1", ok,
                    f"worst rel {worst:.2e} (limit 1e-9), {elapsed:.1f}s (limit 120s)")
    assert ok, detail


def test_criterion_02_membership_matches_ray_parity():
    """Winding classification vs ray-cast parity, 10^4 off-boundary points each."""
    rng = np.random.default_rng(SEED + 2)
    # depth 24 lets near-boundary points (margin 1e-6 of the diagonal)
    # refine far enough; each leaf is an exact solid angle either way
    policy = IntegrationPolicy(max_recursion_depth=24)
    details = []
    ok = True
    for name, solid in (("cube", box_mesh((1.0, 1.0, 1.0))),
                        ("icosphere", icosphere(0.5)),
                        ("lbracket", lbracket(0.4))):
        lo, hi = solid.bbox
        diag = float(np.linalg.norm(hi - lo))
        span = hi - lo
        pts = []
        while len(pts) < 10_000:
            P = lo - 0.1 * span + rng.uniform(size=(12_000, 3)) * 1.2 * span
            d = backend.distance_batch(solid, P)
            pts.extend(P[d >= 1e-6 * diag].tolist())
        P = np.asarray(pts[:10_000])
        w = point_membership(solid, P, policy)
        cast = oracle.raycast_pmc(solid, P, seed=SEED)
        agree = float(np.mean((w > 0.5) == cast))
        din = float(np.abs(w[cast] - 1.0).max())
        dout = float(np.abs(w[~cast]).max())
        ok = ok and agree == 1.0 and din <= 0.05 and dout <= 0.05
        details.append(f"{name}: agree {agree:.4f}, in dev {din:.1e}, out dev {dout:.1e}")
    detail = report("criterion 2", ok, "; ".join(details))
    assert ok, detail


def test_criterion_03_gradients_match_finite_differences(demo_scene_256):
    """Analytic force/torque vs central differences, 50 random configurations."""
    a1, a2 = demo_scene_256["assets"]
    rng = np.random.default_rng(SEED + 3)
    scorer = lambda R, t: score_at(a1, a2, Configuration(R, t))
    t0 = time.perf_counter()
    wt = wr = 0.0
    for _ in range(50):
        cfg = Configuration.from_angle(rng.uniform(0, 2 * np.pi),
                                       rng.uniform(-0.8, 0.8, 2))
        tg = translational_gradient(a1, a2, cfg)
        rg = rotational_gradient(a1, a2, cfg)
        fdt, fdr = oracle.fd_gradient(scorer, cfg)
        wt = max(wt, np.linalg.norm(tg - fdt) / np.linalg.norm(fdt))
        wr = max(wr, abs(rg[0] - fdr[0]) / abs(fdr[0]))
    elapsed = time.perf_counter() - t0
    ok = wt <= 1e-4 and wr <= 1e-3 and elapsed < 60.0
    detail = report("criterion 3", ok,
                    f"trans rel {wt:.2e} (limit 1e-4), rot rel {wr:.2e} (limit 1e-3), "
                    f"{elapsed:.1f}s (limit 60s)")
    assert ok, detail


def test_criterion_04_indicator_score_is_overlap_volume():
    """Gap-function contract: score == brute overlap within one cell volume."""
    rng = np.random.default_rng(SEED + 4)
    worst_by_class = {}

    fixed = random_polygon(rng, n_vertices=8, r_min=0.45, r_max=0.85)
    moving = random_polygon(rng, n_vertices=6, r_min=0.3, r_max=0.6)
    grid = grid_for_pair(fixed, moving, 32)
    a1, a2 = indicator_assets(fixed, moving, grid)
    f1, f2 = indicator_field(fixed, grid), indicator_field(moving, grid)
    dV = grid.cell_volume

    err = 0.0
    for R in lattice_rotations_2d():
        for t in clean_translations(grid, a1, a2, R, 8, rng):
            err = max(err, abs(score_at(a1, a2, Configuration(R, t)).real
                               - oracle.brute_score(f1, f2, R, t).real))
    worst_by_class["2d lattice"] = err

    err = 0.0
    for t in (clean_translations(grid, a1, a2, np.eye(2), 10, rng)
              + rng.uniform(-0.5, 0.5, (10, 2)) * grid.spacing):
        err = max(err, abs(score_at(a1, a2, Configuration(np.eye(2), t)).real
                           - oracle.brute_score(f1, f2, np.eye(2), t).real))
    worst_by_class["2d fractional t"] = err

    err = 0.0
    for _ in range(10):
        R = rot2(rng.uniform(0, 2 * np.pi))
        for t in clean_translations(grid, a1, a2, R, 3, rng):
            err = max(err, abs(score_at(a1, a2, Configuration(R, t)).real
                               - oracle.brute_score(f1, f2, R, t).real))
    worst_by_class["2d generic R"] = err

    bf = box_mesh((1.0, 0.8, 0.9))
    bm = box_mesh((0.5, 0.45, 0.4))
    g3 = grid_for_pair(bf, bm, 16)
    b1, b2 = indicator_assets(bf, bm, g3)
    i1, i2 = indicator_field(bf, g3), indicator_field(bm, g3)
    dV3 = g3.cell_volume
    rots3 = lattice_rotations_3d()
    err = 0.0
    for k in range(6):
        R = rots3[rng.integers(len(rots3))]
        T = clean_translations(g3, b1, b2, R, 4, rng)
        T = T + (rng.uniform(-0.5, 0.5, T.shape) * g3.spacing if k % 2 else 0.0)
        for t in T:
            err = max(err, abs(score_at(b1, b2, Configuration(R, t)).real
                               - oracle.brute_score(i1, i2, R, t).real))
    worst_by_class["3d"] = err

    ok = (worst_by_class["2d lattice"] <= 1e-10
          and worst_by_class["2d fractional t"] <= dV
          and worst_by_class["2d generic R"] <= dV
          and worst_by_class["3d"] <= dV3)
    detail = report(
        "criterion 4", ok,
        ", ".join(f"{k}: {v:.2e}" for k, v in worst_by_class.items())
        + f" (cell volumes 2d {dV:.2e}, 3d {dV3:.2e})")
    assert ok, detail


@pytest.fixture(scope="module")
def sigma_limit_fields():
    ball = icosphere(1.0)
    grid = grid_for_pair(ball, ball, 32, domain=3.0)
    dist = backend.distance_batch(ball, grid.points())
    keep = dist > 2 * grid.spacing
    ind = np.real(indicator_field(ball, grid).values)
    f3 = affinity_field(ball, grid, KernelSpec(sigma=1e3, lambda_in=1.0, lambda_out=3.0))
    return {"grid": grid, "keep": keep, "indicator": ind, "sigma1e3": f3, "ball": ball}


def _affine_pearson(x, y):
    xc = x - x.mean()
    yc = y - y.mean()
    return abs(np.vdot(xc, yc)) / (np.linalg.norm(xc) * np.linalg.norm(yc))


def test_criterion_05_sigma_limit_approaches_indicator(sigma_limit_fields):
    """Large-sigma density vs indicator on the unit ball, off-boundary nodes.

    Expected red: the large-sigma limit of this kernel exists but is not the
    indicator (interior plateau is imaginary, boundary layer persists), so the
    correlation saturates near 0.91 here. Asserted as stated anyway.
    """
    keep = sigma_limit_fields["keep"]
    r = _affine_pearson(sigma_limit_fields["sigma1e3"].values[keep],
                        sigma_limit_fields["indicator"][keep])
    ok = r >= 0.99
    detail = report("criterion 5", ok, f"affine Pearson {r:.4f} (limit 0.99)")
    assert ok, detail


def test_sigma_limit_exists(sigma_limit_fields):
    """Companion: the sigma -> infinity field converges (just not to the indicator)."""
    grid, ball = sigma_limit_fields["grid"], sigma_limit_fields["ball"]
    keep = sigma_limit_fields["keep"]
    f5 = affinity_field(ball, grid, KernelSpec(sigma=1e5, lambda_in=1.0, lambda_out=3.0))
    r = _affine_pearson(sigma_limit_fields["sigma1e3"].values[keep], f5.values[keep])
    print(f"sigma 1e3 vs 1e5 correlation {r:.6f}")
    assert r >= 0.999


def test_criterion_06_truncation_argmax_stability(demo512):
    """Landscape argmax across mode budgets at 512^2.

    Expected red: in 2D the separation penalty rides the lowest frequencies
    (exterior tails decay like 1/distance), so truncated landscapes are
    penalty-dominated and the coarse argmax leaves the seat basin.
    """
    a1, a2 = demo512["assets"]
    dims = demo512["grid"].dims
    cells = {}
    for m in (64, 256, 1024, 4096, None):
        cells[m] = masked_argmax(score_field(a1, a2, np.eye(2), m_prime=m), dims)
    table = ", ".join(f"{'full' if m is None else m}: {c}" for m, c in cells.items())
    print(f"recorded 8x8-budget drift: argmax {cells[64]}")
    tested = [cells[256], cells[1024], cells[4096], cells[None]]
    ok = all(c == tested[0] for c in tested)
    detail = report("criterion 6", ok, table)
    assert ok, detail


def test_truncation_landscape_frozen(demo512):
    """Companion regression: the measured budget table must not drift."""
    a1, a2 = demo512["assets"]
    g = demo512["grid"]
    expected = {
        64: ((79, 428), None),
        256: ((105, 239), -4.5512),
        1024: ((98, 252), -3.1883),
        4096: ((256, 250), -1.7768),
        None: ((256, 256), 17.3717),
    }
    snap = g.node_index(demo512["scene"].snap_translation)
    for m, (cell, seat) in expected.items():
        land = score_field(a1, a2, np.eye(2), m_prime=m)
        assert masked_argmax(land, g.dims) == cell
        if seat is not None:
            got = np.real(land.values).reshape(g.dims)[snap]
            assert got == pytest.approx(seat, abs=1e-3)


def test_criterion_07_snap_well_is_global_minimum(demo512):
    """Exhaustive landscape search puts the full-spectrum energy well at the mate."""
    a1, a2 = demo512["assets"]
    g = demo512["grid"]
    cell = masked_argmax(score_field(a1, a2, np.eye(2)), g.dims)
    snap = g.node_index(demo512["scene"].snap_translation)
    off = max(abs(cell[0] - snap[0]), abs(cell[1] - snap[1]))
    ok = off <= 1
    detail = report("criterion 7", ok, f"argmax {cell}, snap node {snap}, offset {off} cells")
    assert ok, detail


def test_criterion_08_realtime_budget(bench_manifests, tmp_path, capsys):
    """p99 at 4096 modes (soft < 1 ms) plus hard latency monotonicity in m'."""
    out = tmp_path / "bench_report.json"
    rc = cli_main(["bench", "--manifest", bench_manifests["3d"],
                   "--modes-list", "4096", "--iterations", "300",
                   "--out", str(out)])
    rep3 = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert rc == 0
    p99 = rep3["rows"][0]["p99_us"]

    rc = cli_main(["bench", "--manifest", bench_manifests["2d"],
                   "--modes-list", "1024,4096,16384", "--iterations", "300"])
    rep2 = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert rc == 0
    p50s = [r["p50_us"] for r in rep2["rows"]]

    ok = out.exists() and all(a <= b for a, b in zip(p50s, p50s[1:]))
    soft = "met" if p99 < 1000.0 else "MISSED (soft)"
    detail = report("criterion 8", ok,
                    f"3d p99 {p99:.0f}us at 4096 modes (soft 1ms {soft}); "
                    f"2d p50 sweep {[round(p) for p in p50s]}us; report {out.name}")
    assert ok, detail


def test_criterion_09_transform_identities():
    """Round trip, energy conservation, and engine-vs-resum on 16^2 fields."""
    rng = np.random.default_rng(SEED + 9)
    from geofield.descriptor import SampleGrid

    g = SampleGrid(dimension=2, dims=(16, 16), origin=(-1.0, -1.0), spacing=0.125)
    vals1 = rng.normal(size=256) + 1j * rng.normal(size=256)
    vals2 = rng.normal(size=256) + 1j * rng.normal(size=256)
    f1, f2 = ComplexField(g, vals1), ComplexField(g, vals2)

    back = inverse_dft(forward_dft(f1))
    rt = float(np.abs(back.values - vals1).max())

    spec = forward_dft(f1)
    lhs = np.sum(np.abs(vals1) ** 2) * g.cell_volume
    rhs = np.sum(np.abs(spec.amplitudes) ** 2) * np.prod(g.delta_omega())
    pv = abs(lhs - rhs) / lhs

    dd = float(np.abs(oracle.direct_dft(f1) - spec.amplitudes).max()
               / np.abs(spec.amplitudes).max())

    a1 = PartAsset.from_field("fixed", f1)
    a2 = PartAsset.from_field("moving", f2, movable=True)
    ce = 0.0
    for R in lattice_rotations_2d():
        t = rng.uniform(-0.4, 0.4, 2)
        s = score_at(a1, a2, Configuration(R, t))
        c = oracle.cascade_dft(f1, f2, R, t)
        ce = max(ce, abs(s - c) / abs(c))

    ok = rt <= 1e-12 and pv <= 1e-9 and dd <= 1e-10 and ce <= 1e-10
    detail = report("criterion 9", ok,
                    f"roundtrip {rt:.2e} (1e-12), parseval {pv:.2e} (1e-9), "
                    f"direct-dft {dd:.2e} (1e-10), engine-vs-resum {ce:.2e} (1e-10)")
    assert ok, detail


def test_criterion_10_sandbox_loop(demo_scene_256, bench_manifests, tmp_path, capsys):
    """Scripted drag latency, heatmap/CLI argmax parity, damped-release snap."""
    rc = cli_main(["field", "--manifest", bench_manifests["2d"], "--rotation", "0",
                   "--modes", "4096", "--out", str(tmp_path / "land")])
    cli_row = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert rc == 0

    from fastapi.testclient import TestClient
    from geofield.service import PROTOCOL_VERSION, create_app

    client = TestClient(create_app())
    with client.websocket_connect("/ws") as ws:
        ws.send_json({"t": "hello", "v": PROTOCOL_VERSION})
        ws.receive_json()
        ws.send_json({"t": "load_scene", "scene": "peg2d"})
        desc = ws.receive_json()["scene"]
        h = desc["spacing"]
        ws.send_json({"t": "set_params", "modes": 4096})
        ws.receive_json()

        # scripted drag: 150 waypoints from the initial hover to above the seat
        times = []
        start = np.array([desc["initial"]["x"], desc["initial"]["y"]])
        end = np.array([0.0, 0.08])
        for s in np.linspace(0.0, 1.0, 150):
            p = (1 - s) * start + s * end
            ws.send_json({"t": "pose", "theta": 0.0, "x": p[0], "y": p[1]})
            times.append(ws.receive_json()["us"])
        p99 = float(np.percentile(times, 99))

        ws.send_json({"t": "field_slice", "theta": 0.0, "w": 256, "h": 256,
                      "modes": 4096})
        sl = ws.receive_json()
        buf = np.frombuffer(base64.b64decode(sl["data_b64"]), dtype=np.float32)
        flat = np.where(np.isnan(buf), -np.inf, buf).reshape(sl["w"], sl["h"])
        slice_argmax = list(np.unravel_index(np.argmax(flat), flat.shape))

        # release above the seat: guidance must finish the insertion
        ws.send_json({"t": "set_params", "mode": "damped"})
        ws.receive_json()
        hit_frame = None
        for k in range(200):
            ws.send_json({"t": "pose"})
            r = ws.receive_json()
            if hit_frame is None and abs(r["x"]) <= h / 2 and abs(r["y"]) <= h / 2:
                hit_frame = k

        # recorded, not asserted: a release far above the hole mouth parks on
        # the truncated landscape's false equilibrium instead of snapping
        ws.send_json({"t": "set_params", "mode": "direct"})
        ws.receive_json()
        ws.send_json({"t": "pose", "theta": 0.0, "x": 0.0, "y": 0.3})
        ws.receive_json()
        ws.send_json({"t": "set_params", "mode": "damped"})
        ws.receive_json()
        far = None
        for k in range(200):
            ws.send_json({"t": "pose"})
            far = ws.receive_json()
        print(f"far-release rollout settles at ({far['x']:.3f}, {far['y']:.3f}) "
              f"without entering the snap cell")

    ok = (p99 <= 16_000.0
          and slice_argmax == cli_row["argmax_cell"]
          and hit_frame is not None)
    detail = report(
        "criterion 10", ok,
        f"drag p99 {p99:.0f}us (limit 16ms); slice argmax {slice_argmax} vs "
        f"cli {cli_row['argmax_cell']}; near-seat release entered snap cell at "
        f"frame {hit_frame}")
    assert ok, detail
