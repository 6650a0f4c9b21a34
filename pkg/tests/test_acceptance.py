"""End-to-end acceptance checks; each prints one PASS/FAIL line in the session summary."""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from pansharp.adjust import (AdjustmentMode, compute_virtual_band, estimate_weights, match_histogram_full,
                             match_histogram_simple)
from pansharp.bvls import bvls_solve
from pansharp.cli import main
from pansharp.formats import import_pgm, load_image, save_image
from pansharp.fusion import FusionConfig, fuse_cs, fuse_hpf, run_workflow
from pansharp.quality import rmse_band, rmse_image
from pansharp.raster import intensity, stats
from pansharp.resample import FilterSpec, lowpass, upsample_image
from pansharp.synth import make_scene, random_field, wald_setup

from conftest import ACCEPTANCE_LINES, smooth_image
from test_adjust import ks_distance
from test_bvls import grid_search_k2
from test_formats import write_pgm
from test_quality import naive_rmse

N_SEEDS = 10


@contextmanager
def criterion(number, title, limit=None):
    """Time a criterion block and record its verdict."""
    start = time.perf_counter()
    detail = {}
    try:
        yield detail
    except Exception as exc:
        elapsed = time.perf_counter() - start
        ACCEPTANCE_LINES.append(f"FAIL  {number:>2}. {title} ({elapsed:.2f} s): {exc}".splitlines()[0])
        raise
    elapsed = time.perf_counter() - start
    if limit is not None and elapsed >= limit:
        ACCEPTANCE_LINES.append(f"FAIL  {number:>2}. {title}: {elapsed:.2f} s exceeds {limit} s")
        pytest.fail(f"criterion {number} took {elapsed:.2f} s (limit {limit} s)")
    note = f"; {detail['note']}" if "note" in detail else ""
    ACCEPTANCE_LINES.append(f"PASS  {number:>2}. {title} ({elapsed:.2f} s{note})")


def test_01_energy_balance_identity():
    with criterion(1, "energy-balance identity", limit=1.0) as d:
        worst = 0.0
        for seed in range(3):
            rng = np.random.default_rng(seed)
            ms = smooth_image(rng, (128, 128), n_bands=8, max_freq=0.2)
            pan = intensity(ms, rng.uniform(0, 0.3, 8)) + 30 * random_field((128, 128), rng)
            w = estimate_weights(ms, pan)
            v = compute_virtual_band(pan, ms, w)
            err = np.max(np.abs(pan - v - intensity(ms, w))) / np.ptp(pan)
            worst = max(worst, err)
        d["note"] = f"max error {worst:.1e} of range"
        assert worst < 1e-10


def test_02_bvls_certification():
    with criterion(2, "BVLS certification on 200 problems", limit=10.0) as d:
        kinds = {"kkt": 0, "interior": 0, "grid": 0}
        for i in range(200):
            r = np.random.default_rng(1000 + i)
            kind = ("kkt", "interior", "grid")[i % 3]
            if kind == "grid":
                A = r.normal(size=(int(r.integers(20, 4097)), 2))
                b = r.normal(size=A.shape[0]) + A @ r.uniform(-0.5, 1.5, 2)
            elif kind == "interior":
                k = int(r.integers(1, 9))
                A = r.uniform(0, 1, size=(int(r.integers(100, 4097)), k))
                b = A @ r.uniform(0.3, 0.7, k) + 1e-3 * r.normal(size=A.shape[0])
            else:
                k = int(r.integers(1, 9))
                A = r.normal(size=(int(r.integers(k, 4097)), k))
                b = 3 * r.normal(size=A.shape[0])
            sol = bvls_solve(A, b)
            assert sol.kkt_satisfied(), f"problem {i}: {sol.kkt_report}"
            assert np.all((sol.weights >= 0) & (sol.weights <= 1))
            if kind == "interior":
                exact = np.linalg.solve(A.T @ A, A.T @ b)
                assert np.all((exact > 0) & (exact < 1)), f"problem {i} is not interior"
                np.testing.assert_allclose(sol.weights, exact, atol=1e-8, err_msg=f"problem {i}")
            elif kind == "grid":
                np.testing.assert_allclose(sol.weights, grid_search_k2(A, b), atol=2e-3, err_msg=f"problem {i}")
            kinds[kind] += 1
        d["note"] = ", ".join(f"{v} {k}" for k, v in kinds.items())


def test_03_weight_recovery():
    with criterion(3, "weight recovery under 0.1% noise", limit=1.0) as d:
        rng = np.random.default_rng(3)
        ms = np.stack([100 + 30 * random_field((128, 128), rng, slope=1.0) for _ in range(8)])
        w_true = rng.uniform(0.05, 0.95, 8)
        clean = intensity(ms, w_true)
        pan = clean + 1e-3 * np.ptp(clean) * rng.standard_normal(clean.shape)
        w = estimate_weights(ms, pan)
        err = np.max(np.abs(w - w_true))
        d["note"] = f"max error {err:.1e}"
        assert err < 1e-2


def _wald_scenes():
    scenes = [make_scene(seed) for seed in range(N_SEEDS)]
    return [(sc, wald_setup(sc.ms, sc.pan, ratio=2)) for sc in scenes]


def _pan_rmse(setups, adjustment):
    ws = "estimated_low" if adjustment.pc else "provider"
    cfg = FusionConfig(method="cs_m", adjustment=adjustment, weight_source=ws, mhm=False)
    vals = [run_workflow(s.ms_lr, s.pan_hr, cfg, sc.provider_weights, s.reference)[1].pan_rmse_high
            for sc, s in setups]
    return float(np.mean(vals))


def test_04_pan_correction_ordering():
    with criterion(4, "pan-correction ordering over 10 seeds", limit=30.0) as d:
        setups = _wald_scenes()
        before = _pan_rmse(setups, AdjustmentMode())
        phm = _pan_rmse(setups, AdjustmentMode("full", "low"))
        pc = _pan_rmse(setups, AdjustmentMode(pc=True))
        both = _pan_rmse(setups, AdjustmentMode("full", "low", True))
        d["note"] = f"PHM+PC {both:.2f} <= PC {pc:.2f} < PHM {phm:.2f} < before {before:.2f}"
        assert both <= pc < phm < before, d["note"]
        gaps = [pc - both, phm - pc, before - phm]
        assert min(gaps) > 0.01 * before, f"gaps {gaps} vs 1% of {before:.2f}"


def test_05_method_comparison_ordering():
    with criterion(5, "method-comparison ordering over 10 seeds", limit=60.0) as d:
        setups = _wald_scenes()
        before = AdjustmentMode()
        res = {}
        for method in ("cs_a", "cs_m", "hpf_a", "hpf_m"):
            for tag, cfg in (("before", FusionConfig(method=method, adjustment=before, weight_source="provider",
                                                     mhm=False)),
                             ("pc", FusionConfig(method=method))):
                res[method, tag] = float(np.mean([
                    run_workflow(s.ms_lr, s.pan_hr, cfg, sc.provider_weights, s.reference)[1].rmse.mean
                    for sc, s in setups]))
        d["note"] = ", ".join(f"{m} {res[m, 'before']:.2f}->{res[m, 'pc']:.2f}"
                              for m in ("cs_a", "cs_m", "hpf_a", "hpf_m"))
        for m in ("cs_a", "cs_m"):
            assert res[m, "pc"] < 0.95 * res[m, "before"], d["note"]
        assert max(res["cs_a", "pc"], res["cs_m", "pc"]) < min(res["hpf_a", "pc"], res["hpf_m", "pc"]), d["note"]


def test_06_fusion_identities():
    with criterion(6, "fusion zero-detail identities", limit=1.0):
        rng = np.random.default_rng(6)
        ms_lr = smooth_image(rng, (64, 64), n_bands=4)
        ms_up = upsample_image(ms_lr, 2)
        i_hr = intensity(ms_up, [0.1, 0.2, 0.3, 0.4])
        pan_c = np.full(i_hr.shape, 321.0)
        spec = FilterSpec(ratio=2)
        for variant in ("additive", "multiplicative"):
            assert np.max(np.abs(fuse_cs(ms_up, i_hr, i_hr, variant) - ms_up)) <= 1e-10
            assert np.max(np.abs(fuse_hpf(ms_up, pan_c, lowpass(pan_c, spec), variant) - ms_up)) <= 1e-10
        cfg = FusionConfig(method="cs_a", adjustment=AdjustmentMode(), weight_source="provider", mhm=False)
        fused, _ = run_workflow(ms_lr, i_hr, cfg, [0.1, 0.2, 0.3, 0.4])
        assert np.max(np.abs(fused - ms_up)) <= 1e-10


def test_07_histogram_contracts():
    with criterion(7, "histogram-matching contracts on 50 pairs", limit=10.0) as d:
        worst_ks = 0.0
        bins = 65536
        for i in range(50):
            r = np.random.default_rng(7000 + i)
            shape_s = tuple(int(v) for v in r.integers(16, 96, 2))
            shape_t = tuple(int(v) for v in r.integers(16, 96, 2))
            src = r.gamma(r.uniform(0.5, 5), r.uniform(1, 50), shape_s) + r.uniform(-100, 100)
            target = r.normal(r.uniform(-100, 300), r.uniform(1, 80), shape_t)
            m, s = stats(match_histogram_simple(src, target))
            mt, st = stats(target)
            assert math.isclose(m, mt, rel_tol=1e-10, abs_tol=1e-10 * st)
            assert math.isclose(s, st, rel_tol=1e-10)
            out = match_histogram_full(src, target, bins)
            ks = ks_distance(out, target)
            worst_ks = max(worst_ks, ks)
            assert ks <= 2 / bins + 2 / math.sqrt(src.size), f"pair {i}: KS {ks}"
            order = np.argsort(src.ravel(), kind="stable")
            assert np.all(np.diff(out.ravel()[order]) >= 0), f"pair {i}: rank order broken"
        d["note"] = f"worst KS {worst_ks:.4f}"


def test_08_metric_oracle():
    with criterion(8, "RMSE brute-force oracle on 100 pairs"):
        for i in range(100):
            r = np.random.default_rng(8000 + i)
            shape = tuple(int(v) for v in r.integers(1, 33, 2))
            a = r.normal(r.uniform(-500, 500), r.uniform(0.1, 100), shape)
            b = r.normal(r.uniform(-500, 500), r.uniform(0.1, 100), shape)
            assert math.isclose(rmse_band(a, b), naive_rmse(a, b), rel_tol=1e-12)
        r = np.random.default_rng(8)
        a, b = r.normal(size=(8, 20, 20)), r.normal(size=(8, 20, 20))
        rep = rmse_image(a, b)
        assert rep.mean == sum(rep.per_band) / 8


def test_09_io_round_trip(tmp_path):
    with criterion(9, "raster and PGM I/O round trip"):
        shapes = [(1, 1, 1), (1, 1, 7), (3, 5, 2), (8, 16, 9)]
        for i in range(20):
            r = np.random.default_rng(9000 + i)
            shape = shapes[i] if i < len(shapes) else tuple(int(v) for v in r.integers(1, 40, 3))
            img = r.normal(0, 10.0 ** r.uniform(-3, 6), shape)
            save_image(img, tmp_path / f"img{i}")
            back = load_image(tmp_path / f"img{i}")
            assert back.tobytes() == img.astype(np.float32).astype(np.float64).tobytes()
        p8 = write_pgm(tmp_path / "a.pgm", 2, 2, 255, [0, 128, 255, 64])
        assert import_pgm(p8).tolist() == [[0, 128], [255, 64]]
        p16 = write_pgm(tmp_path / "b.pgm", 3, 1, 65535, [0x0100, 1, 65535])
        assert import_pgm(p16).tolist() == [[256, 1, 65535]]


def test_10_experiment_determinism(tmp_path):
    with criterion(10, "experiment CSVs bytewise identical across runs and threads") as d:
        args = ["experiment", "--seed", "11", "--seeds", "2", "--size", "64", "--weights-grid"]
        runs = {"a": ["--threads", "1"], "b": ["--threads", "1"], "c": ["--threads", "4"]}
        for name, extra in runs.items():
            assert main(args + extra + ["--out", str(tmp_path / name)]) == 0
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert names == ["method_comparison.csv", "pan_correction.csv", "per_band.csv", "weights_grid.csv"]
        for n in names:
            ref = (tmp_path / "a" / n).read_bytes()
            assert (tmp_path / "b" / n).read_bytes() == ref, n
            assert (tmp_path / "c" / n).read_bytes() == ref, n
        d["note"] = f"{len(names)} files x 3 runs"
