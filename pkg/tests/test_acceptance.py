"""Acceptance gate: one test per shipped guarantee, at stated tolerances.

Each test prints a single PASS/FAIL summary line so the suite doubles as a
release checklist.
"""

import time

import numpy as np
import pandas as pd
import pytest

from pedstress.decomposition import ImpulseResponse, decompose
from pedstress.lmm import (FactorSpec, LmmSpec, PanelDataset, fit_lmm,
                           fit_reml)
from pedstress.scr import (AmplitudeClass, ScrEvent, classify_amplitude,
                           detect_scrs, participant_stats, standardize)
from pedstress.segmentation import preset_geometry, segment_of
from pedstress.signal import downsample
from pedstress.simulator import TrafficRegime, generate_traffic
from pedstress.pipeline import (PipelineConfig, discover_bundles,
                                run_pipeline, synthetic_cohort)

from conftest import T0, make_trace


def _verdict(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# Traffic regime fidelity


def test_traffic_regime_fidelity():
    t_start = time.perf_counter()
    _, _, high = generate_traffic(
        TrafficRegime.HIGH_ARRIVAL_LOW_SPEED, 600.0, seed=0)
    _, _, low = generate_traffic(
        TrafficRegime.LOW_ARRIVAL_HIGH_SPEED, 600.0, seed=0)
    elapsed = time.perf_counter() - t_start
    checks = [
        abs(high.flow_veh_h - 1200.0) <= 60.0,
        abs(high.mean_gap_s - 3.0) <= 0.15,
        abs(high.mean_clearance_m - 16.7) <= 1.0,
        abs(low.flow_veh_h - 1113.0) <= 56.0,
        abs(low.mean_gap_s - 3.2) <= 0.16,
        abs(low.mean_clearance_m - 35.9) <= 1.8,
        elapsed < 5.0,
    ]
    _verdict("traffic regime fidelity", all(checks),
             f"high={high.flow_veh_h:.0f}veh/h {high.mean_gap_s:.3f}s "
             f"{high.mean_clearance_m:.2f}m, low={low.flow_veh_h:.0f}veh/h "
             f"{low.mean_gap_s:.3f}s {low.mean_clearance_m:.2f}m, "
             f"{elapsed:.2f}s")


# ---------------------------------------------------------------------------
# Standardization exactness


def _events(pid: str, amps, sid: str = "s") -> list[ScrEvent]:
    return [ScrEvent(pid, sid, T0 + 10 * i, T0 + 10 * i + 2.0, float(a),
                     classify_amplitude(float(a)), i)
            for i, a in enumerate(amps)]


def test_standardization_exactness():
    rng = np.random.default_rng(17)
    worst_mean = worst_sd = worst_affine = 0.0
    for p in range(100):
        n = int(rng.integers(2, 40))
        amps = rng.uniform(0.12, 2.5, n)
        scored = standardize(_events(f"{p:04d}", amps))
        t = np.array([e.t_score for e in scored])
        worst_mean = max(worst_mean, abs(t.mean() - 50.0))
        worst_sd = max(worst_sd, abs(t.std(ddof=0) - 10.0))
        # affine invariance: scale + shift the amplitudes, same T scores
        a, b = float(rng.uniform(0.5, 3.0)), float(rng.uniform(0.0, 1.0))
        scored2 = standardize(_events(f"{p:04d}", a * amps + b))
        t2 = np.array([e.t_score for e in scored2])
        worst_affine = max(worst_affine, float(np.abs(t2 - t).max()))
    ok = worst_mean < 1e-9 and worst_sd < 1e-9 and worst_affine < 1e-9
    _verdict("standardization exactness", ok,
             f"|mean-50|<={worst_mean:.2e}, |sd-10|<={worst_sd:.2e}, "
             f"affine sup-error<={worst_affine:.2e} over 100 participants")


# ---------------------------------------------------------------------------
# Decomposition recovery


def test_decomposition_recovery():
    rng = np.random.default_rng(5)
    ir = ImpulseResponse()
    tp = fp = fn = 0
    amp_errors = []
    # CPU time: the budget is about algorithmic cost, not host contention
    t_start = time.process_time()
    for s in range(200):
        # 7 s grid with +/- 1 s jitter keeps every inter-onset >= 5 s
        base = np.arange(8.0, 52.0, 7.0)
        onsets = base + rng.uniform(-1.0, 1.0, base.size)
        keep = rng.random(base.size) < 0.75
        truth = [(float(o), float(rng.uniform(0.3, 1.8)))
                 for o, k in zip(onsets, keep) if k]
        trace = make_trace(rate_hz=100.0, scrs=truth, noise_sd=0.02,
                           seed=1000 + s,
                           drift_slope=float(rng.uniform(-0.003, 0.003)))
        events = detect_scrs(decompose(downsample(trace), ir))
        det = [(e.onset_unix - T0, e.amplitude) for e in events]
        used = set()
        for onset, amp in truth:
            cands = [i for i, (d_on, _) in enumerate(det)
                     if i not in used and abs(d_on - onset) <= 2.5]
            if not cands:
                fn += 1
                continue
            match = max(cands, key=lambda i: det[i][1])
            used.add(match)
            tp += 1
            amp_errors.append(abs(det[match][1] - amp) / amp)
        fp += len(det) - len(used)
    elapsed = time.process_time() - t_start
    recall = tp / (tp + fn)
    precision = tp / (tp + fp)
    mae = float(np.mean(amp_errors))
    ok = recall >= 0.90 and precision >= 0.90 and mae <= 0.20 and elapsed < 60
    _verdict("decomposition recovery", ok,
             f"recall={recall:.3f}, precision={precision:.3f}, "
             f"amplitude MAE={mae:.3f}, {elapsed:.1f}s for 200 sessions")


def test_threshold_behaviour():
    n_det = 0
    for s in range(20):
        trace = make_trace(scrs=[(10.0 + 6 * k, 0.05) for k in range(6)],
                           noise_sd=0.005, seed=2000 + s)
        n_det += len(detect_scrs(decompose(trace)))
    _verdict("threshold behaviour", n_det == 0,
             f"{n_det} detections from 20 sub-threshold sessions")


# ---------------------------------------------------------------------------
# Linear mixed model correctness


def test_lmm_correctness():
    t_start = time.process_time()
    rng = np.random.default_rng(11)

    # (a) no participant effect, balanced design: REML beta == OLS beta
    q, ni = 20, 10
    groups = np.repeat(np.arange(q), ni)
    x = np.column_stack([np.ones(q * ni), np.tile(rng.normal(size=ni), q)])
    z = np.ones((q * ni, 1))
    beta_true = np.array([2.0, -1.5])
    y = x @ beta_true + rng.normal(0, 0.4, q * ni)
    fit = fit_reml(x, z, y, groups)
    beta_ols = np.linalg.lstsq(x, y, rcond=None)[0]
    err_ols = float(np.abs(fit.beta - beta_ols).max())

    # (b) known-G instance: closed-form GLS oracle at the true ratio
    sigma_u, sigma_e = 1.2, 0.5
    u = rng.normal(0, sigma_u, q)
    x2 = np.column_stack([np.ones(q * ni), rng.normal(size=q * ni)])
    y2 = x2 @ beta_true + u[groups] + rng.normal(0, sigma_e, q * ni)
    theta = np.array([(sigma_u / sigma_e) ** 2])
    fit2 = fit_reml(x2, z, y2, groups, fixed_theta=theta)
    v = np.eye(q * ni) + theta[0] * (z @ z.T * (groups[:, None] ==
                                                groups[None, :]))
    vi = np.linalg.inv(v)
    beta_gls = np.linalg.solve(x2.T @ vi @ x2, x2.T @ vi @ y2)
    err_gls = float(np.abs(fit2.beta - beta_gls).max())

    # (c) Monte Carlo coverage of beta +/- 2 SE
    q3, ni3, reps = 50, 20, 50
    groups3 = np.repeat(np.arange(q3), ni3)
    z3 = np.ones((q3 * ni3, 1))
    covered = 0
    total = 0
    for r in range(reps):
        rr = np.random.default_rng(300 + r)
        x3 = np.column_stack([np.ones(q3 * ni3), rr.normal(size=q3 * ni3)])
        u3 = rr.normal(0, 0.8, q3)
        y3 = x3 @ beta_true + u3[groups3] + rr.normal(0, 0.6, q3 * ni3)
        f = fit_reml(x3, z3, y3, groups3)
        for j in range(2):
            total += 1
            if abs(f.beta[j] - beta_true[j]) <= 2.0 * f.se_beta[j]:
                covered += 1
    coverage = covered / total
    elapsed = time.process_time() - t_start
    ok = (err_ols < 1e-6 and err_gls < 1e-8 and coverage >= 0.90
          and elapsed < 30.0)
    _verdict("linear mixed model correctness", ok,
             f"OLS err={err_ols:.1e}, GLS err={err_gls:.1e}, "
             f"coverage={coverage:.3f} ({reps} reps), {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# Segmentation partition


def test_segmentation_partition():
    rng = np.random.default_rng(23)
    for median in (False, True):
        geom = preset_geometry(median)
        widths = [2.5, 1.0, 2.5] if median else [3.0, 3.0]
        assert sum(widths) == pytest.approx(6.0)
        assert geom.lane_width == widths[0]
        regions = geom.regions()
        pts = np.column_stack([
            rng.uniform(-geom.half_width - 1, geom.half_width + 1, 10_000),
            rng.uniform(-1.0, geom.y_max + 1, 10_000)])
        for x, y in pts:
            seg = segment_of((x, y), geom)
            containing = [s for s, r in regions.items()
                          if r.contains(x, y)]
            if not containing:
                assert seg.value == "Out of course"
            else:
                assert seg in containing
    _verdict("segmentation partition", True,
             "10,000 fuzzed points per preset each map to one segment; "
             "widths 3.0+3.0 and 2.5+1.0+2.5 = 6.0 m")


# ---------------------------------------------------------------------------
# End-to-end directional check


@pytest.fixture(scope="module")
def cohort_report(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept_cohort")
    synthetic_cohort(6, 4, base_seed=0, out_dir=root, duration_s=60.0)
    bundles = discover_bundles(root)
    return run_pipeline(bundles, PipelineConfig()), bundles


def test_end_to_end_directional(cohort_report):
    report, bundles = cohort_report
    rows = report.scr_table.copy()
    rows = rows[rows["scr_t"].notna() & rows["position_f"].notna()]
    levels = sorted(rows["position_f"].unique())
    assert "Sidewalk" in levels
    dataset = PanelDataset(
        rows.rename(columns={"scr_t": "response"}),
        [FactorSpec("position_f", tuple(levels), "Sidewalk")])
    fit = fit_lmm(dataset, LmmSpec(fixed=("position_f",), random=(),
                                   random_intercept=True))
    coef = dict(zip(fit.beta_names, fit.beta))
    tval = dict(zip(fit.beta_names, fit.t_fixed))
    lane_terms = [k for k in coef if "Crossing lane" in k]
    ok = bool(lane_terms) and all(coef[k] > 0 and tval[k] > 2.0
                                  for k in lane_terms)
    sidewalk_in_model = any("Sidewalk" in k for k in coef)
    detail = ", ".join(f"{k.split('=')[-1]}: b={coef[k]:.2f} t={tval[k]:.2f}"
                       for k in lane_terms)
    _verdict("end-to-end directional check",
             ok and not sidewalk_in_model,
             detail + "; Sidewalk held out as reference")


def test_end_to_end_report_reproducible(cohort_report):
    report, bundles = cohort_report
    again = run_pipeline(bundles, PipelineConfig())
    ok = report.to_text() == again.to_text()
    _verdict("report reproducibility", ok,
             "report text byte-identical across re-runs")


def test_reference_level_rendered_as_dashes(cohort_report):
    report, _ = cohort_report
    texts = "\n".join(report.model_tables.values())
    _verdict("reference rendering", "--" in texts,
             "reference rows rendered as --")


# ---------------------------------------------------------------------------
# Label bookkeeping


def test_label_bookkeeping():
    amps = [0.50, 0.31, 0.19, 0.49]
    expect = [AmplitudeClass.MEDIUM, AmplitudeClass.SMALL,
              AmplitudeClass.SMALL, AmplitudeClass.MEDIUM]
    classes = [classify_amplitude(a) for a in amps]
    events = _events("0001", amps)
    events[1].annotation = "Delete"
    stats = participant_stats(events, "0001")
    kept = [a for i, a in enumerate(amps) if i != 1]
    ok = (classes == expect and stats.n_scrs == 3
          and stats.mean_amplitude == pytest.approx(np.mean(kept)))
    _verdict("label bookkeeping", ok,
             f"classes={[c.value for c in classes]}, "
             f"Delete rows excluded (n={stats.n_scrs})")
