"""End-to-end orchestration: sessions in, model tables out.

Runs sync -> smooth -> decompose -> detect -> standardize -> segment ->
annotate -> model over a batch of session bundles, persisting per-stage
intermediates and a deterministic text report. Also hosts the local HTTP
service the annotation client talks to.
"""

from __future__ import annotations

import threading
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import annotation as anno
from .annotation import (AnnotationRecord, load_annotations_csv,
                         save_annotations_csv)
from .decomposition import Decomposition, decompose, save_decomposition_csv
from .lmm import FactorSpec, LmmFit, LmmSpec, PanelDataset, fit_lmm, \
    emit_table, render_table
from .scr import ScrEvent, detect_scrs, events_to_frame, standardize
from .segmentation import (Segment, Trajectory, attach_segments,
                           load_trajectory_csv, merge_median_for_models,
                           preset_geometry, save_trajectory_csv)
from .signal import EdaTrace, downsample, gaussian_smooth, load_eda_csv, \
    save_eda_csv, sync_epoch
from .simulator import ScenarioConfig, SimEvent, load_scenario_yaml

PIPELINE_VERSION = "1.0"

SEGMENT_LEVEL_ORDER = [s.value for s in (
    Segment.SIDEWALK, Segment.WAITING, Segment.LANE1, Segment.LANE2,
    Segment.FINISHED, Segment.OUT_OF_COURSE)]


class PipelineError(Exception):
    pass


@dataclass
class SessionBundle:
    """All raw streams for one session."""

    participant_id: str
    session_id: str
    eda: EdaTrace
    trajectory: Trajectory
    scenario: ScenarioConfig | None = None
    events: list[SimEvent] | None = None
    annotations: list[AnnotationRecord] | None = None

    def __post_init__(self):
        if self.eda.participant_id != self.participant_id:
            raise PipelineError(
                f"bundle {self.session_id}: EDA participant "
                f"{self.eda.participant_id} != {self.participant_id}")
        if self.eda.session_id != self.session_id:
            raise PipelineError(
                f"bundle {self.session_id}: EDA session mismatch")


@dataclass
class PipelineConfig:
    """Processing knobs; serialized into every report header."""

    smooth_window: int = 30
    smooth_before_decompose: bool = True
    ridge: float = 1e-5
    detection_threshold_us: float = 0.1
    ddof: int = 0
    merge_median: bool = True
    coder_id: str = "coder_a"
    min_scrs_for_model: int = 10
    random_intercept: bool = True

    def to_dict(self) -> dict:
        return dict(sorted(self.__dict__.items()))

    @classmethod
    def from_yaml(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as f:
            d = yaml.safe_load(f) or {}
        known = {k: v for k, v in d.items() if k in cls().__dict__}
        return cls(**known)


@dataclass
class PipelineReport:
    """Everything a run produced, plus the accounting to audit it."""

    config: PipelineConfig
    scr_table: pd.DataFrame
    participant_stats: pd.DataFrame
    label_frequencies: pd.DataFrame
    model_tables: dict = field(default_factory=dict)
    quality_log: list = field(default_factory=list)
    n_sessions_in: int = 0
    n_sessions_processed: int = 0

    def quality_frame(self) -> pd.DataFrame:
        cols = ["session_id", "participant_id", "status", "reason",
                "n_scrs", "skew_s"]
        return pd.DataFrame(self.quality_log, columns=cols)

    def to_text(self) -> str:
        out = []
        out.append(f"pedstress pipeline report v{PIPELINE_VERSION}")
        out.append("")
        out.append("[config]")
        for k, v in self.config.to_dict().items():
            out.append(f"  {k} = {v}")
        out.append("")
        out.append("[sessions]")
        out.append(f"  input    : {self.n_sessions_in}")
        out.append(f"  processed: {self.n_sessions_processed}")
        out.append(f"  dropped  : {self.n_sessions_in - self.n_sessions_processed}")
        out.append("")
        out.append("[data quality]")
        q = self.quality_frame()
        out.append(q.to_string(index=False) if not q.empty else "  (empty)")
        out.append("")
        out.append("[participant statistics]")
        out.append(self.participant_stats.to_string(
            index=False, float_format=lambda v: f"{v:.4f}")
            if not self.participant_stats.empty else "  (empty)")
        out.append("")
        out.append("[label frequencies]")
        out.append(self.label_frequencies.to_string(
            index=False, float_format=lambda v: f"{v:.2f}"))
        out.append("")
        for name, text in sorted(self.model_tables.items()):
            out.append(text)
            out.append("")
        return "\n".join(out) + "\n"

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(self.to_text(), encoding="utf-8")
        self.scr_table.to_csv(out / "scr_table.csv", index=False,
                              float_format="%.6f")
        self.quality_frame().to_csv(out / "quality.csv", index=False,
                                    float_format="%.6f")
        self.participant_stats.to_csv(out / "participant_stats.csv",
                                      index=False, float_format="%.6f")


# ---------------------------------------------------------------------------
# Bundle IO (the simulate verb's on-disk layout)


def load_bundle(session_dir) -> SessionBundle:
    d = Path(session_dir)
    scenario = None
    if (d / "scenario.yaml").exists():
        scenario = load_scenario_yaml(d / "scenario.yaml")
    meta = yaml.safe_load((d / "session.yaml").read_text()) \
        if (d / "session.yaml").exists() else {}
    pid = str(meta.get("participant_id", "0001"))
    sid = str(meta.get("session_id", d.name))
    eda = load_eda_csv(d / "eda.csv", pid, sid,
                       rate_hz=float(meta.get("eda_rate_hz", 100.0)))
    traj = load_trajectory_csv(d / "trajectory.csv", sid)
    annotations = None
    if (d / "annotations.csv").exists():
        annotations = load_annotations_csv(d / "annotations.csv")
    return SessionBundle(pid, sid, eda, traj, scenario=scenario,
                        annotations=annotations)


def discover_bundles(root) -> list[SessionBundle]:
    root = Path(root)
    dirs = sorted(p for p in (root / "sessions").iterdir() if p.is_dir()) \
        if (root / "sessions").is_dir() else sorted(
            p for p in root.iterdir() if (p / "eda.csv").exists())
    if not dirs:
        raise PipelineError(f"no session directories under {root}")
    return [load_bundle(d) for d in dirs]


# ---------------------------------------------------------------------------
# Orchestration


def _process_session(bundle: SessionBundle, config: PipelineConfig,
                     out_dir: Path | None):
    """Single-session stage chain up to annotated, segment-attached SCRs."""
    eda, traj, skew = sync_epoch(bundle.eda, bundle.trajectory)
    trace = downsample(eda) if eda.rate_hz > 20 else eda
    if config.smooth_before_decompose:
        trace = gaussian_smooth(trace, window=config.smooth_window)
    decomp = decompose(trace, ridge=config.ridge)
    events = detect_scrs(decomp, threshold=config.detection_threshold_us)

    median = bundle.scenario.median if bundle.scenario is not None else False
    geom = preset_geometry(median)
    attach_segments(events, traj, geom)
    records = bundle.annotations or []
    anno.apply_annotations(events, records, config.coder_id)

    if out_dir is not None:
        sdir = out_dir / "sessions" / bundle.session_id
        sdir.mkdir(parents=True, exist_ok=True)
        save_eda_csv(trace, sdir / "eda_processed.csv")
        save_decomposition_csv(decomp, sdir / "decomposition.csv")
        save_trajectory_csv(traj, sdir / "trajectory.csv")
        save_annotations_csv(records, sdir / "annotations.csv")
        if bundle.scenario is not None:
            from .simulator import save_scenario_yaml
            save_scenario_yaml(bundle.scenario, sdir / "scenario.yaml")
        (sdir / "session.yaml").write_text(yaml.safe_dump(
            {"participant_id": bundle.participant_id,
             "session_id": bundle.session_id,
             "t0": float(trace.t[0]), "skew_s": float(skew)},
            sort_keys=False), encoding="utf-8")
    return events, decomp, skew


def _observed_factor(name: str, values, preferred_order,
                     reference: str | None = None) -> FactorSpec:
    """Factor over the levels actually present, in canonical order."""
    seen = [v for v in preferred_order if v in set(values)]
    seen += sorted(set(values) - set(seen))
    if reference is None or reference not in seen:
        reference = seen[0]
    return FactorSpec(name, tuple(seen), reference)


def _fit_segment_model(rows: pd.DataFrame, config: PipelineConfig):
    factor = _observed_factor("position_f", rows["position_f"],
                              SEGMENT_LEVEL_ORDER,
                              reference=Segment.SIDEWALK.value)
    dataset = PanelDataset(rows[["participant_id", "response",
                                 "position_f"]].copy(), [factor])
    spec = LmmSpec(fixed=("position_f",),
                   random_intercept=config.random_intercept)
    fit = fit_lmm(dataset, spec)
    table = emit_table(fit, dataset, spec)
    return fit, render_table(table, "T score ~ crossing segment "
                                    "(participant random effects)")


def _fit_annotation_model(rows: pd.DataFrame, config: PipelineConfig):
    counts = rows["annotation"].value_counts()
    levels = [l for l in counts.index if counts[l] >= 3]
    rows = rows[rows["annotation"].isin(levels)]
    if len(levels) < 2 or rows["participant_id"].nunique() < 2:
        return None, None
    factor = _observed_factor("annotation", rows["annotation"],
                              list(anno.TAXONOMY),
                              reference=str(counts.index[0]))
    dataset = PanelDataset(rows[["participant_id", "response",
                                 "annotation"]].copy(), [factor])
    spec = LmmSpec(fixed=("annotation",),
                   random_intercept=config.random_intercept)
    fit = fit_lmm(dataset, spec)
    table = emit_table(fit, dataset, spec)
    return fit, render_table(table, "T score ~ contextual label "
                                    "(participant random effects)")


def run_pipeline(bundles: list[SessionBundle],
                 config: PipelineConfig | None = None,
                 out_dir=None) -> PipelineReport:
    """The full workflow over a batch of sessions.

    Per-session failures are logged and skipped; participant-level
    standardization and the mixed models run after all sessions are in.
    Identical inputs produce byte-identical reports.
    """
    if not bundles:
        raise PipelineError("no session bundles")
    if config is None:
        config = PipelineConfig()
    out = Path(out_dir) if out_dir is not None else None

    all_events: list[ScrEvent] = []
    quality: list[dict] = []
    session_start: dict[str, float] = {}
    for bundle in sorted(bundles, key=lambda b: (b.participant_id,
                                                 b.session_id)):
        entry = {"session_id": bundle.session_id,
                 "participant_id": bundle.participant_id,
                 "status": "processed", "reason": "",
                 "n_scrs": 0, "skew_s": float("nan")}
        try:
            events, decomp, skew = _process_session(bundle, config, out)
            entry["n_scrs"] = len(events)
            entry["skew_s"] = round(float(skew), 3)
            all_events.extend(events)
            session_start[bundle.session_id] = float(decomp.trace.t[0])
        except Exception as exc:   # noqa: BLE001 - isolation contract
            entry["status"] = "dropped"
            entry["reason"] = f"{type(exc).__name__}: {exc}"
            entry["_traceback"] = traceback.format_exc()
        quality.append(entry)

    standardize(all_events, ddof=config.ddof)

    # per-participant accounting
    stats_rows = []
    for pid in sorted({e.participant_id for e in all_events}):
        evs = [e for e in all_events if e.participant_id == pid]
        usable = [e for e in evs if e.annotation != anno.DELETE]
        stats_rows.append({
            "participant_id": pid,
            "n_scrs": len(evs),
            "n_usable": len(usable),
            "standardizable": bool(usable and usable[0].standardizable),
            "mean_amplitude": float(np.mean([e.amplitude for e in usable]))
            if usable else float("nan"),
        })
    stats = pd.DataFrame(stats_rows, columns=[
        "participant_id", "n_scrs", "n_usable", "standardizable",
        "mean_amplitude"])

    scr_table = events_to_frame(all_events, session_start)
    freq = anno.label_frequencies(all_events)

    # model rows: scored, located, and not excluded by label
    rows = []
    for e in all_events:
        if e.t_score is None or e.position_label is None:
            continue
        if e.annotation in anno.EXCLUDED_FROM_MODELS:
            continue
        pos = merge_median_for_models(e.position_label) \
            if config.merge_median else e.position_label
        rows.append({"participant_id": e.participant_id,
                     "response": e.t_score, "position_f": pos,
                     "annotation": e.annotation})
    model_rows = pd.DataFrame(rows, columns=[
        "participant_id", "response", "position_f", "annotation"])

    model_tables = {}
    if len(model_rows) >= config.min_scrs_for_model \
            and model_rows["participant_id"].nunique() >= 2:
        _, text = _fit_segment_model(model_rows, config)
        model_tables["segment"] = text
        _, anno_text = _fit_annotation_model(model_rows, config)
        if anno_text is not None:
            model_tables["annotation"] = anno_text
    else:
        quality.append({"session_id": "(batch)", "participant_id": "",
                        "status": "note",
                        "reason": f"insufficient data for models "
                                  f"({len(model_rows)} rows)",
                        "n_scrs": len(model_rows), "skew_s": float("nan")})

    report = PipelineReport(
        config=config, scr_table=scr_table, participant_stats=stats,
        label_frequencies=freq, model_tables=model_tables,
        quality_log=[{k: v for k, v in q.items() if not k.startswith("_")}
                     for q in quality],
        n_sessions_in=len(bundles),
        n_sessions_processed=sum(1 for q in quality
                                 if q["status"] == "processed"))
    if out is not None:
        report.save(out)
    return report


# ---------------------------------------------------------------------------
# Synthetic cohorts


def synthetic_cohort(n_participants: int, n_sessions: int,
                     base_seed: int = 0, out_dir=None,
                     duration_s: float = 60.0) -> list[SessionBundle]:
    """Deterministic cohort: scenario factors cycle over sessions, one
    simulator plus one sensor seed per (participant, session).

    With ``out_dir`` the raw streams are also written in the layout
    ``discover_bundles`` reads back.
    """
    from .simulator import (AvatarBehaviour, EdaProfile, TrafficRegime,
                            run_scenario, save_events_csv as save_sim_events,
                            save_ground_truth_csv, save_scenario_yaml,
                            synthesize_eda)

    avatars = [AvatarBehaviour.NONE, AvatarBehaviour.CONSERVATIVE,
               AvatarBehaviour.ADVENTUROUS, AvatarBehaviour.STANDING]
    regimes = list(TrafficRegime)
    bundles = []
    out = Path(out_dir) if out_dir is not None else None
    for p in range(n_participants):
        pid = f"{p + 1:04d}"
        prof_rng = np.random.default_rng(base_seed + 7_000_000 + p)
        profile = EdaProfile(baseline_us=float(prof_rng.uniform(3.5, 7.5)))
        for s in range(n_sessions):
            sid = f"P{pid}_S{s + 1:02d}"
            sim_seed = base_seed + p * 1000 + s
            config = ScenarioConfig(
                avatar=avatars[s % len(avatars)],
                traffic_regime=regimes[(p + s) % len(regimes)],
                median=bool((s // 2) % 2),
                duration_s=duration_s,
                seed=sim_seed)
            result = run_scenario(config, participant_id=pid, session_id=sid)
            eda, truth = synthesize_eda(
                result.events, pid, sid, seed=sim_seed + 500_000,
                t0=result.t0, duration_s=duration_s, profile=profile)
            bundle = SessionBundle(pid, sid, eda, result.trajectory,
                                   scenario=config, events=result.events)
            bundles.append(bundle)
            if out is not None:
                sdir = out / "sessions" / sid
                sdir.mkdir(parents=True, exist_ok=True)
                save_eda_csv(eda, sdir / "eda.csv")
                save_trajectory_csv(result.trajectory, sdir / "trajectory.csv")
                save_sim_events(result.events, sdir / "events.csv")
                save_ground_truth_csv(truth, pid, sid,
                                      sdir / "ground_truth.csv", t0=result.t0)
                save_scenario_yaml(config, sdir / "scenario.yaml")
                (sdir / "session.yaml").write_text(yaml.safe_dump(
                    {"participant_id": pid, "session_id": sid,
                     "eda_rate_hz": 100.0, "t0": result.t0},
                    sort_keys=False), encoding="utf-8")
    return bundles


# ---------------------------------------------------------------------------
# Local session service (annotation backend)


class SessionStore:
    """Filesystem-backed store for a processed report directory.

    Annotation writes are append-then-rewrite: the in-memory record list is
    extended and the session's annotation file rewritten whole, under a
    lock, so readers never observe partial files.
    """

    def __init__(self, report_dir):
        self.root = Path(report_dir)
        sess_root = self.root / "sessions"
        if not sess_root.is_dir():
            raise PipelineError(f"no sessions directory in {self.root}")
        self.lock = threading.Lock()
        self.sessions: dict[str, Path] = {
            p.name: p for p in sorted(sess_root.iterdir()) if p.is_dir()}
        if (self.root / "scr_table.csv").exists():
            self.scr_table = pd.read_csv(
                self.root / "scr_table.csv",
                dtype={"participant_id": str, "session_id": str})
        else:
            self.scr_table = pd.DataFrame(columns=["session_id"])
        self._annotations: dict[str, list[AnnotationRecord]] = {}
        for sid, p in self.sessions.items():
            f = p / "annotations.csv"
            self._annotations[sid] = load_annotations_csv(f) \
                if f.exists() else []

    def _meta(self, sid: str) -> dict:
        f = self.sessions[sid] / "session.yaml"
        return yaml.safe_load(f.read_text()) if f.exists() else {}

    def session_list(self) -> list[dict]:
        out = []
        for sid in self.sessions:
            scrs = self.scr_table[self.scr_table["session_id"] == sid]
            meta = self._meta(sid)
            out.append({"session_id": sid,
                        "participant_id": str(meta.get("participant_id", "")),
                        "n_scrs": int(len(scrs)),
                        "t0": meta.get("t0")})
        return out

    def eda_series(self, sid: str) -> dict:
        df = pd.read_csv(self.sessions[sid] / "decomposition.csv")
        return {c: df[c].round(6).tolist()
                for c in ("unix_time", "sc", "tonic", "phasic")}

    def scrs(self, sid: str) -> list[dict]:
        df = self.scr_table[self.scr_table["session_id"] == sid]
        df = df.where(pd.notna(df), None)
        return df.to_dict(orient="records")

    def trajectory(self, sid: str) -> list[dict]:
        df = pd.read_csv(self.sessions[sid] / "trajectory.csv")
        return df.to_dict(orient="records")

    def annotations(self, sid: str, coder_id: str | None = None) -> list[dict]:
        records = anno.dedupe_last_writer(self._annotations[sid])
        if coder_id is not None:
            records = [r for r in records if r.coder_id == coder_id]
        records.sort(key=lambda r: (r.detected_scr_no, r.coder_id))
        return [r.__dict__ for r in records]

    def write_annotation(self, sid: str, payload: dict) -> AnnotationRecord:
        errors = {}
        scr_no = payload.get("detected_scr_no")
        if not isinstance(scr_no, int) or isinstance(scr_no, bool):
            errors["detected_scr_no"] = "must be an integer"
        label = payload.get("label")
        valid = set(anno.TAXONOMY) | {anno.DELETE}
        if not isinstance(label, str) or label not in valid:
            errors["label"] = f"must be one of the served taxonomy, " \
                              f"got {label!r}"
        coder = payload.get("coder_id")
        if not isinstance(coder, str) or not coder.strip():
            errors["coder_id"] = "must be a non-empty string"
        if errors:
            raise AnnotationRejected(errors)
        scrs = self.scr_table[self.scr_table["session_id"] == sid]
        if scr_no not in set(scrs["detected_scr_no"].astype(int)):
            raise AnnotationRejected(
                {"detected_scr_no": f"no detected SCR #{scr_no} in {sid}"})
        meta = self._meta(sid)
        record = AnnotationRecord(
            participant_id=str(meta.get("participant_id", "")),
            session_id=sid, detected_scr_no=int(scr_no), label=label,
            coder_id=coder, created_at_unix=round(time.time(), 2))
        with self.lock:
            self._annotations[sid].append(record)
            save_annotations_csv(self._annotations[sid],
                                 self.sessions[sid] / "annotations.csv")
        return record


class AnnotationRejected(Exception):
    def __init__(self, field_errors: dict):
        self.field_errors = field_errors
        super().__init__(str(field_errors))


def build_app(report_dir):
    """FastAPI application over a processed report directory."""
    from fastapi import Body, FastAPI, HTTPException
    from fastapi.responses import JSONResponse

    store = SessionStore(report_dir)
    app = FastAPI(title="pedstress session service")
    app.state.store = store

    def _session(sid: str) -> str:
        if sid not in store.sessions:
            raise HTTPException(status_code=404,
                                detail=f"unknown session {sid!r}")
        return sid

    @app.get("/api/taxonomy")
    def taxonomy():
        return {"labels": list(anno.TAXONOMY), "delete": anno.DELETE,
                "excluded_from_models": list(anno.EXCLUDED_FROM_MODELS)}

    @app.get("/api/sessions")
    def sessions():
        return store.session_list()

    @app.get("/api/sessions/{sid}/eda")
    def eda(sid: str):
        return store.eda_series(_session(sid))

    @app.get("/api/sessions/{sid}/scrs")
    def scrs(sid: str):
        return store.scrs(_session(sid))

    @app.get("/api/sessions/{sid}/trajectory")
    def trajectory(sid: str):
        return store.trajectory(_session(sid))

    @app.get("/api/sessions/{sid}/annotations")
    def annotations(sid: str, coder_id: str | None = None):
        return store.annotations(_session(sid), coder_id)

    @app.post("/api/sessions/{sid}/annotations")
    def annotate(sid: str, payload: dict = Body(...)):
        try:
            record = store.write_annotation(_session(sid), payload)
        except AnnotationRejected as exc:
            return JSONResponse(status_code=422,
                                content={"errors": exc.field_errors})
        return record.__dict__

    return app


def serve_sessions(report_dir, port: int = 8371, host: str = "127.0.0.1"):
    """Blocking local service over a processed report directory."""
    import uvicorn
    app = build_app(report_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
