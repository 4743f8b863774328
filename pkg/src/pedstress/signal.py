"""Raw electrodermal trace handling: loading, resampling, smoothing, artifact
masking, and epoch-time synchronization with trajectory data."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy.ndimage import gaussian_filter1d

RAW_RATE_HZ = 100.0
PROCESSED_RATE_HZ = 10.0

# Gaussian smoothing window in samples at 10 Hz (3 s of data).
DEFAULT_SMOOTH_WINDOW = 30

# Auto-flagging: jump between adjacent 100 Hz samples that marks a motion
# artifact. Conservative; visual inspection remains the reference procedure.
ARTIFACT_JUMP_US = 0.5


class EdaError(ValueError):
    """Invalid electrodermal input."""


class SyncError(ValueError):
    """EDA and trajectory streams cannot be aligned in time."""


@dataclass(frozen=True)
class EdaTrace:
    """A timestamped skin-conductance series for one session.

    ``t`` holds epoch seconds, ``sc`` microsiemens. ``meta`` carries
    processing annotations (masked fraction, smoothing settings) and is
    excluded from equality.
    """

    participant_id: str
    session_id: str
    t: np.ndarray
    sc: np.ndarray
    rate_hz: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        sc = np.asarray(self.sc, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "sc", sc)
        if t.shape != sc.shape or t.ndim != 1:
            raise EdaError("t and sc must be 1-d arrays of equal length")
        if not np.all(np.isfinite(sc)):
            raise EdaError("non-finite conductance values")
        if np.any(sc < 0):
            raise EdaError("negative conductance values")
        if t.size > 1 and np.any(np.diff(t) < 0):
            raise EdaError("timestamps must be non-decreasing")

    @property
    def n(self) -> int:
        return int(self.t.size)

    @property
    def duration_s(self) -> float:
        return float(self.t[-1] - self.t[0]) if self.n > 1 else 0.0


@dataclass(frozen=True)
class ArtifactMask:
    """Epoch-second intervals flagged as motion artifacts."""

    intervals: tuple

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        for a, b in ivs:
            if b <= a:
                raise EdaError(f"empty or inverted interval ({a}, {b})")
        for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
            if a1 < b0:
                raise EdaError("mask intervals must be ordered and disjoint")

    @property
    def empty(self) -> bool:
        return len(self.intervals) == 0


def downsample(trace: EdaTrace, factor: int | None = None) -> EdaTrace:
    """Reduce a 100 Hz trace to 10 Hz by non-overlapping block means.

    Block means (rather than decimation) suppress aliasing. Output
    timestamps sit at block centers; a trailing partial block is dropped.
    """
    if factor is None:
        factor = int(round(trace.rate_hz / PROCESSED_RATE_HZ))
    if factor < 1:
        raise EdaError(f"bad downsample factor {factor}")
    n_blocks = trace.n // factor
    if n_blocks < 1:
        raise EdaError("trace shorter than one downsampling block")
    m = n_blocks * factor
    sc = trace.sc[:m].reshape(n_blocks, factor).mean(axis=1)
    t = trace.t[:m].reshape(n_blocks, factor).mean(axis=1)
    return replace(
        trace,
        t=t,
        sc=sc,
        rate_hz=trace.rate_hz / factor,
        meta={**trace.meta, "downsample_factor": factor},
    )


def gaussian_smooth(trace: EdaTrace, window: int = DEFAULT_SMOOTH_WINDOW,
                    sigma: float | None = None) -> EdaTrace:
    """Low-pass the trace with a normalized Gaussian kernel.

    sigma defaults to window/6 so the kernel support spans ±3 sigma. Edges
    are handled by reflection; DC gain is exactly 1, so constant traces are
    preserved.
    """
    if trace.n <= window:
        raise EdaError(f"trace length {trace.n} <= smoothing window {window}")
    if sigma is None:
        sigma = window / 6.0
    radius = window // 2
    sc = gaussian_filter1d(trace.sc, sigma=sigma, mode="reflect",
                           truncate=radius / sigma)
    sc = np.maximum(sc, 0.0)
    return replace(trace, sc=sc,
                   meta={**trace.meta, "smooth_window": window,
                         "smooth_sigma": sigma})


def mask_artifacts(trace: EdaTrace, mask: ArtifactMask) -> EdaTrace:
    """Replace masked intervals by linear interpolation across their edges.

    Intervals touching the trace endpoints are held at the nearest unmasked
    value. The masked fraction is recorded in ``meta``.
    """
    if mask.empty:
        return replace(trace, meta={**trace.meta, "masked_fraction": 0.0})
    bad = np.zeros(trace.n, dtype=bool)
    for a, b in mask.intervals:
        bad |= (trace.t >= a) & (trace.t <= b)
    if bad.all():
        raise EdaError("mask covers the entire trace")
    sc = trace.sc.copy()
    sc[bad] = np.interp(trace.t[bad], trace.t[~bad], trace.sc[~bad])
    frac = float(bad.mean())
    return replace(trace, sc=sc,
                   meta={**trace.meta, "masked_fraction": frac})


def auto_flag_artifacts(trace: EdaTrace, jump_us: float = ARTIFACT_JUMP_US,
                        pad_s: float = 0.1) -> ArtifactMask:
    """Flag sharp-angled jumps between adjacent raw samples.

    Adjacent-sample steps larger than ``jump_us`` are padded by ``pad_s``
    on both sides and merged into a mask.
    """
    jumps = np.flatnonzero(np.abs(np.diff(trace.sc)) > jump_us)
    if jumps.size == 0:
        return ArtifactMask(())
    t0, t1 = trace.t[0], trace.t[-1]
    raw = [(max(t0, trace.t[j] - pad_s), min(t1, trace.t[j + 1] + pad_s))
           for j in jumps]
    merged = [list(raw[0])]
    for a, b in raw[1:]:
        if a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return ArtifactMask(tuple(tuple(iv) for iv in merged))


def sync_epoch(eda: EdaTrace, traj, min_overlap_s: float = 5.0):
    """Crop an EDA trace and a trajectory to their common epoch window.

    Returns ``(eda_cropped, traj_cropped, skew_s)`` where ``skew_s`` is the
    largest offset between the two streams' window edges before cropping.
    """
    e0, e1 = float(eda.t[0]), float(eda.t[-1])
    times = traj.times()
    g0, g1 = float(times[0]), float(times[-1])
    lo, hi = max(e0, g0), min(e1, g1)
    if hi - lo < min_overlap_s:
        raise SyncError(
            f"insufficient overlap: EDA [{e0:.2f}, {e1:.2f}] vs "
            f"trajectory [{g0:.2f}, {g1:.2f}] "
            f"(need >= {min_overlap_s:.1f} s)")
    keep = (eda.t >= lo) & (eda.t <= hi)
    eda_c = replace(eda, t=eda.t[keep], sc=eda.sc[keep],
                    meta={**eda.meta, "sync_window": (lo, hi)})
    traj_c = traj.crop(lo, hi)
    skew = max(abs(e0 - g0), abs(e1 - g1))
    return eda_c, traj_c, skew


# ---------------------------------------------------------------------------
# File formats


def load_eda_csv(path, participant_id: str, session_id: str,
                 rate_hz: float = RAW_RATE_HZ) -> EdaTrace:
    """Read `unix_time, sc_microsiemens` delimited text (header required)."""
    df = pd.read_csv(path)
    missing = {"unix_time", "sc_microsiemens"} - set(df.columns)
    if missing:
        raise EdaError(f"{path}: missing columns {sorted(missing)}")
    return EdaTrace(participant_id, session_id,
                    df["unix_time"].to_numpy(float),
                    df["sc_microsiemens"].to_numpy(float), rate_hz)


def save_eda_csv(trace: EdaTrace, path) -> None:
    df = pd.DataFrame({"unix_time": trace.t, "sc_microsiemens": trace.sc})
    df.to_csv(path, index=False)


def load_mask_csv(path) -> ArtifactMask:
    """Read `start_unix, end_unix` delimited text."""
    df = pd.read_csv(path)
    missing = {"start_unix", "end_unix"} - set(df.columns)
    if missing:
        raise EdaError(f"{path}: missing columns {sorted(missing)}")
    return ArtifactMask(tuple(zip(df["start_unix"], df["end_unix"])))
