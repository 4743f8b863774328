"""SCR event detection, amplitude classes, and per-participant
standardization into z and T scores."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd

from .decomposition import Decomposition

DETECTION_THRESHOLD_US = 0.1

# A new onset is only declared once the driver has fallen below this
# fraction of the previous excursion's peak; prevents double-counting
# compound responses.
RELEASE_FRACTION = 0.1

# Driver level treated as "active"; tiny relative to any 0.1 uS response.
DRIVER_FLOOR = 1e-3

# Excursions closer than this are one response: the deconvolution renders
# an off-grid impulse as a couple of adjacent driver spikes, and distinct
# SCRs recover for at least a second before the next rise.
MERGE_WINDOW_S = 1.0


class AmplitudeClass(str, Enum):
    SMALL = "0.1 <= SCR < 0.4"
    MEDIUM = "0.4 <= SCR < 0.7"
    LARGE = "0.7 <= SCR < 1.0"
    VERY_LARGE = "SCR >= 1.0"


class ScrError(ValueError):
    """Invalid SCR operation."""


def classify_amplitude(amplitude: float) -> AmplitudeClass:
    """Half-open amplitude class, left-closed at each boundary."""
    if amplitude < DETECTION_THRESHOLD_US:
        raise ScrError(f"amplitude {amplitude} below detection threshold")
    if amplitude < 0.4:
        return AmplitudeClass.SMALL
    if amplitude < 0.7:
        return AmplitudeClass.MEDIUM
    if amplitude < 1.0:
        return AmplitudeClass.LARGE
    return AmplitudeClass.VERY_LARGE


@dataclass
class ScrEvent:
    """One detected skin conductance response."""

    participant_id: str
    session_id: str
    onset_unix: float
    peak_unix: float
    amplitude: float
    amplitude_class: AmplitudeClass
    detected_scr_no: int
    z_score: float | None = None
    t_score: float | None = None
    position_label: str | None = None
    annotation: str | None = None
    standardizable: bool = True

    def __post_init__(self):
        if self.onset_unix >= self.peak_unix:
            raise ScrError(
                f"onset {self.onset_unix} must precede peak {self.peak_unix}")


@dataclass(frozen=True)
class ParticipantScrStats:
    """Per-participant amplitude statistics pooled over all sessions."""

    participant_id: str
    mean_amplitude: float
    sd_amplitude: float
    n_scrs: int


def detect_scrs(decomp: Decomposition,
                threshold: float = DETECTION_THRESHOLD_US) -> list[ScrEvent]:
    """One event per driver excursion whose phasic amplitude reaches the
    threshold.

    The amplitude is the phasic peak minus the phasic value at onset,
    measured between this excursion's onset and the next one. Events are
    ordered by onset.
    """
    driver = decomp.driver
    phasic = decomp.phasic
    t = decomp.trace.t
    n = driver.size

    # Excursion onsets: driver rises above the floor after having released
    # below RELEASE_FRACTION of the previous excursion's running peak.
    onsets = []
    i = 0
    while i < n:
        if driver[i] > DRIVER_FLOOR:
            onset = i
            peak_d = driver[i]
            j = i + 1
            while j < n:
                peak_d = max(peak_d, driver[j])
                if driver[j] < max(RELEASE_FRACTION * peak_d, DRIVER_FLOOR):
                    break
                j += 1
            onsets.append(onset)
            i = j
        else:
            i += 1

    # Merge excursions that start within MERGE_WINDOW_S of the previous one.
    rate = decomp.trace.rate_hz
    merged = []
    for onset in onsets:
        if merged and (onset - merged[-1]) / rate < MERGE_WINDOW_S:
            continue
        merged.append(onset)
    onsets = merged

    events = []
    for no, onset in enumerate(onsets):
        end = onsets[no + 1] if no + 1 < len(onsets) else n
        seg = phasic[onset:end]
        peak_rel = int(np.argmax(seg))
        amplitude = float(seg[peak_rel] - phasic[onset])
        if amplitude < threshold:
            continue
        peak_idx = onset + peak_rel
        if peak_idx == onset:
            continue
        events.append(ScrEvent(
            participant_id=decomp.trace.participant_id,
            session_id=decomp.trace.session_id,
            onset_unix=float(t[onset]),
            peak_unix=float(t[peak_idx]),
            amplitude=amplitude,
            amplitude_class=classify_amplitude(amplitude),
            detected_scr_no=len(events) + 1,
        ))
    return events


def participant_stats(events: list[ScrEvent], participant_id: str,
                      ddof: int = 0) -> ParticipantScrStats:
    amps = np.array([e.amplitude for e in events
                     if e.participant_id == participant_id
                     and e.annotation != "Delete"])
    if amps.size == 0:
        raise ScrError(f"no SCRs for participant {participant_id}")
    sd = float(amps.std(ddof=ddof)) if amps.size > 1 else 0.0
    return ParticipantScrStats(participant_id, float(amps.mean()), sd,
                               int(amps.size))


def standardize(events: list[ScrEvent], ddof: int = 0) -> list[ScrEvent]:
    """Attach z and T scores to each participant's events.

    z = (amplitude - participant mean) / participant sd, pooled over all of
    the participant's sessions; T = 50 + 10 z. The sd uses divisor n by
    default so sd(z) = 1 exactly (set ddof=1 for the sample form).
    Delete-annotated events are excluded from the statistics and from
    scoring; participants with fewer than 2 usable events are flagged
    unstandardizable.
    """
    by_participant: dict[str, list[ScrEvent]] = {}
    for e in events:
        by_participant.setdefault(e.participant_id, []).append(e)
    for pid, evs in by_participant.items():
        usable = [e for e in evs if e.annotation != "Delete"]
        if len(usable) < 2:
            for e in evs:
                e.standardizable = False
                e.z_score = e.t_score = None
            continue
        stats = participant_stats(usable, pid, ddof=ddof)
        if stats.sd_amplitude <= 0:
            for e in evs:
                e.standardizable = False
                e.z_score = e.t_score = None
            continue
        for e in evs:
            if e.annotation == "Delete":
                e.z_score = e.t_score = None
                continue
            e.z_score = (e.amplitude - stats.mean_amplitude) / stats.sd_amplitude
            e.t_score = 50.0 + 10.0 * e.z_score
            e.standardizable = True
    return events


SCR_EXPORT_COLUMNS = [
    "participant_id", "session_id", "unix", "elapsed_time", "position",
    "scr_amplitude", "scr_onset_unix", "scr_t", "position_f", "amp_class",
    "detected_scr_no", "annotation",
]


def events_to_frame(events: list[ScrEvent],
                    session_start: dict[str, float] | None = None) -> pd.DataFrame:
    """SCR table in the audit export layout.

    ``session_start`` maps session ids to their epoch start for the
    elapsed-time column; without it elapsed time is relative to each
    session's first event.
    """
    rows = []
    starts: dict[str, float] = dict(session_start or {})
    for e in events:
        starts.setdefault(e.session_id, e.onset_unix)
    for e in events:
        rows.append({
            "participant_id": e.participant_id,
            "session_id": e.session_id,
            "unix": round(e.peak_unix, 2),
            "elapsed_time": round(e.peak_unix - starts[e.session_id], 2),
            "position": e.position_label or "",
            "scr_amplitude": round(e.amplitude, 4),
            "scr_onset_unix": round(e.onset_unix, 2),
            "scr_t": round(e.t_score, 4) if e.t_score is not None else "",
            "position_f": e.position_label or "",
            "amp_class": e.amplitude_class.value,
            "detected_scr_no": e.detected_scr_no,
            "annotation": e.annotation or "",
        })
    return pd.DataFrame(rows, columns=SCR_EXPORT_COLUMNS)


def save_events_csv(events: list[ScrEvent], path,
                    session_start: dict[str, float] | None = None) -> None:
    events_to_frame(events, session_start).to_csv(path, index=False)
