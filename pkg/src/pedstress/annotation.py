"""Label taxonomy, annotation records, dual-coder agreement, and the merge
of labels into the SCR table."""

from __future__ import annotations

from dataclasses import dataclass

import pandas as pd

# Final label set from the hybrid coding workflow, in reporting order.
TAXONOMY = (
    "Immersion",
    "Avatar's action",
    "Traffic speed",
    "Checking the far-side traffic",
    "Hesitation to cross",
    "Decision to cross",
    "Crossing",
    "Fear of accident",
    "Accident",
    "Unknown",
)

# Housekeeping marker: removes an event from all downstream statistics.
# Not a taxonomy member.
DELETE = "Delete"

# Omitted from models (not tied to the crossing task itself).
EXCLUDED_FROM_MODELS = ("Immersion",)

DEFAULT_LABEL = "Unknown"


class AnnotationError(ValueError):
    """Invalid annotation input."""


def load_taxonomy(path=None) -> tuple[str, ...]:
    """The fixed label set, optionally extended from a config file with
    one extra label per line."""
    labels = list(TAXONOMY)
    if path is not None:
        with open(path, encoding="utf-8") as f:
            for line in f:
                label = line.strip()
                if label and label not in labels and label != DELETE:
                    labels.append(label)
    return tuple(labels)


@dataclass(frozen=True)
class AnnotationRecord:
    """One coder's label for one detected SCR."""

    participant_id: str
    session_id: str
    detected_scr_no: int
    label: str
    coder_id: str
    created_at_unix: float

    def __post_init__(self):
        if self.label not in TAXONOMY and self.label != DELETE:
            raise AnnotationError(f"label {self.label!r} not in taxonomy")

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.participant_id, self.session_id, self.detected_scr_no)


def dedupe_last_writer(records: list[AnnotationRecord]) -> list[AnnotationRecord]:
    """Collapse an append-only record stream to the last write per
    (event key, coder)."""
    latest: dict[tuple, AnnotationRecord] = {}
    for r in records:
        latest[r.key + (r.coder_id,)] = r
    return list(latest.values())


def apply_annotations(events, records: list[AnnotationRecord],
                      coder_id: str):
    """Attach one coder's labels to detected events.

    Events without a record default to Unknown. Delete-labeled events keep
    the marker and are excluded from statistics downstream. Records that do
    not resolve to a detected SCR are a validation error.
    """
    by_key = {(e.participant_id, e.session_id, e.detected_scr_no): e
              for e in events}
    dangling = []
    for r in dedupe_last_writer(records):
        if r.coder_id != coder_id:
            continue
        if r.key not in by_key:
            dangling.append(r.key)
            continue
        by_key[r.key].annotation = r.label
    if dangling:
        raise AnnotationError(
            f"annotation records with no matching SCR: {sorted(dangling)}")
    for e in events:
        if e.annotation is None:
            e.annotation = DEFAULT_LABEL
    return events


def coder_agreement(records_a: list[AnnotationRecord],
                    records_b: list[AnnotationRecord]) -> dict:
    """Percent agreement and Cohen's kappa over the shared event keys."""
    a = {r.key: r.label for r in dedupe_last_writer(records_a)}
    b = {r.key: r.label for r in dedupe_last_writer(records_b)}
    shared = sorted(set(a) & set(b))
    if not shared:
        raise AnnotationError("coders share no event keys")
    la = [a[k] for k in shared]
    lb = [b[k] for k in shared]
    n = len(shared)
    p_obs = sum(x == y for x, y in zip(la, lb)) / n
    labels = sorted(set(la) | set(lb))
    p_exp = sum((la.count(lab) / n) * (lb.count(lab) / n) for lab in labels)
    if p_exp >= 1.0:
        kappa = 1.0 if p_obs >= 1.0 else 0.0
    else:
        kappa = (p_obs - p_exp) / (1.0 - p_exp)
    return {"percent_agreement": p_obs, "kappa": kappa, "n_shared": n}


def label_frequencies(events) -> pd.DataFrame:
    """Per-label counts with T-score five-number summaries.

    Delete-marked events are tallied separately so the counts plus the
    deleted row always sum to the total detected SCRs.
    """
    rows = []
    for label in list(TAXONOMY) + [DELETE]:
        evs = [e for e in events if e.annotation == label]
        ts = [e.t_score for e in evs if e.t_score is not None]
        row = {"label": label, "count": len(evs)}
        if ts:
            s = pd.Series(ts)
            row.update(t_min=s.min(), t_q1=s.quantile(0.25),
                       t_median=s.median(), t_q3=s.quantile(0.75),
                       t_max=s.max())
        else:
            row.update(t_min=None, t_q1=None, t_median=None, t_q3=None,
                       t_max=None)
        rows.append(row)
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# Annotation files

ANNOTATION_COLUMNS = ["participant_id", "session_id", "detected_scr_no",
                      "label", "coder_id", "created_at_unix"]


def save_annotations_csv(records: list[AnnotationRecord], path) -> None:
    df = pd.DataFrame(
        [{c: getattr(r, c) for c in ANNOTATION_COLUMNS} for r in records],
        columns=ANNOTATION_COLUMNS)
    df.to_csv(path, index=False, float_format="%.2f")


def load_annotations_csv(path) -> list[AnnotationRecord]:
    df = pd.read_csv(path, dtype={"participant_id": str, "session_id": str})
    missing = set(ANNOTATION_COLUMNS) - set(df.columns)
    if missing:
        raise AnnotationError(f"{path}: missing columns {sorted(missing)}")
    return [AnnotationRecord(str(r.participant_id), str(r.session_id),
                             int(r.detected_scr_no), str(r.label),
                             str(r.coder_id), float(r.created_at_unix))
            for r in df.itertuples()]
