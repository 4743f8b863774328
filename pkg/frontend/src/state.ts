/**
 * Per-session view state: which SCR is selected, what the replay cursor
 * time is, and the labels known so far. The cursor, the timeline marker,
 * and the replay position all derive from the same epoch seconds, so the
 * three stay synchronized by construction.
 */
import type { AnnotationRecord, Scr } from "./api.js";

export interface Marker {
  scrNo: number;
  unix: number;
  amplitude: number;
  label: string | null;
  selected: boolean;
}

export class SessionView {
  private selected = 0;
  private labels = new Map<number, string>();
  cursorUnix: number;

  constructor(
    readonly sessionId: string,
    readonly scrs: readonly Scr[],
    readonly coderId: string,
    readonly t0: number,
    readonly t1: number,
  ) {
    this.cursorUnix = scrs.length > 0 ? scrs[0]!.scr_onset_unix : t0;
  }

  /** Merge server-side records (last writer per SCR wins, ours only). */
  loadAnnotations(records: readonly AnnotationRecord[]): void {
    for (const r of records) {
      if (r.coder_id === this.coderId) {
        this.labels.set(r.detected_scr_no, r.label);
      }
    }
  }

  get selectedIndex(): number {
    return this.selected;
  }

  get selectedScr(): Scr | null {
    return this.scrs[this.selected] ?? null;
  }

  labelOf(scrNo: number): string | null {
    return this.labels.get(scrNo) ?? null;
  }

  get labeledCount(): number {
    return this.labels.size;
  }

  select(index: number): void {
    if (this.scrs.length === 0) return;
    this.selected = Math.min(Math.max(index, 0), this.scrs.length - 1);
    this.cursorUnix = this.scrs[this.selected]!.scr_onset_unix;
  }

  selectNext(): void {
    this.select(this.selected + 1);
  }

  selectPrev(): void {
    this.select(this.selected - 1);
  }

  /** Seek the replay; selection follows the nearest SCR at or before t. */
  seek(unix: number): void {
    this.cursorUnix = Math.min(Math.max(unix, this.t0), this.t1);
    let nearest = 0;
    for (let i = 0; i < this.scrs.length; i++) {
      if (this.scrs[i]!.scr_onset_unix <= this.cursorUnix) nearest = i;
    }
    this.selected = nearest;
  }

  /** Record a label locally and return the payload to post. */
  applyLabel(label: string): { detected_scr_no: number; label: string; coder_id: string } | null {
    const scr = this.selectedScr;
    if (scr === null) return null;
    this.labels.set(scr.detected_scr_no, label);
    return { detected_scr_no: scr.detected_scr_no, label, coder_id: this.coderId };
  }

  markers(): Marker[] {
    return this.scrs.map((s, i) => ({
      scrNo: s.detected_scr_no,
      unix: s.scr_onset_unix,
      amplitude: s.scr_amplitude,
      label: this.labelOf(s.detected_scr_no),
      selected: i === this.selected,
    }));
  }
}
