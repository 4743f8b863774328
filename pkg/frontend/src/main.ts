/**
 * Browser entry point: wires the API client, the session view state, the
 * timeline, and the top-down replay into the DOM. All logic that can be
 * unit-tested lives in the sibling modules; this file only renders.
 */
import { ApiClient, type Scr, type TrajectoryFrame } from "./api.js";
import { SessionView } from "./state.js";
import { Timeline } from "./timeline.js";
import { actionForKey, buildKeymap, keyForLabelIndex } from "./shortcuts.js";
import { byEntity, fitViewport, frameAt, toScreen } from "./replay.js";

const WAVE_W = 900;
const WAVE_H = 160;
const REPLAY_W = 420;
const REPLAY_H = 420;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  private client = new ApiClient("");
  private coderId = "coder_a";
  private view: SessionView | null = null;
  private timeline: Timeline | null = null;
  private eda: { unix_time: number[]; phasic: number[] } | null = null;
  private tracks: Map<string, TrajectoryFrame[]> = new Map();
  private allFrames: TrajectoryFrame[] = [];
  private keymap = new Map<string, string>();
  private deleteLabel = "Delete";

  async start(): Promise<void> {
    const taxonomy = await this.client.taxonomy();
    this.keymap = buildKeymap(taxonomy.labels);
    this.deleteLabel = taxonomy.delete;
    this.renderLabelList(taxonomy.labels);

    const sessions = await this.client.sessions();
    const picker = el<HTMLSelectElement>("session-picker");
    picker.innerHTML = "";
    for (const s of sessions) {
      const opt = document.createElement("option");
      opt.value = s.session_id;
      opt.textContent = `${s.session_id} (${s.n_scrs} SCRs)`;
      picker.appendChild(opt);
    }
    picker.addEventListener("change", () => void this.loadSession(picker.value));
    document.addEventListener("keydown", (ev) => this.onKey(ev));
    el<HTMLCanvasElement>("waveform").addEventListener("click", (ev) => {
      if (this.timeline === null || this.view === null) return;
      const rect = (ev.target as HTMLCanvasElement).getBoundingClientRect();
      this.view.seek(this.timeline.tOf(ev.clientX - rect.left));
      this.render();
    });
    if (sessions.length > 0) await this.loadSession(sessions[0]!.session_id);
  }

  private async loadSession(sessionId: string): Promise<void> {
    const [eda, scrs, frames, records] = await Promise.all([
      this.client.eda(sessionId),
      this.client.scrs(sessionId),
      this.client.trajectory(sessionId),
      this.client.annotations(sessionId, this.coderId),
    ]);
    const t0 = eda.unix_time[0] ?? 0;
    const t1 = eda.unix_time[eda.unix_time.length - 1] ?? t0 + 1;
    this.eda = { unix_time: eda.unix_time, phasic: eda.phasic };
    this.tracks = byEntity(frames);
    this.allFrames = frames;
    this.timeline = new Timeline(t0, t1, WAVE_W);
    this.view = new SessionView(sessionId, scrs, this.coderId, t0, t1);
    this.view.loadAnnotations(records);
    this.render();
  }

  private onKey(ev: KeyboardEvent): void {
    if (this.view === null) return;
    const action = actionForKey(ev.key, this.keymap);
    switch (action.kind) {
      case "label":
        void this.postLabel(action.label);
        break;
      case "delete":
        void this.postLabel(this.deleteLabel);
        break;
      case "next":
        this.view.selectNext();
        break;
      case "prev":
        this.view.selectPrev();
        break;
      case "none":
        return;
    }
    ev.preventDefault();
    this.render();
  }

  private async postLabel(label: string): Promise<void> {
    if (this.view === null) return;
    const payload = this.view.applyLabel(label);
    if (payload === null) return;
    const result = await this.client.annotate(this.view.sessionId, payload);
    el("status").textContent = result.ok
      ? `SCR #${payload.detected_scr_no} -> ${label}`
      : `rejected: ${JSON.stringify(result.errors)}`;
    this.render();
  }

  private renderLabelList(labels: readonly string[]): void {
    const list = el("label-list");
    list.innerHTML = "";
    labels.forEach((label, i) => {
      const li = document.createElement("li");
      li.textContent = `[${keyForLabelIndex(i) ?? "?"}] ${label}`;
      list.appendChild(li);
    });
    const del = document.createElement("li");
    del.textContent = `[x] ${this.deleteLabel}`;
    list.appendChild(del);
  }

  private render(): void {
    if (this.view === null || this.timeline === null || this.eda === null) return;
    this.renderWaveform();
    this.renderReplay();
    this.renderScrList();
  }

  private renderWaveform(): void {
    const view = this.view!;
    const tl = this.timeline!;
    const canvas = el<HTMLCanvasElement>("waveform");
    const ctx = canvas.getContext("2d")!;
    ctx.clearRect(0, 0, WAVE_W, WAVE_H);
    const { unix_time, phasic } = this.eda!;
    const max = Math.max(0.5, ...phasic);
    ctx.strokeStyle = "#2a6";
    ctx.beginPath();
    unix_time.forEach((t, i) => {
      const x = tl.xOf(t);
      const y = WAVE_H - 10 - ((phasic[i] ?? 0) / max) * (WAVE_H - 20);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
    for (const m of view.markers()) {
      const x = tl.xOf(m.unix);
      ctx.strokeStyle = m.selected ? "#d33" : m.label ? "#36c" : "#aaa";
      ctx.beginPath();
      ctx.moveTo(x, 0);
      ctx.lineTo(x, WAVE_H);
      ctx.stroke();
    }
    ctx.strokeStyle = "#000";
    const cx = tl.xOf(view.cursorUnix);
    ctx.beginPath();
    ctx.moveTo(cx, 0);
    ctx.lineTo(cx, WAVE_H);
    ctx.stroke();
  }

  private renderReplay(): void {
    const view = this.view!;
    const svg = el("replay");
    const vp = fitViewport(this.allFrames, REPLAY_W, REPLAY_H);
    const parts: string[] = [];
    for (const e of frameAt(this.tracks, view.cursorUnix)) {
      const { px, py } = toScreen(vp, e.x, e.y);
      if (e.entityKind === "pedestrian" || e.entityKind === "avatar") {
        const fill = e.entityKind === "pedestrian" ? "#d33" : "#f90";
        parts.push(`<circle cx="${px}" cy="${py}" r="5" fill="${fill}"/>`);
      } else {
        const fill = e.entityKind === "av" ? "#36c" : "#555";
        parts.push(
          `<rect x="${px - 9}" y="${py - 4}" width="18" height="8" fill="${fill}"/>`,
        );
      }
    }
    svg.innerHTML = parts.join("");
  }

  private renderScrList(): void {
    const view = this.view!;
    const list = el("scr-list");
    list.innerHTML = "";
    view.markers().forEach((m) => {
      const li = document.createElement("li");
      const secs = (m.unix - view.t0).toFixed(1);
      li.textContent = `#${m.scrNo} @${secs}s a=${m.amplitude.toFixed(2)} ${m.label ?? "·"}`;
      if (m.selected) li.className = "selected";
      list.appendChild(li);
    });
    el("status").textContent =
      `${view.labeledCount}/${view.scrs.length} labeled`;
  }
}

if (typeof document !== "undefined") {
  void new App().start();
}
