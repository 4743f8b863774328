/** Epoch seconds <-> timeline pixels, shared by the cursor and markers. */

export class Timeline {
  constructor(
    readonly t0: number,
    readonly t1: number,
    readonly width: number,
  ) {
    if (t1 <= t0) throw new Error(`empty time range [${t0}, ${t1}]`);
    if (width <= 0) throw new Error(`non-positive width ${width}`);
  }

  xOf(unix: number): number {
    const clamped = Math.min(Math.max(unix, this.t0), this.t1);
    return ((clamped - this.t0) / (this.t1 - this.t0)) * this.width;
  }

  tOf(x: number): number {
    const clamped = Math.min(Math.max(x, 0), this.width);
    return this.t0 + (clamped / this.width) * (this.t1 - this.t0);
  }

  /** Tick positions every `step` seconds, as (x, seconds-from-start). */
  ticks(step: number): Array<{ x: number; seconds: number }> {
    const out: Array<{ x: number; seconds: number }> = [];
    for (let t = this.t0; t <= this.t1 + 1e-9; t += step) {
      out.push({ x: this.xOf(t), seconds: t - this.t0 });
    }
    return out;
  }
}
