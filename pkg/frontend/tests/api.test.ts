import { describe, expect, it } from "vitest";
import {
  AnnotationRecordSchema,
  ScrSchema,
  SessionInfoSchema,
  TaxonomySchema,
} from "../src/api.js";

const SCR_PAYLOAD = {
  participant_id: "0001",
  session_id: "P0001_S01",
  unix: "1700000012.300000",
  elapsed_time: "12.300000",
  position: "Crossing lane 1",
  scr_amplitude: "0.812345",
  scr_onset_unix: "1700000010.800000",
  scr_t: "57.123456",
  position_f: "Crossing lane 1",
  amp_class: "0.7 <= SCR < 1.0",
  detected_scr_no: "3",
  annotation: null,
};

describe("ScrSchema", () => {
  it("coerces the backend's string cells to numbers", () => {
    const scr = ScrSchema.parse(SCR_PAYLOAD);
    expect(scr.detected_scr_no).toBe(3);
    expect(scr.scr_amplitude).toBeCloseTo(0.812345);
    expect(scr.scr_t).toBeCloseTo(57.123456);
  });

  it("maps missing T scores to null", () => {
    const scr = ScrSchema.parse({ ...SCR_PAYLOAD, scr_t: null });
    expect(scr.scr_t).toBeNull();
  });

  it("rejects a payload without an SCR number", () => {
    const { detected_scr_no: _omitted, ...rest } = SCR_PAYLOAD;
    expect(() => ScrSchema.parse(rest)).toThrow();
  });
});

describe("TaxonomySchema", () => {
  it("requires exactly ten labels", () => {
    const good = {
      labels: Array.from({ length: 10 }, (_, i) => `L${i}`),
      delete: "Delete",
      excluded_from_models: ["Immersion"],
    };
    expect(TaxonomySchema.parse(good).labels).toHaveLength(10);
    expect(() =>
      TaxonomySchema.parse({ ...good, labels: good.labels.slice(0, 9) }),
    ).toThrow();
  });
});

describe("SessionInfoSchema", () => {
  it("accepts the session list entry shape", () => {
    const info = SessionInfoSchema.parse({
      session_id: "P0001_S01",
      participant_id: "0001",
      n_scrs: 7,
      t0: 1700000000.0,
    });
    expect(info.n_scrs).toBe(7);
  });
});

describe("AnnotationRecordSchema", () => {
  it("round-trips a record", () => {
    const rec = AnnotationRecordSchema.parse({
      participant_id: "0001",
      session_id: "P0001_S01",
      detected_scr_no: "4",
      label: "Crossing",
      coder_id: "coder_a",
      created_at_unix: "1700000099.5",
    });
    expect(rec.detected_scr_no).toBe(4);
    expect(rec.created_at_unix).toBeCloseTo(1700000099.5);
  });
});
