import { describe, expect, it } from "vitest";
import { actionForKey, buildKeymap, keyForLabelIndex } from "../src/shortcuts.js";

const LABELS = Array.from({ length: 10 }, (_, i) => `Label ${i}`);

describe("shortcuts", () => {
  it("maps digits 1-9 then 0 to the ten labels in order", () => {
    const keymap = buildKeymap(LABELS);
    expect(keymap.get("1")).toBe("Label 0");
    expect(keymap.get("9")).toBe("Label 8");
    expect(keymap.get("0")).toBe("Label 9");
    expect(keymap.size).toBe(10);
  });

  it("rejects more labels than digit keys", () => {
    expect(() => buildKeymap([...LABELS, "extra"])).toThrow();
  });

  it("resolves label, delete, and navigation actions", () => {
    const keymap = buildKeymap(LABELS);
    expect(actionForKey("3", keymap)).toEqual({ kind: "label", label: "Label 2" });
    expect(actionForKey("x", keymap)).toEqual({ kind: "delete" });
    expect(actionForKey("ArrowRight", keymap)).toEqual({ kind: "next" });
    expect(actionForKey("k", keymap)).toEqual({ kind: "prev" });
    expect(actionForKey("q", keymap)).toEqual({ kind: "none" });
  });

  it("exposes the hint key per label index", () => {
    expect(keyForLabelIndex(0)).toBe("1");
    expect(keyForLabelIndex(9)).toBe("0");
    expect(keyForLabelIndex(10)).toBeNull();
  });
});
