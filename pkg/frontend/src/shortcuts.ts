/**
 * Keyboard bindings: digits 1-9 and 0 label the selected SCR with the
 * corresponding taxonomy entry, x marks it Delete, and arrows navigate.
 */

export const LABEL_KEYS = ["1", "2", "3", "4", "5", "6", "7", "8", "9", "0"] as const;

export type KeyAction =
  | { kind: "label"; label: string }
  | { kind: "delete" }
  | { kind: "next" }
  | { kind: "prev" }
  | { kind: "none" };

export function keyForLabelIndex(index: number): string | null {
  return LABEL_KEYS[index] ?? null;
}

export function buildKeymap(labels: readonly string[]): Map<string, string> {
  if (labels.length > LABEL_KEYS.length) {
    throw new Error(`too many labels (${labels.length}) for digit shortcuts`);
  }
  const map = new Map<string, string>();
  labels.forEach((label, i) => {
    const key = LABEL_KEYS[i];
    if (key !== undefined) map.set(key, label);
  });
  return map;
}

export function actionForKey(
  key: string,
  keymap: Map<string, string>,
): KeyAction {
  const label = keymap.get(key);
  if (label !== undefined) return { kind: "label", label };
  switch (key) {
    case "x":
      return { kind: "delete" };
    case "ArrowRight":
    case "j":
      return { kind: "next" };
    case "ArrowLeft":
    case "k":
      return { kind: "prev" };
    default:
      return { kind: "none" };
  }
}
