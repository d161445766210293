/** Word-level diff between two texts via longest-common-subsequence,
 * used for the side-by-side revision view. Identical inputs produce no
 * added or removed segments. */

export type DiffKind = "same" | "added" | "removed";

export interface DiffSegment {
  kind: DiffKind;
  text: string;
}

function words(text: string): string[] {
  return text.split(/(\s+)/).filter((w) => w.length > 0);
}

export function diffWords(before: string, after: string): DiffSegment[] {
  const a = words(before);
  const b = words(after);
  const n = a.length;
  const m = b.length;

  // LCS table (n+1) x (m+1)
  const table: number[][] = Array.from({ length: n + 1 }, () => new Array<number>(m + 1).fill(0));
  for (let i = n - 1; i >= 0; i--) {
    for (let j = m - 1; j >= 0; j--) {
      table[i]![j] =
        a[i] === b[j]
          ? table[i + 1]![j + 1]! + 1
          : Math.max(table[i + 1]![j]!, table[i]![j + 1]!);
    }
  }

  const segments: DiffSegment[] = [];
  const push = (kind: DiffKind, text: string) => {
    const last = segments[segments.length - 1];
    if (last && last.kind === kind) {
      last.text += text;
    } else {
      segments.push({ kind, text });
    }
  };

  let i = 0;
  let j = 0;
  while (i < n && j < m) {
    if (a[i] === b[j]) {
      push("same", a[i]!);
      i++;
      j++;
    } else if (table[i + 1]![j]! >= table[i]![j + 1]!) {
      push("removed", a[i]!);
      i++;
    } else {
      push("added", b[j]!);
      j++;
    }
  }
  while (i < n) push("removed", a[i++]!);
  while (j < m) push("added", b[j++]!);
  return segments;
}

export function isEmptyDiff(segments: DiffSegment[]): boolean {
  return segments.every((s) => s.kind === "same");
}
