/** The closed mask-token vocabulary and draft validation. Users insert
 * tokens through the palette; free-typed brackets outside the vocabulary
 * are flagged before submission. */

export const MASK_TOKENS = [
  "[ROLE]",
  "[LOCATION]",
  "[FIRM_NAME]",
  "[SALARY]",
  "[YOE]",
  "[SENIORITY]",
] as const;

export type MaskToken = (typeof MASK_TOKENS)[number];

const BRACKET_RE = /\[([A-Za-z_][A-Za-z0-9_\- ]*)\]/g;

export function foreignBracketTokens(text: string): string[] {
  const found: string[] = [];
  for (const match of text.matchAll(BRACKET_RE)) {
    const token = match[0];
    if (!(MASK_TOKENS as readonly string[]).includes(token)) {
      found.push(token);
    }
  }
  return found;
}

/** Insert a token at the cursor, padding with spaces so tokens never fuse
 * with neighbouring words. Returns the new text and cursor position. */
export function insertToken(
  text: string,
  cursor: number,
  token: MaskToken,
): { text: string; cursor: number } {
  const at = Math.max(0, Math.min(cursor, text.length));
  const before = text.slice(0, at);
  const after = text.slice(at);
  const pad = (side: string, edge: "end" | "start") => {
    if (side.length === 0) return "";
    const ch = edge === "end" ? side[side.length - 1] : side[0];
    return ch && /\s/.test(ch) ? "" : " ";
  };
  const inserted = pad(before, "end") + token + pad(after, "start");
  return { text: before + inserted + after, cursor: at + inserted.length };
}
