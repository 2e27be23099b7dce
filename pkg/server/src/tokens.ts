/**
 * Token handling shared by all providers.
 *
 * The protocol deals in whole tokens: fill-mask responses must propose
 * complete vocabulary words, never subword pieces.  Providers backed by
 * subword models merge a candidate's pieces when they form a single token
 * and drop it otherwise; the builtin providers already emit whole tokens,
 * so for them the filter is a no-op safety net.
 */

export function tokenize(text: string): string[] {
  return text
    .split(/\s+/)
    .filter((piece) => piece.length > 0)
    .map((piece) => piece.toLowerCase());
}

export function isWholeToken(token: string): boolean {
  return token.length > 0 && !/\s/.test(token);
}

/**
 * Merge-or-drop policy for subword candidates: strips common continuation
 * markers ("##ing", "Ġfilm") and joins the pieces; returns null when the
 * result is not a single whole token.
 */
export function mergePieces(pieces: string[]): string | null {
  const cleaned = pieces
    .map((piece) => piece.replace(/^##/, "").replace(/^Ġ/, ""))
    .join("");
  return isWholeToken(cleaned) ? cleaned.toLowerCase() : null;
}

export interface MaskCandidates {
  tokens: string[];
  logits: number[];
}

/** Drop non-whole tokens from a candidate list, preserving order. */
export function keepWholeTokens(candidates: MaskCandidates): MaskCandidates {
  const tokens: string[] = [];
  const logits: number[] = [];
  candidates.tokens.forEach((token, i) => {
    if (isWholeToken(token)) {
      tokens.push(token);
      logits.push(candidates.logits[i]);
    }
  });
  return { tokens, logits };
}
