/** Display formatting. All values come from the API; this file only renders them. */

/** Significant digits used everywhere a statistic is displayed. */
export const DISPLAY_DIGITS = 7;

/**
 * Render a number to DISPLAY_DIGITS significant digits.
 *
 * Uses toPrecision rather than toFixed so tiny widths keep their leading
 * digits. Zero (including -0) renders as a plain "0".
 */
export function formatSig(x: number, digits = DISPLAY_DIGITS): string {
  if (!Number.isFinite(x)) return String(x);
  if (x === 0) return "0";
  return x.toPrecision(digits);
}

export function formatInterval(lo: number, hi: number): string {
  return `[${formatSig(lo)}, ${formatSig(hi)}]`;
}

/**
 * Parse a text-field fraction. Returns the number when it is a finite
 * value in [0, 1], otherwise null; the caller blocks submission on null.
 */
export function parseFraction(raw: string): number | null {
  const trimmed = raw.trim();
  if (trimmed === "") return null;
  const value = Number(trimmed);
  if (!Number.isFinite(value)) return null;
  if (value < 0 || value > 1) return null;
  return value;
}
