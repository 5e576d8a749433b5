/** Value-to-colour mapping for the chemistry grid: 0 is cold blue, 1 is hot
 * red, matching the convention that stronger blue-channel signal means the
 * cell is oscillating. */

export function heatColor(value: number): string {
  const v = Math.min(1, Math.max(0, value));
  const r = Math.round(255 * v);
  const g = Math.round(64 * v);
  const b = Math.round(255 * (1 - v));
  return `rgb(${r}, ${g}, ${b})`;
}

/** Signed motor colour: clockwise (positive) amber, counter-clockwise cyan,
 * intensity follows |speed|. */
export function motorColor(speed: number): string {
  const v = Math.min(1, Math.abs(speed));
  if (speed >= 0) {
    return `rgba(255, 170, 0, ${v.toFixed(3)})`;
  }
  return `rgba(0, 190, 255, ${v.toFixed(3)})`;
}
