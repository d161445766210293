/** Pure view-model for the predicted-success gauge. The value is always
 * the untouched /score probability; only presentation is derived. */

export interface GaugeView {
  value: number | null;
  percentText: string;
  fillFraction: number;
  tone: "low" | "mid" | "high" | "none";
}

export function gaugeView(p: number | null): GaugeView {
  if (p === null) {
    return { value: null, percentText: "--", fillFraction: 0, tone: "none" };
  }
  const clamped = Math.max(0, Math.min(1, p));
  const tone = clamped < 0.4 ? "low" : clamped < 0.6 ? "mid" : "high";
  return {
    value: p,
    percentText: `${(p * 100).toFixed(1)}%`,
    fillFraction: clamped,
    tone,
  };
}
