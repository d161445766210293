import { describe, expect, it } from "vitest";

import { gaugeView } from "../src/gauge";
import { highlightSegments } from "../src/highlight";
import type { ExplainResponse } from "../src/types";

describe("gaugeView", () => {
  it("shows the score value verbatim", () => {
    const view = gaugeView(0.481);
    expect(view.value).toBe(0.481);
    expect(view.percentText).toBe("48.1%");
    expect(view.fillFraction).toBeCloseTo(0.481, 12);
  });

  it("empty state when no score applies", () => {
    const view = gaugeView(null);
    expect(view.value).toBeNull();
    expect(view.percentText).toBe("--");
    expect(view.tone).toBe("none");
  });

  it("tone thresholds", () => {
    expect(gaugeView(0.2).tone).toBe("low");
    expect(gaugeView(0.5).tone).toBe("mid");
    expect(gaugeView(0.8).tone).toBe("high");
  });
});

describe("highlightSegments", () => {
  const response: ExplainResponse = {
    id: "draft",
    p: 0.5,
    method: "ig",
    spans: [
      { start: 0, end: 3, is_title: true, text: "Need a referral" },
      { start: 3, end: 8, is_title: false, text: "First sentence." },
      { start: 8, end: 12, is_title: false, text: "Second sentence." },
    ],
    shares: [0.5, 0.3, 0.2],
    degenerate: false,
    ratings: { overall: "moderate", title: "strong", sentences: ["weak", "moderate"] },
  };

  it("pairs spans with their ratings in order", () => {
    const segments = highlightSegments(response);
    expect(segments.map((s) => s.rating)).toEqual(["strong", "weak", "moderate"]);
    expect(segments[0]!.isTitle).toBe(true);
  });

  it("carries attribution shares", () => {
    const segments = highlightSegments(response);
    expect(segments.map((s) => s.share)).toEqual([0.5, 0.3, 0.2]);
  });

  it("handles degenerate reports without shares", () => {
    const segments = highlightSegments({ ...response, shares: null });
    expect(segments.every((s) => s.share === null)).toBe(true);
  });
});
