/** Sentence-highlight view-model: pairs each span from an /explain
 * response with its rating so the editor overlay can color segments. */

import type { ExplainResponse, Rating } from "./types";

export interface HighlightSegment {
  text: string;
  isTitle: boolean;
  rating: Rating;
  share: number | null;
}

export function highlightSegments(response: ExplainResponse): HighlightSegment[] {
  const segments: HighlightSegment[] = [];
  let sentenceIndex = 0;
  response.spans.forEach((span, i) => {
    const share = response.shares === null ? null : (response.shares[i] ?? null);
    if (span.is_title) {
      segments.push({
        text: span.text,
        isTitle: true,
        rating: response.ratings.title,
        share,
      });
    } else {
      segments.push({
        text: span.text,
        isTitle: false,
        rating: response.ratings.sentences[sentenceIndex] ?? "moderate",
        share,
      });
      sentenceIndex += 1;
    }
  });
  return segments;
}
