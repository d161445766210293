/** DOM wiring for the drafting surface: editor with mask-token palette,
 * live gauge + sentence highlights (debounced /score + /explain calls),
 * and the revise panel with a side-by-side diff and accept/reject. */

import { ApiClient, ApiError } from "./api";
import { debounce } from "./debounce";
import { diffWords, isEmptyDiff } from "./diff";
import { gaugeView } from "./gauge";
import { highlightSegments } from "./highlight";
import { MASK_TOKENS, foreignBracketTokens } from "./masktokens";
import { DraftSession } from "./session";
import type { WorkflowMode } from "./types";

const api = new ApiClient("");
const session = new DraftSession(window.localStorage);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const titleInput = el<HTMLInputElement>("title");
const bodyInput = el<HTMLTextAreaElement>("body");
const gaugeFill = el<HTMLDivElement>("gauge-fill");
const gaugeText = el<HTMLSpanElement>("gauge-text");
const highlightsBox = el<HTMLDivElement>("highlights");
const tokenWarning = el<HTMLDivElement>("token-warning");
const errorBanner = el<HTMLDivElement>("error-banner");
const reviseButton = el<HTMLButtonElement>("revise");
const modeSelect = el<HTMLSelectElement>("mode");
const ratingsToggle = el<HTMLInputElement>("include-ratings");
const revisePanel = el<HTMLDivElement>("revise-panel");
const diffBox = el<HTMLDivElement>("diff");
const deltaText = el<HTMLSpanElement>("delta-text");
const acceptButton = el<HTMLButtonElement>("accept");
const rejectButton = el<HTMLButtonElement>("reject");
const rawFailureBox = el<HTMLPreElement>("raw-failure");
const historyList = el<HTMLUListElement>("history");
const palette = el<HTMLDivElement>("palette");

function showError(message: string): void {
  errorBanner.textContent = message;
  errorBanner.hidden = false;
}

function clearError(): void {
  errorBanner.hidden = true;
  errorBanner.textContent = "";
}

async function refreshScores(version: number): Promise<void> {
  if (!session.hasDraft) return;
  const draft = { title: session.title, body: session.body };
  try {
    const score = await api.score(draft);
    // applyScore discards the response when the draft has moved on.
    if (!session.applyScore(version, score.p)) return;
    clearError();
    const explain = await api.explain(draft);
    session.applyExplain(version, explain);
  } catch (err) {
    if (err instanceof ApiError && err.code === "policy_missing") {
      return; // scoring still worked; highlights simply unavailable
    }
    showError(err instanceof Error ? err.message : String(err));
  }
}

const debouncedRefresh = debounce((version: number) => {
  void refreshScores(version);
}, 300);

function onDraftEdited(): void {
  const version = session.setDraft(titleInput.value, bodyInput.value);
  const foreign = foreignBracketTokens(session.title + "\n" + session.body);
  if (foreign.length > 0) {
    tokenWarning.hidden = false;
    tokenWarning.textContent = `Unknown bracket tokens: ${foreign.join(", ")} — use the palette buttons.`;
  } else {
    tokenWarning.hidden = true;
  }
  if (session.hasDraft) {
    debouncedRefresh(version);
  } else {
    debouncedRefresh.cancel();
  }
}

async function onRevise(): Promise<void> {
  if (!session.beginRevise()) return;
  const draft = { title: session.title, body: session.body };
  try {
    const result = await api.revise(draft, session.mode, session.includeRatings);
    if (result.failed) {
      session.failRevise({ reason: result.failure_reason, raw: result.raw });
    } else {
      session.resolveRevise(result);
    }
  } catch (err) {
    session.failRevise({
      reason: err instanceof Error ? err.message : String(err),
      raw: "",
    });
  }
}

function render(): void {
  // Gauge: value comes verbatim from the latest /score for this draft.
  const gauge = gaugeView(session.displayedScore);
  gaugeFill.style.width = `${gauge.fillFraction * 100}%`;
  gaugeFill.dataset.tone = gauge.tone;
  gaugeText.textContent = gauge.percentText;

  // Sentence highlights.
  highlightsBox.replaceChildren();
  const explain = session.displayedExplain;
  if (explain) {
    for (const segment of highlightSegments(explain)) {
      const span = document.createElement("span");
      span.className = `hl hl-${segment.rating}${segment.isTitle ? " hl-title" : ""}`;
      span.textContent = segment.text + " ";
      span.title = segment.share === null ? segment.rating : `${segment.rating} · share ${(segment.share * 100).toFixed(1)}%`;
      highlightsBox.appendChild(span);
    }
  }

  reviseButton.disabled = !session.canRevise;
  modeSelect.value = session.mode === "rag_no_ratings" ? "rag" : session.mode;
  ratingsToggle.checked = session.includeRatings;

  // Revision panel.
  const pending = session.pendingRevision;
  const failure = session.revisionFailure;
  revisePanel.hidden = pending === null && failure === null;
  if (pending) {
    rawFailureBox.hidden = true;
    acceptButton.disabled = false;
    const before = `${pending.original_title}\n${pending.original_body}`;
    const after = `${pending.revised_title}\n${pending.revised_body}`;
    const segments = diffWords(before, after);
    diffBox.replaceChildren();
    if (isEmptyDiff(segments)) {
      const note = document.createElement("em");
      note.textContent = "No changes suggested.";
      diffBox.appendChild(note);
    } else {
      for (const segment of segments) {
        const span = document.createElement("span");
        span.className = `diff-${segment.kind}`;
        span.textContent = segment.text;
        diffBox.appendChild(span);
      }
    }
    deltaText.textContent = `p ${pending.p_before.toFixed(3)} → ${pending.p_after.toFixed(3)} (Δ ${pending.delta >= 0 ? "+" : ""}${pending.delta.toFixed(3)})`;
  } else if (failure) {
    diffBox.replaceChildren();
    deltaText.textContent = "revision failed";
    acceptButton.disabled = true;
    rawFailureBox.hidden = false;
    rawFailureBox.textContent = failure.raw || failure.reason;
  }

  // History.
  historyList.replaceChildren();
  for (const turn of session.history) {
    const item = document.createElement("li");
    const delta =
      turn.pAfter !== null && turn.pBefore !== null
        ? ` (p ${turn.pBefore.toFixed(3)} → ${turn.pAfter.toFixed(3)})`
        : "";
    item.textContent = `#${turn.seq + 1} ${turn.action} ${turn.workflow} revision${delta}`;
    historyList.appendChild(item);
  }
}

function wire(): void {
  for (const token of MASK_TOKENS) {
    const button = document.createElement("button");
    button.type = "button";
    button.textContent = token;
    button.addEventListener("click", () => {
      const target = document.activeElement === titleInput ? titleInput : bodyInput;
      const cursor = target.selectionStart ?? target.value.length;
      const next = target.value.slice(0, cursor) + token + target.value.slice(cursor);
      target.value = next;
      onDraftEdited();
      target.focus();
    });
    palette.appendChild(button);
  }

  titleInput.addEventListener("input", onDraftEdited);
  bodyInput.addEventListener("input", onDraftEdited);
  reviseButton.addEventListener("click", () => void onRevise());
  acceptButton.addEventListener("click", () => {
    session.accept();
    titleInput.value = session.title;
    bodyInput.value = session.body;
    debouncedRefresh(session.draftVersion);
  });
  rejectButton.addEventListener("click", () => session.reject());
  modeSelect.addEventListener("change", () => {
    session.setMode(modeSelect.value as WorkflowMode);
  });
  ratingsToggle.addEventListener("change", () => {
    session.setIncludeRatings(ratingsToggle.checked);
  });

  session.subscribe(render);

  // Restore persisted draft into the editors.
  titleInput.value = session.title;
  bodyInput.value = session.body;
  if (session.hasDraft) {
    debouncedRefresh(session.draftVersion);
  }
  render();

  void api
    .health()
    .then(() => clearError())
    .catch(() => showError("Scoring service unreachable — drafts are saved locally."));
}

wire();
