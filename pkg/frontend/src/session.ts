/** Drafting-session store.
 *
 * Holds the current draft, the latest score/explain responses (tagged
 * with the draft version they were computed for, so stale responses for
 * superseded drafts are discarded), a pending revision awaiting
 * accept/reject, and an append-only history of turns. State survives
 * reloads through an injected storage backend.
 */

import type { ExplainResponse, ReviseSuccess, WorkflowMode } from "./types";

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export interface HistoryTurn {
  seq: number;
  action: "accepted" | "rejected";
  title: string;
  body: string;
  pBefore: number | null;
  revisedTitle: string;
  revisedBody: string;
  pAfter: number | null;
  workflow: WorkflowMode;
}

interface Versioned<T> {
  version: number;
  value: T;
}

export interface RevisionFailure {
  reason: string;
  raw: string;
}

const STORAGE_KEY = "referral-forge-session";

export class DraftSession {
  title = "";
  body = "";
  mode: WorkflowMode = "rag";
  includeRatings = true;
  draftVersion = 0;
  history: HistoryTurn[] = [];

  private score: Versioned<number> | null = null;
  private explain: Versioned<ExplainResponse> | null = null;
  pendingRevision: ReviseSuccess | null = null;
  revisionFailure: RevisionFailure | null = null;
  reviseInFlight = false;

  private readonly storage: StorageLike | null;
  private listeners: Array<() => void> = [];

  constructor(storage: StorageLike | null = null) {
    this.storage = storage;
    this.restore();
  }

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    this.persist();
    for (const listener of this.listeners) listener();
  }

  get hasDraft(): boolean {
    return this.title.trim().length > 0 || this.body.trim().length > 0;
  }

  get canRevise(): boolean {
    return this.hasDraft && !this.reviseInFlight && this.displayedScore !== null;
  }

  /** The probability shown in the gauge: exactly the /score response for
   * the draft currently displayed, or null when none applies yet. */
  get displayedScore(): number | null {
    return this.score !== null && this.score.version === this.draftVersion
      ? this.score.value
      : null;
  }

  get displayedExplain(): ExplainResponse | null {
    return this.explain !== null && this.explain.version === this.draftVersion
      ? this.explain.value
      : null;
  }

  setDraft(title: string, body: string): number {
    this.title = title;
    this.body = body;
    this.draftVersion += 1;
    this.pendingRevision = null;
    this.revisionFailure = null;
    this.notify();
    return this.draftVersion;
  }

  setMode(mode: WorkflowMode): void {
    this.mode = mode;
    this.notify();
  }

  setIncludeRatings(include: boolean): void {
    this.includeRatings = include;
    this.notify();
  }

  /** Apply a /score response computed for draft `version`; stale
   * responses are dropped and the method reports whether it applied. */
  applyScore(version: number, p: number): boolean {
    if (version !== this.draftVersion) return false;
    this.score = { version, value: p };
    this.notify();
    return true;
  }

  applyExplain(version: number, response: ExplainResponse): boolean {
    if (version !== this.draftVersion) return false;
    this.explain = { version, value: response };
    this.notify();
    return true;
  }

  /** Guard for the single in-flight revise call. */
  beginRevise(): boolean {
    if (!this.hasDraft || this.reviseInFlight) return false;
    this.reviseInFlight = true;
    this.revisionFailure = null;
    this.notify();
    return true;
  }

  resolveRevise(revision: ReviseSuccess): void {
    this.reviseInFlight = false;
    this.pendingRevision = revision;
    this.notify();
  }

  failRevise(failure: RevisionFailure): void {
    this.reviseInFlight = false;
    this.pendingRevision = null;
    this.revisionFailure = failure;
    this.notify();
  }

  /** Accept: the revision becomes the draft and the turn is appended. */
  accept(): void {
    const revision = this.pendingRevision;
    if (!revision) throw new Error("no pending revision to accept");
    this.history = [
      ...this.history,
      {
        seq: this.history.length,
        action: "accepted",
        title: this.title,
        body: this.body,
        pBefore: revision.p_before,
        revisedTitle: revision.revised_title,
        revisedBody: revision.revised_body,
        pAfter: revision.p_after,
        workflow: revision.workflow,
      },
    ];
    this.title = revision.revised_title;
    this.body = revision.revised_body;
    this.draftVersion += 1;
    this.pendingRevision = null;
    this.notify();
  }

  /** Reject: the draft is unchanged but the attempt is recorded. */
  reject(): void {
    const revision = this.pendingRevision;
    if (!revision) throw new Error("no pending revision to reject");
    this.history = [
      ...this.history,
      {
        seq: this.history.length,
        action: "rejected",
        title: this.title,
        body: this.body,
        pBefore: revision.p_before,
        revisedTitle: revision.revised_title,
        revisedBody: revision.revised_body,
        pAfter: revision.p_after,
        workflow: revision.workflow,
      },
    ];
    this.pendingRevision = null;
    this.notify();
  }

  private persist(): void {
    if (!this.storage) return;
    this.storage.setItem(
      STORAGE_KEY,
      JSON.stringify({
        title: this.title,
        body: this.body,
        mode: this.mode,
        includeRatings: this.includeRatings,
        history: this.history,
      }),
    );
  }

  private restore(): void {
    if (!this.storage) return;
    const raw = this.storage.getItem(STORAGE_KEY);
    if (!raw) return;
    try {
      const saved = JSON.parse(raw) as Partial<{
        title: string;
        body: string;
        mode: WorkflowMode;
        includeRatings: boolean;
        history: HistoryTurn[];
      }>;
      this.title = saved.title ?? "";
      this.body = saved.body ?? "";
      this.mode = saved.mode ?? "rag";
      this.includeRatings = saved.includeRatings ?? true;
      this.history = saved.history ?? [];
    } catch {
      // Corrupt saved state: start fresh rather than crash.
    }
  }
}
