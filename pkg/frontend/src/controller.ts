// Workbench controller: polls the session, exposes view models, submits
// answers. Deliberately DOM-free so the whole flow is testable headlessly;
// the renderer subscribes via onChange.

import {
  BudgetBarVM,
  CardVM,
  RuleRowVM,
  budgetBar,
  buildCards,
  ruleRows,
} from "./model.js";
import type {
  Answer,
  PendingQuery,
  RuleRecord,
  SessionInfo,
  StateSnapshot,
  Transport,
} from "./types.js";

export type Phase = "loading" | "active" | "terminated" | "error";

export interface WorkbenchView {
  phase: Phase;
  statusLine: string;
  cards: CardVM[];
  budget: BudgetBarVM;
  labeledSize: number;
  acceptedRules: number;
  rejectedRules: number;
  metrics: Array<Record<string, number | boolean | null>>;
  errorMessage: string;
}

export const POLL_INTERVAL_MS = 1000;

export class WorkbenchController {
  private info: SessionInfo | null = null;
  private snapshot: StateSnapshot | null = null;
  private pending: PendingQuery[] = [];
  private status = "loading";
  private phase: Phase = "loading";
  private errorMessage = "";
  private readonly submitting = new Set<string>();
  private listeners: Array<(view: WorkbenchView) => void> = [];
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;

  constructor(
    private readonly transport: Transport,
    private readonly sessionId: string,
    private readonly pollIntervalMs: number = POLL_INTERVAL_MS,
  ) {}

  onChange(listener: (view: WorkbenchView) => void): void {
    this.listeners.push(listener);
  }

  view(): WorkbenchView {
    return {
      phase: this.phase,
      statusLine: this.status,
      cards: buildCards(this.pending, this.info?.class_names ?? [], this.submitting),
      budget: budgetBar(this.snapshot?.budget),
      labeledSize: this.snapshot?.labeled_size ?? 0,
      acceptedRules: this.snapshot?.accepted_rules ?? 0,
      rejectedRules: this.snapshot?.rejected_rules ?? 0,
      metrics: this.snapshot?.metrics ?? [],
      errorMessage: this.errorMessage,
    };
  }

  private emit(): void {
    const view = this.view();
    for (const listener of this.listeners) listener(view);
  }

  async start(): Promise<void> {
    try {
      this.info = await this.transport.getSession(this.sessionId);
      await this.refresh();
      this.schedule();
    } catch (error) {
      this.phase = "error";
      this.errorMessage = String(error);
      this.emit();
    }
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
  }

  private schedule(): void {
    if (this.stopped || this.phase === "terminated") return;
    this.timer = setTimeout(() => {
      void this.refresh().then(() => this.schedule());
    }, this.pollIntervalMs);
  }

  async refresh(): Promise<void> {
    try {
      const [queries, snapshot] = await Promise.all([
        this.transport.getQueries(this.sessionId),
        this.transport.getState(this.sessionId),
      ]);
      this.pending = queries.pending;
      this.status = queries.status;
      this.snapshot = snapshot;
      this.phase = queries.status.startsWith("terminated")
        ? "terminated"
        : queries.status.startsWith("failed")
          ? "error"
          : "active";
      this.errorMessage = this.phase === "error" ? queries.status : "";
    } catch (error) {
      // Transient transport failure: keep the last view, surface a banner.
      this.errorMessage = `connection lost, retrying: ${String(error)}`;
    }
    this.emit();
  }

  /** Submit an answer; the card is disabled until the server acknowledges. */
  async answer(queryId: string, answer: Answer): Promise<void> {
    if (this.submitting.has(queryId)) return;
    this.submitting.add(queryId);
    this.emit();
    try {
      const snapshot = await this.transport.submitAnswer(this.sessionId, queryId, answer);
      this.snapshot = snapshot;
      if (snapshot.terminal) this.phase = "terminated";
    } catch (error) {
      this.errorMessage = String(error);
    } finally {
      this.submitting.delete(queryId);
    }
    await this.refresh();
  }

  async rules(kindFilter = "", labelFilter: number | null = null): Promise<RuleRowVM[]> {
    const records: RuleRecord[] = await this.transport.getRules(this.sessionId);
    return ruleRows(records, kindFilter, labelFilter);
  }

  async exportRules(): Promise<Uint8Array> {
    return this.transport.exportRules(this.sessionId);
  }

  classNames(): string[] {
    return this.info?.class_names ?? [];
  }
}
