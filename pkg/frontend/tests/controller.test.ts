import { describe, expect, it } from "vitest";

import { WorkbenchController } from "../src/controller.js";
import { buildCards, budgetBar, highlightMatches, ruleRows } from "../src/model.js";
import type {
  Answer,
  PendingQuery,
  QueriesResponse,
  RuleRecord,
  SessionInfo,
  StateSnapshot,
  Transport,
} from "../src/types.js";

const INFO: SessionInfo = {
  session_id: "s1",
  corpus: "toy",
  config: {},
  class_names: ["ham", "spam"],
  status: "waiting",
};

function instanceQuery(qid: string, iid: string): PendingQuery {
  return { query_id: qid, issued_at: 1, kind: "instance", instance_id: iid, text: `text ${iid}` };
}

function ruleQuery(qid: string, anchor: string): PendingQuery {
  return {
    query_id: qid,
    issued_at: 2,
    kind: "rule",
    rule_id: "r1",
    predicate: [{ kind: "NGRAM", value: "http" }],
    label: 2,
    label_name: "spam",
    anchor_id: anchor,
    anchor_text: "visit http now",
    precision_labeled: 0.8,
    coverage_unlabeled: 120,
  };
}

function snapshot(spent: number, extra: Partial<StateSnapshot> = {}): StateSnapshot {
  return {
    session_id: "s1",
    status: "waiting",
    pending_count: 0,
    budget: { total: 10, spent, remaining: 10 - spent, cost_instance: 1, cost_rule: 1 },
    labeled_size: 6,
    accepted_rules: 0,
    rejected_rules: 0,
    iteration: 1,
    metrics: [],
    ...extra,
  };
}

/** Scripted transport: serves canned response sequences and records every
 * call, so tests can assert the UI never invents state locally. */
class ScriptedTransport implements Transport {
  calls: Array<[string, ...unknown[]]> = [];
  queriesScript: QueriesResponse[] = [];
  stateScript: StateSnapshot[] = [];
  answerScript: StateSnapshot[] = [];
  rules: RuleRecord[] = [];
  exportBytes = new Uint8Array([1, 2, 3]);
  answerDelay: (() => Promise<void>) | null = null;

  private next<T>(script: T[], fallback: T): T {
    return script.length > 1 ? (script.shift() as T) : (script[0] ?? fallback);
  }

  async getSession(): Promise<SessionInfo> {
    this.calls.push(["getSession"]);
    return INFO;
  }

  async getQueries(): Promise<QueriesResponse> {
    this.calls.push(["getQueries"]);
    return this.next(this.queriesScript, { status: "waiting", pending: [] });
  }

  async getState(): Promise<StateSnapshot> {
    this.calls.push(["getState"]);
    return this.next(this.stateScript, snapshot(0));
  }

  async submitAnswer(sessionId: string, queryId: string, answer: Answer): Promise<StateSnapshot> {
    this.calls.push(["submitAnswer", sessionId, queryId, answer]);
    if (this.answerDelay) await this.answerDelay();
    return this.next(this.answerScript, snapshot(1));
  }

  async getRules(): Promise<RuleRecord[]> {
    this.calls.push(["getRules"]);
    return this.rules;
  }

  async exportRules(): Promise<Uint8Array> {
    this.calls.push(["exportRules"]);
    return this.exportBytes;
  }

  async createSession(): Promise<string> {
    return "s1";
  }

  async listCorpora(): Promise<Array<{ name: string; class_names: string[] }>> {
    return [{ name: "toy", class_names: INFO.class_names }];
  }
}

function controllerWith(transport: ScriptedTransport): WorkbenchController {
  return new WorkbenchController(transport, "s1", 3600_000);
}

describe("workbench controller", () => {
  it("shows the whole instance batch as cards", async () => {
    const transport = new ScriptedTransport();
    transport.queriesScript = [
      { status: "waiting", pending: [instanceQuery("q0", "a"), instanceQuery("q1", "b")] },
    ];
    const controller = controllerWith(transport);
    await controller.start();
    controller.stop();
    const view = controller.view();
    expect(view.cards).toHaveLength(2);
    expect(view.cards.every((card) => card.kind === "instance")).toBe(true);
    expect(view.cards[0]).toMatchObject({
      classButtons: [
        { index: 1, name: "ham" },
        { index: 2, name: "spam" },
      ],
    });
  });

  it("reveals anchored rule cards after an instance is answered", async () => {
    const transport = new ScriptedTransport();
    transport.queriesScript = [
      { status: "waiting", pending: [instanceQuery("q0", "a")] },
      { status: "waiting", pending: [ruleQuery("q1", "a")] },
      { status: "waiting", pending: [ruleQuery("q1", "a")] },
    ];
    const controller = controllerWith(transport);
    await controller.start();
    await controller.answer("q0", 2);
    controller.stop();
    const view = controller.view();
    expect(view.cards).toHaveLength(1);
    expect(view.cards[0]).toMatchObject({ kind: "rule", anchorId: "a", labelName: "spam" });
    const submits = transport.calls.filter(([name]) => name === "submitAnswer");
    expect(submits).toEqual([["submitAnswer", "s1", "q0", 2]]);
  });

  it("renders budget numbers verbatim from the snapshot, never locally", async () => {
    const transport = new ScriptedTransport();
    // Deliberately inconsistent numbers: spent + remaining != total. A UI
    // computing budgets locally could not reproduce these.
    transport.stateScript = [
      snapshot(3, { budget: { total: 10, spent: 3, remaining: 99, cost_instance: 1, cost_rule: 1 } }),
    ];
    const controller = controllerWith(transport);
    await controller.start();
    controller.stop();
    const view = controller.view();
    expect(view.budget.spent).toBe(3);
    expect(view.budget.remaining).toBe(99);
    expect(view.budget.label).toBe("3 / 10 spent");
  });

  it("disables a card optimistically until the server acknowledges", async () => {
    const transport = new ScriptedTransport();
    transport.queriesScript = [
      { status: "waiting", pending: [instanceQuery("q0", "a")] },
      { status: "waiting", pending: [instanceQuery("q0", "a")] },
    ];
    let release: () => void = () => {};
    transport.answerDelay = () => new Promise((resolve) => (release = resolve));
    const controller = controllerWith(transport);
    await controller.start();

    const answering = controller.answer("q0", 1);
    await Promise.resolve();
    expect(controller.view().cards[0].disabled).toBe(true);
    release();
    await answering;
    controller.stop();
    expect(controller.view().cards[0].disabled).toBe(false);
  });

  it("flips to the terminated summary when the budget runs out", async () => {
    const transport = new ScriptedTransport();
    transport.queriesScript = [
      { status: "terminated: budget exhausted", pending: [] },
    ];
    const controller = controllerWith(transport);
    await controller.start();
    controller.stop();
    const view = controller.view();
    expect(view.phase).toBe("terminated");
    expect(view.cards).toHaveLength(0);
  });

  it("passes export bytes through untouched", async () => {
    const transport = new ScriptedTransport();
    transport.exportBytes = new Uint8Array([104, 105, 10]);
    const controller = controllerWith(transport);
    await controller.start();
    controller.stop();
    expect(await controller.exportRules()).toEqual(new Uint8Array([104, 105, 10]));
  });

  it("filters the rule browser by predicate kind", async () => {
    const transport = new ScriptedTransport();
    transport.rules = [
      {
        id: "r1",
        predicate: [{ kind: "PMT", value: "TONE=rude" }],
        label: 2,
        source: "mined",
        status: "accepted",
        coverage_unlabeled: 50,
        precision_labeled: 0.9,
      },
      {
        id: "r2",
        predicate: [{ kind: "NGRAM", value: "http" }],
        label: 2,
        source: "mined",
        status: "rejected",
        coverage_unlabeled: 80,
        precision_labeled: null,
      },
    ];
    const controller = controllerWith(transport);
    await controller.start();
    controller.stop();
    const all = await controller.rules();
    expect(all).toHaveLength(2);
    const pmtOnly = await controller.rules("PMT");
    expect(pmtOnly).toHaveLength(1);
    expect(pmtOnly[0].id).toBe("r1");
    expect(pmtOnly[0].precisionLabel).toBe("0.90");
    const empty = await controller.rules("NER");
    expect(empty).toHaveLength(0);
  });
});

describe("view models", () => {
  it("orders instance cards before rule cards", () => {
    const cards = buildCards(
      [ruleQuery("q2", "a"), instanceQuery("q0", "a"), instanceQuery("q1", "b")],
      ["ham", "spam"],
      new Set(),
    );
    expect(cards.map((card) => card.kind)).toEqual(["instance", "instance", "rule"]);
  });

  it("highlights matched n-gram atoms in the anchor text", () => {
    const segments = highlightMatches("Visit HTTP now", [{ kind: "NGRAM", value: "http" }]);
    expect(segments).toEqual([
      { text: "Visit ", highlighted: false },
      { text: "HTTP", highlighted: true },
      { text: " now", highlighted: false },
    ]);
  });

  it("budget bar fraction is presentation-only division", () => {
    const bar = budgetBar({ total: 8, spent: 2, remaining: 6, cost_instance: 1, cost_rule: 1 });
    expect(bar.fraction).toBeCloseTo(0.25);
    expect(budgetBar(undefined).label).toBe("budget unknown");
  });

  it("rule rows render an empty list for no rules", () => {
    expect(ruleRows([], "", null)).toEqual([]);
  });
});
