// Wire types for the session API. Field names mirror the server payloads.

export interface SessionInfo {
  session_id: string;
  corpus: string;
  config: Record<string, unknown>;
  class_names: string[];
  status: string;
}

export interface PredicateAtom {
  kind: string;
  value: string;
}

export interface InstanceQuery {
  query_id: string;
  issued_at: number;
  kind: "instance";
  instance_id: string;
  text: string;
}

export interface RuleQuery {
  query_id: string;
  issued_at: number;
  kind: "rule";
  rule_id: string;
  predicate: PredicateAtom[];
  label: number;
  label_name: string;
  anchor_id: string;
  anchor_text: string;
  precision_labeled: number | null;
  coverage_unlabeled: number;
}

export type PendingQuery = InstanceQuery | RuleQuery;

export interface QueriesResponse {
  status: string;
  pending: PendingQuery[];
}

export interface BudgetSnapshot {
  total: number;
  spent: number;
  remaining: number;
  cost_instance: number;
  cost_rule: number;
}

export interface StateSnapshot {
  session_id: string;
  status: string;
  pending_count: number;
  budget?: BudgetSnapshot;
  labeled_size?: number;
  initial_labeled?: number;
  accepted_rules?: number;
  rejected_rules?: number;
  iteration?: number;
  metrics?: Array<Record<string, number | boolean | null>>;
  terminal?: boolean;
}

export interface RuleRecord {
  id: string;
  predicate: PredicateAtom[];
  label: number;
  source: string;
  status: string;
  coverage_unlabeled: number;
  precision_labeled: number | null;
}

export type Answer = number | "accept" | "reject";

export interface Transport {
  getSession(sessionId: string): Promise<SessionInfo>;
  getQueries(sessionId: string): Promise<QueriesResponse>;
  submitAnswer(sessionId: string, queryId: string, answer: Answer): Promise<StateSnapshot>;
  getState(sessionId: string): Promise<StateSnapshot>;
  getRules(sessionId: string): Promise<RuleRecord[]>;
  exportRules(sessionId: string): Promise<Uint8Array>;
  createSession(corpus: string, config: Record<string, unknown>): Promise<string>;
  listCorpora(): Promise<Array<{ name: string; class_names: string[] }>>;
}
