// View models for the workbench. Everything here is derived presentation
// state; budget numbers and labels always come from server snapshots.

import type {
  BudgetSnapshot,
  InstanceQuery,
  PendingQuery,
  PredicateAtom,
  RuleQuery,
  RuleRecord,
} from "./types.js";

export const KIND_COLORS: Record<string, string> = {
  NGRAM: "chip-ngram",
  POS: "chip-pos",
  NER: "chip-ner",
  PMT: "chip-pmt",
};

export interface ClassButton {
  index: number; // 1-based class index sent as the answer
  name: string;
}

export interface TextSegment {
  text: string;
  highlighted: boolean;
}

export interface InstanceCardVM {
  kind: "instance";
  queryId: string;
  instanceId: string;
  segments: TextSegment[];
  classButtons: ClassButton[];
  disabled: boolean;
}

export interface PredicateChipVM {
  kind: string;
  value: string;
  colorClass: string;
}

export interface RuleCardVM {
  kind: "rule";
  queryId: string;
  ruleId: string;
  chips: PredicateChipVM[];
  labelName: string;
  anchorId: string;
  anchorSegments: TextSegment[];
  precisionLabel: string;
  coverageLabel: string;
  disabled: boolean;
}

export type CardVM = InstanceCardVM | RuleCardVM;

export interface BudgetBarVM {
  total: number;
  spent: number;
  remaining: number;
  fraction: number; // spent / total, for the bar width only
  label: string;
}

/** Split text into segments, marking case-insensitive matches of the
 * n-gram atom values so rule cards can highlight what fired. */
export function highlightMatches(text: string, atoms: PredicateAtom[]): TextSegment[] {
  const needles = atoms
    .filter((a) => a.kind === "NGRAM")
    .map((a) => a.value)
    .filter((v) => v.length > 0)
    .sort((a, b) => b.length - a.length);
  if (needles.length === 0) return [{ text, highlighted: false }];

  const lower = text.toLowerCase();
  const segments: TextSegment[] = [];
  let cursor = 0;
  while (cursor < text.length) {
    let matchAt = -1;
    let matchLen = 0;
    for (const needle of needles) {
      const at = lower.indexOf(needle.toLowerCase(), cursor);
      if (at !== -1 && (matchAt === -1 || at < matchAt)) {
        matchAt = at;
        matchLen = needle.length;
      }
    }
    if (matchAt === -1) {
      segments.push({ text: text.slice(cursor), highlighted: false });
      break;
    }
    if (matchAt > cursor) {
      segments.push({ text: text.slice(cursor, matchAt), highlighted: false });
    }
    segments.push({ text: text.slice(matchAt, matchAt + matchLen), highlighted: true });
    cursor = matchAt + matchLen;
  }
  return segments;
}

export function instanceCard(
  query: InstanceQuery,
  classNames: string[],
  disabled: boolean,
): InstanceCardVM {
  return {
    kind: "instance",
    queryId: query.query_id,
    instanceId: query.instance_id,
    segments: [{ text: query.text, highlighted: false }],
    classButtons: classNames.map((name, i) => ({ index: i + 1, name })),
    disabled,
  };
}

export function ruleCard(query: RuleQuery, disabled: boolean): RuleCardVM {
  return {
    kind: "rule",
    queryId: query.query_id,
    ruleId: query.rule_id,
    chips: query.predicate.map((atom) => ({
      kind: atom.kind,
      value: atom.value,
      colorClass: KIND_COLORS[atom.kind] ?? "chip-other",
    })),
    labelName: query.label_name,
    anchorId: query.anchor_id,
    anchorSegments: highlightMatches(query.anchor_text, query.predicate),
    precisionLabel:
      query.precision_labeled === null ? "n/a" : query.precision_labeled.toFixed(2),
    coverageLabel: String(query.coverage_unlabeled),
    disabled,
  };
}

/** Instance cards first, then rule cards, each group in issue order. */
export function buildCards(
  pending: PendingQuery[],
  classNames: string[],
  submitting: ReadonlySet<string>,
): CardVM[] {
  const instances = pending.filter((q): q is InstanceQuery => q.kind === "instance");
  const rules = pending.filter((q): q is RuleQuery => q.kind === "rule");
  return [
    ...instances.map((q) => instanceCard(q, classNames, submitting.has(q.query_id))),
    ...rules.map((q) => ruleCard(q, submitting.has(q.query_id))),
  ];
}

export function budgetBar(budget: BudgetSnapshot | undefined): BudgetBarVM {
  if (!budget) {
    return { total: 0, spent: 0, remaining: 0, fraction: 0, label: "budget unknown" };
  }
  const fraction = budget.total > 0 ? budget.spent / budget.total : 0;
  return {
    total: budget.total,
    spent: budget.spent,
    remaining: budget.remaining,
    fraction,
    label: `${budget.spent} / ${budget.total} spent`,
  };
}

export interface RuleRowVM {
  id: string;
  rendered: string;
  label: number;
  status: string;
  source: string;
  kinds: string[];
  coverage: number;
  precisionLabel: string;
}

export function ruleRows(records: RuleRecord[], kindFilter: string, labelFilter: number | null): RuleRowVM[] {
  return records
    .filter((r) => kindFilter === "" || r.predicate.some((a) => a.kind === kindFilter))
    .filter((r) => labelFilter === null || r.label === labelFilter)
    .map((r) => ({
      id: r.id,
      rendered: r.predicate.map((a) => `${a.kind}=${a.value}`).join(" AND "),
      label: r.label,
      status: r.status,
      source: r.source,
      kinds: [...new Set(r.predicate.map((a) => a.kind))],
      coverage: r.coverage_unlabeled,
      precisionLabel: r.precision_labeled === null ? "n/a" : r.precision_labeled.toFixed(2),
    }));
}
