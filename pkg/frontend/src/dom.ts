// Thin DOM layer: renders the controller's view models and forwards
// clicks. No session state lives here.

import type { WorkbenchController, WorkbenchView } from "./controller.js";
import type { CardVM, RuleRowVM, TextSegment } from "./model.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderSegments(target: HTMLElement, segments: TextSegment[]): void {
  for (const segment of segments) {
    if (segment.highlighted) {
      const mark = el("mark", "atom-hit", segment.text);
      target.appendChild(mark);
    } else {
      target.appendChild(document.createTextNode(segment.text));
    }
  }
}

function renderCard(card: CardVM, controller: WorkbenchController): HTMLElement {
  const root = el("div", `card card-${card.kind}${card.disabled ? " card-disabled" : ""}`);
  if (card.kind === "instance") {
    root.appendChild(el("div", "card-tag", `instance ${card.instanceId}`));
    const body = el("p", "card-text");
    renderSegments(body, card.segments);
    root.appendChild(body);
    const buttons = el("div", "button-row");
    for (const button of card.classButtons) {
      const b = el("button", "class-button", button.name);
      b.disabled = card.disabled;
      b.onclick = () => void controller.answer(card.queryId, button.index);
      buttons.appendChild(b);
    }
    root.appendChild(buttons);
  } else {
    root.appendChild(el("div", "card-tag", `candidate rule ${card.ruleId}`));
    const chips = el("div", "chip-row");
    for (const chip of card.chips) {
      chips.appendChild(el("span", `chip ${chip.colorClass}`, `${chip.kind}=${chip.value}`));
    }
    chips.appendChild(el("span", "chip chip-label", `→ ${card.labelName}`));
    root.appendChild(chips);
    const stats = el(
      "div",
      "rule-stats",
      `labeled precision ${card.precisionLabel} · unlabeled coverage ${card.coverageLabel}`,
    );
    root.appendChild(stats);
    const anchor = el("p", "anchor-text");
    anchor.appendChild(el("span", "anchor-tag", `anchor ${card.anchorId}: `));
    renderSegments(anchor, card.anchorSegments);
    root.appendChild(anchor);
    const buttons = el("div", "button-row");
    for (const verdict of ["accept", "reject"] as const) {
      const b = el("button", `verdict-button verdict-${verdict}`, verdict);
      b.disabled = card.disabled;
      b.onclick = () => void controller.answer(card.queryId, verdict);
      buttons.appendChild(b);
    }
    root.appendChild(buttons);
  }
  return root;
}

function renderStats(view: WorkbenchView): HTMLElement {
  const bar = el("div", "stats-row");
  const budget = el("div", "budget");
  budget.appendChild(el("div", "budget-label", view.budget.label));
  const track = el("div", "budget-track");
  const fill = el("div", "budget-fill");
  fill.style.width = `${Math.min(100, view.budget.fraction * 100)}%`;
  track.appendChild(fill);
  budget.appendChild(track);
  bar.appendChild(budget);
  bar.appendChild(el("div", "stat", `labeled: ${view.labeledSize}`));
  bar.appendChild(el("div", "stat", `rules +${view.acceptedRules} / -${view.rejectedRules}`));
  const lastF1 = [...view.metrics].reverse().find((m) => m.test_macro_f1 !== null);
  if (lastF1) {
    bar.appendChild(el("div", "stat", `macro-F1 ${(lastF1.test_macro_f1 as number).toFixed(3)}`));
  }
  return bar;
}

async function renderRuleBrowser(
  target: HTMLElement,
  controller: WorkbenchController,
  kindFilter: string,
): Promise<void> {
  target.replaceChildren();
  const controls = el("div", "browser-controls");
  const select = el("select") as HTMLSelectElement;
  for (const kind of ["", "NGRAM", "POS", "NER", "PMT"]) {
    const option = el("option", undefined, kind === "" ? "all kinds" : kind);
    option.value = kind;
    select.appendChild(option);
  }
  select.value = kindFilter;
  select.onchange = () => void renderRuleBrowser(target, controller, select.value);
  controls.appendChild(select);
  const exportButton = el("button", "export-button", "export rules");
  exportButton.onclick = async () => {
    const bytes = await controller.exportRules();
    const copy = new Uint8Array(new ArrayBuffer(bytes.length));
    copy.set(bytes);
    const blob = new Blob([copy], { type: "application/jsonl" });
    const link = el("a") as HTMLAnchorElement;
    link.href = URL.createObjectURL(blob);
    link.download = "rules.jsonl";
    link.click();
    URL.revokeObjectURL(link.href);
  };
  controls.appendChild(exportButton);
  target.appendChild(controls);

  const rows: RuleRowVM[] = await controller.rules(kindFilter);
  if (rows.length === 0) {
    target.appendChild(el("p", "empty-state", "no rules yet"));
    return;
  }
  const table = el("table", "rule-table");
  const head = el("tr");
  for (const column of ["rule", "label", "status", "coverage", "precision"]) {
    head.appendChild(el("th", undefined, column));
  }
  table.appendChild(head);
  for (const row of rows) {
    const tr = el("tr", `rule-${row.status}`);
    tr.appendChild(el("td", "rule-rendered", row.rendered));
    tr.appendChild(el("td", undefined, String(row.label)));
    tr.appendChild(el("td", undefined, row.status));
    tr.appendChild(el("td", undefined, String(row.coverage)));
    tr.appendChild(el("td", undefined, row.precisionLabel));
    table.appendChild(tr);
  }
  target.appendChild(table);
}

export function mountWorkbench(root: HTMLElement, controller: WorkbenchController): void {
  const header = el("div", "header");
  const statusLine = el("div", "status-line");
  const statsHost = el("div", "stats-host");
  const cardsHost = el("div", "cards");
  const browserHost = el("div", "rule-browser");
  header.appendChild(statusLine);
  header.appendChild(statsHost);
  root.replaceChildren(header, cardsHost, el("h2", undefined, "Rules"), browserHost);

  controller.onChange((view) => {
    statusLine.textContent =
      view.phase === "terminated"
        ? `session complete: ${view.statusLine}`
        : view.errorMessage || view.statusLine;
    statusLine.className = `status-line status-${view.phase}`;
    statsHost.replaceChildren(renderStats(view));
    cardsHost.replaceChildren(...view.cards.map((card) => renderCard(card, controller)));
    if (view.phase === "terminated") {
      cardsHost.appendChild(el("p", "empty-state", "budget exhausted; review the rules below"));
      void renderRuleBrowser(browserHost, controller, "");
    }
  });
  void renderRuleBrowser(browserHost, controller, "");
}
