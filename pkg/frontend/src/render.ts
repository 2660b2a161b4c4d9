// DOM rendering: the code pane with inline failure highlights, the goal
// list, the tactic palette, history and diff panes.

import type { TacticInfo } from "./api.js";
import {
  ViewState, anchorOnLine, diffLines, markersForLine,
} from "./state.js";

export interface Handlers {
  onSelectTactic(tactic: TacticInfo): void;
  onArgInput(formal: string, value: string): void;
  onLineClick(line: number): void;
  onApply(): void;
  onUndo(): void;
}

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderProgram(state: ViewState, pane: HTMLElement,
                              handlers: Handlers): void {
  pane.textContent = "";
  const lines = state.programText.split("\n");
  lines.forEach((text, i) => {
    const line = i + 1;
    const row = el("div", "code-line");
    row.dataset.line = String(line);
    const markers = markersForLine(state, line);
    if (markers.length) {
      row.classList.add("has-error");
      row.title = markers
        .map((m) => `${m.kind}: ${m.property}`)
        .join("\n");
    }
    if (anchorOnLine(state, line) !== null) {
      row.classList.add("anchor-line");
    }
    if (state.clickedLine === line) {
      row.classList.add("picked");
    }
    row.appendChild(el("span", "lineno", String(line)));
    row.appendChild(el("span", "code", text || " "));
    for (const m of markers) {
      row.appendChild(el("span", "error-badge", m.kind));
    }
    row.addEventListener("click", () => handlers.onLineClick(line));
    pane.appendChild(row);
  });
}

export function renderGoals(state: ViewState, pane: HTMLElement): void {
  pane.textContent = "";
  pane.appendChild(el("h2", undefined, `Open goals (${state.errorMarkers.length})`));
  for (const m of state.errorMarkers) {
    const item = el("div", "goal");
    item.appendChild(el("span", "goal-kind", m.kind));
    item.appendChild(el("span", "goal-prop", m.property));
    item.appendChild(el("span", "goal-line", `line ${m.line}`));
    pane.appendChild(item);
  }
}

export function renderPalette(state: ViewState, pane: HTMLElement,
                              handlers: Handlers): void {
  pane.textContent = "";
  pane.appendChild(el("h2", undefined, "Tactics"));
  const list = el("div", "palette");
  for (const tactic of state.tactics) {
    const button = el("button", "tactic");
    button.textContent = `${tactic.name}/${tactic.arity}`;
    button.title = tactic.doc;
    if (state.selectedTactic?.name === tactic.name) {
      button.classList.add("selected");
    }
    button.addEventListener("click", () => handlers.onSelectTactic(tactic));
    list.appendChild(button);
  }
  pane.appendChild(list);

  const form = el("div", "args");
  if (state.selectedTactic) {
    for (const formal of state.selectedTactic.formals) {
      const label = el("label", undefined, formal + " ");
      const input = document.createElement("input");
      input.value = state.pendingArgs[formal] ?? "";
      input.dataset.formal = formal;
      input.addEventListener("input", () =>
        handlers.onArgInput(formal, input.value));
      label.appendChild(input);
      form.appendChild(label);
    }
    const where = state.clickedLine === null
      ? "anywhere (click a line to pin)"
      : `at line ${state.clickedLine}`;
    form.appendChild(el("div", "where", where));
  }
  pane.appendChild(form);

  const apply = el("button", "apply-button", "Apply") as HTMLButtonElement;
  apply.disabled = state.busy || !state.selectedTactic;
  apply.addEventListener("click", () => handlers.onApply());
  pane.appendChild(apply);

  const undo = el("button", "undo-button", "Undo") as HTMLButtonElement;
  undo.disabled = state.busy || state.historySummaries.length <= 1;
  undo.addEventListener("click", () => handlers.onUndo());
  pane.appendChild(undo);

  if (state.lastFailure) {
    pane.appendChild(el("pre", "failure", state.lastFailure));
  }
}

export function renderDiff(state: ViewState, pane: HTMLElement): void {
  pane.textContent = "";
  pane.appendChild(el("h2", undefined, "Last diff"));
  for (const line of diffLines(state.lastDiff)) {
    pane.appendChild(el("div", `diff-${line.kind}`, line.text));
  }
}

export function renderHistory(state: ViewState, pane: HTMLElement): void {
  pane.textContent = "";
  pane.appendChild(el("h2", undefined, "History"));
  state.historySummaries.forEach((entry, i) => {
    pane.appendChild(el("div", "history-entry", `${i}: ${entry}`));
  });
}
