// View state and the pure helpers behind the panes. Everything that can be
// computed without the DOM lives here so the unit tests cover it directly.

import type { ErrorMarker, ProgramView, TacticInfo } from "./api.js";

export interface ViewState {
  sessionId: string | null;
  programText: string;
  anchorIndex: Record<string, number>;
  errorMarkers: ErrorMarker[];
  tactics: TacticInfo[];
  selectedTactic: TacticInfo | null;
  pendingArgs: Record<string, string>;
  clickedLine: number | null; // position constraint chosen in the code pane
  historySummaries: string[];
  lastDiff: string;
  lastFailure: string;
  busy: boolean; // a request is in flight; apply is disabled
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    programText: "",
    anchorIndex: {},
    errorMarkers: [],
    tactics: [],
    selectedTactic: null,
    pendingArgs: {},
    clickedLine: null,
    historySummaries: [],
    lastDiff: "",
    lastFailure: "",
    busy: false,
  };
}

export function selectTactic(state: ViewState, tactic: TacticInfo): void {
  state.selectedTactic = tactic;
  state.pendingArgs = {};
  for (const formal of tactic.formals) {
    state.pendingArgs[formal] = "";
  }
}

export function missingArgs(state: ViewState): string[] {
  if (!state.selectedTactic) return [];
  return state.selectedTactic.formals.filter(
    (f) => !(state.pendingArgs[f] ?? "").trim(),
  );
}

/** The invocation text sent to the service: arguments in declaration order,
 * plus a line(N) position constraint when a line was clicked. */
export function composeInvocation(state: ViewState): string {
  const tactic = state.selectedTactic;
  if (!tactic) throw new Error("no tactic selected");
  const args = tactic.formals.map((f) => (state.pendingArgs[f] ?? "").trim());
  let text = `${tactic.name}(${args.join(", ")})`;
  if (state.clickedLine !== null) {
    text += `[line(${state.clickedLine})]`;
  }
  return text;
}

export function anchorOnLine(state: ViewState, line: number): string | null {
  for (const [name, anchorLine] of Object.entries(state.anchorIndex)) {
    if (anchorLine === line) return name;
  }
  return null;
}

export function markersForLine(state: ViewState, line: number): ErrorMarker[] {
  return state.errorMarkers.filter((m) => m.line === line);
}

export function loadProgram(state: ViewState, view: ProgramView): void {
  state.programText = view.text;
  state.anchorIndex = view.anchors;
  state.errorMarkers = view.errors;
  state.clickedLine = null;
}

export interface DiffLine {
  kind: "add" | "del" | "ctx";
  text: string;
}

export function diffLines(diff: string): DiffLine[] {
  const out: DiffLine[] = [];
  for (const line of diff.split("\n")) {
    if (!line) continue;
    if (line.startsWith("+++") || line.startsWith("---")) continue;
    if (line.startsWith("+")) out.push({ kind: "add", text: line });
    else if (line.startsWith("-")) out.push({ kind: "del", text: line });
    else out.push({ kind: "ctx", text: line });
  }
  return out;
}
