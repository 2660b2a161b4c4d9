// Bootstrap: wire the client, the state and the panes together.

import { ApiError, Client, TacticInfo } from "./api.js";
import {
  composeInvocation, initialState, loadProgram, missingArgs, selectTactic,
  ViewState,
} from "./state.js";
import {
  Handlers, renderDiff, renderGoals, renderHistory, renderPalette,
  renderProgram,
} from "./render.js";

export interface Panes {
  program: HTMLElement;
  goals: HTMLElement;
  palette: HTMLElement;
  diff: HTMLElement;
  history: HTMLElement;
}

export class App {
  state: ViewState = initialState();

  constructor(private client: Client, private panes: Panes) {}

  private handlers: Handlers = {
    onSelectTactic: (tactic: TacticInfo) => {
      selectTactic(this.state, tactic);
      this.render();
    },
    onArgInput: (formal, value) => {
      this.state.pendingArgs[formal] = value;
    },
    onLineClick: (line) => {
      this.state.clickedLine = this.state.clickedLine === line ? null : line;
      this.render();
    },
    onApply: () => void this.apply(),
    onUndo: () => void this.undo(),
  };

  async start(program: string, fixture: string): Promise<void> {
    this.state.tactics = await this.client.stdlib();
    const { id } = await this.client.createSession(program, fixture);
    this.state.sessionId = id;
    loadProgram(this.state, await this.client.getProgram(id));
    await this.refreshHistory();
    this.render();
  }

  async apply(): Promise<void> {
    const state = this.state;
    if (!state.sessionId || !state.selectedTactic || state.busy) return;
    const missing = missingArgs(state);
    if (missing.length) {
      state.lastFailure = `missing argument(s): ${missing.join(", ")}`;
      this.render();
      return;
    }
    const invocation = composeInvocation(state);
    state.busy = true;
    this.render();
    try {
      const result = await this.client.apply(state.sessionId, invocation);
      if (result.ok && result.program !== undefined) {
        state.programText = result.program;
        state.anchorIndex = result.anchors ?? {};
        state.errorMarkers = result.errors ?? [];
        state.lastDiff = result.diff ?? "";
        state.lastFailure = "";
        state.clickedLine = null;
        await this.refreshHistory();
      } else {
        state.lastFailure = result.failure ?? "application failed";
      }
    } catch (error) {
      state.lastFailure = error instanceof ApiError
        ? `service error ${error.status}: ${error.message}`
        : String(error);
    } finally {
      state.busy = false;
      this.render();
    }
  }

  async undo(): Promise<void> {
    const state = this.state;
    if (!state.sessionId || state.busy) return;
    if (state.historySummaries.length <= 1) return;
    state.busy = true;
    try {
      const result = await this.client.undo(state.sessionId);
      if (result.program !== undefined) {
        state.programText = result.program;
        state.anchorIndex = result.anchors ?? {};
        state.errorMarkers = result.errors ?? [];
        state.lastDiff = "";
        state.clickedLine = null;
      }
      await this.refreshHistory();
    } catch (error) {
      state.lastFailure = error instanceof ApiError
        ? `service error ${error.status}: ${error.message}`
        : String(error);
    } finally {
      state.busy = false;
      this.render();
    }
  }

  private async refreshHistory(): Promise<void> {
    if (!this.state.sessionId) return;
    const entries = await this.client.history(this.state.sessionId);
    this.state.historySummaries = entries.map(
      (e) => e.invocation ?? "(initial)",
    );
  }

  render(): void {
    renderProgram(this.state, this.panes.program, this.handlers);
    renderGoals(this.state, this.panes.goals);
    renderPalette(this.state, this.panes.palette, this.handlers);
    renderDiff(this.state, this.panes.diff);
    renderHistory(this.state, this.panes.history);
  }
}

export function mount(root: Document, base: string): App {
  const need = (id: string): HTMLElement => {
    const node = root.getElementById(id);
    if (!node) throw new Error(`missing pane #${id}`);
    return node;
  };
  return new App(new Client(base), {
    program: need("program-pane"),
    goals: need("goals-pane"),
    palette: need("palette-pane"),
    diff: need("diff-pane"),
    history: need("history-pane"),
  });
}

declare global {
  interface Window {
    dtacApp?: App;
  }
}

// In the browser the page provides a form to paste a program and a fixture;
// under tests the App is driven directly.
if (typeof window !== "undefined" && typeof document !== "undefined"
    && document.getElementById("program-pane")
    && !(globalThis as { __DTAC_TEST__?: boolean }).__DTAC_TEST__) {
  const app = mount(document, "");
  window.dtacApp = app;
  const form = document.getElementById("session-form");
  form?.addEventListener("submit", (event) => {
    event.preventDefault();
    const program = (document.getElementById("program-input") as HTMLTextAreaElement).value;
    const fixture = (document.getElementById("fixture-input") as HTMLTextAreaElement).value;
    void app.start(program, fixture);
  });
}
