/** DOM wiring for the three-pane dashboard (setups / requirements / trajectory). */

import { ApiClient, TERMINAL_STATUSES } from "./api.js";
import {
  renderErrorBanner,
  renderRequirements,
  renderSetupList,
  renderTrajectory,
} from "./render.js";
import { startPolling, type Poller } from "./poll.js";
import {
  allRunsTerminal,
  applyRequirements,
  applyRunStatus,
  applySetups,
  applyTrajectory,
  initialState,
  launchAccepted,
  selectSetup,
  SequenceTracker,
  toggleSelection,
} from "./state.js";

const api = new ApiClient("");
const state = initialState();
const tracker = new SequenceTracker();
let statusPoller: Poller | null = null;
let lastFailedOp: (() => Promise<void>) | null = null;

function el(id: string): HTMLElement {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found;
}

function render(): void {
  el("error-slot").innerHTML = renderErrorBanner(state.error);
  el("setups-pane").innerHTML = renderSetupList(state.setups, state.selectedSetup);
  el("requirements-pane").innerHTML = renderRequirements(state);
  el("trajectory-pane").innerHTML = renderTrajectory(state);
  const launch = el("launch") as HTMLButtonElement;
  launch.disabled = state.selection.size === 0 || !allRunsTerminal(state);
}

async function guarded(op: () => Promise<void>): Promise<void> {
  try {
    await op();
    state.error = null;
  } catch (err) {
    state.error = err instanceof Error ? err.message : String(err);
    lastFailedOp = op;
  }
  render();
}

async function loadSetups(): Promise<void> {
  const seq = tracker.issue("setups");
  const setups = await api.listSetups();
  if (tracker.accept("setups", seq)) {
    applySetups(state, setups);
  }
}

async function loadRequirements(setupId: string): Promise<void> {
  const seq = tracker.issue(`requirements:${setupId}`);
  const requirements = await api.listRequirements(setupId);
  if (tracker.accept(`requirements:${setupId}`, seq) && state.selectedSetup === setupId) {
    applyRequirements(state, requirements);
  }
}

async function inspectRun(runId: string): Promise<void> {
  const seq = tracker.issue("trajectory");
  const steps = await api.fullTrajectory(runId);
  if (tracker.accept("trajectory", seq)) {
    applyTrajectory(state, runId, steps);
  }
}

function beginStatusPolling(): void {
  statusPoller?.stop();
  statusPoller = startPolling(async () => {
    const pending = [...state.runs.values()].filter((c) => !TERMINAL_STATUSES.has(c.status));
    const statuses = await Promise.all(pending.map((chip) => api.runStatus(chip.runId)));
    statuses.forEach((status) => applyRunStatus(state, status));
    if (allRunsTerminal(state)) {
      if (state.selectedSetup) {
        await loadRequirements(state.selectedSetup);
      }
      render();
      return "stop";
    }
    render();
    return "continue";
  }, 1000);
}

async function launchSelected(): Promise<void> {
  if (state.selectedSetup === null || state.selection.size === 0) return;
  const requirementIds = state.requirements
    .filter((r) => state.selection.has(r.id))
    .map((r) => r.id);
  const body = await api.verify(state.selectedSetup, requirementIds);
  launchAccepted(state, requirementIds, body.run_ids);
  beginStatusPolling();
}

async function followEvidence(requirementId: string, stepIndex: number): Promise<void> {
  const runId = state.latestRunByRequirement.get(requirementId);
  if (!runId) {
    state.error = `no run loaded for ${requirementId}; launch a verification first`;
    render();
    return;
  }
  if (state.inspectedRun !== runId) {
    await inspectRun(runId);
    render();
  }
  document.getElementById(`step-${stepIndex}`)?.scrollIntoView({ behavior: "smooth" });
}

function wireEvents(): void {
  document.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const setupRow = target.closest<HTMLElement>("[data-setup]");
    if (setupRow?.dataset.setup) {
      const setupId = setupRow.dataset.setup;
      selectSetup(state, setupId);
      void guarded(() => loadRequirements(setupId));
      return;
    }
    const runChip = target.closest<HTMLElement>("[data-run]");
    if (runChip?.dataset.run) {
      void guarded(() => inspectRun(runChip.dataset.run!));
      return;
    }
    const evidence = target.closest<HTMLElement>("a.evidence");
    if (evidence?.dataset.req && evidence.dataset.step !== undefined) {
      event.preventDefault();
      void followEvidence(evidence.dataset.req, Number(evidence.dataset.step));
      return;
    }
    if (target.id === "retry" && lastFailedOp) {
      const op = lastFailedOp;
      lastFailedOp = null;
      void guarded(op);
    }
  });

  document.addEventListener("change", (event) => {
    const box = event.target as HTMLInputElement;
    if (box.classList.contains("select-req") && box.dataset.req) {
      toggleSelection(state, box.dataset.req);
      render();
    }
  });

  el("launch").addEventListener("click", () => void guarded(launchSelected));

  el("create-setup").addEventListener("click", () => {
    const appRef = (el("new-app-ref") as HTMLInputElement).value.trim();
    const text = (el("new-requirements") as HTMLTextAreaElement).value;
    if (!appRef || !text.trim()) return;
    void guarded(async () => {
      await api.createSetup(appRef, text);
      await loadSetups();
    });
  });
}

export function boot(): void {
  wireEvents();
  void guarded(loadSetups);
}

boot();
