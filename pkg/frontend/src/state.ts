/** Dashboard state: a pure mirror of the latest API responses.
 *
 * No verdicts or states are derived client-side; the server's words are
 * rendered as-is. Overlapping responses are resolved by per-resource
 * sequence numbers: a reply older than the newest accepted one is dropped.
 */

import type { Requirement, RunStatus, Setup, TrajectoryStep } from "./api.js";
import { TERMINAL_STATUSES } from "./api.js";

export interface RunChip {
  runId: string;
  requirementId: string;
  status: string;
  failureReason: string | null;
}

export interface DashboardState {
  setups: Setup[];
  selectedSetup: string | null;
  requirements: Requirement[];
  selection: Set<string>;
  /** live chips for the latest launch, keyed by run id */
  runs: Map<string, RunChip>;
  /** latest known run id per requirement (for evidence links) */
  latestRunByRequirement: Map<string, string>;
  inspectedRun: string | null;
  trajectory: TrajectoryStep[];
  error: string | null;
}

export function initialState(): DashboardState {
  return {
    setups: [],
    selectedSetup: null,
    requirements: [],
    selection: new Set(),
    runs: new Map(),
    latestRunByRequirement: new Map(),
    inspectedRun: null,
    trajectory: [],
    error: null,
  };
}

/** Monotonic per-key sequence tracker; stale responses are rejected. */
export class SequenceTracker {
  private issued = new Map<string, number>();
  private accepted = new Map<string, number>();

  issue(key: string): number {
    const next = (this.issued.get(key) ?? 0) + 1;
    this.issued.set(key, next);
    return next;
  }

  accept(key: string, seq: number): boolean {
    if (seq <= (this.accepted.get(key) ?? 0)) {
      return false;
    }
    this.accepted.set(key, seq);
    return true;
  }
}

export function applySetups(state: DashboardState, setups: Setup[]): void {
  state.setups = setups;
  if (state.selectedSetup && !setups.some((s) => s.id === state.selectedSetup)) {
    state.selectedSetup = null;
    state.requirements = [];
    state.selection.clear();
  }
}

export function selectSetup(state: DashboardState, setupId: string): void {
  if (state.selectedSetup !== setupId) {
    state.selectedSetup = setupId;
    state.requirements = [];
    state.selection.clear();
    state.runs.clear();
    state.latestRunByRequirement.clear();
    state.inspectedRun = null;
    state.trajectory = [];
  }
}

export function applyRequirements(state: DashboardState, requirements: Requirement[]): void {
  state.requirements = requirements;
  const known = new Set(requirements.map((r) => r.id));
  for (const id of [...state.selection]) {
    if (!known.has(id)) state.selection.delete(id);
  }
}

export function toggleSelection(state: DashboardState, requirementId: string): void {
  if (state.selection.has(requirementId)) {
    state.selection.delete(requirementId);
  } else {
    state.selection.add(requirementId);
  }
}

export function launchAccepted(
  state: DashboardState,
  requirementIds: string[],
  runIds: string[],
): void {
  state.runs.clear();
  runIds.forEach((runId, i) => {
    const requirementId = requirementIds[i];
    state.runs.set(runId, { runId, requirementId, status: "queued", failureReason: null });
    state.latestRunByRequirement.set(requirementId, runId);
  });
}

export function applyRunStatus(state: DashboardState, status: RunStatus): void {
  const chip = state.runs.get(status.run_id);
  if (chip) {
    chip.status = status.status;
    chip.failureReason = status.failure_reason;
  }
}

export function allRunsTerminal(state: DashboardState): boolean {
  if (state.runs.size === 0) return true;
  return [...state.runs.values()].every((chip) => TERMINAL_STATUSES.has(chip.status));
}

export function applyTrajectory(
  state: DashboardState,
  runId: string,
  steps: TrajectoryStep[],
): void {
  state.inspectedRun = runId;
  state.trajectory = steps;
}
