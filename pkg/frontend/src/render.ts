/** Pure HTML renderers; every dynamic string is escaped. */

import type { Requirement, Setup, TrajectoryStep } from "./api.js";
import type { DashboardState, RunChip } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

const STATE_BADGES: Record<string, string> = {
  unverified: "badge-unverified",
  met: "badge-met",
  partially_met: "badge-partial",
  unmet: "badge-unmet",
  failed: "badge-failed",
};

export function stateBadge(state: string, failureReason?: string | null): string {
  const cls = STATE_BADGES[state] ?? "badge-unverified";
  const label = state.replace("_", " ");
  const reason = failureReason ? ` title="${escapeHtml(failureReason)}"` : "";
  return `<span class="badge ${cls}" data-state="${escapeHtml(state)}"${reason}>${escapeHtml(label)}</span>`;
}

export function renderSetupList(setups: Setup[], selected: string | null): string {
  if (setups.length === 0) {
    return `<p class="empty">No setups yet. Create one below.</p>`;
  }
  const items = setups
    .map((setup) => {
      const active = setup.id === selected ? " active" : "";
      return (
        `<li class="setup${active}" data-setup="${escapeHtml(setup.id)}">` +
        `<span class="setup-id">${escapeHtml(setup.id)}</span>` +
        `<span class="setup-app">${escapeHtml(setup.app_ref)}</span>` +
        `<span class="setup-count">${setup.requirement_count} reqs</span></li>`
      );
    })
    .join("");
  return `<ul class="setups">${items}</ul>`;
}

function criterionChip(requirementId: string, criterion: Requirement["criteria"][number]): string {
  const evidence = criterion.evidence
    .map(
      (step) =>
        `<a class="evidence" href="#step-${step}" data-req="${escapeHtml(requirementId)}" ` +
        `data-ac="${escapeHtml(criterion.id)}" data-step="${step}">step ${step}</a>`,
    )
    .join(" ");
  const explanation = criterion.explanation
    ? `<span class="explanation">${escapeHtml(criterion.explanation)}</span>`
    : "";
  return (
    `<li class="criterion verdict-${escapeHtml(criterion.verdict)}">` +
    `<span class="chip">${escapeHtml(criterion.id)}: ${escapeHtml(criterion.verdict)}</span> ` +
    `<span class="criterion-text">${escapeHtml(criterion.text)}</span> ${explanation} ${evidence}</li>`
  );
}

export function renderRequirements(state: DashboardState): string {
  if (state.selectedSetup === null) {
    return `<p class="empty">Select a setup to see its requirements.</p>`;
  }
  if (state.requirements.length === 0) {
    return `<p class="empty">This setup has no requirements.</p>`;
  }
  const rows = state.requirements
    .map((req) => {
      const checked = state.selection.has(req.id) ? " checked" : "";
      const liveRun = state.latestRunByRequirement.get(req.id);
      const chip = liveRun ? state.runs.get(liveRun) : undefined;
      return (
        `<article class="requirement" data-req="${escapeHtml(req.id)}">` +
        `<header><input type="checkbox" class="select-req" data-req="${escapeHtml(req.id)}"${checked}>` +
        `<h3>${escapeHtml(req.id)}: ${escapeHtml(req.title)}</h3>` +
        stateBadge(req.state) +
        (chip ? renderRunChip(chip) : "") +
        `</header>` +
        `<p class="description">${escapeHtml(req.description)}</p>` +
        `<ul class="criteria">${req.criteria.map((c) => criterionChip(req.id, c)).join("")}</ul>` +
        `</article>`
      );
    })
    .join("");
  return rows;
}

export function renderRunChip(chip: RunChip): string {
  const reason = chip.failureReason ? ` (${escapeHtml(chip.failureReason)})` : "";
  return (
    `<button class="run-chip status-${escapeHtml(chip.status)}" data-run="${escapeHtml(chip.runId)}">` +
    `${escapeHtml(chip.runId)}: ${escapeHtml(chip.status)}${reason}</button>`
  );
}

export function renderTrajectory(state: DashboardState): string {
  if (state.inspectedRun === null) {
    return `<p class="empty">Pick a run to inspect its trajectory.</p>`;
  }
  const cards = state.trajectory
    .map(
      (step: TrajectoryStep) =>
        `<section class="step" id="step-${step.index}">` +
        `<h4>step ${step.index} <code class="hash">${escapeHtml(step.observation.state_hash)}</code></h4>` +
        `<p class="reasoning">${escapeHtml(step.reasoning)}</p>` +
        `<code class="action">${escapeHtml(step.action)}</code>` +
        `<pre class="observation">${escapeHtml(step.observation.rendering)}</pre>` +
        `</section>`,
    )
    .join("");
  return (
    `<h3>trajectory of ${escapeHtml(state.inspectedRun)} (${state.trajectory.length} steps)</h3>` + cards
  );
}

export function renderErrorBanner(error: string | null): string {
  if (!error) return "";
  return (
    `<div class="error-banner">${escapeHtml(error)} ` +
    `<button id="retry">retry</button></div>`
  );
}
