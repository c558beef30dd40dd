// HTML renderers. Every number is printed verbatim from the server payload
// (String(value)); the console computes nothing numeric. Sign comparisons
// only pick CSS classes.

import type {
  AnswerPayload,
  DriftReportPayload,
  PlanDiffPayload,
  QueryResultPayload,
} from "./types.js";

export function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Verbatim payload number -> text. */
function num(value: number): string {
  return String(value);
}

function signClass(value: number): string {
  if (value > 0) return "up";
  if (value < 0) return "down";
  return "zero";
}

const COMPONENT_LABELS: Record<string, string> = {
  material: "Material",
  inbound_shipping: "Inbound shipping",
  production: "Production",
  outbound_shipping: "Outbound shipping",
  delay: "Delay",
  lost_penalty: "Lost-demand penalty",
};

export function renderDiffView(diff: PlanDiffPayload): string {
  const rows = Object.entries(diff.delta_by_component)
    .map(([key, delta]) => `
      <tr class="component ${signClass(delta)}">
        <td>${escapeHtml(COMPONENT_LABELS[key] ?? key)}</td>
        <td class="amount"><span class="bar ${signClass(delta)}">${num(delta)}</span></td>
      </tr>`)
    .join("");

  const flows = diff.changed_flows
    .map((flow) => `
      <tr>
        <td>${escapeHtml(flow.lane)}</td>
        <td class="amount">${num(flow.base_units)}</td>
        <td class="amount">${num(flow.alt_units)}</td>
      </tr>`)
    .join("");

  const lost = Object.entries(diff.delta_lost)
    .map(([record, delta]) => `
      <p class="callout ${delta > 0 ? "lost" : "recovered"}">
        ${delta > 0 ? "Lost demand" : "Recovered demand"}:
        <strong>${escapeHtml(record)}</strong> ${num(delta)} units
      </p>`)
    .join("");

  return `
<section class="diff-view">
  <header class="totals">
    <span class="base">${num(diff.base_total)}</span>
    <span class="arrow">-&gt;</span>
    <span class="alt">${num(diff.alt_total)}</span>
    <span class="delta ${signClass(diff.delta_total)}">${num(diff.delta_total)}</span>
  </header>
  <table class="components">
    <tbody>${rows}
    </tbody>
  </table>
  ${diff.changed_flows.length ? `
  <table class="changed-flows">
    <thead><tr><th>Lane</th><th>Base</th><th>Scenario</th></tr></thead>
    <tbody>${flows}
    </tbody>
  </table>` : ""}
  ${lost}
  <p class="note">${escapeHtml(diff.feasibility_note)}</p>
</section>`;
}

export function renderFactCard(result: QueryResultPayload): string {
  const value = typeof result.value === "number" ? num(result.value)
    : escapeHtml(result.value);
  const unit = result.unit ? ` <span class="unit">${escapeHtml(result.unit)}</span>` : "";
  return `
<section class="fact-card">
  <div class="value">${value}${unit}</div>
  <div class="form">${escapeHtml(result.form.replace(/_/g, " "))}</div>
</section>`;
}

export function renderClarification(answer: AnswerPayload, entryId: number): string {
  const buttons = answer.options
    .map((option, index) => `
    <button class="refinement" data-entry="${entryId}" data-index="${index}"
            data-option="${escapeHtml(option)}">${escapeHtml(option)}</button>`)
    .join("");
  return `
<section class="clarification">
  <p>${escapeHtml(answer.text.split("\n")[0])}</p>
  <div class="choices">${buttons}
  </div>
</section>`;
}

export function renderCatalog(questions: string[]): string {
  const items = questions.map((q) => `<li>${escapeHtml(q)}</li>`).join("");
  return `
<section class="catalog">
  <p>That question is not supported yet. The console can answer:</p>
  <ul>${items}</ul>
</section>`;
}

export function renderAnswer(answer: AnswerPayload, entryId: number,
                             catalog: string[]): string {
  const script = answer.dsl
    ? `<code class="dsl">${escapeHtml(answer.dsl)}</code>` : "";
  let body: string;
  switch (answer.kind) {
    case "what-if":
      body = answer.structured?.type === "plan_diff"
        ? renderDiffView(answer.structured) : "";
      break;
    case "insight":
      body = answer.structured?.type === "query_result"
        ? renderFactCard(answer.structured) : "";
      break;
    case "clarification":
      return `<article class="answer clarification-answer">${renderClarification(answer, entryId)}</article>`;
    default:
      return `<article class="answer fallback-answer">${renderCatalog(catalog)}</article>`;
  }
  return `
<article class="answer ${answer.kind}-answer">
  <p class="answer-text">${escapeHtml(answer.text)}</p>
  ${body}
  ${script}
</article>`;
}

export function renderDriftReport(payload: DriftReportPayload): string {
  if (payload.changes.length === 0) {
    return `
<section class="drift-report empty">
  <header>
    <h2>${escapeHtml(payload.snapshot_a)} -&gt; ${escapeHtml(payload.snapshot_b)}</h2>
  </header>
  <p class="empty-state">No changes between snapshots.</p>
</section>`;
  }
  const regions = payload.regions
    .map((region) => `
      <tr>
        <td>${escapeHtml(region.region)}</td>
        <td class="amount">${num(region.before)}</td>
        <td class="amount">${num(region.after)}</td>
        <td class="amount ${signClass(region.delta)}">${num(region.delta)}</td>
      </tr>`)
    .join("");

  const changes = payload.changes
    .map((change) => {
      const qty = change.kind === "added"
        ? `quantity ${num(change.qty_after ?? 0)}`
        : change.kind === "removed"
          ? `quantity was ${num(change.qty_before ?? 0)}`
          : `quantity ${num(change.qty_before ?? 0)} -&gt; ${num(change.qty_after ?? 0)}`;
      const attrs = Object.entries(change.attr_changes)
        .map(([key, [before, after]]) =>
          `<span class="attr">${escapeHtml(key)}: ${escapeHtml(before ?? "(none)")} -&gt; ${escapeHtml(after ?? "(none)")}</span>`)
        .join(" ");
      const flags = change.flags
        .map((flag) => `<span class="chip flag">${escapeHtml(flag)}</span>`)
        .join("");
      return `
      <li class="change ${change.kind}">
        <strong>${escapeHtml(change.record_id)}</strong>
        <span class="chip kind">${escapeHtml(change.kind)}</span>
        <span class="chip author">${escapeHtml(change.author || "(unknown)")}</span>
        <span class="chip category">${escapeHtml(change.category)}</span>
        <span class="qty">${qty}</span>
        ${attrs}
        ${change.due_delta !== 0
          ? `<span class="due">due day shifted by ${num(change.due_delta)}</span>` : ""}
        ${change.note ? `<span class="note">${escapeHtml(change.note)}</span>` : ""}
        ${flags}
      </li>`;
    })
    .join("");

  const banner = payload.flagged.length
    ? `<div class="banner warning">Flagged for review: ${payload.flagged.map(escapeHtml).join(", ")}</div>`
    : "";

  return `
<section class="drift-report">
  <header>
    <h2>${escapeHtml(payload.snapshot_a)} -&gt; ${escapeHtml(payload.snapshot_b)}</h2>
    <p class="headline">
      Total <span class="amount">${num(payload.total_before)}</span>
      -&gt; <span class="amount">${num(payload.total_after)}</span>
      (<span class="amount ${signClass(payload.total_delta)}">${num(payload.total_delta)}</span>).
      ${num(payload.counts.added)} added, ${num(payload.counts.removed)} removed,
      ${num(payload.counts.modified)} modified, ${num(payload.counts.unchanged)} unchanged.
    </p>
  </header>
  ${banner}
  <table class="regions">
    <thead><tr><th>Region</th><th>Before</th><th>After</th><th>Delta</th></tr></thead>
    <tbody>${regions}
    </tbody>
  </table>
  <ul class="changes">${changes}
  </ul>
</section>`;
}

export function renderErrorEntry(message: string, entryId: number): string {
  return `
<article class="answer error-entry">
  <p class="error">${escapeHtml(message)}</p>
  <button class="retry" data-entry="${entryId}">Retry</button>
</article>`;
}
