// Browser wiring: two top-level views (what-if Q&A, drift reports) over the
// planlens service. All state lives in Transcript/ApiClient; this file only
// moves DOM events in and HTML strings out.

import { ApiClient, ApiFailure } from "./api.js";
import { renderAnswer, renderDriftReport, renderErrorEntry, escapeHtml } from "./render.js";
import { Transcript } from "./transcript.js";

const api = new ApiClient("");
let sessionId: string | null = null;
let catalog: string[] = [];

const transcript = new Transcript(async (question) => {
  if (!sessionId) throw new Error("load a dataset first");
  return api.ask(sessionId, question);
});

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderTranscript(): void {
  const container = el<HTMLDivElement>("transcript");
  container.innerHTML = transcript.entries
    .map((entry) => {
      const question = `<p class="question">${escapeHtml(entry.question)}</p>`;
      if (entry.error !== null) return question + renderErrorEntry(entry.error, entry.id);
      if (entry.answer === null) return question + `<p class="pending">thinking...</p>`;
      return question + renderAnswer(entry.answer, entry.id, catalog);
    })
    .join("\n");
  container.scrollTop = container.scrollHeight;
  el<HTMLButtonElement>("send").disabled = transcript.pending || sessionId === null;
}

async function submitQuestion(text: string): Promise<void> {
  if (!text.trim() || transcript.pending) return;
  el<HTMLInputElement>("question").value = "";
  const resolved = transcript.submit(text.trim());
  renderTranscript();
  await resolved;
  renderTranscript();
}

async function setupSession(): Promise<void> {
  const network = el<HTMLInputElement>("network-file").files?.[0];
  const demand = el<HTMLInputElement>("demand-file").files?.[0];
  const history = el<HTMLInputElement>("history-file").files?.[0];
  const status = el<HTMLSpanElement>("session-status");
  if (!network || !demand) {
    status.textContent = "select network and demand files";
    return;
  }
  try {
    const datasetId = await api.uploadDataset(network, demand, history ?? undefined);
    const session = await api.createSession(datasetId);
    sessionId = session.session_id;
    status.textContent =
      `session ready; baseline total ${String(session.baseline.total_cost)}`;
  } catch (failure) {
    status.textContent = failure instanceof Error ? failure.message : String(failure);
  }
  renderTranscript();
}

async function runDrift(): Promise<void> {
  const a = el<HTMLInputElement>("drift-a").files?.[0];
  const b = el<HTMLInputElement>("drift-b").files?.[0];
  const output = el<HTMLDivElement>("drift-output");
  const error = el<HTMLParagraphElement>("drift-error");
  error.textContent = "";
  if (!a || !b) {
    error.textContent = "select both snapshot files";
    return;
  }
  try {
    const response = await api.drift(a, b);
    output.innerHTML = renderDriftReport(response.report);
  } catch (failure) {
    output.innerHTML = "";
    error.textContent = failure instanceof ApiFailure
      ? `${failure.code}: ${failure.message}`
      : failure instanceof Error ? failure.message : String(failure);
  }
}

function switchView(name: "qa" | "drift"): void {
  el("view-qa").hidden = name !== "qa";
  el("view-drift").hidden = name !== "drift";
  el("tab-qa").classList.toggle("active", name === "qa");
  el("tab-drift").classList.toggle("active", name === "drift");
}

export function boot(): void {
  el("tab-qa").addEventListener("click", () => switchView("qa"));
  el("tab-drift").addEventListener("click", () => switchView("drift"));
  el("load-dataset").addEventListener("click", () => void setupSession());
  el("send").addEventListener("click", () =>
    void submitQuestion(el<HTMLInputElement>("question").value));
  el<HTMLInputElement>("question").addEventListener("keydown", (event) => {
    if (event.key === "Enter") void submitQuestion(el<HTMLInputElement>("question").value);
  });
  el("run-drift").addEventListener("click", () => void runDrift());

  // clarification choices and retry buttons arrive with the rendered answers
  el("transcript").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.matches("button.refinement")) {
      const entry = Number(target.dataset.entry);
      const option = target.dataset.option ?? "";
      void transcript.chooseRefinement(entry, option).then(renderTranscript);
      renderTranscript();
    } else if (target.matches("button.retry")) {
      void transcript.retry(Number(target.dataset.entry)).then(renderTranscript);
      renderTranscript();
    }
  });

  void api.supportedQuestions()
    .then((questions) => {
      catalog = questions;
      el("catalog-list").innerHTML =
        questions.map((q) => `<li>${escapeHtml(q)}</li>`).join("");
    })
    .catch(() => { /* catalog panel stays empty if the service is down */ });

  switchView("qa");
  renderTranscript();
}

if (typeof document !== "undefined" && document.getElementById("view-qa")) {
  boot();
}
