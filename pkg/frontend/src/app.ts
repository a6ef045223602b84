// DOM wiring for the operator console. All state lives in a handful of
// module-level variables; every render is a pure function of the most recent
// responses, and stale fetches are dropped via sequence gates.

import { ApiError, fetchAlerts, fetchComponents, fetchStateDetail,
         fetchStates, postCompare } from "./api.js";
import { barChart, lineChart } from "./charts.js";
import type { ComponentsInfo, ExplainResponse, StateDetail,
              StateSummary } from "./types.js";
import { alertBadges, buildExplanationView, errorBannerText, formatValue,
         makeSequenceGate, sharedYScale } from "./viewmodel.js";

let components: ComponentsInfo;
let method = "predictor";
let badges = new Map<string, string[]>();
let selectedA: string | null = null;
let selectedB: string | null = null;

const explainGate = makeSequenceGate();
const alertsGate = makeSequenceGate();

function $(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node;
}

function setBanner(message: string | null): void {
  const banner = $("error-banner");
  banner.textContent = message ?? "";
  banner.classList.toggle("hidden", message === null);
}

function showError(err: unknown): void {
  if (err instanceof ApiError) {
    setBanner(errorBannerText(err.status, err.body));
  } else {
    setBanner(String(err));
  }
}

async function init(): Promise<void> {
  try {
    components = await fetchComponents();
    renderMethodSelector();
    renderLegend();
    await Promise.all([refreshStates(), refreshAlerts()]);
    setBanner(null);
  } catch (err) {
    showError(err);
  }
}

function renderMethodSelector(): void {
  const select = $("method") as HTMLSelectElement;
  select.innerHTML = "";
  for (const m of components.methods) {
    const opt = document.createElement("option");
    opt.value = m;
    opt.textContent = m;
    select.appendChild(opt);
  }
  select.value = method;
  select.onchange = () => {
    method = select.value;
    void refreshAlerts();
    void renderPanels();
  };
}

function renderLegend(): void {
  const legend = $("legend");
  legend.innerHTML = "";
  components.names.forEach((name, i) => {
    const item = document.createElement("span");
    item.className = `legend-item c-${i}`;
    item.textContent = `${name} (w=${components.weights[i]})`;
    legend.appendChild(item);
  });
}

async function refreshAlerts(): Promise<void> {
  const ticket = alertsGate.next();
  try {
    const alerts = await fetchAlerts(method);
    if (!alertsGate.isCurrent(ticket)) {
      return;
    }
    badges = alertBadges(alerts);
    await refreshStates();
  } catch (err) {
    if (alertsGate.isCurrent(ticket)) {
      showError(err);
    }
  }
}

async function refreshStates(): Promise<void> {
  const page = await fetchStates(0, 200);
  const list = $("state-list");
  list.innerHTML = "";
  for (const s of page.states) {
    list.appendChild(stateRow(s));
  }
}

function stateRow(s: StateSummary): HTMLElement {
  const row = document.createElement("div");
  row.className = "state-row";
  row.dataset.id = s.id;
  const label = document.createElement("span");
  label.textContent = `${s.id}  ${s.trace_id} @ step ${s.anchor}`;
  row.appendChild(label);
  const flags = badges.get(s.id);
  if (flags) {
    const badge = document.createElement("span");
    badge.className = "alert-badge";
    badge.textContent = flags.join(", ");
    badge.title = `alerts: ${flags.join(", ")}`;
    row.appendChild(badge);
  }
  row.onclick = (ev) => {
    if (ev.shiftKey) {
      selectedB = s.id;
    } else {
      selectedA = s.id;
      selectedB = null;
    }
    highlightSelection();
    void renderPanels();
  };
  return row;
}

function highlightSelection(): void {
  for (const row of document.querySelectorAll<HTMLElement>(".state-row")) {
    row.classList.toggle("selected-a", row.dataset.id === selectedA);
    row.classList.toggle("selected-b", row.dataset.id === selectedB);
  }
}

interface PanelData {
  detail: StateDetail;
  responses: ExplainResponse[];
}

async function loadPanel(stateId: string,
                         actions: number[] | null): Promise<PanelData> {
  const detail = await fetchStateDetail(stateId);
  const wanted = actions ?? [detail.policy_action];
  const cmp = await postCompare(stateId, wanted, method);
  return { detail, responses: cmp.responses };
}

// Renders the single-state what-if view, or two side-by-side panels with a
// shared y-scale when a second state is shift-selected.
async function renderPanels(): Promise<void> {
  if (selectedA === null) {
    return;
  }
  const ticket = explainGate.next();
  try {
    const detailA = await fetchStateDetail(selectedA);
    const actionsA = selectedActions(detailA);
    const a = await loadPanel(selectedA, actionsA);
    const b = selectedB !== null ? await loadPanel(selectedB, null) : null;
    if (!explainGate.isCurrent(ticket)) {
      return;
    }
    setBanner(null);
    const yMax = sharedYScale([a.responses, ...(b ? [b.responses] : [])]);
    drawPanel($("panel-a"), a, yMax);
    if (b) {
      drawPanel($("panel-b"), b, yMax);
    } else {
      $("panel-b").innerHTML = "";
    }
  } catch (err) {
    if (explainGate.isCurrent(ticket)) {
      $("panel-a").innerHTML = "";
      $("panel-b").innerHTML = "";
      showError(err);
    }
  }
}

// Which actions to query for the primary panel: the checked boxes, defaulting
// to the policy action plus its immediate alternatives.
function selectedActions(detail: StateDetail): number[] {
  const checked = [...document.querySelectorAll<HTMLInputElement>(
    "#actions input:checked")].map((box) => Number(box.value));
  const valid = checked.filter((a) => detail.actions.includes(a));
  if (valid.length > 0) {
    return valid;
  }
  return detail.actions.filter(
    (a) => Math.abs(a - detail.policy_action) <= 1).slice(0, 3);
}

function drawPanel(root: HTMLElement, data: PanelData, yMax: number): void {
  root.innerHTML = "";
  const title = document.createElement("h3");
  title.textContent = `${data.detail.id}  (${data.detail.trace_id}, `
    + `policy action ${data.detail.policy_action})`;
  const flags = badges.get(data.detail.id);
  if (flags) {
    const badge = document.createElement("span");
    badge.className = "alert-badge";
    badge.textContent = flags.join(", ");
    title.appendChild(badge);
  }
  root.appendChild(title);

  for (const [key, series] of Object.entries(data.detail.history)) {
    if (Array.isArray(series)) {
      root.appendChild(lineChart(series, key));
    }
  }

  if (root.id === "panel-a") {
    renderActionBoxes(data.detail);
  }

  const view = buildExplanationView(components.names, data.responses);
  root.appendChild(barChart(view.bars, components.names, yMax));

  const totals = document.createElement("div");
  totals.className = "totals";
  totals.textContent = view.totals
    .map((t) => `action ${t.action}: total ${formatValue(t.total)}`)
    .join("   ");
  root.appendChild(totals);

  if (view.dominant !== null) {
    const note = document.createElement("div");
    note.className = "dominant-note";
    note.textContent = `dominant component: ${view.dominant}`;
    root.appendChild(note);
  }
}

function renderActionBoxes(detail: StateDetail): void {
  const host = $("actions");
  const current = new Set(
    [...document.querySelectorAll<HTMLInputElement>("#actions input:checked")]
      .map((box) => Number(box.value)));
  host.innerHTML = "";
  for (const a of detail.actions) {
    const label = document.createElement("label");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.value = String(a);
    box.checked = current.size > 0
      ? current.has(a)
      : Math.abs(a - detail.policy_action) <= 1;
    box.onchange = () => void renderPanels();
    label.appendChild(box);
    label.appendChild(document.createTextNode(String(a)));
    host.appendChild(label);
  }
}

void init();
