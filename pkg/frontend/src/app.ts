/**
 * DOM layer of the auditor console.
 *
 * The skeleton is built once at mount; renders only update text,
 * visibility, and the disabled flags. The observation card is rebuilt
 * when the set of pending indices changes so half-typed entries survive
 * unrelated refreshes. All behavior lives in ConsoleController; handlers
 * here just translate events into controller calls.
 */

import type { PendingItem } from "./api.js";
import { renderChart, type ChartScale } from "./chart.js";
import { ConsoleController } from "./controller.js";
import { formatInterval, formatSig } from "./format.js";

interface Refs {
  setupPanel: HTMLElement;
  sessionPanel: HTMLElement;
  uploadInput: HTMLInputElement;
  uploadBtn: HTMLButtonElement;
  populationSummary: HTMLElement;
  epsilon: HTMLInputElement;
  delta: HTMLInputElement;
  strategy: HTMLSelectElement;
  csFamily: HTMLSelectElement;
  cv: HTMLInputElement;
  seed: HTMLInputElement;
  createBtn: HTMLButtonElement;
  banner: HTMLElement;
  intervalReadout: HTMLElement;
  widthReadout: HTMLElement;
  stepReadout: HTMLElement;
  auditedCount: HTMLElement;
  card: HTMLElement;
  cardItems: HTMLElement;
  fieldError: HTMLElement;
  observeBtn: HTMLButtonElement;
  drawBtn: HTMLButtonElement;
  chart: SVGSVGElement;
  logToggle: HTMLInputElement;
  remainingReadout: HTMLElement;
  assertEpsilon: HTMLInputElement;
  assertBtn: HTMLButtonElement;
  decisionReadout: HTMLElement;
  alert: HTMLElement;
  alertText: HTMLElement;
  alertDismiss: HTMLButtonElement;
}

const SKELETON = `
<section id="setup-panel" class="panel">
  <h2>New audit</h2>
  <div class="row">
    <input type="file" id="upload-input" accept=".csv,text/csv">
    <button id="upload-btn" type="button">Upload population</button>
    <span id="population-summary"></span>
  </div>
  <div class="grid">
    <label>Width target &epsilon; <input id="epsilon" type="number" step="any" value="0.05"></label>
    <label>Error budget &delta; <input id="delta" type="number" step="any" value="0.05"></label>
    <label>Sampling
      <select id="strategy">
        <option value="propM" selected>proportional to weight</option>
        <option value="propMS">weight and score</option>
        <option value="uniform">uniform</option>
      </select>
    </label>
    <label>Sequence family
      <select id="cs-family">
        <option value="betting" selected>betting</option>
        <option value="hoeffding">Hoeffding</option>
        <option value="empirical_bernstein">empirical Bernstein</option>
      </select>
    </label>
    <label><input id="cv" type="checkbox"> control variates</label>
    <label>Seed (optional) <input id="seed" type="number" step="1"></label>
  </div>
  <button id="create-btn" type="button">Create session</button>
</section>
<section id="session-panel" class="panel" hidden>
  <div id="banner" class="banner"></div>
  <div class="readouts">
    <span>step <strong id="step-readout"></strong></span>
    <span>interval <strong id="interval-readout"></strong></span>
    <span>width <strong id="width-readout"></strong></span>
    <span>audited <strong id="audited-count"></strong></span>
  </div>
  <div class="row">
    <button id="draw-btn" type="button">Draw next</button>
  </div>
  <div id="card" class="card" hidden>
    <h3>Audit these transactions</h3>
    <div id="card-items"></div>
    <div id="field-error" class="field-error" hidden></div>
    <button id="observe-btn" type="button">Submit observations</button>
  </div>
  <div class="chart-box">
    <svg id="chart" role="img" aria-label="interval width by step"></svg>
    <label><input id="log-toggle" type="checkbox"> log scale</label>
  </div>
  <div class="row">
    <span>remaining-fraction interval <strong id="remaining-readout"></strong></span>
  </div>
  <div class="row">
    <label>Assert misstatement &le; <input id="assert-epsilon" type="number" step="any"></label>
    <button id="assert-btn" type="button">Check</button>
    <strong id="decision-readout"></strong>
  </div>
</section>
<div id="alert" class="alert" hidden>
  <span id="alert-text"></span>
  <button id="alert-dismiss" type="button">Dismiss</button>
</div>
`;

function grab<T extends Element>(root: ParentNode, selector: string): T {
  const el = root.querySelector(selector);
  if (el === null) throw new Error(`console skeleton is missing ${selector}`);
  return el as T;
}

function collectRefs(root: ParentNode): Refs {
  return {
    setupPanel: grab(root, "#setup-panel"),
    sessionPanel: grab(root, "#session-panel"),
    uploadInput: grab(root, "#upload-input"),
    uploadBtn: grab(root, "#upload-btn"),
    populationSummary: grab(root, "#population-summary"),
    epsilon: grab(root, "#epsilon"),
    delta: grab(root, "#delta"),
    strategy: grab(root, "#strategy"),
    csFamily: grab(root, "#cs-family"),
    cv: grab(root, "#cv"),
    seed: grab(root, "#seed"),
    createBtn: grab(root, "#create-btn"),
    banner: grab(root, "#banner"),
    intervalReadout: grab(root, "#interval-readout"),
    widthReadout: grab(root, "#width-readout"),
    stepReadout: grab(root, "#step-readout"),
    auditedCount: grab(root, "#audited-count"),
    card: grab(root, "#card"),
    cardItems: grab(root, "#card-items"),
    fieldError: grab(root, "#field-error"),
    observeBtn: grab(root, "#observe-btn"),
    drawBtn: grab(root, "#draw-btn"),
    chart: grab(root, "#chart"),
    logToggle: grab(root, "#log-toggle"),
    remainingReadout: grab(root, "#remaining-readout"),
    assertEpsilon: grab(root, "#assert-epsilon"),
    assertBtn: grab(root, "#assert-btn"),
    decisionReadout: grab(root, "#decision-readout"),
    alert: grab(root, "#alert"),
    alertText: grab(root, "#alert-text"),
    alertDismiss: grab(root, "#alert-dismiss"),
  };
}

/** Read an attached file as text; not every DOM engine has Blob.text. */
function readFileText(file: File): Promise<string> {
  if (typeof file.text === "function") return file.text();
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onerror = () => reject(reader.error ?? new Error("could not read the file"));
    reader.onload = () => resolve(String(reader.result));
    reader.readAsText(file);
  });
}

/** The transaction card: id, reported value, weight, and an entry field. No score. */
function buildCardItems(container: HTMLElement, items: PendingItem[]): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  for (const item of items) {
    const row = doc.createElement("div");
    row.className = "pending-item";

    const label = doc.createElement("span");
    label.className = "pending-label";
    label.textContent = `${item.id}: reported value ${item.reported_value}, weight ${formatSig(item.weight)}`;
    row.appendChild(label);

    const entry = doc.createElement("label");
    entry.textContent = "observed misstated fraction ";
    const input = doc.createElement("input");
    input.type = "number";
    input.step = "any";
    input.className = "f-input";
    input.dataset["index"] = String(item.index);
    entry.appendChild(input);
    row.appendChild(entry);

    container.appendChild(row);
  }
}

export function mountConsole(root: HTMLElement, controller: ConsoleController): void {
  root.innerHTML = SKELETON;
  const refs = collectRefs(root);
  let scale: ChartScale = "linear";
  let cardKey = "";

  const readConfig = () => ({
    epsilon: Number(refs.epsilon.value),
    delta: Number(refs.delta.value),
    strategy: refs.strategy.value,
    cs_family: refs.csFamily.value,
    control_variates: refs.cv.checked,
    ...(refs.seed.value.trim() === "" ? {} : { seed: Number(refs.seed.value) }),
  });

  refs.uploadBtn.addEventListener("click", () => {
    const file = refs.uploadInput.files?.[0];
    if (file === undefined) return;
    void readFileText(file).then((csv) => controller.uploadPopulation(csv, file.name));
  });

  refs.createBtn.addEventListener("click", () => {
    void controller.createSession(readConfig());
  });

  refs.drawBtn.addEventListener("click", () => {
    void controller.drawNext();
  });

  refs.observeBtn.addEventListener("click", () => {
    const entries = new Map<number, string>();
    for (const input of refs.cardItems.querySelectorAll<HTMLInputElement>(".f-input")) {
      entries.set(Number(input.dataset["index"]), input.value);
    }
    void controller.submitObservations(entries);
  });

  refs.cardItems.addEventListener("input", () => controller.clearFieldError());

  refs.logToggle.addEventListener("change", () => {
    scale = refs.logToggle.checked ? "log" : "linear";
    render();
  });

  refs.assertBtn.addEventListener("click", () => {
    void controller.checkAssertion(Number(refs.assertEpsilon.value));
  });

  refs.alertDismiss.addEventListener("click", () => controller.dismissAlert());

  const render = () => {
    const state = controller.state;

    refs.setupPanel.hidden = state.phase !== "setup";
    refs.sessionPanel.hidden = state.phase !== "session";

    refs.uploadBtn.disabled = state.busy;
    refs.createBtn.disabled = state.busy || state.population === null;
    refs.populationSummary.textContent =
      state.population === null
        ? ""
        : `${state.population.n} transactions, total value ${state.population.total_value}`;

    refs.alert.hidden = state.alert === null;
    if (state.alert !== null) {
      refs.alertText.textContent = `${state.alert.kind}: ${state.alert.detail}`;
    }

    const session = state.session;
    if (session === null) return;

    const banner = controller.banner();
    if (banner.kind === "complete") {
      refs.banner.className = "banner complete";
      refs.banner.textContent = banner.reachedTarget
        ? `Audit complete at t = ${banner.tau}`
        : `Population exhausted at t = ${banner.tau}, width target not reached`;
    } else if (banner.kind === "running") {
      refs.banner.className = "banner running";
      refs.banner.textContent = `Auditing, width ${formatSig(banner.width)} of target ${refs.epsilon.value}`;
    }

    refs.stepReadout.textContent = `${session.t} / ${session.population.n}`;
    refs.intervalReadout.textContent = formatInterval(session.interval[0], session.interval[1]);
    refs.widthReadout.textContent = formatSig(session.width);
    refs.auditedCount.textContent = String(session.audited.length);

    const items = controller.pendingItems();
    refs.card.hidden = items.length === 0;
    const key = items.map((item) => item.index).join(",");
    if (key !== cardKey) {
      cardKey = key;
      buildCardItems(refs.cardItems, items);
    }

    refs.fieldError.hidden = state.fieldError === null;
    refs.fieldError.textContent = state.fieldError ?? "";

    refs.drawBtn.disabled = !controller.canDraw();
    refs.observeBtn.disabled = !controller.canObserve();
    refs.assertBtn.disabled = state.busy;

    refs.remainingReadout.textContent =
      state.remaining === null ? "" : formatInterval(state.remaining[0], state.remaining[1]);
    refs.decisionReadout.textContent =
      state.decision === null
        ? ""
        : `decision at ${formatSig(state.decision.epsilon)}: ${state.decision.decision}`;

    renderChart(refs.chart, state.series, scale);
  };

  controller.subscribe(render);
  render();
}
