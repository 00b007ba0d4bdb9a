// Wires the session flow to the page: problem selection, answer buttons,
// y/n keys, undo, belief strips, and the live recommendation.

import { ServiceClient } from "./api.js";
import { SessionFlow } from "./state.js";
import { renderBeliefStrips, renderQueryCard, renderRecommendation } from "./view.js";

export interface AppHandles {
  flow: SessionFlow;
  client: ServiceClient;
}

export function mountApp(root: HTMLElement, baseUrl = ""): AppHandles {
  const client = new ServiceClient(baseUrl);
  const flow = new SessionFlow(client);

  root.innerHTML = `
    <header>
      <h1>Preference elicitation</h1>
      <div id="error-banner" class="error-banner" hidden></div>
    </header>
    <section id="setup">
      <label>Problem
        <select id="problem-select"></select>
      </label>
      <label><input type="checkbox" id="fallback-toggle" checked>
        keep asking once nothing is informative</label>
      <button id="start-button">Start session</button>
    </section>
    <main hidden id="session-panel">
      <div id="query-panel"></div>
      <div class="answer-controls">
        <button id="yes-button" accesskey="y">Yes (y)</button>
        <button id="no-button" accesskey="n">No (n)</button>
        <button id="undo-button">Undo last answer</button>
      </div>
      <div id="complete-panel" hidden>
        <h2>Elicitation complete</h2>
        <p>No remaining question is expected to change the recommendation.</p>
      </div>
      <div id="recommendation-panel"></div>
      <details open>
        <summary>Parameter beliefs</summary>
        <div id="beliefs-panel"></div>
      </details>
    </main>
  `;

  const select = root.querySelector<HTMLSelectElement>("#problem-select")!;
  const startButton = root.querySelector<HTMLButtonElement>("#start-button")!;
  const fallbackToggle = root.querySelector<HTMLInputElement>("#fallback-toggle")!;
  const yesButton = root.querySelector<HTMLButtonElement>("#yes-button")!;
  const noButton = root.querySelector<HTMLButtonElement>("#no-button")!;
  const undoButton = root.querySelector<HTMLButtonElement>("#undo-button")!;
  const banner = root.querySelector<HTMLElement>("#error-banner")!;

  client
    .listProblems()
    .then((problems) => {
      for (const p of problems) {
        const option = document.createElement("option");
        option.value = p.id;
        option.textContent = `${p.name} (${p.attributes} attributes, ${p.factors} factors)`;
        select.append(option);
      }
    })
    .catch((err) => {
      banner.hidden = false;
      banner.textContent = `Cannot reach the service: ${String(err)}`;
    });

  startButton.addEventListener("click", async () => {
    try {
      const problem = await client.getProblem(select.value);
      await flow.start(problem, fallbackToggle.checked);
    } catch (err) {
      banner.hidden = false;
      banner.textContent = String(err);
    }
  });
  yesButton.addEventListener("click", () => void flow.answer("yes"));
  noButton.addEventListener("click", () => void flow.answer("no"));
  undoButton.addEventListener("click", () => void flow.undo());
  root.ownerDocument.addEventListener("keydown", (event) => {
    if (event.key === "y") void flow.answer("yes");
    if (event.key === "n") void flow.answer("no");
  });

  flow.subscribe((state) => {
    banner.hidden = !state.error;
    if (state.error) banner.textContent = state.error;
    const panel = root.querySelector<HTMLElement>("#session-panel")!;
    const setup = root.querySelector<HTMLElement>("#setup")!;
    if (state.phase === "idle" || state.phase === "error") {
      panel.hidden = true;
      return;
    }
    setup.hidden = true;
    panel.hidden = false;
    const queryPanel = root.querySelector<HTMLElement>("#query-panel")!;
    queryPanel.replaceChildren();
    if (state.card) queryPanel.append(renderQueryCard(state.card));
    root.querySelector<HTMLElement>("#complete-panel")!.hidden = state.phase !== "complete";
    const answerable = state.phase === "active" && !state.busy && state.card !== null;
    yesButton.disabled = !answerable;
    noButton.disabled = !answerable;
    undoButton.disabled = !flow.canUndo;
    root
      .querySelector<HTMLElement>("#recommendation-panel")!
      .replaceChildren(
        renderRecommendation(state.recommendation, state.queriesAnswered, state.lastEvoi),
      );
    root
      .querySelector<HTMLElement>("#beliefs-panel")!
      .replaceChildren(renderBeliefStrips(state.beliefs));
  });

  return { flow, client };
}

declare global {
  interface Window {
    gaielicitApp?: AppHandles;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  window.gaielicitApp = mountApp(document.getElementById("app")!, "");
}
