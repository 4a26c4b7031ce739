// Browser wiring: start screen, patch navigation, selection feedback,
// summary overlay with the agent comparison chart.

import { BenchClient } from "./api.js";
import { SessionController } from "./controller.js";
import { renderComparisonChart } from "./chart.js";
import { renderPatch } from "./patchView.js";
import { currentPatchId } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text) node.textContent = text;
  return node;
}

export async function mountApp(root: HTMLElement, baseUrl: string): Promise<void> {
  const client = new BenchClient(baseUrl);
  const controller = new SessionController(client);

  const startScreen = el("div", "start-screen");
  const sessionScreen = el("div", "session-screen hidden");
  root.append(startScreen, sessionScreen);

  const listing = await client.datasets();
  const datasetSelect = el("select");
  for (const ds of listing.datasets) {
    const option = el("option", undefined, `${ds.id} (${ds.holes} holes)`);
    option.value = ds.id;
    datasetSelect.appendChild(option);
  }
  const budgetSelect = el("select");
  for (const budget of listing.budgets) {
    const option = el("option", undefined, `${budget} selections`);
    option.value = String(budget);
    budgetSelect.appendChild(option);
  }
  const startButton = el("button", "start", "Start session");
  startScreen.append(
    el("h1", undefined, "Hole-selection benchmark"),
    el("p", undefined, "Pick as many good (low-CTF) holes as you can. CTF is revealed only after you select a hole."),
    datasetSelect,
    budgetSelect,
    startButton,
  );

  const header = el("div", "hud");
  const scoreBox = el("span", "score");
  const remainingBox = el("span", "remaining");
  const patchLabel = el("span", "patch-label");
  const noticeBox = el("span", "notice");
  const prevButton = el("button", undefined, "◀ prev patch");
  const nextButton = el("button", undefined, "next patch ▶");
  header.append(prevButton, patchLabel, nextButton, scoreBox, remainingBox, noticeBox);
  const patchContainer = el("div", "patch-container");
  const chartContainer = el("div", "chart-container");
  sessionScreen.append(header, patchContainer, chartContainer);

  function redraw(): void {
    const state = controller.state;
    scoreBox.textContent = `score ${state.score}`;
    remainingBox.textContent = `remaining ${state.remaining}`;
    patchLabel.textContent = currentPatchId(state) ?? "";
    noticeBox.textContent = state.notice ?? "";
    patchContainer.textContent = "";
    if (state.currentView !== null) {
      patchContainer.appendChild(
        renderPatch(document, state.currentView, {
          onHoleClick: (holeId) => void onHole(holeId),
        }),
      );
    }
    if (state.complete) {
      void showSummary();
    }
  }

  async function onHole(holeId: string): Promise<void> {
    await controller.clickHole(holeId);
    redraw();
  }

  async function showSummary(): Promise<void> {
    const summary = await controller.loadSummary();
    await controller.loadComparison();
    chartContainer.textContent = "";
    chartContainer.append(
      el("h2", undefined, `Final score ${summary.score} of ${summary.budget}`),
      el(
        "p",
        undefined,
        `Percentile within this dataset+budget cohort: ${summary.percentile.toFixed(0)}`,
      ),
      renderComparisonChart(
        document,
        controller.state.series,
        controller.state.agentSeries,
        controller.state.budget,
      ),
    );
  }

  startButton.addEventListener("click", () => {
    void (async () => {
      await controller.start(datasetSelect.value, Number(budgetSelect.value));
      startScreen.classList.add("hidden");
      sessionScreen.classList.remove("hidden");
      redraw();
    })();
  });

  prevButton.addEventListener("click", () => void controller.nextPatch(-1).then(redraw));
  nextButton.addEventListener("click", () => void controller.nextPatch(1).then(redraw));
  document.addEventListener("keydown", (event) => {
    if (event.key === "[" || event.key === "ArrowLeft") {
      void controller.nextPatch(-1).then(redraw);
    } else if (event.key === "]" || event.key === "ArrowRight") {
      void controller.nextPatch(1).then(redraw);
    }
  });

  controller.onChange(() => {
    scoreBox.textContent = `score ${controller.state.score}`;
    remainingBox.textContent = `remaining ${controller.state.remaining}`;
  });
}

declare global {
  interface Window {
    CRYOPLAN_SERVER?: string;
  }
}

if (typeof document !== "undefined" && document.getElementById("app") !== null) {
  const base = window.CRYOPLAN_SERVER ?? "http://127.0.0.1:8000";
  void mountApp(document.getElementById("app") as HTMLElement, base);
}
