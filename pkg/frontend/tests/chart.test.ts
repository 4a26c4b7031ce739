import { JSDOM } from "jsdom";
import { describe, expect, it } from "vitest";

import { renderComparisonChart } from "../src/chart.js";
import { renderPatch } from "../src/patchView.js";

const doc = new JSDOM("<!doctype html><html><body></body></html>").window.document;

describe("comparison chart", () => {
  it("renders human and agent curves on shared axes", () => {
    const svg = renderComparisonChart(doc, [1, 2, 2, 3], [1, 1, 2, 2], 4);
    const curves = svg.querySelectorAll("polyline.curve");
    expect(curves.length).toBe(2);
    expect(svg.dataset.budget).toBe("4");
    // Shared scale: both curves are children of the same svg with one y max.
    expect(svg.dataset.ymax).toBe("3");
    const names = [...curves].map((c) => (c as SVGElement).dataset.series);
    expect(names.sort()).toEqual(["agent", "human"]);
  });

  it("renders only the human curve when no agent is available", () => {
    const svg = renderComparisonChart(doc, [0, 1], null, 2);
    expect(svg.querySelectorAll("polyline.curve").length).toBe(1);
  });

  it("x positions advance monotonically with selections", () => {
    const svg = renderComparisonChart(doc, [1, 1, 2], null, 3);
    const points = svg
      .querySelector("polyline.curve-human")!
      .getAttribute("points")!
      .split(" ")
      .map((pair) => Number(pair.split(",")[0]));
    for (let i = 1; i < points.length; i++) {
      expect(points[i]).toBeGreaterThan(points[i - 1]);
    }
  });

  it("labels both axes", () => {
    const svg = renderComparisonChart(doc, [1], null, 1);
    const labels = [...svg.querySelectorAll("text.axis-label")].map((t) => t.textContent);
    expect(labels).toContain("selections");
    expect(labels).toContain("cumulative low-CTF count");
  });
});

describe("patch lattice", () => {
  it("draws one dot per hole and reveals only revealed holes", () => {
    const svg = renderPatch(doc, {
      patch_id: "p",
      holes: [
        { hole_id: "h1", x: 0, y: 0, state: "revealed", ctf: 4.25, is_low: true },
        { hole_id: "h2", x: 1, y: 0, state: "unknown" },
      ],
    });
    expect(svg.querySelectorAll("circle.hole").length).toBe(2);
    expect(svg.querySelectorAll("circle.hole-low").length).toBe(1);
    const labels = [...svg.querySelectorAll("text.hole-ctf-label")];
    expect(labels.length).toBe(1);
    expect(labels[0].textContent).toBe("4.3");
  });

  it("unknown holes carry no ctf text", () => {
    const svg = renderPatch(doc, {
      patch_id: "p",
      holes: [{ hole_id: "h2", x: 0, y: 0, state: "unknown" }],
    });
    expect(svg.querySelectorAll("text.hole-ctf-label").length).toBe(0);
  });
});
