// Patch rendering: holes as a positioned dot lattice.
//
// There are no micrograph images in the synthetic worlds, so a patch is
// drawn from its hole coordinates alone; fill color encodes only what the
// session has revealed (nothing leaks before a hole is selected).

import type { PatchView } from "./api.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface PatchRenderOptions {
  cellSize?: number;
  pad?: number;
  onHoleClick?: (holeId: string) => void;
}

export function renderPatch(
  doc: Document,
  view: PatchView,
  opts: PatchRenderOptions = {},
): SVGSVGElement {
  const cell = opts.cellSize ?? 42;
  const pad = opts.pad ?? 28;
  const xs = view.holes.map((h) => h.x);
  const ys = view.holes.map((h) => h.y);
  const minX = Math.min(0, ...xs);
  const minY = Math.min(0, ...ys);
  const width = (Math.max(...xs, 1) - minX) * cell + 2 * pad;
  const height = (Math.max(...ys, 1) - minY) * cell + 2 * pad;

  const svg = doc.createElementNS(SVG_NS, "svg") as SVGSVGElement;
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "patch-lattice");
  svg.dataset.patchId = view.patch_id;

  for (const hole of view.holes) {
    const g = doc.createElementNS(SVG_NS, "g");
    const circle = doc.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(pad + (hole.x - minX) * cell));
    circle.setAttribute("cy", String(pad + (hole.y - minY) * cell));
    circle.setAttribute("r", String(cell * 0.34));
    circle.dataset.holeId = hole.hole_id;
    if (hole.state === "revealed") {
      circle.setAttribute(
        "class",
        `hole revealed ${hole.is_low ? "hole-low" : "hole-high"}`,
      );
      const label = doc.createElementNS(SVG_NS, "text");
      label.textContent = hole.ctf !== undefined ? hole.ctf.toFixed(1) : "";
      label.setAttribute("x", String(pad + (hole.x - minX) * cell));
      label.setAttribute("y", String(pad + (hole.y - minY) * cell + cell * 0.55));
      label.setAttribute("class", "hole-ctf-label");
      g.appendChild(label);
    } else {
      circle.setAttribute("class", "hole unknown");
      if (opts.onHoleClick) {
        const handler = opts.onHoleClick;
        circle.addEventListener("click", () => handler(hole.hole_id));
      }
    }
    g.insertBefore(circle, g.firstChild);
    svg.appendChild(g);
  }
  return svg;
}
