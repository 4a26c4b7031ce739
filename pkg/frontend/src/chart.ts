// Cumulative-score comparison chart: plain SVG, no chart library.
//
// Both curves (human and agent) share the same axes: x is the selection
// index from 0 to the session budget, y the cumulative low-CTF count.

const SVG_NS = "http://www.w3.org/2000/svg";

export interface ChartOptions {
  width?: number;
  height?: number;
  margin?: number;
}

function polylinePoints(
  series: number[],
  budget: number,
  yMax: number,
  width: number,
  height: number,
  margin: number,
): string {
  const plotW = width - 2 * margin;
  const plotH = height - 2 * margin;
  const pts: string[] = [`${margin},${height - margin}`];
  series.forEach((value, i) => {
    const x = margin + ((i + 1) / budget) * plotW;
    const y = height - margin - (value / yMax) * plotH;
    pts.push(`${x},${y}`);
  });
  return pts.join(" ");
}

export function renderComparisonChart(
  doc: Document,
  humanSeries: number[],
  agentSeries: number[] | null,
  budget: number,
  opts: ChartOptions = {},
): SVGSVGElement {
  const width = opts.width ?? 480;
  const height = opts.height ?? 260;
  const margin = opts.margin ?? 32;
  const yMax = Math.max(1, ...humanSeries, ...(agentSeries ?? []));

  const svg = doc.createElementNS(SVG_NS, "svg") as SVGSVGElement;
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "comparison-chart");
  svg.dataset.budget = String(budget);
  svg.dataset.ymax = String(yMax);

  const axes = doc.createElementNS(SVG_NS, "path");
  axes.setAttribute(
    "d",
    `M ${margin} ${margin} L ${margin} ${height - margin} L ${width - margin} ${height - margin}`,
  );
  axes.setAttribute("class", "axes");
  axes.setAttribute("fill", "none");
  axes.setAttribute("stroke", "#555");
  svg.appendChild(axes);

  const xLabel = doc.createElementNS(SVG_NS, "text");
  xLabel.textContent = "selections";
  xLabel.setAttribute("x", String(width / 2));
  xLabel.setAttribute("y", String(height - 6));
  xLabel.setAttribute("class", "axis-label");
  svg.appendChild(xLabel);

  const yLabel = doc.createElementNS(SVG_NS, "text");
  yLabel.textContent = "cumulative low-CTF count";
  yLabel.setAttribute("transform", `translate(12 ${height / 2}) rotate(-90)`);
  yLabel.setAttribute("class", "axis-label");
  svg.appendChild(yLabel);

  const series: Array<[string, number[] | null]> = [
    ["human", humanSeries],
    ["agent", agentSeries],
  ];
  for (const [name, values] of series) {
    if (values === null) continue;
    const line = doc.createElementNS(SVG_NS, "polyline");
    line.setAttribute("points", polylinePoints(values, budget, yMax, width, height, margin));
    line.setAttribute("fill", "none");
    line.setAttribute("class", `curve curve-${name}`);
    line.setAttribute("stroke", name === "human" ? "#1668bd" : "#c2571a");
    line.setAttribute("stroke-width", "2");
    line.dataset.series = name;
    svg.appendChild(line);
  }
  return svg;
}
