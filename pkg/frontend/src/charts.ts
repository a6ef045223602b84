// Small SVG chart builders. No chart library so the compiled assets can be
// served straight from the service's static mount.

import type { Bar } from "./viewmodel.js";
import { formatValue } from "./viewmodel.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function el(tag: string, attrs: Record<string, string | number>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) {
    node.setAttribute(k, String(v));
  }
  return node;
}

function text(x: number, y: number, content: string, cls: string): SVGElement {
  const node = el("text", { x, y, class: cls });
  node.textContent = content;
  return node;
}

// Grouped bar chart: one group per action, one bar per component, signed
// around a zero baseline, std drawn as a whisker. yMax fixes the scale so
// side-by-side charts can share an axis.
export function barChart(bars: Bar[], componentNames: string[],
                         yMax: number, width = 460, height = 260): SVGElement {
  const margin = { top: 24, bottom: 36, left: 10, right: 10 };
  const innerH = height - margin.top - margin.bottom;
  const zeroY = margin.top + innerH / 2;
  const scale = (innerH / 2) / yMax;

  const actions = [...new Set(bars.map((b) => b.action))];
  const groupW = (width - margin.left - margin.right) / Math.max(actions.length, 1);
  const barW = Math.min(34, (groupW - 12) / Math.max(componentNames.length, 1));

  const svg = el("svg", { width, height, viewBox: `0 0 ${width} ${height}`,
                          class: "bar-chart" });
  svg.appendChild(el("line", { x1: margin.left, x2: width - margin.right,
                               y1: zeroY, y2: zeroY, class: "axis" }));

  for (const bar of bars) {
    const gi = actions.indexOf(bar.action);
    const ci = componentNames.indexOf(bar.component);
    const x = margin.left + gi * groupW + 6 + ci * barW;
    const h = Math.abs(bar.value) * scale;
    const y = bar.negative ? zeroY : zeroY - h;
    const rect = el("rect", {
      x, y: y, width: barW - 4, height: Math.max(h, 0.5),
      class: `bar c-${ci}` + (bar.negative ? " neg" : "")
        + (bar.dominant ? " dominant" : ""),
    });
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `${bar.component} @ action ${bar.action}: `
      + `${formatValue(bar.value)} ± ${formatValue(bar.std)}`;
    rect.appendChild(title);
    svg.appendChild(rect);

    // std whisker centered on the bar tip
    const cx = x + (barW - 4) / 2;
    const tip = bar.negative ? zeroY + h : zeroY - h;
    const w1 = tip - bar.std * scale;
    const w2 = tip + bar.std * scale;
    svg.appendChild(el("line", { x1: cx, x2: cx, y1: w1, y2: w2, class: "whisker" }));
    svg.appendChild(el("line", { x1: cx - 4, x2: cx + 4, y1: w1, y2: w1, class: "whisker" }));
    svg.appendChild(el("line", { x1: cx - 4, x2: cx + 4, y1: w2, y2: w2, class: "whisker" }));
  }

  actions.forEach((a, gi) => {
    const cx = margin.left + gi * groupW + groupW / 2;
    svg.appendChild(text(cx, height - 18, `action ${a}`, "group-label"));
  });
  return svg;
}

// Simple polyline over an array of samples.
export function lineChart(values: number[], label: string,
                          width = 460, height = 90): SVGElement {
  const margin = 14;
  const svg = el("svg", { width, height, viewBox: `0 0 ${width} ${height}`,
                          class: "line-chart" });
  svg.appendChild(text(6, 12, label, "line-label"));
  if (values.length === 0) {
    return svg;
  }
  const lo = Math.min(...values, 0);
  const hi = Math.max(...values, lo + 1e-9);
  const px = (i: number) =>
    margin + (i / Math.max(values.length - 1, 1)) * (width - 2 * margin);
  const py = (v: number) =>
    height - margin - ((v - lo) / (hi - lo)) * (height - 2 * margin - 10);
  const points = values.map((v, i) => `${px(i)},${py(v)}`).join(" ");
  svg.appendChild(el("polyline", { points, class: "series" }));
  svg.appendChild(text(width - margin, 12,
                       `${formatValue(values[values.length - 1])}`, "line-end"));
  return svg;
}
