// Dependency-free SVG charts: sliding line charts for counters/gauges,
// bars for histograms, and the scrolling error feed.
import type { MetricPoint } from "./viewmodel.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export function renderLineChart(container: HTMLElement, key: string,
                                points: MetricPoint[], width = 320, height = 80): void {
  container.textContent = "";
  const title = document.createElement("div");
  title.className = "chart-title";
  title.textContent = points.length
    ? `${key}: ${points[points.length - 1].value}`
    : key;
  container.appendChild(title);
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "chart-line");
  if (points.length > 1) {
    const t0 = points[0].t;
    const t1 = points[points.length - 1].t || t0 + 1;
    const values = points.map((p) => p.value);
    const lo = Math.min(...values);
    const hi = Math.max(...values);
    const span = hi - lo || 1;
    const coords = points.map((p) => {
      const x = ((p.t - t0) / (t1 - t0 || 1)) * (width - 8) + 4;
      const y = height - 6 - ((p.value - lo) / span) * (height - 12);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    });
    const line = document.createElementNS(SVG_NS, "polyline");
    line.setAttribute("points", coords.join(" "));
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", "currentColor");
    svg.appendChild(line);
  }
  container.appendChild(svg);
}

export function renderHistogram(container: HTMLElement, key: string,
                                edges: number[], counts: number[],
                                width = 320, height = 100): void {
  container.textContent = "";
  const title = document.createElement("div");
  title.className = "chart-title";
  title.textContent = key;
  container.appendChild(title);
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "chart-histogram");
  const max = Math.max(...counts, 1);
  const barWidth = (width - 8) / Math.max(counts.length, 1);
  counts.forEach((count, i) => {
    const bar = document.createElementNS(SVG_NS, "rect");
    const h = (count / max) * (height - 16);
    bar.setAttribute("x", String(4 + i * barWidth));
    bar.setAttribute("y", String(height - 4 - h));
    bar.setAttribute("width", String(Math.max(barWidth - 2, 1)));
    bar.setAttribute("height", String(h));
    bar.setAttribute("data-count", String(count));
    bar.setAttribute("data-lo", String(edges[i]));
    bar.setAttribute("data-hi", String(edges[i + 1]));
    svg.appendChild(bar);
  });
  container.appendChild(svg);
}

export interface FeedEntry {
  at: number;
  key: string;
  severity: string;
  text: string;
  source: string;
}

export function renderErrorFeed(container: HTMLElement, entries: FeedEntry[]): void {
  container.textContent = "";
  for (const entry of entries) {
    const row = document.createElement("div");
    row.className = "feed-entry";
    const badge = document.createElement("span");
    badge.className = `severity-badge severity-${entry.severity.toLowerCase()}`;
    badge.textContent = entry.severity;
    const text = document.createElement("span");
    text.textContent = ` ${entry.key} (${entry.source}): ${entry.text}`;
    row.append(badge, text);
    container.appendChild(row);
  }
}
