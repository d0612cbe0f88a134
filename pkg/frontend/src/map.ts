// Map view: an interactive scatter of a 2-D layout, one mark per point,
// colored by label, with hover details, pan (drag), and zoom (wheel).
// A malformed layout produces an error state and no partial render.

import { ApiClient, LayoutPoint } from "./api.js";

const PALETTE = ["#3366cc", "#dc3912", "#ff9900", "#109618", "#990099", "#0099c6"];

interface ViewBox {
  x: number;
  y: number;
  w: number;
  h: number;
}

export class MapView {
  private readonly banner: HTMLDivElement;
  private readonly canvas: HTMLDivElement;
  private readonly hover: HTMLDivElement;
  private viewBox: ViewBox | null = null;
  private inflight: AbortController | null = null;

  constructor(root: HTMLElement, private readonly client: ApiClient) {
    root.innerHTML = `
      <form class="map-form">
        <label>perplexity <input type="number" class="map-perplexity" value="5" step="0.5" min="1.5" /></label>
        <label>seed <input type="number" class="map-seed" value="0" /></label>
        <button type="submit" class="map-fetch">Fetch layout</button>
      </form>
      <div class="error-banner" hidden></div>
      <div class="map-hover" hidden></div>
      <div class="map-canvas"></div>
      <div class="map-legend"></div>
    `;
    this.banner = root.querySelector(".error-banner")!;
    this.canvas = root.querySelector(".map-canvas")!;
    this.hover = root.querySelector(".map-hover")!;
    root.querySelector(".map-form")!.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.fetchLayout(root);
    });
  }

  async fetchLayout(root: HTMLElement): Promise<void> {
    const perplexity = Number((root.querySelector(".map-perplexity") as HTMLInputElement).value);
    const seed = Number((root.querySelector(".map-seed") as HTMLInputElement).value);
    this.inflight?.abort();
    this.inflight = new AbortController();
    try {
      const response = await this.client.tsne(perplexity, seed, this.inflight.signal);
      this.render(response.points, root);
    } catch (error) {
      if ((error as Error).name === "AbortError") {
        return;
      }
      this.showError((error as Error).message);
    }
  }

  /** Render a layout (from the API or a loaded file). */
  render(points: unknown, root: HTMLElement): void {
    const validated = validateLayout(points);
    if (validated === null) {
      this.showError("layout is malformed");
      return;
    }
    this.banner.hidden = true;
    this.canvas.replaceChildren();

    const labels: string[] = [];
    for (const p of validated) {
      if (!labels.includes(p.label)) {
        labels.push(p.label);
      }
    }
    const colorOf = (label: string) =>
      PALETTE[labels.indexOf(label) % PALETTE.length];

    const xs = validated.map((p) => p.x);
    const ys = validated.map((p) => p.y);
    const minX = Math.min(...xs);
    const maxX = Math.max(...xs);
    const minY = Math.min(...ys);
    const maxY = Math.max(...ys);
    const padX = (maxX - minX || 1) * 0.05;
    const padY = (maxY - minY || 1) * 0.05;
    this.viewBox = {
      x: minX - padX,
      y: minY - padY,
      w: (maxX - minX || 1) + 2 * padX,
      h: (maxY - minY || 1) + 2 * padY,
    };

    const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
    svg.setAttribute("class", "map-svg");
    svg.setAttribute("width", "640");
    svg.setAttribute("height", "480");
    this.applyViewBox(svg);

    const markRadius = Math.max(this.viewBox.w, this.viewBox.h) / 150;
    for (const point of validated) {
      const mark = document.createElementNS("http://www.w3.org/2000/svg", "circle");
      mark.setAttribute("class", "map-mark");
      mark.setAttribute("cx", String(point.x));
      mark.setAttribute("cy", String(point.y));
      mark.setAttribute("r", String(markRadius));
      mark.setAttribute("fill", colorOf(point.label));
      mark.setAttribute("data-label", point.label);
      mark.setAttribute("data-item-id", point.item_id);
      mark.addEventListener("mouseenter", () => {
        this.hover.textContent = `${point.item_id} [${point.label}]`;
        this.hover.hidden = false;
      });
      mark.addEventListener("mouseleave", () => {
        this.hover.hidden = true;
      });
      svg.appendChild(mark);
    }

    this.attachPanZoom(svg);
    this.canvas.appendChild(svg);
    this.renderLegend(root, labels, colorOf);
  }

  private renderLegend(
    root: HTMLElement,
    labels: string[],
    colorOf: (label: string) => string,
  ): void {
    const legend = root.querySelector(".map-legend")!;
    legend.replaceChildren();
    for (const label of labels) {
      const entry = document.createElement("span");
      entry.className = "legend-entry";
      const swatch = document.createElement("span");
      swatch.className = "legend-swatch";
      swatch.style.backgroundColor = colorOf(label);
      const text = document.createElement("span");
      text.textContent = label === "" ? "(unlabeled)" : label;
      entry.append(swatch, text);
      legend.appendChild(entry);
    }
  }

  private applyViewBox(svg: SVGSVGElement): void {
    const vb = this.viewBox!;
    svg.setAttribute("viewBox", `${vb.x} ${vb.y} ${vb.w} ${vb.h}`);
  }

  private attachPanZoom(svg: SVGSVGElement): void {
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    svg.addEventListener("pointerdown", (event) => {
      dragging = true;
      lastX = event.clientX;
      lastY = event.clientY;
    });
    svg.addEventListener("pointerup", () => {
      dragging = false;
    });
    svg.addEventListener("pointermove", (event) => {
      if (!dragging || !this.viewBox) {
        return;
      }
      const scale = this.viewBox.w / svg.clientWidth || 1;
      this.viewBox.x -= (event.clientX - lastX) * scale;
      this.viewBox.y -= (event.clientY - lastY) * scale;
      lastX = event.clientX;
      lastY = event.clientY;
      this.applyViewBox(svg);
    });
    svg.addEventListener("wheel", (event) => {
      if (!this.viewBox) {
        return;
      }
      event.preventDefault();
      const factor = event.deltaY > 0 ? 1.2 : 1 / 1.2;
      const vb = this.viewBox;
      const cx = vb.x + vb.w / 2;
      const cy = vb.y + vb.h / 2;
      vb.w *= factor;
      vb.h *= factor;
      vb.x = cx - vb.w / 2;
      vb.y = cy - vb.h / 2;
      this.applyViewBox(svg);
    });
  }

  private showError(message: string): void {
    this.banner.textContent = `Map error: ${message}`;
    this.banner.hidden = false;
  }
}

export function validateLayout(points: unknown): LayoutPoint[] | null {
  if (!Array.isArray(points) || points.length === 0) {
    return null;
  }
  const out: LayoutPoint[] = [];
  for (const raw of points) {
    if (typeof raw !== "object" || raw === null) {
      return null;
    }
    const p = raw as Record<string, unknown>;
    if (typeof p.x !== "number" || !Number.isFinite(p.x)) {
      return null;
    }
    if (typeof p.y !== "number" || !Number.isFinite(p.y)) {
      return null;
    }
    out.push({
      x: p.x,
      y: p.y,
      label: typeof p.label === "string" ? p.label : "",
      item_id: typeof p.item_id === "string" ? p.item_id : "",
    });
  }
  return out;
}
