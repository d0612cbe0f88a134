// Single-page wiring: three tabs (Search / Ask / Map) over one API client.
// The API base defaults to same-origin and can be overridden with
// ?api=http://host:port for a separately served backend.

import { ApiClient } from "./api.js";
import { ChatView } from "./chat.js";
import { MapView } from "./map.js";
import { SearchView } from "./search.js";

function apiBase(): string {
  const override = new URLSearchParams(window.location.search).get("api");
  return override ?? "";
}

export function boot(root: HTMLElement): void {
  const client = new ApiClient(apiBase());
  root.innerHTML = `
    <nav class="tabs">
      <button data-tab="search" class="tab active">Search</button>
      <button data-tab="ask" class="tab">Ask</button>
      <button data-tab="map" class="tab">Map</button>
    </nav>
    <section data-panel="search"></section>
    <section data-panel="ask" hidden></section>
    <section data-panel="map" hidden></section>
  `;

  new SearchView(root.querySelector('[data-panel="search"]')!, client);
  new ChatView(root.querySelector('[data-panel="ask"]')!, client);
  new MapView(root.querySelector('[data-panel="map"]')!, client);

  for (const button of root.querySelectorAll<HTMLButtonElement>(".tab")) {
    button.addEventListener("click", () => {
      for (const other of root.querySelectorAll(".tab")) {
        other.classList.toggle("active", other === button);
      }
      for (const panel of root.querySelectorAll<HTMLElement>("[data-panel]")) {
        panel.hidden = panel.dataset.panel !== button.dataset.tab;
      }
    });
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot(document.getElementById("app")!);
}
