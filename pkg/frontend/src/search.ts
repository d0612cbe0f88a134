// Search view: query box, result-count selector, expandable result cards.
// Cards render in API rank order with the API's percentage string verbatim;
// no client-side sorting or rounding ever happens here.

import { ApiClient, SearchResult } from "./api.js";

export class SearchView {
  private readonly input: HTMLInputElement;
  private readonly count: HTMLSelectElement;
  private readonly submit: HTMLButtonElement;
  private readonly clear: HTMLButtonElement;
  private readonly banner: HTMLDivElement;
  private readonly results: HTMLDivElement;
  private inflight: AbortController | null = null;

  constructor(root: HTMLElement, private readonly client: ApiClient) {
    root.innerHTML = `
      <form class="search-form">
        <input type="text" class="search-query" placeholder="Search topic or description" />
        <select class="search-count">
          <option value="10">10</option>
          <option value="20" selected>20</option>
          <option value="50">50</option>
        </select>
        <button type="submit" class="search-submit" disabled>Search</button>
        <button type="button" class="search-clear">Clear</button>
      </form>
      <div class="error-banner" hidden></div>
      <div class="search-results"></div>
    `;
    this.input = root.querySelector(".search-query")!;
    this.count = root.querySelector(".search-count")!;
    this.submit = root.querySelector(".search-submit")!;
    this.clear = root.querySelector(".search-clear")!;
    this.banner = root.querySelector(".error-banner")!;
    this.results = root.querySelector(".search-results")!;

    this.input.addEventListener("input", () => {
      this.submit.disabled = this.input.value.trim() === "";
    });
    this.clear.addEventListener("click", () => {
      // clears both the query and the results
      this.input.value = "";
      this.submit.disabled = true;
      this.results.replaceChildren();
      this.banner.hidden = true;
    });
    root.querySelector(".search-form")!.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.runSearch();
    });
  }

  async runSearch(): Promise<void> {
    const query = this.input.value.trim();
    if (query === "") {
      return;
    }
    this.inflight?.abort();
    this.inflight = new AbortController();
    try {
      const response = await this.client.search(
        query,
        Number(this.count.value),
        this.inflight.signal,
      );
      this.banner.hidden = true;
      this.renderResults(response.results);
    } catch (error) {
      if ((error as Error).name === "AbortError") {
        return; // superseded by a newer search
      }
      // previous results stay on screen
      this.banner.textContent = `Search failed: ${(error as Error).message}`;
      this.banner.hidden = false;
    }
  }

  private renderResults(results: SearchResult[]): void {
    this.results.replaceChildren();
    const heading = document.createElement("p");
    heading.className = "results-heading";
    heading.textContent = `Displaying top ${results.length} results:`;
    this.results.appendChild(heading);
    for (const result of results) {
      this.results.appendChild(this.card(result));
    }
  }

  private card(result: SearchResult): HTMLElement {
    const card = document.createElement("div");
    card.className = "result-card";
    const name = result.metadata["name"] ?? result.doc_id;
    const institute = result.metadata["institution"] ?? "";

    const header = document.createElement("button");
    header.type = "button";
    header.className = "card-header";
    header.textContent = institute ? `${name} - ${institute}` : name;
    const percent = document.createElement("span");
    percent.className = "card-percent";
    percent.textContent = result.percent; // verbatim from the API
    header.appendChild(percent);

    const details = document.createElement("dl");
    details.className = "card-details";
    details.hidden = true;
    const rows: Array<[string, string]> = [
      ["Name", name],
      ["Institute", institute],
      ["Similarity", result.percent],
    ];
    const text = result.metadata["text"];
    if (text) {
      rows.push(["Bio", text]);
    }
    for (const [term, value] of rows) {
      const dt = document.createElement("dt");
      dt.textContent = term;
      const dd = document.createElement("dd");
      dd.textContent = value;
      details.append(dt, dd);
    }

    header.addEventListener("click", () => {
      details.hidden = !details.hidden;
    });
    card.append(header, details);
    return card;
  }
}
