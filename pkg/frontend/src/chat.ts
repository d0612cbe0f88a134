// Ask view: a question box over an append-only transcript. Every answer
// shows its sources as chips; clicking a chip reveals the excerpt that
// grounded the answer.

import { ApiClient, AskResponse } from "./api.js";

export class ChatView {
  private readonly input: HTMLInputElement;
  private readonly submit: HTMLButtonElement;
  private readonly transcript: HTMLDivElement;
  private inflight: AbortController | null = null;

  constructor(root: HTMLElement, private readonly client: ApiClient) {
    root.innerHTML = `
      <div class="transcript"></div>
      <form class="chat-form">
        <input type="text" class="chat-question" placeholder="Ask the document collection" />
        <button type="submit" class="chat-submit" disabled>Ask</button>
      </form>
    `;
    this.input = root.querySelector(".chat-question")!;
    this.submit = root.querySelector(".chat-submit")!;
    this.transcript = root.querySelector(".transcript")!;

    this.input.addEventListener("input", () => {
      this.submit.disabled = this.input.value.trim() === "";
    });
    root.querySelector(".chat-form")!.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submitQuestion();
    });
  }

  async submitQuestion(): Promise<void> {
    const question = this.input.value.trim();
    if (question === "") {
      return;
    }
    this.inflight?.abort();
    this.inflight = new AbortController();
    try {
      const response = await this.client.ask(question, this.inflight.signal);
      this.appendTurn(question, response);
      this.input.value = "";
      this.submit.disabled = true;
    } catch (error) {
      if ((error as Error).name === "AbortError") {
        return;
      }
      // the question stays in the input for retry
      this.appendErrorTurn(question, (error as Error).message);
    }
  }

  private appendTurn(question: string, response: AskResponse): void {
    const turn = document.createElement("div");
    turn.className = "turn";

    const q = document.createElement("p");
    q.className = "turn-question";
    q.textContent = question;

    const a = document.createElement("p");
    a.className = "turn-answer";
    a.textContent = response.answer;

    const sources = document.createElement("div");
    sources.className = "turn-sources";
    if (response.sources.length === 0) {
      const badge = document.createElement("span");
      badge.className = "no-context-badge";
      badge.textContent = "no supporting context";
      sources.appendChild(badge);
    } else {
      for (const source of response.sources) {
        const chip = document.createElement("button");
        chip.type = "button";
        chip.className = "source-chip";
        chip.textContent = `${source.doc_id} (${source.percent})`;
        const excerpt = document.createElement("blockquote");
        excerpt.className = "source-excerpt";
        excerpt.textContent = source.excerpt;
        excerpt.hidden = true;
        chip.addEventListener("click", () => {
          excerpt.hidden = !excerpt.hidden;
        });
        sources.append(chip, excerpt);
      }
    }

    turn.append(q, a, sources);
    this.transcript.appendChild(turn);
  }

  private appendErrorTurn(question: string, message: string): void {
    const turn = document.createElement("div");
    turn.className = "turn turn-error";
    const q = document.createElement("p");
    q.className = "turn-question";
    q.textContent = question;
    const err = document.createElement("p");
    err.className = "turn-answer error-text";
    err.textContent = `Request failed: ${message}`;
    turn.append(q, err);
    this.transcript.appendChild(turn);
  }
}
