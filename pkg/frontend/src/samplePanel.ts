// Theoretical sampling: list the documents the model thinks most belong to a
// theme, so the researcher can decide what to read and code next.

import { api, ApiError } from "./api.js";
import type { RankedDocOut } from "./types.js";

export class SamplePanel {
  private container: HTMLElement;
  private pid: string;
  private client: typeof api;
  private onOpen: (docId: string) => void;

  constructor(
    container: HTMLElement,
    pid: string,
    onOpen: (docId: string) => void,
    client: typeof api = api,
  ) {
    this.container = container;
    this.pid = pid;
    this.onOpen = onOpen;
    this.client = client;
  }

  async show(themeId: number, limit = 20): Promise<void> {
    try {
      const resp = await this.client.rankedDocuments(this.pid, themeId, limit);
      this.renderList(resp.documents);
    } catch (err) {
      if (err instanceof ApiError && (err.status === 409 || err.code === "StaleModel")) {
        this.renderEmpty("train to enable sampling");
        return;
      }
      throw err;
    }
  }

  private renderEmpty(message: string): void {
    this.container.replaceChildren();
    const empty = document.createElement("p");
    empty.className = "sample-empty";
    empty.textContent = message;
    this.container.appendChild(empty);
  }

  private renderList(docs: RankedDocOut[]): void {
    this.container.replaceChildren();
    if (docs.length === 0) {
      this.renderEmpty("no documents ranked for this theme yet");
      return;
    }
    const list = document.createElement("ol");
    list.className = "sample-list";
    for (const doc of docs) {
      const item = document.createElement("li");
      const link = document.createElement("a");
      link.href = "#";
      link.dataset.docId = doc.doc_id;
      link.textContent = `${doc.doc_id}  (${doc.score.toFixed(3)})`;
      link.addEventListener("click", (ev) => {
        ev.preventDefault();
        this.onOpen(doc.doc_id);
      });
      item.appendChild(link);
      const snippet = document.createElement("span");
      snippet.className = "sample-snippet";
      snippet.textContent = doc.snippet;
      item.appendChild(snippet);
      list.appendChild(item);
    }
    this.container.appendChild(list);
  }
}
