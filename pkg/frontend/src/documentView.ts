// The coding view: document text in the center, code chips on the right.
// Selecting a passage and entering a label applies a manual code, rendered
// optimistically as a dark-blue chip and rolled back if the server rejects it.

import { api, ApiError } from "./api.js";
import { renderChipBox } from "./chips.js";
import { clearHighlights, renderHighlighted, selectionSpan } from "./highlight.js";
import type { Chip, DocumentView as DocView, Span } from "./types.js";

export interface DocumentPanelElements {
  text: HTMLElement;
  chips: HTMLElement;
  error: HTMLElement;
  meta?: HTMLElement;
}

export class DocumentPanel {
  private pid: string;
  private els: DocumentPanelElements;
  private client: typeof api;
  private view: DocView | null = null;
  private highlightedCode: number | null = null;

  constructor(pid: string, els: DocumentPanelElements, client: typeof api = api) {
    this.pid = pid;
    this.els = els;
    this.client = client;
  }

  get currentDoc(): string | null {
    return this.view?.doc_id ?? null;
  }

  get snapshotVersion(): number | null {
    return this.view?.snapshot_version ?? null;
  }

  async open(docId: string): Promise<void> {
    this.view = await this.client.getDocument(this.pid, docId);
    this.highlightedCode = null;
    this.render();
  }

  async refresh(): Promise<void> {
    if (this.view) {
      await this.open(this.view.doc_id);
    }
  }

  private render(): void {
    const view = this.view;
    if (!view) {
      return;
    }
    clearHighlights(this.els.text, view.text);
    renderChipBox(this.els.chips, view.chips, {
      onToggleHighlight: (chip, selected) => this.toggleHighlight(chip, selected),
      onDelete: (chip) => void this.deleteAuto(chip),
    });
    this.els.error.textContent = "";
    if (this.els.meta) {
      const version =
        view.snapshot_version === null ? "untrained" : `v${view.snapshot_version}`;
      this.els.meta.textContent = `${view.doc_id} · ${version}`;
    }
  }

  private toggleHighlight(chip: Chip, selected: boolean): void {
    const view = this.view;
    if (!view) {
      return;
    }
    for (const el of this.els.chips.querySelectorAll(".chip-selected")) {
      if (el.getAttribute("data-code-id") !== String(chip.code_id)) {
        el.classList.remove("chip-selected");
      }
    }
    if (selected && chip.occurrences.length > 0) {
      this.highlightedCode = chip.code_id;
      renderHighlighted(this.els.text, view.text, chip.occurrences);
    } else {
      this.highlightedCode = null;
      clearHighlights(this.els.text, view.text);
    }
  }

  /** Apply a code to the currently selected passage (optimistic chip). */
  async codeSelection(label: string, span?: Span): Promise<boolean> {
    const view = this.view;
    if (!view) {
      return false;
    }
    const target = span ?? selectionSpan(this.els.text);
    if (!target) {
      this.els.error.textContent = "select a passage first";
      return false;
    }
    const optimistic = document.createElement("span");
    optimistic.className = "chip chip-manual chip-pending";
    optimistic.textContent = label;
    this.els.chips.appendChild(optimistic);
    try {
      await this.client.applyCode(this.pid, view.doc_id, target, label);
      await this.refresh();
      return true;
    } catch (err) {
      optimistic.remove(); // roll the optimistic chip back
      this.els.error.textContent =
        err instanceof ApiError ? err.message : "could not apply code";
      return false;
    }
  }

  private async deleteAuto(chip: Chip): Promise<void> {
    const view = this.view;
    if (!view) {
      return;
    }
    try {
      await this.client.deleteCode(this.pid, view.doc_id, chip.code_id);
      await this.refresh();
    } catch (err) {
      this.els.error.textContent =
        err instanceof ApiError ? err.message : "could not delete code";
    }
  }
}
