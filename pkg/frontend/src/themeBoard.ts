// Theme board: one row per theme listing its codes. Dragging a code chip
// onto another theme's row merges the code into that theme (the underlying
// topics merge on the next training run); a split button undoes a merge.

import { api } from "./api.js";
import type { ThemeView } from "./types.js";

export interface ThemeBoardCallbacks {
  onChanged?: (note: string) => void;
  onError?: (message: string) => void;
}

export class ThemeBoard {
  private container: HTMLElement;
  private pid: string;
  private themes: ThemeView[] = [];
  private callbacks: ThemeBoardCallbacks;
  private client: typeof api;

  constructor(
    container: HTMLElement,
    pid: string,
    callbacks: ThemeBoardCallbacks = {},
    client: typeof api = api,
  ) {
    this.container = container;
    this.pid = pid;
    this.callbacks = callbacks;
    this.client = client;
  }

  async refresh(): Promise<void> {
    const resp = await this.client.getThemes(this.pid);
    this.setThemes(resp.themes);
  }

  setThemes(themes: ThemeView[]): void {
    this.themes = themes;
    this.render();
  }

  getThemes(): ThemeView[] {
    return this.themes;
  }

  private render(): void {
    this.container.replaceChildren();
    for (const theme of this.themes) {
      this.container.appendChild(this.themeRow(theme));
    }
  }

  private themeRow(theme: ThemeView): HTMLElement {
    const row = document.createElement("div");
    row.className = "theme-row";
    row.dataset.themeId = String(theme.theme_id);

    const name = document.createElement("span");
    name.className = "theme-name";
    name.textContent = theme.name;
    name.title = "double-click to rename";
    name.addEventListener("dblclick", () => void this.renamePrompt(theme));
    row.appendChild(name);

    const codes = document.createElement("span");
    codes.className = "theme-codes";
    for (const code of theme.codes) {
      const chip = document.createElement("span");
      chip.className = "code-pill";
      chip.textContent = code.label;
      chip.draggable = true;
      chip.dataset.codeId = String(code.code_id);
      chip.dataset.themeId = String(theme.theme_id);
      chip.addEventListener("dragstart", (ev) => {
        ev.dataTransfer?.setData("text/code-id", String(code.code_id));
        ev.dataTransfer?.setData("text/source-theme", String(theme.theme_id));
      });
      if (theme.codes.length > 1) {
        const split = document.createElement("button");
        split.className = "code-split";
        split.textContent = "↪";
        split.title = "split into its own theme";
        split.addEventListener("click", () => void this.split(theme, code.code_id));
        chip.appendChild(split);
      }
      codes.appendChild(chip);
    }
    row.appendChild(codes);

    row.addEventListener("dragover", (ev) => ev.preventDefault());
    row.addEventListener("drop", (ev) => {
      ev.preventDefault();
      const codeId = ev.dataTransfer?.getData("text/code-id");
      const source = ev.dataTransfer?.getData("text/source-theme");
      if (!codeId) {
        return;
      }
      if (source === String(theme.theme_id)) {
        row.classList.add("shake"); // dropping onto its own theme: no-op
        setTimeout(() => row.classList.remove("shake"), 300);
        return;
      }
      void this.merge(theme, Number(codeId));
    });
    return row;
  }

  private async merge(target: ThemeView, codeId: number): Promise<void> {
    try {
      await this.client.mergeCode(this.pid, target.theme_id, codeId);
      await this.refresh();
      this.callbacks.onChanged?.("topics merge on next training run");
    } catch (err) {
      this.callbacks.onError?.(err instanceof Error ? err.message : String(err));
    }
  }

  private async split(theme: ThemeView, codeId: number): Promise<void> {
    try {
      await this.client.splitCode(this.pid, theme.theme_id, codeId);
      await this.refresh();
      this.callbacks.onChanged?.("a new topic is seeded on next training run");
    } catch (err) {
      this.callbacks.onError?.(err instanceof Error ? err.message : String(err));
    }
  }

  private async renamePrompt(theme: ThemeView): Promise<void> {
    const name = window.prompt("theme name", theme.name);
    if (!name || name === theme.name) {
      return;
    }
    try {
      await this.client.renameTheme(this.pid, theme.theme_id, name);
      await this.refresh();
    } catch (err) {
      this.callbacks.onError?.(err instanceof Error ? err.message : String(err));
    }
  }
}
