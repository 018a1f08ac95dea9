// Session wiring: document list on the left, coding view in the center,
// chips on the right, theme board and sampling panel as side views, training
// controls in the footer. All state round-trips through the REST API.

import { api } from "./api.js";
import { DocumentPanel } from "./documentView.js";
import { SamplePanel } from "./samplePanel.js";
import { ThemeBoard } from "./themeBoard.js";
import { RetrainPolicy, TrainingController } from "./training.js";
import type { JobView } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

export function staleBadge(viewVersion: number | null, latestVersion: number | null): boolean {
  return viewVersion !== null && latestVersion !== null && viewVersion !== latestVersion;
}

export class App {
  private pid: string;
  private panel: DocumentPanel;
  private board: ThemeBoard;
  private sampler: SamplePanel;
  private trainer: TrainingController;
  private retrainPolicy = new RetrainPolicy();
  private latestVersion: number | null = null;

  constructor(pid: string) {
    this.pid = pid;
    this.panel = new DocumentPanel(pid, {
      text: el("doc-text"),
      chips: el("chip-box"),
      error: el("coding-error"),
      meta: el("doc-meta"),
    });
    this.board = new ThemeBoard(el("theme-board"), pid, {
      onChanged: (note) => this.banner(note),
      onError: (message) => this.banner(message, true),
    });
    this.sampler = new SamplePanel(el("sample-panel"), pid, (docId) => {
      void this.openDocument(docId);
    });
    this.trainer = new TrainingController(pid, {
      onStateChange: (job) => this.renderJob(job),
      onDone: (job) => void this.afterTraining(job),
      onFailed: (job) => this.banner(`training failed: ${job.message ?? "unknown"}`, true),
      onBusy: () => this.banner("a training job is already running", true),
    });
  }

  async start(): Promise<void> {
    const summary = await api.getProject(this.pid);
    this.latestVersion = summary.snapshot_version;
    this.renderFooter();
    await this.refreshDocumentList();
    await this.board.refresh();
    this.bindControls();
  }

  private bindControls(): void {
    el<HTMLButtonElement>("train-button").addEventListener("click", () => {
      void this.train();
    });
    el<HTMLButtonElement>("code-apply").addEventListener("click", () => {
      const input = el<HTMLInputElement>("code-input");
      if (input.value.trim()) {
        void this.panel.codeSelection(input.value).then((ok) => {
          if (ok) {
            input.value = "";
            this.renderStaleFlag();
            void this.board.refresh(); // a new code may create a theme
            if (this.retrainPolicy.noteCode() && !this.trainer.running) {
              void this.train();
            }
          }
        });
      }
    });
    el<HTMLInputElement>("search-input").addEventListener("change", () => {
      void this.refreshDocumentList();
    });
    el<HTMLSelectElement>("sample-theme").addEventListener("change", (ev) => {
      const value = (ev.target as HTMLSelectElement).value;
      if (value) {
        void this.sampler.show(Number(value));
      }
    });
    const syncRetrain = () => {
      this.retrainPolicy.configure(
        el<HTMLInputElement>("auto-retrain").checked,
        Number(el<HTMLInputElement>("auto-retrain-n").value),
      );
    };
    el<HTMLInputElement>("auto-retrain").addEventListener("change", syncRetrain);
    el<HTMLInputElement>("auto-retrain-n").addEventListener("change", syncRetrain);
    const showTab = (codes: boolean) => {
      el("codes-view").hidden = !codes;
      el("themes-view").hidden = codes;
      el("tab-codes").classList.toggle("tab-active", codes);
      el("tab-themes").classList.toggle("tab-active", !codes);
    };
    el<HTMLButtonElement>("tab-codes").addEventListener("click", () => showTab(true));
    el<HTMLButtonElement>("tab-themes").addEventListener("click", () => showTab(false));
  }

  private async refreshDocumentList(): Promise<void> {
    const terms = el<HTMLInputElement>("search-input").value.trim();
    const resp = await api.searchDocuments(this.pid, { terms, limit: 50 });
    const list = el("doc-list");
    list.replaceChildren();
    for (const docId of resp.doc_ids) {
      const item = document.createElement("li");
      const link = document.createElement("a");
      link.href = "#";
      link.textContent = docId;
      link.addEventListener("click", (ev) => {
        ev.preventDefault();
        void this.openDocument(docId);
      });
      item.appendChild(link);
      list.appendChild(item);
    }
  }

  private async openDocument(docId: string): Promise<void> {
    await this.panel.open(docId);
    this.renderStaleFlag();
  }

  private async train(): Promise<void> {
    el<HTMLButtonElement>("train-button").disabled = true;
    try {
      await this.trainer.trigger();
    } finally {
      el<HTMLButtonElement>("train-button").disabled = false;
    }
  }

  private async afterTraining(job: JobView): Promise<void> {
    this.latestVersion = job.version;
    this.banner(`training finished: model v${job.version}`);
    this.renderFooter();
    await this.board.refresh();
    await this.panel.refresh(); // auto chips re-render from the new snapshot
    this.renderStaleFlag();
    this.renderSampleThemes();
  }

  private renderJob(job: JobView): void {
    el("job-status").textContent = `job ${job.job_id}: ${job.state}`;
  }

  private renderFooter(): void {
    el("snapshot-version").textContent =
      this.latestVersion === null ? "untrained" : `model v${this.latestVersion}`;
    this.renderSampleThemes();
  }

  private renderSampleThemes(): void {
    const select = el<HTMLSelectElement>("sample-theme");
    const current = select.value;
    select.replaceChildren();
    const blank = document.createElement("option");
    blank.value = "";
    blank.textContent = "sample by theme…";
    select.appendChild(blank);
    for (const theme of this.board.getThemes()) {
      const option = document.createElement("option");
      option.value = String(theme.theme_id);
      option.textContent = theme.name;
      select.appendChild(option);
    }
    select.value = current;
  }

  private renderStaleFlag(): void {
    const stale = staleBadge(this.panel.snapshotVersion, this.latestVersion);
    el("doc-meta").classList.toggle("stale", stale);
  }

  private banner(message: string, isError = false): void {
    const node = el("banner");
    node.textContent = message;
    node.className = isError ? "banner banner-error" : "banner";
    setTimeout(() => {
      if (node.textContent === message) {
        node.textContent = "";
        node.className = "banner";
      }
    }, 4000);
  }
}

export async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  let pid = params.get("project");
  if (!pid) {
    const projects = await api.listProjects();
    pid = projects.projects[0]?.project_id ?? null;
  }
  if (!pid) {
    const created = await api.createProject("untitled");
    pid = created.project_id;
  }
  const app = new App(pid);
  await app.start();
}

if (typeof document !== "undefined" && document.getElementById("doc-text")) {
  void boot();
}
