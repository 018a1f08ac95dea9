import { beforeEach, describe, expect, it, vi } from "vitest";

import type { api } from "../src/api.js";
import { ApiError } from "../src/api.js";
import { DocumentPanel } from "../src/documentView.js";
import { staleBadge } from "../src/app.js";
import type { DocumentView } from "../src/types.js";

const TEXT = "we had a dinner date and dinner again";

function view(chips: DocumentView["chips"] = []): DocumentView {
  return {
    doc_id: "d1",
    text: TEXT,
    thread_id: "",
    author: null,
    timestamp: null,
    geo: null,
    snapshot_version: 1,
    annotations: [],
    chips,
  };
}

function elements() {
  document.body.innerHTML = `
    <div id="text"></div><div id="chips"></div>
    <span id="error"></span><span id="meta"></span>`;
  return {
    text: document.getElementById("text")!,
    chips: document.getElementById("chips")!,
    error: document.getElementById("error")!,
    meta: document.getElementById("meta")!,
  };
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("coding view", () => {
  it("renders chips from the server view", async () => {
    const els = elements();
    const client = {
      getDocument: vi.fn(async () =>
        view([
          {
            code_id: 1,
            label: "dating",
            origin: "manual",
            spans: [[9, 20]],
            occurrences: [[9, 15]],
            doc_level: false,
          },
        ]),
      ),
    } as unknown as typeof api;
    const panel = new DocumentPanel("p1", els, client);
    await panel.open("d1");
    expect(els.chips.querySelectorAll(".chip-manual")).toHaveLength(1);
    expect(els.text.textContent).toBe(TEXT);
    expect(els.meta.textContent).toContain("v1");
  });

  it("applies a code optimistically and reconciles with the server", async () => {
    const els = elements();
    const applied = view([
      {
        code_id: 1,
        label: "food",
        origin: "manual",
        spans: [[9, 15]],
        occurrences: [
          [9, 15],
          [25, 31],
        ],
        doc_level: false,
      },
    ]);
    let current = view();
    const client = {
      getDocument: vi.fn(async () => current),
      applyCode: vi.fn(async () => {
        current = applied;
        return applied.annotations[0];
      }),
    } as unknown as typeof api;
    const panel = new DocumentPanel("p1", els, client);
    await panel.open("d1");
    const ok = await panel.codeSelection("food", [9, 15]);
    expect(ok).toBe(true);
    expect(els.chips.querySelectorAll(".chip-manual")).toHaveLength(1);
    expect(els.chips.querySelectorAll(".chip-pending")).toHaveLength(0);
  });

  it("rolls the optimistic chip back when the server rejects", async () => {
    const els = elements();
    const client = {
      getDocument: vi.fn(async () => view()),
      applyCode: vi.fn(async () => {
        throw new ApiError(422, {
          code: "EmptySelection",
          message: "span covers no codable token",
        });
      }),
    } as unknown as typeof api;
    const panel = new DocumentPanel("p1", els, client);
    await panel.open("d1");
    const ok = await panel.codeSelection("x", [2, 3]);
    expect(ok).toBe(false);
    expect(els.chips.querySelectorAll(".chip")).toHaveLength(0);
    expect(els.error.textContent).toMatch(/codable/);
  });

  it("clicking a chip toggles occurrence highlighting", async () => {
    const els = elements();
    const client = {
      getDocument: vi.fn(async () =>
        view([
          {
            code_id: 1,
            label: "food",
            origin: "manual",
            spans: [[9, 15]],
            occurrences: [
              [9, 15],
              [25, 31],
            ],
            doc_level: false,
          },
        ]),
      ),
    } as unknown as typeof api;
    const panel = new DocumentPanel("p1", els, client);
    await panel.open("d1");
    const chip = els.chips.querySelector(".chip") as HTMLElement;
    chip.click();
    expect(els.text.querySelectorAll("mark")).toHaveLength(2);
    chip.click();
    expect(els.text.querySelectorAll("mark")).toHaveLength(0);
  });

  it("flags stale views when a newer snapshot exists", () => {
    expect(staleBadge(1, 2)).toBe(true);
    expect(staleBadge(2, 2)).toBe(false);
    expect(staleBadge(null, 2)).toBe(false);
    expect(staleBadge(1, null)).toBe(false);
  });
});
