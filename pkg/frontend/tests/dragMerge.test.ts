import { beforeEach, describe, expect, it, vi } from "vitest";

import type { api } from "../src/api.js";
import { ThemeBoard } from "../src/themeBoard.js";
import type { ThemeView } from "../src/types.js";

function fakeDataTransfer() {
  const data: Record<string, string> = {};
  return {
    setData: (key: string, value: string) => {
      data[key] = value;
    },
    getData: (key: string) => data[key] ?? "",
  };
}

function dragEvent(type: string, dataTransfer: ReturnType<typeof fakeDataTransfer>) {
  const event = new Event(type, { bubbles: true, cancelable: true });
  Object.defineProperty(event, "dataTransfer", { value: dataTransfer });
  return event;
}

function makeThemes(): ThemeView[] {
  return [
    {
      theme_id: 1,
      name: "dating",
      codes: [{ code_id: 11, label: "dating" }],
      topic: 0,
    },
    {
      theme_id: 2,
      name: "break up",
      codes: [{ code_id: 22, label: "break up" }],
      topic: 1,
    },
  ];
}

function makeClient(themes: ThemeView[]) {
  const mergeCode = vi.fn(async (_pid: string, themeId: number, codeId: number) => {
    const target = themes.find((t) => t.theme_id === themeId)!;
    const source = themes.find((t) => t.codes.some((c) => c.code_id === codeId))!;
    const code = source.codes.find((c) => c.code_id === codeId)!;
    source.codes = source.codes.filter((c) => c.code_id !== codeId);
    target.codes.push(code);
    if (source.codes.length === 0) {
      themes.splice(themes.indexOf(source), 1);
    }
    return target;
  });
  const client = {
    mergeCode,
    getThemes: vi.fn(async () => ({ themes, snapshot_version: 1 })),
    splitCode: vi.fn(),
    renameTheme: vi.fn(),
  } as unknown as typeof api;
  return { client, mergeCode };
}

async function flush() {
  await new Promise((resolve) => setTimeout(resolve, 0));
}

beforeEach(() => {
  document.body.innerHTML = "<div id='board'></div>";
});

describe("drag merge", () => {
  it("dropping a code onto another theme issues exactly one merge call", async () => {
    // acceptance: drag merge fires one API call and re-renders both codes
    const themes = makeThemes();
    const { client, mergeCode } = makeClient(themes);
    const board = new ThemeBoard(document.getElementById("board")!, "p1", {}, client);
    board.setThemes(JSON.parse(JSON.stringify(themes)));

    const pill = document.querySelector(
      ".code-pill[data-code-id='22']",
    ) as HTMLElement;
    const targetRow = document.querySelector(
      ".theme-row[data-theme-id='1']",
    ) as HTMLElement;

    const dt = fakeDataTransfer();
    pill.dispatchEvent(dragEvent("dragstart", dt));
    targetRow.dispatchEvent(dragEvent("drop", dt));
    await flush();

    expect(mergeCode).toHaveBeenCalledTimes(1);
    expect(mergeCode).toHaveBeenCalledWith("p1", 1, 22);

    const rows = document.querySelectorAll(".theme-row");
    expect(rows).toHaveLength(1);
    const labels = [...rows[0]!.querySelectorAll(".code-pill")].map((el) =>
      el.textContent?.replace("↪", ""),
    );
    expect(labels).toEqual(["dating", "break up"]);
  });

  it("dropping a code onto its own theme is a no-op with shake feedback", async () => {
    const themes = makeThemes();
    const { client, mergeCode } = makeClient(themes);
    const board = new ThemeBoard(document.getElementById("board")!, "p1", {}, client);
    board.setThemes(JSON.parse(JSON.stringify(themes)));

    const pill = document.querySelector(
      ".code-pill[data-code-id='11']",
    ) as HTMLElement;
    const ownRow = document.querySelector(
      ".theme-row[data-theme-id='1']",
    ) as HTMLElement;

    const dt = fakeDataTransfer();
    pill.dispatchEvent(dragEvent("dragstart", dt));
    ownRow.dispatchEvent(dragEvent("drop", dt));
    await flush();

    expect(mergeCode).not.toHaveBeenCalled();
    expect(ownRow.classList.contains("shake")).toBe(true);
  });

  it("dropping outside any theme row changes nothing", async () => {
    const themes = makeThemes();
    const { client, mergeCode } = makeClient(themes);
    const board = new ThemeBoard(document.getElementById("board")!, "p1", {}, client);
    board.setThemes(JSON.parse(JSON.stringify(themes)));

    const dt = fakeDataTransfer();
    const pill = document.querySelector(".code-pill[data-code-id='22']") as HTMLElement;
    pill.dispatchEvent(dragEvent("dragstart", dt));
    document.body.dispatchEvent(dragEvent("drop", dt));
    await flush();

    expect(mergeCode).not.toHaveBeenCalled();
    expect(document.querySelectorAll(".theme-row")).toHaveLength(2);
  });

  it("split button returns a merged code to its own theme", async () => {
    const themes: ThemeView[] = [
      {
        theme_id: 1,
        name: "dating",
        codes: [
          { code_id: 11, label: "dating" },
          { code_id: 22, label: "break up" },
        ],
        topic: 0,
      },
    ];
    const splitCode = vi.fn(async () => {
      themes[0]!.codes = [{ code_id: 11, label: "dating" }];
      themes.push({
        theme_id: 3,
        name: "break up",
        codes: [{ code_id: 22, label: "break up" }],
        topic: null,
      });
      return { theme: themes[0]!, new_theme: themes[1]! };
    });
    const client = {
      splitCode,
      getThemes: vi.fn(async () => ({ themes, snapshot_version: 1 })),
      mergeCode: vi.fn(),
      renameTheme: vi.fn(),
    } as unknown as typeof api;

    const board = new ThemeBoard(document.getElementById("board")!, "p1", {}, client);
    board.setThemes(JSON.parse(JSON.stringify(themes)));
    const splitButton = document.querySelector(".code-split") as HTMLButtonElement;
    splitButton.click();
    await flush();

    expect(splitCode).toHaveBeenCalledTimes(1);
    expect(document.querySelectorAll(".theme-row")).toHaveLength(2);
  });
});
