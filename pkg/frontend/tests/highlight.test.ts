import { beforeEach, describe, expect, it } from "vitest";

import { clearHighlights, countMarks, renderHighlighted } from "../src/highlight.js";
import type { Span } from "../src/types.js";

const TEXT = "he dumped me then dumped my friend and dumped us all";

function spansOf(word: string): Span[] {
  const spans: Span[] = [];
  let at = TEXT.indexOf(word);
  while (at !== -1) {
    spans.push([at, at + word.length]);
    at = TEXT.indexOf(word, at + 1);
  }
  return spans;
}

beforeEach(() => {
  document.body.innerHTML = "<div id='text'></div>";
});

describe("occurrence highlighting", () => {
  it("highlights exactly one mark per occurrence", () => {
    // acceptance: a code word appearing 3 times highlights exactly 3 spans
    const container = document.getElementById("text")!;
    const spans = spansOf("dumped");
    expect(spans).toHaveLength(3);
    renderHighlighted(container, TEXT, spans);
    expect(countMarks(container)).toBe(3);
    expect(container.textContent).toBe(TEXT);
    for (const mark of container.querySelectorAll("mark")) {
      expect(mark.textContent).toBe("dumped");
    }
  });

  it("toggling twice restores the original rendering", () => {
    const container = document.getElementById("text")!;
    clearHighlights(container, TEXT);
    const before = container.innerHTML;
    renderHighlighted(container, TEXT, spansOf("dumped"));
    expect(container.innerHTML).not.toBe(before);
    clearHighlights(container, TEXT);
    expect(container.innerHTML).toBe(before);
  });

  it("drops malformed spans instead of corrupting the text", () => {
    const container = document.getElementById("text")!;
    renderHighlighted(container, TEXT, [
      [5, 2],
      [0, 2],
      [1, 3], // overlaps the previous span
      [9999, 10002],
    ]);
    expect(container.textContent).toBe(TEXT);
    expect(countMarks(container)).toBe(1);
  });

  it("no spans means no marks", () => {
    const container = document.getElementById("text")!;
    renderHighlighted(container, TEXT, []);
    expect(countMarks(container)).toBe(0);
    expect(container.textContent).toBe(TEXT);
  });
});
