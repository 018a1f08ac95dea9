// Span highlighting in the document text. Clicking a chip highlights every
// in-document occurrence of the chip's words, annotated or not, which makes
// visible that the model treats all appearances of a word as equivalent.

import type { Span } from "./types.js";

/** Render text with the given spans wrapped in <mark> elements. */
export function renderHighlighted(
  container: HTMLElement,
  text: string,
  spans: Span[],
  markClass = "occurrence",
): void {
  container.replaceChildren();
  const ordered = [...spans].sort((a, b) => a[0] - b[0]);
  let cursor = 0;
  for (const [start, end] of ordered) {
    if (start < cursor || end > text.length || start >= end) {
      continue; // overlapping or out-of-range spans are dropped, not fatal
    }
    if (start > cursor) {
      container.appendChild(document.createTextNode(text.slice(cursor, start)));
    }
    const mark = document.createElement("mark");
    mark.className = markClass;
    mark.textContent = text.slice(start, end);
    container.appendChild(mark);
    cursor = end;
  }
  if (cursor < text.length) {
    container.appendChild(document.createTextNode(text.slice(cursor)));
  }
}

export function clearHighlights(container: HTMLElement, text: string): void {
  renderHighlighted(container, text, []);
}

export function countMarks(container: HTMLElement): number {
  return container.querySelectorAll("mark").length;
}

/**
 * Resolve the current browser selection to character offsets within the
 * document text node container. Returns null when the selection is empty or
 * outside the container.
 */
export function selectionSpan(container: HTMLElement): Span | null {
  const sel = window.getSelection();
  if (!sel || sel.rangeCount === 0 || sel.isCollapsed) {
    return null;
  }
  const range = sel.getRangeAt(0);
  if (!container.contains(range.startContainer) || !container.contains(range.endContainer)) {
    return null;
  }
  const offsetOf = (node: Node, offset: number): number => {
    let total = 0;
    const walker = document.createTreeWalker(container, NodeFilter.SHOW_TEXT);
    let current = walker.nextNode();
    while (current) {
      if (current === node) {
        return total + offset;
      }
      total += (current.textContent ?? "").length;
      current = walker.nextNode();
    }
    return total;
  };
  const start = offsetOf(range.startContainer, range.startOffset);
  const end = offsetOf(range.endContainer, range.endOffset);
  return start < end ? [start, end] : null;
}
