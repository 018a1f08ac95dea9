// Code chips: the three visual states of the codes box. A chip's style is a
// pure function of its annotation origin; anything else is a bug.

import type { Chip, Origin } from "./types.js";

const CHIP_CLASS: Record<Origin, string> = {
  manual: "chip chip-manual", // dark blue: added by the researcher
  auto: "chip chip-auto", // light blue: applied by the model
  deleted: "chip chip-deleted", // gray: deleted, still constrains the model
};

export function chipClass(origin: Origin): string {
  const cls = CHIP_CLASS[origin];
  if (!cls) {
    throw new Error(`unknown chip origin: ${origin}`);
  }
  return cls;
}

export interface ChipHandlers {
  onToggleHighlight?: (chip: Chip, selected: boolean) => void;
  onDelete?: (chip: Chip) => void;
}

export function renderChip(chip: Chip, handlers: ChipHandlers = {}): HTMLElement {
  const el = document.createElement("span");
  el.className = chipClass(chip.origin);
  el.dataset.codeId = String(chip.code_id);
  el.dataset.origin = chip.origin;
  el.setAttribute("role", "button");

  const label = document.createElement("span");
  label.className = "chip-label";
  label.textContent = chip.label;
  el.appendChild(label);

  if (chip.occurrences.length === 0) {
    el.title = "no occurrences of this code's words in this document";
  }

  el.addEventListener("click", () => {
    const selected = el.classList.toggle("chip-selected");
    handlers.onToggleHighlight?.(chip, selected);
  });

  if (chip.origin === "auto" && handlers.onDelete) {
    const del = document.createElement("button");
    del.className = "chip-delete";
    del.textContent = "×";
    del.title = "delete: this code does not apply here";
    del.addEventListener("click", (ev) => {
      ev.stopPropagation();
      handlers.onDelete?.(chip);
    });
    el.appendChild(del);
  }
  return el;
}

export function renderChipBox(
  container: HTMLElement,
  chips: Chip[],
  handlers: ChipHandlers = {},
): void {
  container.replaceChildren();
  for (const chip of chips) {
    container.appendChild(renderChip(chip, handlers));
  }
}
