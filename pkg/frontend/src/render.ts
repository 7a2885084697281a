/** DOM rendering for the triage console. Pure view layer: reads the
 * model, writes elements, forwards gestures. */

import type { TriageModel } from "./model";
import { barsSum } from "./model";
import { COLORS, ITEMS } from "./types";
import type { ClothingItem } from "./types";

const COLOR_SWATCH: Record<string, string> = {
  RED_BROWN: "#a33",
  YELLOW_ORANGE: "#e8a020",
  GREEN: "#2d7d3c",
  BLUE_PURPLE: "#4450b0",
  WHITE: "#eee",
  BLACK_GREY: "#444",
  NO_COLOR: "transparent",
};

export interface Handlers {
  onSlider(item: ClothingItem, colorIndex: number, value: number): void;
  onCommit(): void;
  onUndo(): void;
  onRegionFilter(regions: string[] | null): void;
}

export function render(root: HTMLElement, model: TriageModel, handlers: Handlers): void {
  root.replaceChildren();

  if (model.error) {
    root.append(el("div", "banner error", model.error));
  }
  for (const warning of model.warnings) {
    root.append(el("div", "banner warning", warning));
  }
  if (model.staleCase) {
    root.append(
      el("div", "banner warning", "case edited in another session (showing last write)"),
    );
  }

  if (model.caseId === null) {
    root.append(el("p", "hint", "Upload an image to open a case."));
    return;
  }

  const verdict = el(
    "div",
    `banner verdict ${model.verdict ? "positive" : "negative"}`,
    model.verdict
      ? `Uniform detected - probability ${(model.probability ?? 0).toFixed(3)}`
      : `No uniform detected (probability ${(model.probability ?? 0).toFixed(3)}); ` +
          "attribute and school panels are hidden for negative verdicts",
  );
  root.append(verdict);

  const gauge = el("div", "gauge");
  const fill = el("div", "gauge-fill");
  fill.style.width = `${((model.probability ?? 0) * 100).toFixed(1)}%`;
  gauge.append(fill);
  root.append(gauge);

  if (!model.verdict || !model.displayedDistribution) {
    root.append(renderHistory(model));
    return;
  }

  // Attribute editor
  const dist = model.displayedDistribution;
  const editor = el("section", "editor");
  editor.append(el("h2", "", "Per-item color distributions"));
  for (const item of ITEMS) {
    const row = el("div", "item-row");
    row.append(el("h3", "", `${item} (sum ${barsSum(dist, item).toFixed(3)})`));
    COLORS.forEach((color, ci) => {
      const line = el("label", "slider-line");
      const swatch = el("span", "swatch");
      swatch.style.background = COLOR_SWATCH[color] ?? "#999";
      const value = dist[item][ci]!;
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = "0";
      slider.max = "1";
      slider.step = "0.01";
      slider.value = String(value);
      slider.addEventListener("input", () =>
        handlers.onSlider(item, ci, Number(slider.value)),
      );
      line.append(swatch, el("span", "color-name", color), slider, el("span", "prob", value.toFixed(3)));
      row.append(line);
    });
    editor.append(row);
  }
  const commit = button("Commit edit", handlers.onCommit);
  commit.disabled = model.staged === null;
  const undo = button("Undo", handlers.onUndo);
  undo.disabled = !model.canUndo;
  editor.append(commit, undo);
  root.append(editor);

  // Region filter
  const filter = el("section", "region-filter");
  filter.append(el("h2", "", "Region filter"));
  const input = document.createElement("input");
  input.type = "text";
  input.placeholder = "e.g. LDN,SE (empty = all regions)";
  input.value = model.regionFilter?.join(",") ?? "";
  const apply = button("Apply", () => {
    const text = input.value.trim();
    handlers.onRegionFilter(text ? text.split(",").map((s) => s.trim()) : null);
  });
  filter.append(input, apply);
  root.append(filter);

  // Ranking
  const rankingSection = el("section", "ranking");
  const staleBadge = model.rankingStale ? " (STALE registry)" : "";
  rankingSection.append(el("h2", "", `Candidate schools${staleBadge}`));
  if (model.emptyRegionMessage) {
    rankingSection.append(el("p", "empty", model.emptyRegionMessage));
  } else if (model.rankingView) {
    const table = el("table", "rank-table");
    const head = el("tr", "");
    for (const col of ["#", "school", "variant", "log-score", "mismatches"]) {
      head.append(el("th", "", col));
    }
    table.append(head);
    model.rankingView.ranking.forEach((entry, i) => {
      const tr = el("tr", "");
      tr.append(
        el("td", "", String(i + 1)),
        el("td", "", entry.school_id),
        el("td", "", String(entry.variant_index)),
        el("td", "", entry.score.toFixed(4)),
        el("td", "", String(entry.mismatch_count)),
      );
      table.append(tr);
    });
    rankingSection.append(table);
    rankingSection.append(
      el("p", "digest", `registry ${model.rankingView.registryDigest.slice(0, 12)}`),
    );
  }
  root.append(rankingSection);
  root.append(renderHistory(model));
}

function renderHistory(model: TriageModel): HTMLElement {
  const section = el("section", "history");
  section.append(el("h2", "", "Edit history"));
  const list = el("ol", "");
  for (const entry of model.history) {
    list.append(el("li", "", `${entry.action}: ${entry.detail}`));
  }
  section.append(list);
  return section;
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function button(label: string, onClick: () => void): HTMLButtonElement {
  const b = document.createElement("button");
  b.textContent = label;
  b.addEventListener("click", onClick);
  return b;
}
