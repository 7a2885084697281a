import { ApiClient } from "./api";
import { TriageModel } from "./model";
import { render } from "./render";
import type { ClothingItem } from "./types";

const params = new URLSearchParams(window.location.search);
const base = params.get("service") ?? "http://127.0.0.1:8234";

const api = new ApiClient(base);
const model = new TriageModel(api);
const root = document.getElementById("app")!;

function repaint(): void {
  render(root, model, {
    onSlider(item: ClothingItem, colorIndex: number, value: number) {
      model.stageEdit(item, colorIndex, value);
      repaint();
    },
    onCommit() {
      void model.commitEdit().then(repaint);
    },
    onUndo() {
      void model.undo().then(repaint);
    },
    onRegionFilter(regions) {
      void model.applyRegionFilter(regions).then(repaint);
    },
  });
}

document.getElementById("upload")!.addEventListener("change", async (event) => {
  const input = event.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  try {
    await model.upload(await file.arrayBuffer());
  } catch (err) {
    model.error = `upload failed: ${String(err)} (is the service running at ${base}?)`;
  }
  repaint();
});

window.setInterval(() => {
  if (model.caseId) void model.refreshStaleness().then(repaint);
}, 5000);

repaint();
