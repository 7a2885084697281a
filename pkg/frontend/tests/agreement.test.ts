/** UI/engine agreement: scripted edit sequences against the real Python
 * service. Every displayed ranking must byte-match a direct /search
 * oracle call, and region narrowing must never grow the list.
 *
 * The suite builds a small trained workspace via the uniformid CLI, then
 * spawns `uniformid serve` on a loopback port.
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, readdirSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

import { ApiClient } from "../src/api";
import { TriageModel } from "../src/model";
import type { ClothingItem, Distribution } from "../src/types";
import { COLORS, ITEMS } from "../src/types";

const REPO_ROOT = resolve(__dirname, "..", "..");
const PYTHON = process.env.PYTHON ?? "python3";
const PORT = 18234 + (process.pid % 1000);
const BASE = `http://127.0.0.1:${PORT}`;

let workdir: string;
let server: ChildProcess | null = null;
let client: ApiClient;
let uniformPngs: Uint8Array[] = [];
let regions: string[] = [];

function cli(...args: string[]): void {
  execFileSync(PYTHON, ["-m", "uniformid.service.cli", ...args], {
    cwd: REPO_ROOT,
    stdio: "pipe",
  });
}

async function waitForHealth(): Promise<void> {
  for (let i = 0; i < 120; i++) {
    try {
      const resp = await fetch(`${BASE}/health`);
      if (resp.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 500));
  }
  throw new Error("service did not become healthy");
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "uniformid-ui-"));
  cli(
    "--seed", "606", "generate-data", "--out", workdir,
    "--schools", "4", "--images-per-school", "6", "--nonuniform", "20",
  );
  cli(
    "--seed", "606", "train", "uniform",
    "--data", join(workdir, "dataset"), "--model-root", join(workdir, "models"),
    "--epochs", "8",
  );
  cli(
    "--seed", "606", "train", "attributes",
    "--data", join(workdir, "dataset"), "--model-root", join(workdir, "models"),
    "--epochs", "1",
  );
  const config = [
    "#uniformid.v1 kind=pipeline_config",
    `model_root: ${join(workdir, "models")}`,
    `school_registry: ${join(workdir, "schools.txt")}`,
    `case_store: ${join(workdir, "cases.jsonl")}`,
    "min_bytes: 0",
    `bind_port: ${PORT}`,
    "seed: 606",
    "",
  ].join("\n");
  writeFileSync(join(workdir, "config.txt"), config);

  // Uniform image ids come first in the manifest (school column set).
  const manifest = readFileSync(join(workdir, "dataset", "manifest.tsv"), "utf8")
    .split("\n")
    .slice(1)
    .filter((ln) => ln.trim() && ln.split("\t")[3] !== "-");
  uniformPngs = manifest.map((ln) => {
    const file = join(workdir, "dataset", ln.split("\t")[1]!);
    return new Uint8Array(readFileSync(file));
  });

  server = spawn(PYTHON, ["-m", "uniformid.service.cli", "serve", "--config", join(workdir, "config.txt")], {
    cwd: REPO_ROOT,
    stdio: "pipe",
  });
  await waitForHealth();
  client = new ApiClient(BASE);
  const schools = await client.schools();
  regions = [...new Set(schools.body.schools.map((s) => s.region_code))].sort();
}, 300_000);

afterAll(() => {
  if (server) server.kill();
  if (workdir) rmSync(workdir, { recursive: true, force: true });
});

/** Deterministic PRNG so the 20 sequences are scripted, not flaky. */
function mulberry32(seed: number): () => number {
  let a = seed;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

async function oracleRanking(dist: Distribution, regionFilter: string[] | null): Promise<string> {
  const resp = await client.search(dist, {
    regionFilter: regionFilter ?? undefined,
    topN: 10, // service default
  });
  return JSON.stringify(resp.body.ranking);
}

describe("UI/engine agreement", () => {
  it("20 scripted edit sequences match the server byte-for-byte", async () => {
    let positives = 0;
    let comparisons = 0;
    for (let seq = 0; seq < 20; seq++) {
      const rand = mulberry32(1000 + seq);
      const model = new TriageModel(client);
      await model.upload(uniformPngs[seq % uniformPngs.length]!);
      if (!model.verdict || !model.committed) continue; // negative verdicts have no panel
      positives += 1;

      const editsInSequence = 1 + Math.floor(rand() * 3);
      for (let e = 0; e < editsInSequence; e++) {
        const item = ITEMS[Math.floor(rand() * ITEMS.length)] as ClothingItem;
        const color = Math.floor(rand() * COLORS.length);
        model.stageEdit(item, color, rand());
        await model.commitEdit();
        expect(model.error).toBeNull();

        const displayed = JSON.stringify(model.rankingView!.ranking);
        const oracle = await oracleRanking(model.committed!, model.regionFilter);
        expect(displayed).toBe(oracle);
        comparisons += 1;
      }
    }
    expect(positives).toBeGreaterThanOrEqual(10);
    expect(comparisons).toBeGreaterThanOrEqual(20);
  });

  it("region narrowing never grows the displayed list", async () => {
    const model = new TriageModel(client);
    for (const png of uniformPngs) {
      await model.upload(png);
      if (model.verdict && model.committed) break;
    }
    expect(model.verdict).toBe(true);

    await model.applyRegionFilter(regions); // all regions
    const all = model.rankingView!.ranking.map((e) => e.school_id);
    let previous = new Set(all);
    for (let k = regions.length - 1; k >= 1; k--) {
      await model.applyRegionFilter(regions.slice(0, k));
      const now = model.rankingView!.ranking.map((e) => e.school_id);
      expect(now.length).toBeLessThanOrEqual(previous.size);
      expect(now.every((s) => previous.has(s))).toBe(true);
      previous = new Set(now);
      // Displayed list still byte-matches the oracle under the filter.
      const oracle = await oracleRanking(model.committed!, regions.slice(0, k));
      expect(JSON.stringify(model.rankingView!.ranking)).toBe(oracle);
    }

    await model.applyRegionFilter(["NO-SUCH-REGION"]);
    expect(model.rankingView!.ranking).toEqual([]);
    expect(model.emptyRegionMessage).toBe("no schools in region");
  });

  it("all-regions filter equals the unfiltered ranking", async () => {
    const model = new TriageModel(client);
    for (const png of uniformPngs) {
      await model.upload(png);
      if (model.verdict && model.committed) break;
    }
    const unfiltered = await oracleRanking(model.committed!, null);
    await model.applyRegionFilter(regions);
    expect(JSON.stringify(model.rankingView!.ranking)).toBe(unfiltered);
  });

  it("edit history mirrors the server audit trail length", async () => {
    const model = new TriageModel(client);
    for (const png of uniformPngs) {
      await model.upload(png);
      if (model.verdict && model.committed) break;
    }
    const auditBefore = model.auditLength;
    model.stageEdit("SHIRT", 4, 0.9);
    await model.commitEdit();
    model.stageEdit("TIE", 6, 0.8);
    await model.commitEdit();
    expect(model.auditLength).toBe(auditBefore + 2);
    const onServer = await client.getCase(model.caseId!);
    expect(onServer.body.audit.length).toBe(model.auditLength);
  });
});
