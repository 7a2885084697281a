import { describe, expect, it } from "vitest";

import { ApiError, type ApiResponse, type SearchOptions } from "../src/api";
import { TriageModel, renormalizeEdit, type TriageApi } from "../src/model";
import type {
  CaseBody,
  Distribution,
  HealthBody,
  SearchResultBody,
} from "../src/types";
import { COLORS, ITEMS } from "../src/types";

function uniformDistribution(): Distribution {
  const out = {} as Distribution;
  for (const item of ITEMS) out[item] = Array(COLORS.length).fill(1 / COLORS.length);
  return out;
}

/** Deterministic fake server: ranking is a digest of the query so tests
 * can detect exactly when a re-query happened, without scoring logic. */
class FakeApi implements TriageApi {
  caseUploads = 0;
  edits: Distribution[] = [];
  searches: Array<{ dist: Distribution; options?: SearchOptions }> = [];
  auditLength = 1;
  registryDigest = "reg-v1";
  rejectNextEdit = false;
  schoolsByRegion: Record<string, string[]> = {
    R1: ["S001", "S002"],
    R2: ["S003"],
  };

  private wrap<T>(body: T): ApiResponse<T> {
    return { raw: JSON.stringify(body), body };
  }

  private result(dist: Distribution, options?: SearchOptions): SearchResultBody {
    let schools = Object.values(this.schoolsByRegion).flat();
    if (options?.regionFilter) {
      schools = options.regionFilter.flatMap((r) => this.schoolsByRegion[r] ?? []);
    }
    // Order depends on the distribution so edits visibly rerank.
    const key = dist.SHIRT[0]!;
    const ranking = schools
      .slice()
      .sort((a, b) => (key > 0.5 ? a.localeCompare(b) : b.localeCompare(a)))
      .map((s, i) => ({
        school_id: s,
        variant_index: 0,
        score: -i - key,
        mismatch_count: i,
      }));
    return {
      schema: "uniformid.v1",
      registry_digest: this.registryDigest,
      query: {
        distribution: dist,
        region_filter: options?.regionFilter ?? null,
        max_mismatches: null,
        top_n: 10,
        epsilon: 1e-6,
      },
      ranking,
    };
  }

  private caseBody(dist: Distribution | null, options?: SearchOptions): CaseBody {
    return {
      case_id: "case-1",
      image_ref: "img.png",
      uniform_probability: 0.91,
      verdict: true,
      distribution: dist,
      edited_distribution: null,
      search_result: dist ? this.result(dist, options) : null,
      warnings: ["oversized input: predictions may be unreliable for large images"],
      crop_box: [0, 0, 10, 10],
      audit: Array(this.auditLength).fill({ at: "t", action: "x" }),
    };
  }

  async health(): Promise<ApiResponse<HealthBody>> {
    return this.wrap({
      status: "ok",
      models: { uniform: "v1", attribute: "v1" },
      registry_digest: this.registryDigest,
      kernel_backend: "auto",
      cases: 1,
    });
  }

  async uploadCase(): Promise<ApiResponse<CaseBody>> {
    this.caseUploads += 1;
    return this.wrap(this.caseBody(uniformDistribution()));
  }

  async getCase(): Promise<ApiResponse<CaseBody>> {
    return this.wrap(this.caseBody(uniformDistribution()));
  }

  async editAttributes(
    _caseId: string,
    distribution: Distribution,
    options?: SearchOptions,
  ): Promise<ApiResponse<CaseBody>> {
    if (this.rejectNextEdit) {
      this.rejectNextEdit = false;
      throw new ApiError(400, "SchemaViolation", "rows must sum to 1");
    }
    this.edits.push(distribution);
    this.auditLength += 1;
    return this.wrap(this.caseBody(distribution, options));
  }

  async search(
    distribution: Distribution,
    options?: SearchOptions,
  ): Promise<ApiResponse<SearchResultBody>> {
    this.searches.push({ dist: distribution, options });
    return this.wrap(this.result(distribution, options));
  }
}

describe("renormalizeEdit", () => {
  it("keeps the bar sum at 1 within 0.001 for random gestures", () => {
    let vec = Array(7).fill(1 / 7);
    let seed = 42;
    const rand = () => ((seed = (seed * 1103515245 + 12345) % 2 ** 31) / 2 ** 31);
    for (let i = 0; i < 500; i++) {
      vec = renormalizeEdit(vec, Math.floor(rand() * 7), rand());
      const sum = vec.reduce((a, b) => a + b, 0);
      expect(Math.abs(sum - 1)).toBeLessThan(0.001);
      for (const p of vec) expect(p).toBeGreaterThanOrEqual(-1e-12);
    }
  });

  it("sets the edited class exactly and scales the rest proportionally", () => {
    const vec = [0.5, 0.5, 0, 0, 0, 0, 0];
    const out = renormalizeEdit(vec, 2, 0.4);
    expect(out[2]).toBeCloseTo(0.4, 12);
    expect(out[0]).toBeCloseTo(0.3, 12);
    expect(out[1]).toBeCloseTo(0.3, 12);
  });

  it("splits equally when the remaining mass was zero", () => {
    const vec = [1, 0, 0, 0, 0, 0, 0];
    const out = renormalizeEdit(vec, 0, 0.4);
    for (let i = 1; i < 7; i++) expect(out[i]).toBeCloseTo(0.1, 12);
  });
});

describe("TriageModel", () => {
  async function openCase() {
    const api = new FakeApi();
    const model = new TriageModel(api);
    await model.upload(new Uint8Array([1, 2, 3]));
    return { api, model };
  }

  it("upload populates verdict, gauge, warnings, ranking", async () => {
    const { model } = await openCase();
    expect(model.verdict).toBe(true);
    expect(model.probability).toBeCloseTo(0.91);
    expect(model.warnings[0]).toMatch("oversized");
    expect(model.rankingView?.ranking.length).toBeGreaterThan(0);
    expect(model.history.map((h) => h.action)).toEqual(["uploaded"]);
  });

  it("ranking always comes from the last server response", async () => {
    const { api, model } = await openCase();
    model.stageEdit("SHIRT", 4, 0.9);
    await model.commitEdit();
    const sent = api.edits[0]!;
    const expected = JSON.stringify(
      (await api.search(sent)).body.ranking.map((e) => e.school_id),
    );
    // api.search pushed one extra entry; displayed ranking must match bytes
    expect(JSON.stringify(model.rankingView!.ranking.map((e) => e.school_id))).toBe(expected);
  });

  it("commit renormalizes, posts the full distribution, appends history", async () => {
    const { api, model } = await openCase();
    model.stageEdit("SHIRT", 4, 1.0);
    await model.commitEdit();
    expect(api.edits.length).toBe(1);
    const sent = api.edits[0]!;
    expect(sent.SHIRT[4]).toBeCloseTo(1.0, 9);
    expect(sent.SHIRT.reduce((a, b) => a + b, 0)).toBeCloseTo(1.0, 9);
    expect(model.history.map((h) => h.action)).toEqual(["uploaded", "edited"]);
    expect(model.staged).toBeNull();
  });

  it("no-op commit leaves the ranking unchanged", async () => {
    const { model } = await openCase();
    const before = model.rankingView!.raw;
    await model.commitEdit(); // nothing staged
    expect(model.rankingView!.raw).toBe(before);
  });

  it("undo restores the pre-edit snapshot and re-queries", async () => {
    const { api, model } = await openCase();
    const beforeDist = JSON.stringify(model.committed);
    const beforeRanking = model.rankingView!.raw;
    model.stageEdit("SHIRT", 4, 0.95);
    await model.commitEdit();
    expect(model.rankingView!.raw).not.toBe(beforeRanking);
    await model.undo();
    expect(JSON.stringify(model.committed)).toBe(beforeDist);
    expect(JSON.stringify(model.rankingView!.ranking)).toBe(
      JSON.stringify((await api.search(model.committed!)).body.ranking),
    );
    expect(model.history.at(-1)!.action).toBe("undo");
  });

  it("server rejection reverts the edit and records it", async () => {
    const { api, model } = await openCase();
    const before = JSON.stringify(model.committed);
    const beforeRanking = model.rankingView!.raw;
    api.rejectNextEdit = true;
    model.stageEdit("TIE", 2, 0.7);
    await model.commitEdit();
    expect(model.error).toMatch("rejected");
    expect(JSON.stringify(model.committed)).toBe(before);
    expect(model.staged).toBeNull();
    expect(model.rankingView!.raw).toBe(beforeRanking);
    expect(model.history.at(-1)!.action).toBe("rejected");
  });

  it("history is append-only across interactions", async () => {
    const { model } = await openCase();
    const seen: string[] = [];
    const check = () => {
      const actions = model.history.map((h) => `${h.action}:${h.detail}`);
      expect(actions.slice(0, seen.length)).toEqual(seen);
      seen.length = 0;
      seen.push(...actions);
    };
    check();
    model.stageEdit("JUMPER", 1, 0.5);
    await model.commitEdit();
    check();
    await model.applyRegionFilter(["R1"]);
    check();
    await model.undo();
    check();
  });

  it("region filter: all-regions equals no filter; empty region messages", async () => {
    const { model } = await openCase();
    const unfiltered = JSON.stringify(model.rankingView!.ranking);
    await model.applyRegionFilter(["R1", "R2"]);
    expect(JSON.stringify(model.rankingView!.ranking)).toBe(unfiltered);
    await model.applyRegionFilter(["R9"]);
    expect(model.rankingView!.ranking).toEqual([]);
    expect(model.emptyRegionMessage).toBe("no schools in region");
  });

  it("narrowing the region filter never adds schools", async () => {
    const { model } = await openCase();
    await model.applyRegionFilter(["R1", "R2"]);
    const wide = new Set(model.rankingView!.ranking.map((e) => e.school_id));
    await model.applyRegionFilter(["R1"]);
    const narrow = model.rankingView!.ranking.map((e) => e.school_id);
    expect(narrow.every((s) => wide.has(s))).toBe(true);
    expect(narrow.length).toBeLessThanOrEqual(wide.size);
  });

  it("stale flags: registry digest and concurrent edits", async () => {
    const { api, model } = await openCase();
    await model.refreshStaleness();
    expect(model.rankingStale).toBe(false);
    expect(model.staleCase).toBe(false);
    api.registryDigest = "reg-v2";
    await model.refreshStaleness();
    expect(model.rankingStale).toBe(true);
    api.auditLength += 2; // someone else edited the case
    await model.refreshStaleness();
    expect(model.staleCase).toBe(true);
  });

  it("bars sum to 1 within 0.001 after any interaction", async () => {
    const { model } = await openCase();
    model.stageEdit("DRESS", 0, 0.8);
    model.stageEdit("DRESS", 3, 0.3);
    model.stageEdit("SHIRT", 6, 0.0);
    for (const item of ITEMS) {
      const sum = model.displayedDistribution![item].reduce((a, b) => a + b, 0);
      expect(Math.abs(sum - 1)).toBeLessThan(0.001);
    }
    await model.commitEdit();
    for (const item of ITEMS) {
      const sum = model.displayedDistribution![item].reduce((a, b) => a + b, 0);
      expect(Math.abs(sum - 1)).toBeLessThan(0.001);
    }
  });
});
