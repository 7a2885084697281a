/** Triage view-model: all console state and the rules for mutating it.
 *
 * The model never computes scores: every displayed ranking is the parsed
 * form of a server response, kept alongside its raw JSON text so tests
 * (and audits) can trace displayed bytes back to the wire.
 */

import type { ApiResponse, SearchOptions } from "./api";
import { ApiError } from "./api";
import type {
  CaseBody,
  ClothingItem,
  Distribution,
  HealthBody,
  RankedSchool,
  SearchResultBody,
} from "./types";
import { COLORS, ITEMS } from "./types";

/** The slice of ApiClient the model needs (structural, easy to fake). */
export interface TriageApi {
  health(): Promise<ApiResponse<HealthBody>>;
  uploadCase(imageBytes: ArrayBuffer | Uint8Array): Promise<ApiResponse<CaseBody>>;
  getCase(caseId: string): Promise<ApiResponse<CaseBody>>;
  editAttributes(
    caseId: string,
    distribution: Distribution,
    options?: SearchOptions,
  ): Promise<ApiResponse<CaseBody>>;
  search(
    distribution: Distribution,
    options?: SearchOptions,
  ): Promise<ApiResponse<SearchResultBody>>;
}

export interface HistoryEntry {
  action: "uploaded" | "edited" | "undo" | "region-filter" | "rejected";
  detail: string;
}

export interface RankingView {
  ranking: RankedSchool[];
  registryDigest: string;
  /** JSON text of the search_result body this view was parsed from. */
  raw: string;
}

function cloneDistribution(dist: Distribution): Distribution {
  const out = {} as Distribution;
  for (const item of ITEMS) out[item] = [...dist[item]];
  return out;
}

export function barsSum(dist: Distribution, item: ClothingItem): number {
  return dist[item].reduce((a, b) => a + b, 0);
}

/** Set one class probability and renormalize the item's remaining mass
 * proportionally (equal split when the rest is all zero). */
export function renormalizeEdit(
  vector: number[],
  colorIndex: number,
  value: number,
): number[] {
  const v = Math.min(1, Math.max(0, value));
  const rest = 1 - v;
  const others = vector.reduce((acc, p, i) => (i === colorIndex ? acc : acc + p), 0);
  const out = vector.map((p, i) => {
    if (i === colorIndex) return v;
    if (others <= 0) return rest / (vector.length - 1);
    return (p / others) * rest;
  });
  // Float cleanup: push any residual onto the edited entry.
  const sum = out.reduce((a, b) => a + b, 0);
  out[colorIndex] = out[colorIndex]! + (1 - sum);
  return out;
}

export class TriageModel {
  caseId: string | null = null;
  verdict: boolean | null = null;
  probability: number | null = null;
  warnings: string[] = [];
  /** Last server-acknowledged distribution. */
  committed: Distribution | null = null;
  /** Uncommitted slider state (null = no pending edit). */
  staged: Distribution | null = null;
  rankingView: RankingView | null = null;
  latestRegistryDigest: string | null = null;
  regionFilter: string[] | null = null;
  history: HistoryEntry[] = [];
  private undoStack: Distribution[] = [];
  auditLength = 0;
  staleCase = false;
  emptyRegionMessage: string | null = null;
  error: string | null = null;

  constructor(private api: TriageApi) {}

  get displayedDistribution(): Distribution | null {
    return this.staged ?? this.committed;
  }

  get canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  get rankingStale(): boolean {
    return (
      this.rankingView !== null &&
      this.latestRegistryDigest !== null &&
      this.rankingView.registryDigest !== this.latestRegistryDigest
    );
  }

  private takeRanking(result: SearchResultBody): void {
    this.rankingView = {
      ranking: result.ranking,
      registryDigest: result.registry_digest,
      raw: JSON.stringify(result),
    };
    this.emptyRegionMessage =
      result.ranking.length === 0 && this.regionFilter !== null
        ? "no schools in region"
        : null;
  }

  private takeCase(resp: ApiResponse<CaseBody>): void {
    const body = resp.body;
    this.caseId = body.case_id;
    this.verdict = body.verdict;
    this.probability = body.uniform_probability;
    this.warnings = body.warnings;
    this.auditLength = body.audit.length;
    const dist = body.edited_distribution ?? body.distribution;
    this.committed = dist ? cloneDistribution(dist) : null;
    this.staged = null;
    if (body.search_result) this.takeRanking(body.search_result);
    else this.rankingView = null;
  }

  async upload(imageBytes: ArrayBuffer | Uint8Array): Promise<void> {
    this.error = null;
    const resp = await this.api.uploadCase(imageBytes);
    this.undoStack = [];
    this.history = [];
    this.regionFilter = null;
    this.takeCase(resp);
    this.staleCase = false;
    this.history.push({
      action: "uploaded",
      detail: `${resp.body.image_ref}: verdict=${resp.body.verdict} p=${resp.body.uniform_probability.toFixed(3)}`,
    });
  }

  /** Slider gesture: stage one class value with proportional renorm. */
  stageEdit(item: ClothingItem, colorIndex: number, value: number): void {
    if (!this.committed) throw new Error("no editable distribution (negative verdict?)");
    const base = this.staged ?? cloneDistribution(this.committed);
    base[item] = renormalizeEdit(base[item], colorIndex, value);
    this.staged = base;
  }

  private searchOptions(): SearchOptions {
    return this.regionFilter !== null ? { regionFilter: this.regionFilter } : {};
  }

  /** Commit the staged edit: server reranks; rejection reverts. */
  async commitEdit(): Promise<void> {
    if (!this.caseId || !this.committed) throw new Error("no open case");
    const toSend = this.staged ?? this.committed;
    const prior = this.committed;
    this.error = null;
    try {
      const resp = await this.api.editAttributes(this.caseId, toSend, this.searchOptions());
      this.undoStack.push(prior);
      this.takeCase(resp);
      this.history.push({ action: "edited", detail: this.describe(toSend, prior) });
    } catch (err) {
      this.staged = null; // revert to the committed view
      if (err instanceof ApiError) {
        this.error = `edit rejected: ${err.message}`;
        this.history.push({ action: "rejected", detail: err.message });
        return;
      }
      throw err;
    }
  }

  /** Restore the previous committed distribution and re-query. */
  async undo(): Promise<void> {
    if (!this.caseId) throw new Error("no open case");
    const prior = this.undoStack.pop();
    if (!prior) return;
    const resp = await this.api.editAttributes(this.caseId, prior, this.searchOptions());
    this.takeCase(resp);
    this.history.push({ action: "undo", detail: "restored previous distribution" });
  }

  /** Re-rank under a region filter (null = all regions). */
  async applyRegionFilter(regions: string[] | null): Promise<void> {
    if (!this.committed) throw new Error("no open case");
    this.regionFilter = regions;
    // top_n stays at the server default so widening a filter can grow
    // the list back; the server response remains the source of truth.
    const resp = await this.api.search(this.committed, this.searchOptions());
    this.takeRanking(resp.body);
    this.history.push({
      action: "region-filter",
      detail: regions === null ? "all regions" : regions.join(","),
    });
  }

  /** Poll server identity; flags stale rankings and concurrent edits. */
  async refreshStaleness(): Promise<void> {
    const health = await this.api.health();
    this.latestRegistryDigest = health.body.registry_digest;
    if (this.caseId) {
      const current = await this.api.getCase(this.caseId);
      this.staleCase = current.body.audit.length > this.auditLength;
    }
  }

  private describe(next: Distribution, prev: Distribution): string {
    for (const item of ITEMS) {
      for (let c = 0; c < COLORS.length; c++) {
        if (Math.abs(next[item][c]! - prev[item][c]!) > 1e-9) {
          return `${item} adjusted (${COLORS[c]} -> ${next[item][c]!.toFixed(3)})`;
        }
      }
    }
    return "no-op commit";
  }
}
