/** Thin HTTP client for the uniformid service.
 *
 * Every response is returned with its raw body text so the view layer can
 * stay byte-traceable to what the server actually sent.
 */

import type { CaseBody, Distribution, HealthBody, SchoolProfileBody, SearchResultBody } from "./types";

export interface ApiResponse<T> {
  raw: string;
  body: T;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export interface SearchOptions {
  regionFilter?: string[] | null;
  maxMismatches?: number | null;
  topN?: number;
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: BodyInit, contentType?: string): Promise<ApiResponse<T>> {
    const headers: Record<string, string> = {};
    if (contentType) headers["Content-Type"] = contentType;
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, { method, body, headers });
    const raw = await resp.text();
    let parsed: unknown = null;
    try {
      parsed = raw ? JSON.parse(raw) : null;
    } catch {
      throw new ApiError(resp.status, "BadJson", `unparseable response from ${path}`);
    }
    if (!resp.ok) {
      const err = parsed as { error?: string; message?: string } | null;
      throw new ApiError(resp.status, err?.error ?? "HttpError", err?.message ?? `${resp.status} from ${path}`);
    }
    return { raw, body: parsed as T };
  }

  health(): Promise<ApiResponse<HealthBody>> {
    return this.request("GET", "/health");
  }

  uploadCase(imageBytes: ArrayBuffer | Uint8Array): Promise<ApiResponse<CaseBody>> {
    const payload = imageBytes instanceof Uint8Array
      ? imageBytes.slice().buffer
      : imageBytes;
    return this.request("POST", "/cases", payload, "application/octet-stream");
  }

  getCase(caseId: string): Promise<ApiResponse<CaseBody>> {
    return this.request("GET", `/cases/${caseId}`);
  }

  editAttributes(
    caseId: string,
    distribution: Distribution,
    options: SearchOptions = {},
  ): Promise<ApiResponse<CaseBody>> {
    const body: Record<string, unknown> = { distribution };
    if (options.regionFilter != null) body["region_filter"] = options.regionFilter;
    if (options.topN != null) body["top_n"] = options.topN;
    return this.request("POST", `/cases/${caseId}/attributes`, JSON.stringify(body), "application/json");
  }

  search(distribution: Distribution, options: SearchOptions = {}): Promise<ApiResponse<SearchResultBody>> {
    const body: Record<string, unknown> = { distribution };
    if (options.regionFilter != null) body["region_filter"] = options.regionFilter;
    if (options.maxMismatches != null) body["max_mismatches"] = options.maxMismatches;
    if (options.topN != null) body["top_n"] = options.topN;
    return this.request("POST", "/search", JSON.stringify(body), "application/json");
  }

  schools(regions?: string[]): Promise<ApiResponse<{ schools: SchoolProfileBody[]; registry_digest: string }>> {
    const query = regions && regions.length ? `?region=${regions.join(",")}` : "";
    return this.request("GET", `/schools${query}`);
  }
}
