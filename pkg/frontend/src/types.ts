/** Wire types mirroring the service's JSON interchange bodies. */

export const ITEMS = [
  "SHIRT",
  "TROUSERS",
  "OUTER_COAT",
  "JUMPER",
  "DRESS",
  "TIE",
] as const;
export type ClothingItem = (typeof ITEMS)[number];

export const COLORS = [
  "RED_BROWN",
  "YELLOW_ORANGE",
  "GREEN",
  "BLUE_PURPLE",
  "WHITE",
  "BLACK_GREY",
  "NO_COLOR",
] as const;
export type ColorClass = (typeof COLORS)[number];

/** Per item, 7 probabilities in COLORS order summing to 1. */
export type Distribution = Record<ClothingItem, number[]>;

export interface RankedSchool {
  school_id: string;
  variant_index: number;
  score: number;
  mismatch_count: number;
}

export interface SearchResultBody {
  schema: string;
  registry_digest: string;
  query: {
    distribution: Distribution;
    region_filter: string[] | null;
    max_mismatches: number | null;
    top_n: number;
    epsilon: number;
  };
  ranking: RankedSchool[];
}

export interface AuditEntry {
  at: string;
  action: string;
  [key: string]: unknown;
}

export interface CaseBody {
  case_id: string;
  image_ref: string;
  uniform_probability: number;
  verdict: boolean;
  distribution: Distribution | null;
  edited_distribution: Distribution | null;
  search_result: SearchResultBody | null;
  warnings: string[];
  crop_box: number[] | null;
  audit: AuditEntry[];
}

export interface SchoolProfileBody {
  school_id: string;
  display_name: string;
  region_code: string;
  variants: Record<ClothingItem, ColorClass>[];
}

export interface HealthBody {
  status: string;
  models: Record<string, string>;
  registry_digest: string;
  kernel_backend: string;
  cases: number;
}
