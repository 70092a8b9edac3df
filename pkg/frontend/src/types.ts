// Wire types mirroring the backend JSON API verbatim.

export type ChartKind = "pie" | "stacked_bar" | "line";

export interface ChartSeries {
  name: string;
  values: number[];
}

export interface ChartData {
  kind: ChartKind;
  title: string;
  categories: string[];
  series: ChartSeries[];
  units: string;
}

export interface TraceEntry {
  ok: boolean;
  function: string | null;
  arguments: Record<string, unknown> | null;
  detail: string;
}

export interface ChatTurnPayload {
  session_id: string;
  turn_index: number;
  user_text: string;
  category: "KnowledgeQA" | "DataAnalysis";
  answer_text: string;
  citations: string[];
  chart: ChartData | null;
  function_trace: TraceEntry[];
}

export interface ApiErrorPayload {
  code: string;
  message: string;
  details: unknown;
}

export interface EfQueryBody {
  vehicle_type?: string;
  fuel_type?: string;
  emission_standard?: string;
  region?: string;
}

export interface GradesPayload {
  data_representativeness: string;
  methodological_reliability: string;
  sample_representativeness: string;
  data_authority: string;
}

export interface RecommendationPayload {
  rank: number;
  tier: "guideline" | "literature";
  ef_id: string;
  pollutant_values: Record<string, { value: number; units: string }>;
  composite_score: number | null;
  grades: GradesPayload | null;
  citation: string;
}

export interface EfOutcomePayload {
  complete: boolean;
  missing: string[];
  recommendations: RecommendationPayload[];
}

export const EF_ATTRIBUTES = [
  "vehicle_type",
  "fuel_type",
  "emission_standard",
  "region",
] as const;

export type EfAttribute = (typeof EF_ATTRIBUTES)[number];
