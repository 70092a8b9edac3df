import type { EfAttribute, EfOutcomePayload, EfQueryBody, RecommendationPayload } from "./types.js";
import { EF_ATTRIBUTES } from "./types.js";
import { escapeHtml } from "./chart.js";

export interface EfBackend {
  efRecommend(body: EfQueryBody): Promise<EfOutcomePayload>;
}

// Guided-dialogue view model: posts the current (possibly partial) form and
// mirrors the server's verdict — either the exact set of missing attributes
// to highlight, or the ranked table to render as delivered.
export class EfDialogue {
  readonly form: Record<EfAttribute, string> = {
    vehicle_type: "",
    fuel_type: "",
    emission_standard: "",
    region: "",
  };
  highlighted: EfAttribute[] = [];
  recommendations: RecommendationPayload[] = [];
  error: string | null = null;
  submitted = false;

  constructor(private readonly backend: EfBackend) {}

  setField(name: EfAttribute, value: string): void {
    this.form[name] = value;
  }

  private body(): EfQueryBody {
    const body: EfQueryBody = {};
    for (const name of EF_ATTRIBUTES) {
      const value = this.form[name].trim();
      if (value) body[name] = value;
    }
    return body;
  }

  async submit(): Promise<void> {
    this.submitted = true;
    this.error = null;
    try {
      const outcome = await this.backend.efRecommend(this.body());
      if (!outcome.complete) {
        this.highlighted = outcome.missing.filter(isEfAttribute);
        this.recommendations = [];
      } else {
        this.highlighted = [];
        this.recommendations = outcome.recommendations;
      }
    } catch (err) {
      this.highlighted = [];
      this.recommendations = [];
      this.error = err instanceof Error ? err.message : String(err);
    }
  }

  isHighlighted(name: EfAttribute): boolean {
    return this.highlighted.includes(name);
  }
}

function isEfAttribute(name: string): name is EfAttribute {
  return (EF_ATTRIBUTES as readonly string[]).includes(name);
}

function formatValues(rec: RecommendationPayload): string {
  return Object.entries(rec.pollutant_values)
    .map(([species, pv]) => `${species}: ${pv.value} ${pv.units}`)
    .join("; ");
}

function formatGrades(rec: RecommendationPayload): string {
  if (!rec.grades) return "—";
  const g = rec.grades;
  return [g.data_representativeness, g.methodological_reliability,
          g.sample_representativeness, g.data_authority].join("");
}

// Rows come out exactly in server order; nothing is re-sorted client-side.
export function renderEfTable(recommendations: RecommendationPayload[]): string {
  if (recommendations.length === 0) {
    return `<p class="ef-empty">No matching emission factors.</p>`;
  }
  const rows = recommendations.map((rec) =>
    `<tr data-ef="${escapeHtml(rec.ef_id)}">` +
    `<td>${rec.rank}</td>` +
    `<td><span class="badge badge-${rec.tier}">${rec.tier}</span></td>` +
    `<td>${escapeHtml(rec.ef_id)}</td>` +
    `<td>${escapeHtml(formatValues(rec))}</td>` +
    `<td>${rec.composite_score === null ? "—" : rec.composite_score.toFixed(2)}</td>` +
    `<td>${formatGrades(rec)}</td>` +
    `<td>${escapeHtml(rec.citation)}</td>` +
    `</tr>`,
  );
  return (
    `<table class="ef-table"><thead><tr>` +
    `<th>rank</th><th>tier</th><th>factor</th><th>values</th>` +
    `<th>score</th><th>grades</th><th>citation</th>` +
    `</tr></thead><tbody>${rows.join("")}</tbody></table>`
  );
}
