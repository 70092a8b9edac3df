import { escapeHtml, renderChart } from "./chart.js";
import type { UiTurn } from "./chat.js";

// HTML for one conversation entry. A chart section appears exactly when the
// payload carries chart data; citations render as a chunk-id list.
export function renderTurn(turn: UiTurn): string {
  const user = `<div class="bubble user">${escapeHtml(turn.message)}</div>`;
  if (turn.state === "pending") {
    return section(turn, user + `<div class="bubble assistant pending">…</div>`);
  }
  if (turn.state === "error") {
    return section(
      turn,
      user +
      `<div class="bubble assistant error">${escapeHtml(turn.error ?? "request failed")} ` +
      `<button class="retry" data-retry="${turn.localId}">retry</button></div>`,
    );
  }
  const payload = turn.payload!;
  const parts = [user, `<div class="bubble assistant">${escapeHtml(payload.answer_text)}</div>`];
  if (payload.citations.length > 0) {
    const items = payload.citations
      .map((cid) => `<li><code>${escapeHtml(cid)}</code></li>`)
      .join("");
    parts.push(`<ul class="citations">${items}</ul>`);
  }
  if (payload.chart !== null) {
    parts.push(`<div class="chart-holder">${renderChart(payload.chart)}</div>`);
  }
  return section(turn, parts.join(""));
}

function section(turn: UiTurn, inner: string): string {
  return `<section class="turn" data-turn="${turn.localId}" data-state="${turn.state}">${inner}</section>`;
}

export function renderConversation(turns: UiTurn[]): string {
  return turns.map(renderTurn).join("");
}
