/**
 * Turn a ChatTurn into an HTML string. Every displayed fact comes from a
 * service response field; citation hrefs are the returned uris verbatim.
 */

import { ChatTurn } from './chat';
import { escapeHtml, renderMarkdown } from './markdown';

function renderCitations(citations: string[]): string {
  if (citations.length === 0) {
    return '';
  }
  const links = citations
    .map(
      (uri) =>
        `<li><a class="citation" href="${escapeHtml(uri)}" target="_blank" rel="noopener noreferrer">${escapeHtml(uri)}</a></li>`,
    )
    .join('');
  return `<ul class="citations">${links}</ul>`;
}

function renderDiagnostics(turn: ChatTurn): string {
  if (!turn.diagnostics) {
    return '';
  }
  const d = turn.diagnostics;
  const summary = `${d.llm_calls} LLM calls, ${d.embedding_calls} embedding calls, ${d.wall_time.toFixed(2)}s`;
  const panel = turn.context
    ? `<details class="context-panel"><summary>Retrieved context</summary><pre>${escapeHtml(turn.context)}</pre></details>`
    : '';
  return `<div class="diagnostics">${escapeHtml(summary)}</div>${panel}`;
}

export function renderTurn(turn: ChatTurn, index: number): string {
  const question = `<div class="question">${escapeHtml(turn.question)}</div>`;

  if (turn.status === 'pending') {
    return `<div class="turn pending">${question}<div class="spinner">…</div></div>`;
  }

  if (turn.status === 'error' && turn.error) {
    const retry = turn.error.retryable
      ? `<button class="retry" data-turn="${index}">Retry</button>`
      : '';
    return (
      `<div class="turn error">${question}` +
      `<div class="error-message">${escapeHtml(turn.error.message)} (${escapeHtml(turn.error.code)})</div>` +
      `${retry}</div>`
    );
  }

  const badge = turn.emptyContext ? '<span class="badge no-results">no results</span>' : '';
  return (
    `<div class="turn answered${turn.emptyContext ? ' empty-context' : ''}">${question}` +
    `${badge}<div class="answer">${renderMarkdown(turn.answer)}</div>` +
    `${renderCitations(turn.citations)}${renderDiagnostics(turn)}</div>`
  );
}

export function renderSession(turns: ChatTurn[]): string {
  return `<div class="chat">${turns.map((t, i) => renderTurn(t, i)).join('')}</div>`;
}
