/**
 * Minimal markdown renderer for assistant answers.
 *
 * Escape-first: all HTML in the source text is neutralized before any
 * formatting is applied, so model output can never inject markup. Supported
 * syntax is the small subset answers actually use: **bold**, *italic*,
 * `inline code`, [links](https://...), and paragraph breaks.
 */

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

/** Only plain web links survive; anything else (javascript:, data:) is dropped. */
export function safeHref(url: string): string | null {
  try {
    const parsed = new URL(url);
    if (parsed.protocol === 'http:' || parsed.protocol === 'https:') {
      return parsed.href;
    }
  } catch {
    // not an absolute URL
  }
  return null;
}

function renderInline(escaped: string): string {
  return escaped
    .replace(/`([^`]+)`/g, '<code>$1</code>')
    .replace(/\*\*([^*]+)\*\*/g, '<strong>$1</strong>')
    .replace(/\*([^*]+)\*/g, '<em>$1</em>')
    .replace(/\[([^\]]+)\]\(([^)\s]+)\)/g, (match, label: string, url: string) => {
      const href = safeHref(url);
      if (href === null) {
        return label; // drop the link, keep the text
      }
      return `<a href="${escapeHtml(href)}" target="_blank" rel="noopener noreferrer">${label}</a>`;
    });
}

export function renderMarkdown(text: string): string {
  const paragraphs = escapeHtml(text)
    .split(/\n{2,}/)
    .map((p) => p.trim())
    .filter((p) => p.length > 0);
  return paragraphs
    .map((p) => `<p>${renderInline(p.replace(/\n/g, '<br>'))}</p>`)
    .join('');
}
