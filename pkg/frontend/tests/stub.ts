/** Recorded-response stub server: maps "METHOD path" to canned replies. */

import { FetchLike } from '../src/api';

export interface StubRoute {
  status: number;
  body?: unknown;
}

export function stubFetch(routes: Record<string, StubRoute | StubRoute[]>): {
  fetch: FetchLike;
  calls: { method: string; path: string; body?: unknown }[];
} {
  const remaining = new Map<string, StubRoute[]>();
  for (const [key, value] of Object.entries(routes)) {
    remaining.set(key, Array.isArray(value) ? [...value] : [value]);
  }
  const calls: { method: string; path: string; body?: unknown }[] = [];

  const fetchImpl: FetchLike = async (url, init) => {
    const method = init?.method ?? 'GET';
    const path = new URL(url, 'http://stub').pathname;
    calls.push({
      method,
      path,
      body: init?.body ? JSON.parse(String(init.body)) : undefined,
    });
    const queue = remaining.get(`${method} ${path}`);
    if (!queue || queue.length === 0) {
      throw new Error(`no recorded response for ${method} ${path}`);
    }
    const route = queue.length > 1 ? queue.shift()! : queue[0]!;
    return new Response(route.body === undefined ? null : JSON.stringify(route.body), {
      status: route.status,
      headers: { 'Content-Type': 'application/json' },
    });
  };

  return { fetch: fetchImpl, calls };
}

export const RECORDED_ANSWER = {
  answer: 'Led bulbs use **up to 80% less** energy. [Ref: https://ex.org/bulbs]',
  citations: ['https://ex.org/bulbs'],
  language: 'en',
  empty_context: false,
  diagnostics: { llm_calls: 2, embedding_calls: 1, embedded_texts: 3, wall_time: 0.42 },
};

export const RECORDED_NO_RESULTS = {
  answer: 'No results were found for this question in the knowledge base.',
  citations: [],
  language: 'en',
  empty_context: true,
  diagnostics: { llm_calls: 1, embedding_calls: 1, embedded_texts: 1, wall_time: 0.1 },
};

export const RECORDED_502 = {
  status: 502,
  body: { code: 'provider_failure', message: 'upstream model unavailable', retryable: true },
};
