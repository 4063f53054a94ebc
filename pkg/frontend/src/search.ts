/** Search-form handling: local validation happens before any request. */
import type { ApiClient, SearchResult } from './api.js';

export type SearchFormResult =
  | { kind: 'error'; error: string }
  | { kind: 'result'; result: SearchResult };

export function parseWindow(
  fromInput: string,
  toInput: string,
): { t0: number; t1: number } | { error: string } {
  const t0 = Date.parse(fromInput);
  const t1 = Date.parse(toInput);
  if (Number.isNaN(t0) || Number.isNaN(t1)) {
    return { error: 'enter valid dates' };
  }
  if (t0 > t1) {
    return { error: "'from' must not be after 'to'" };
  }
  return { t0, t1 };
}

export async function submitSearch(
  client: ApiClient,
  cameraId: string,
  fromInput: string,
  toInput: string,
): Promise<SearchFormResult> {
  const window = parseWindow(fromInput, toInput);
  if ('error' in window) {
    return { kind: 'error', error: window.error };
  }
  try {
    return { kind: 'result', result: await client.search(cameraId, window.t0, window.t1) };
  } catch (err) {
    return { kind: 'error', error: err instanceof Error ? err.message : String(err) };
  }
}
