/** Search form: five aggregates round-trip unchanged; local validation first. */
import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import { parseWindow, submitSearch } from '../src/search.js';
import { renderSearchResult } from '../src/views.js';

import searchFixture from './fixtures/search.json';
import searchEmptyFixture from './fixtures/search_empty.json';

function clientServing(doc: unknown, log: string[] = []) {
  const fetchFn: typeof fetch = async (input) => {
    log.push(String(input));
    return new Response(JSON.stringify(doc), {
      status: 200,
      headers: { 'Content-Type': 'application/json' },
    });
  };
  return new ApiClient('', fetchFn);
}

describe('search form', () => {
  it('round-trips the five aggregates unchanged', async () => {
    const outcome = await submitSearch(
      clientServing(searchFixture),
      'cam-1',
      '2023-11-14T22:13:20Z',
      '2023-11-14T22:13:50Z',
    );
    expect(outcome.kind).toBe('result');
    if (outcome.kind !== 'result') return;
    expect(outcome.result.total).toBe(searchFixture.total);
    expect(outcome.result.average).toBe(searchFixture.average);
    expect(outcome.result.max).toBe(searchFixture.max);
    expect(outcome.result.min).toBe(searchFixture.min);
    expect(outcome.result.most_frequent).toBe(searchFixture.most_frequent);

    const html = renderSearchResult(outcome.result);
    for (const field of ['total', 'average', 'max', 'min', 'most_frequent'] as const) {
      expect(html).toContain(
        `<dd data-field="${field}">${searchFixture[field]}</dd>`,
      );
    }
  });

  it('sends no request for an inverted window', async () => {
    const log: string[] = [];
    const outcome = await submitSearch(
      clientServing(searchFixture, log),
      'cam-1',
      '2024-01-02T00:00:00Z',
      '2024-01-01T00:00:00Z',
    );
    expect(outcome.kind).toBe('error');
    expect(log).toEqual([]);
  });

  it('rejects unparseable dates locally', () => {
    expect(parseWindow('yesterday-ish', '2024-01-01')).toHaveProperty('error');
  });

  it('renders the empty-window placeholder', () => {
    const html = renderSearchResult(searchEmptyFixture);
    expect(html).toContain('no data in range');
  });

  it('passes the window through as epoch milliseconds', async () => {
    const log: string[] = [];
    await submitSearch(
      clientServing(searchFixture, log),
      'cam-1',
      '2023-11-14T22:13:20Z',
      '2023-11-14T22:13:50Z',
    );
    expect(log[0]).toBe('/cameras/cam-1/search?from=1700000000000&to=1700000030000');
  });
});
