/**
 * HTML renderers for the dashboard screens. Every number that appears in the
 * output is copied verbatim from an API response field; no analytics are
 * computed here beyond grouping events into chart buckets.
 */
import type {
  AnomalyEvent,
  BevSnapshot,
  CameraStatus,
  CameraSummary,
  Heatmap,
  PushNotification,
  SearchResult,
} from './api.js';

export function esc(text: unknown): string {
  return String(text)
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function fmtTs(tsMs: number): string {
  return new Date(tsMs).toISOString().replace('T', ' ').slice(0, 19) + ' UTC';
}

export function renderCameraCard(cam: CameraSummary, status: CameraStatus): string {
  const border = cam.live ? 'live' : 'down';
  const body = status.empty
    ? '<span class="nodata">no data</span>'
    : `<span class="count">${esc(status.count)}</span>` +
      `<span class="ts">${esc(fmtTs(status.ts_ms!))}</span>`;
  return (
    `<div class="camera-card ${border}" data-camera="${esc(cam.camera_id)}">` +
    `<h3>${esc(cam.display_name)}</h3>${body}</div>`
  );
}

const GAUGE_STATES = ['Under', 'Normal', 'Over', 'Unknown'] as const;

export function renderIndicatorGauge(status: CameraStatus): string {
  const state = status.empty ? 'Unknown' : (status.indicator ?? 'Unknown');
  const segments = GAUGE_STATES.map(
    (s) => `<span class="seg ${s === state ? 'on' : ''}">${s}</span>`,
  ).join('');
  const count = status.empty ? '' : `<div class="gauge-count">${esc(status.count)}</div>`;
  return `<div class="gauge" data-state="${esc(state)}">${segments}${count}</div>`;
}

export function renderCameraScreen(status: CameraStatus): string {
  if (status.empty) {
    return (
      `<section class="camera-screen" data-camera="${esc(status.camera_id)}">` +
      '<p class="nodata">no data</p></section>'
    );
  }
  return (
    `<section class="camera-screen" data-camera="${esc(status.camera_id)}">` +
    `<p class="headline"><span class="count">${esc(status.count)}</span> people at ` +
    `<span class="ts">${esc(fmtTs(status.ts_ms!))}</span></p>` +
    renderIndicatorGauge(status) +
    '<nav><button data-popup="heatmap">Heat map</button>' +
    '<button data-popup="bev">Bird\'s-eye view</button>' +
    '<a href="#stats">Daily stats</a></nav></section>'
  );
}

export function renderHeatmap(grid: Heatmap): string {
  const peak = Math.max(1, ...grid.cells);
  const cells = grid.cells
    .map((c) => {
      // monotone color map: opacity scales with cell count
      const alpha = (c / peak).toFixed(3);
      return `<i style="opacity:${alpha}" title="${esc(c)}"></i>`;
    })
    .join('');
  return (
    `<div class="heatmap" style="--cols:${esc(grid.cols)}" ` +
    `data-rows="${esc(grid.rows)}">${cells}</div>`
  );
}

export function renderBev(snapshot: BevSnapshot, extent: [number, number, number, number]): string {
  const [x0, y0, x1, y1] = extent;
  const dots = snapshot.bev_points
    .map(([x, y]) => `<circle cx="${x}" cy="${y}" r="${(x1 - x0) / 100}"/>`)
    .join('');
  return (
    `<svg class="bev" viewBox="${x0} ${y0} ${x1 - x0} ${y1 - y0}" ` +
    `data-camera="${esc(snapshot.camera_id)}">${dots}</svg>`
  );
}

export function renderAnomalyList(events: AnomalyEvent[]): string {
  if (events.length === 0) {
    return '<p class="nodata">no recent anomalies</p>';
  }
  const rows = events
    .map(
      (e) =>
        `<li class="${esc(e.kind.toLowerCase())}">` +
        `<b>${esc(e.kind)}</b> ${esc(e.category)} ` +
        `<span class="ts">${esc(fmtTs(e.record_time))}</span> ` +
        `<span class="value">${esc(e.value)}</span> ${esc(e.message)}</li>`,
    )
    .join('');
  return `<ul class="anomalies">${rows}</ul>`;
}

/** 24-hour bar chart of anomaly activity, one bar per UTC hour. */
export function renderStatsChart(events: AnomalyEvent[]): string {
  const byHour = new Array(24).fill(0);
  for (const e of events) {
    byHour[new Date(e.record_time).getUTCHours()] += 1;
  }
  const peak = Math.max(1, ...byHour);
  const bars = byHour
    .map(
      (n, h) =>
        `<div class="bar" data-hour="${h}" style="--h:${(n / peak).toFixed(3)}"></div>`,
    )
    .join('');
  return `<div class="stats-chart" data-total="${events.length}">${bars}</div>`;
}

export function renderSearchResult(result: SearchResult): string {
  if (result.empty) {
    return '<p class="nodata">no data in range</p>';
  }
  const cell = (label: string, value: unknown) =>
    `<div class="agg"><dt>${label}</dt><dd data-field="${label}">${esc(value)}</dd></div>`;
  return (
    '<dl class="search-result">' +
    cell('total', result.total) +
    cell('average', result.average) +
    cell('max', result.max) +
    cell('min', result.min) +
    cell('most_frequent', result.most_frequent) +
    '</dl>'
  );
}

export function renderBanner(note: PushNotification): string {
  const msg = note.message;
  const detail =
    typeof msg === 'object' && msg !== null && 'message' in msg
      ? (msg as { message: unknown }).message
      : msg;
  return (
    `<div class="banner" data-event-id="${note.event_id}">` +
    `<b>${esc(note.title)}</b> <span>${esc(detail)}</span> ` +
    `<span class="ts">${esc(fmtTs(note.ts_ms))}</span></div>`
  );
}

export function renderReconnectBadge(visible: boolean): string {
  return visible ? '<span class="reconnect">reconnecting…</span>' : '';
}
