/** Single-page wiring: login, navigation, live updates, pop-ups, search. */
import { ApiClient } from './api.js';
import { NotificationStream, fetchEventSourceFactory } from './events.js';
import { submitSearch } from './search.js';
import {
  renderAnomalyList,
  renderBanner,
  renderBev,
  renderCameraCard,
  renderCameraScreen,
  renderHeatmap,
  renderReconnectBadge,
  renderSearchResult,
  renderStatsChart,
} from './views.js';

const POLL_MS = 5000;

export class App {
  private stream: NotificationStream | null = null;
  private pollTimer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly root: HTMLElement,
    private readonly makeStream?: (app: App) => NotificationStream,
  ) {}

  async start(email: string, password: string, base = ''): Promise<void> {
    const login = await this.client.login(email, password);
    this.stream =
      this.makeStream?.(this) ??
      new NotificationStream(
        fetchEventSourceFactory(base, login.token),
        (note) => this.showBanner(renderBanner(note)),
        (status) => this.setBadge(status === 'reconnecting'),
      );
    this.stream.connect();
    await this.showLocations();
  }

  async showLocations(): Promise<void> {
    const { locations } = await this.client.locations();
    const panels = await Promise.all(
      locations.map(async (loc) => {
        const { cameras } = await this.client.cameras(loc.location_id);
        const cards = await Promise.all(
          cameras.map(async (cam) =>
            renderCameraCard(cam, await this.client.status(cam.camera_id)),
          ),
        );
        return `<section class="location"><h2>${loc.location_id}</h2>${cards.join('')}</section>`;
      }),
    );
    this.panel('home').innerHTML = panels.join('');
    for (const card of this.root.querySelectorAll<HTMLElement>('.camera-card')) {
      card.addEventListener('click', () => this.showCamera(card.dataset.camera!));
    }
  }

  async showCamera(cameraId: string): Promise<void> {
    const status = await this.client.status(cameraId);
    const { events } = await this.client.anomalies(cameraId);
    this.panel('camera').innerHTML =
      renderCameraScreen(status) + renderAnomalyList(events) + renderStatsChart(events);
    this.panel('camera')
      .querySelector('[data-popup="heatmap"]')
      ?.addEventListener('click', async () => {
        const grid = await this.client.heatmap(cameraId);
        this.panel('popup').innerHTML = renderHeatmap(grid);
      });
    this.panel('camera')
      .querySelector('[data-popup="bev"]')
      ?.addEventListener('click', async () => {
        const [snapshot, grid] = await Promise.all([
          this.client.bev(cameraId),
          this.client.heatmap(cameraId),
        ]);
        this.panel('popup').innerHTML = renderBev(snapshot, grid.extent);
      });
    const form = this.panel('search').querySelector('form');
    form?.addEventListener('submit', async (ev) => {
      ev.preventDefault();
      const data = new FormData(form);
      const outcome = await submitSearch(
        this.client,
        cameraId,
        String(data.get('from') ?? ''),
        String(data.get('to') ?? ''),
      );
      this.panel('search-result').innerHTML =
        outcome.kind === 'error'
          ? `<p class="form-error">${outcome.error}</p>`
          : renderSearchResult(outcome.result);
    });
  }

  showBanner(html: string): void {
    this.panel('banners').insertAdjacentHTML('afterbegin', html);
  }

  setBadge(reconnecting: boolean): void {
    this.panel('badge').innerHTML = renderReconnectBadge(reconnecting);
    if (reconnecting && this.pollTimer === null) {
      // polling fallback while the push channel is down
      this.pollTimer = setInterval(() => this.stream?.reconnect(), POLL_MS);
    } else if (!reconnecting && this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  private panel(id: string): HTMLElement {
    let el = this.root.querySelector<HTMLElement>(`#${id}`);
    if (el === null) {
      el = document.createElement('div');
      el.id = id;
      this.root.appendChild(el);
    }
    return el;
  }
}
