/**
 * Typed client for the surveillance query API. The dashboard never computes
 * analytics itself; everything it shows comes back from these calls.
 */

export type LoginResponse = {
  token: string;
  user_id: string;
  first_name: string;
  last_name: string;
  email: string;
};

export type LocationSummary = { location_id: string; camera_count: number };

export type CameraSummary = { camera_id: string; display_name: string; live: boolean };

export type CameraStatus = {
  camera_id: string;
  count?: number;
  ts_ms?: number;
  indicator?: 'Under' | 'Normal' | 'Over' | 'Unknown';
  empty?: boolean;
};

export type AnomalyEvent = {
  kind: 'Behavioral' | 'Statistical';
  category: string;
  camera_id: string;
  record_time: number;
  value: number;
  message: string;
};

export type Heatmap = {
  cols: number;
  rows: number;
  extent: [number, number, number, number];
  cells: number[];
};

export type BevSnapshot = { camera_id: string; bev_points: [number, number][] };

export type SearchResult = {
  total?: number;
  average?: number;
  max?: number;
  min?: number;
  most_frequent?: number;
  empty?: boolean;
};

export type PushNotification = {
  event_id: number;
  title: string;
  message: unknown;
  ts_ms: number;
  camera_id: string;
};

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class ApiClient {
  private token = '';

  constructor(
    private readonly base = '',
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.fetchFn(this.base + path, {
      headers: { Authorization: `Bearer ${this.token}`, Accept: 'application/json' },
    });
    if (!res.ok) {
      throw new ApiError(res.status, await res.text());
    }
    return (await res.json()) as T;
  }

  async login(email: string, password: string): Promise<LoginResponse> {
    const res = await this.fetchFn(`${this.base}/login`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ email, password }),
    });
    if (!res.ok) {
      throw new ApiError(res.status, await res.text());
    }
    const doc = (await res.json()) as LoginResponse;
    this.token = doc.token;
    return doc;
  }

  locations(): Promise<{ locations: LocationSummary[] }> {
    return this.getJson('/locations');
  }

  cameras(locationId: string): Promise<{ cameras: CameraSummary[] }> {
    return this.getJson(`/locations/${encodeURIComponent(locationId)}/cameras`);
  }

  status(cameraId: string): Promise<CameraStatus> {
    return this.getJson(`/cameras/${encodeURIComponent(cameraId)}/status`);
  }

  anomalies(cameraId: string, window = '24h'): Promise<{ events: AnomalyEvent[] }> {
    return this.getJson(
      `/cameras/${encodeURIComponent(cameraId)}/anomalies?window=${encodeURIComponent(window)}`,
    );
  }

  heatmap(cameraId: string): Promise<Heatmap> {
    return this.getJson(`/cameras/${encodeURIComponent(cameraId)}/heatmap`);
  }

  bev(cameraId: string): Promise<BevSnapshot> {
    return this.getJson(`/cameras/${encodeURIComponent(cameraId)}/bev`);
  }

  search(cameraId: string, fromMs: number, toMs: number): Promise<SearchResult> {
    return this.getJson(
      `/cameras/${encodeURIComponent(cameraId)}/search?from=${fromMs}&to=${toMs}`,
    );
  }
}
