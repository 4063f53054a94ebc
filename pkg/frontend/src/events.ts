/**
 * Push-notification subscription with reconnect and duplicate suppression.
 *
 * The server assigns monotone event ids and replays history after a
 * `Last-Event-ID`, so a reconnect may deliver events the client already
 * rendered. Each banner must appear exactly once, which is enforced here by
 * id, not by the transport.
 */
import type { PushNotification } from './api.js';

export type SseMessage = { data: string };

export interface EventSourceLike {
  addEventListener(type: 'notification', handler: (ev: SseMessage) => void): void;
  addEventListener(type: 'error', handler: () => void): void;
  close(): void;
}

export type EventSourceFactory = (lastEventId: number) => EventSourceLike;

export type StreamStatus = 'connected' | 'reconnecting';

export class NotificationStream {
  private source: EventSourceLike | null = null;
  private lastEventId = 0;
  private seen = new Set<number>();

  constructor(
    private readonly open: EventSourceFactory,
    private readonly onBanner: (note: PushNotification) => void,
    private readonly onStatus: (status: StreamStatus) => void = () => {},
  ) {}

  connect(): void {
    this.source?.close();
    const source = this.open(this.lastEventId);
    this.source = source;
    source.addEventListener('notification', (ev) => this.receive(ev));
    source.addEventListener('error', () => {
      this.onStatus('reconnecting');
    });
    this.onStatus('connected');
  }

  /** Drop the connection and resume from the last rendered event id. */
  reconnect(): void {
    this.onStatus('reconnecting');
    this.connect();
  }

  close(): void {
    this.source?.close();
    this.source = null;
  }

  private receive(ev: SseMessage): void {
    let note: PushNotification;
    try {
      note = JSON.parse(ev.data) as PushNotification;
    } catch {
      return;
    }
    if (this.seen.has(note.event_id)) {
      return;
    }
    this.seen.add(note.event_id);
    this.lastEventId = Math.max(this.lastEventId, note.event_id);
    this.onBanner(note);
  }
}

/**
 * fetch-based SSE reader. The native EventSource cannot send the bearer token
 * header the API requires, so the stream is read manually; frames are
 * separated by blank lines and carry `event:` and `data:` fields.
 */
export function fetchEventSourceFactory(
  base: string,
  token: string,
  fetchFn: typeof fetch = (...args) => fetch(...args),
): EventSourceFactory {
  return (lastEventId) => {
    const controller = new AbortController();
    const handlers: { notification: Array<(ev: SseMessage) => void>; error: Array<() => void> } = {
      notification: [],
      error: [],
    };
    const run = async () => {
      const res = await fetchFn(`${base}/events`, {
        headers: {
          Authorization: `Bearer ${token}`,
          'Last-Event-ID': String(lastEventId),
          Accept: 'text/event-stream',
        },
        signal: controller.signal,
      });
      if (!res.ok || res.body === null) {
        throw new Error(`stream failed: ${res.status}`);
      }
      const reader = res.body.getReader();
      const decoder = new TextDecoder();
      let buffer = '';
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        let cut;
        while ((cut = buffer.indexOf('\n\n')) >= 0) {
          const frame = buffer.slice(0, cut);
          buffer = buffer.slice(cut + 2);
          const fields = new Map(
            frame
              .split('\n')
              .filter((l) => l.includes(': '))
              .map((l) => [l.slice(0, l.indexOf(': ')), l.slice(l.indexOf(': ') + 2)]),
          );
          if (fields.get('event') === 'notification' && fields.has('data')) {
            for (const h of handlers.notification) h({ data: fields.get('data')! });
          }
        }
      }
    };
    run().catch(() => {
      if (!controller.signal.aborted) {
        for (const h of handlers.error) h();
      }
    });
    return {
      addEventListener(type: 'notification' | 'error', handler: any) {
        handlers[type].push(handler);
      },
      close() {
        controller.abort();
      },
    } as EventSourceLike;
  };
}
