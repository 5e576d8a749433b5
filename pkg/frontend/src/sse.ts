/** Minimal SSE consumer on top of fetch streams.
 *
 * Works in browsers and in Node 20 (no EventSource there), and reconnects
 * with exponential backoff after drops. Only `data:` lines are surfaced;
 * comment keep-alives are ignored.
 */

export interface SseOptions {
  onData: (data: string) => void;
  onOpen?: () => void;
  onError?: (err: unknown) => void;
  /** initial reconnect delay in ms; doubles per failure up to 8s */
  retryMs?: number;
  fetchImpl?: typeof fetch;
}

export function parseSseChunk(buffer: string): { events: string[]; rest: string } {
  const events: string[] = [];
  let rest = buffer;
  for (;;) {
    const sep = rest.indexOf('\n\n');
    if (sep < 0) break;
    const block = rest.slice(0, sep);
    rest = rest.slice(sep + 2);
    const dataLines = block
      .split('\n')
      .filter((line) => line.startsWith('data:'))
      .map((line) => line.slice(5).trimStart());
    if (dataLines.length > 0) {
      events.push(dataLines.join('\n'));
    }
  }
  return { events, rest };
}

export class SseStream {
  private stopped = false;
  private controller: AbortController | null = null;

  constructor(private url: string, private opts: SseOptions) {}

  start(): void {
    this.stopped = false;
    void this.loop();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  private async loop(): Promise<void> {
    const doFetch = this.opts.fetchImpl ?? fetch;
    let delay = this.opts.retryMs ?? 500;
    while (!this.stopped) {
      this.controller = new AbortController();
      try {
        const resp = await doFetch(this.url, {
          headers: { Accept: 'text/event-stream' },
          signal: this.controller.signal,
        });
        if (!resp.ok || !resp.body) {
          throw new Error(`stream failed: HTTP ${resp.status}`);
        }
        this.opts.onOpen?.();
        delay = this.opts.retryMs ?? 500; // successful connect resets backoff
        const reader = resp.body.getReader();
        const decoder = new TextDecoder();
        let buffer = '';
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          buffer += decoder.decode(value, { stream: true });
          const { events, rest } = parseSseChunk(buffer);
          buffer = rest;
          for (const data of events) {
            this.opts.onData(data);
          }
        }
        if (this.stopped) return; // clean close
      } catch (err) {
        if (this.stopped) return;
        this.opts.onError?.(err);
      }
      if (this.stopped) return;
      await sleep(delay);
      delay = Math.min(delay * 2, 8000);
    }
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
