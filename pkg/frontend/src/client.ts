/**
 * HTTP-bridge client: sends protocol lines, polls the status snapshot.
 *
 * Sends that fail while the bridge is unreachable queue for up to one
 * second and are then dropped; the connection flag drives the UI's
 * disconnected indicator.  Displayed state (BPM, room, loops, meters)
 * comes exclusively from the last STATUS line: the client does no tempo
 * math of its own.
 */

import { EngineStatus, parseStatusLine, validateMessage } from "./protocol.js";

const QUEUE_TTL_MS = 1000;
export const POLL_INTERVAL_MS = 100; // 10 Hz

interface QueuedSend {
  line: string;
  queuedAt: number;
}

export type StatusListener = (status: EngineStatus | null) => void;

export class EngineClient {
  readonly baseUrl: string;
  connected = false;
  dropped = 0;
  private queue: QueuedSend[] = [];
  private timer: ReturnType<typeof setInterval> | null = null;
  private listeners: StatusListener[] = [];
  lastStatus: EngineStatus | null = null;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  onStatus(listener: StatusListener): void {
    this.listeners.push(listener);
  }

  /** Send one protocol line; returns true once accepted by the engine. */
  async send(line: string): Promise<boolean> {
    const problem = validateMessage(line);
    if (problem !== null) {
      throw new Error(`refusing to send invalid message: ${problem}`);
    }
    this.expireQueue();
    try {
      const response = await fetch(`${this.baseUrl}/control`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ message: line }),
      });
      if (response.status === 400) {
        // grammar disagreement: surface it, do not queue
        const body = await response.text();
        throw new Error(`engine rejected ${JSON.stringify(line)}: ${body}`);
      }
      if (!response.ok) {
        throw new FetchFailure(`status ${response.status}`);
      }
      this.connected = true;
      await this.flushQueue();
      return true;
    } catch (err) {
      if (err instanceof FetchFailure || isNetworkError(err)) {
        this.connected = false;
        this.queue.push({ line, queuedAt: Date.now() });
        return false;
      }
      throw err;
    }
  }

  /** One shake-pad press: an excursion past the threshold and back. */
  async shake(gestureId: string): Promise<void> {
    await this.send(`SHAKE ${gestureId} 1.4`);
    await this.send(`SHAKE ${gestureId} 0.0`);
  }

  async pollStatus(): Promise<EngineStatus | null> {
    try {
      const response = await fetch(`${this.baseUrl}/status`);
      if (!response.ok) {
        throw new FetchFailure(`status ${response.status}`);
      }
      const body = (await response.json()) as { status_line: string };
      this.connected = true;
      this.lastStatus = parseStatusLine(body.status_line);
    } catch {
      this.connected = false;
      this.lastStatus = null;
    }
    for (const listener of this.listeners) {
      listener(this.lastStatus);
    }
    if (this.connected) {
      await this.flushQueue();
    }
    return this.lastStatus;
  }

  startPolling(intervalMs: number = POLL_INTERVAL_MS): void {
    if (this.timer !== null) {
      return;
    }
    this.timer = setInterval(() => {
      void this.pollStatus();
    }, intervalMs);
  }

  stopPolling(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  get pendingCount(): number {
    this.expireQueue();
    return this.queue.length;
  }

  private expireQueue(): void {
    const now = Date.now();
    const before = this.queue.length;
    this.queue = this.queue.filter((item) => now - item.queuedAt <= QUEUE_TTL_MS);
    this.dropped += before - this.queue.length;
  }

  private async flushQueue(): Promise<void> {
    this.expireQueue();
    const pending = this.queue;
    this.queue = [];
    for (const item of pending) {
      try {
        const response = await fetch(`${this.baseUrl}/control`, {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify({ message: item.line }),
        });
        if (!response.ok && response.status !== 400) {
          throw new FetchFailure(`status ${response.status}`);
        }
      } catch {
        this.queue.push(item);
        this.connected = false;
        return;
      }
    }
  }
}

class FetchFailure extends Error {}

function isNetworkError(err: unknown): boolean {
  return err instanceof TypeError; // fetch rejects with TypeError on network failure
}
