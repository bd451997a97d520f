// Gateway client. Commands carry a client-generated idempotency token so a
// double click can never start two runs; the gateway deduplicates by token.
import type { CommandResponse, TreeSnapshot } from "./types.js";

export class CommandRejected extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export function newToken(): string {
  return `${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 10)}`;
}

export class GatewayClient {
  constructor(private base: string = "", private fetcher: typeof fetch = fetch) {}

  async partitions(): Promise<string[]> {
    const response = await this.fetcher(`${this.base}/api/partitions`);
    return (await response.json()).partitions;
  }

  async tree(partition: string): Promise<TreeSnapshot> {
    const response = await this.fetcher(`${this.base}/api/partitions/${partition}/tree`);
    if (!response.ok) throw new CommandRejected(response.status, `no such partition`);
    return await response.json();
  }

  async command(partition: string, command: string, token: string,
                issuedBy = "console"): Promise<CommandResponse> {
    const response = await this.fetcher(`${this.base}/api/partitions/${partition}/command`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ command, token, issued_by: issuedBy }),
    });
    const body = await response.json();
    if (!response.ok) {
      throw new CommandRejected(response.status, body.error ?? `HTTP ${response.status}`);
    }
    return body;
  }

  eventsUrl(partition: string, filters: string[]): string {
    const origin = this.base || (typeof location !== "undefined" ? location.origin : "");
    const ws = origin.replace(/^http/, "ws");
    const query = filters.length ? `?filter=${encodeURIComponent(filters.join(","))}` : "";
    return `${ws}/api/partitions/${partition}/events${query}`;
  }
}

/** Serializes command submission: while one command is in flight, repeated
 * clicks reuse its token and no second request leaves the browser. */
export class CommandGate {
  private inFlight: { command: string; token: string; done: Promise<CommandResponse> } | null =
    null;

  constructor(private client: GatewayClient, private partition: string) {}

  issue(command: string): Promise<CommandResponse> {
    if (this.inFlight && this.inFlight.command === command) {
      return this.inFlight.done;
    }
    const token = newToken();
    const done = this.client
      .command(this.partition, command, token)
      .finally(() => {
        if (this.inFlight?.token === token) this.inFlight = null;
      });
    this.inFlight = { command, token, done };
    return done;
  }

  get pending(): string | null {
    return this.inFlight?.command ?? null;
  }
}
