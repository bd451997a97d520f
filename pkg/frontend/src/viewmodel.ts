// Console state: a mirror of the tree plus bounded event/metric memories.
// All mutation happens through applySnapshot/applyEvent on one queue.
import type { GatewayEvent, InfoEvent, StateEvent, TreeNode, TreeSnapshot } from "./types.js";

export const EVENT_RING_SIZE = 500;
export const STALE_AFTER_MS = 5000;
export const METRIC_WINDOW = 120; // points kept per key

export interface MetricPoint {
  t: number;
  value: number;
}

export interface LogEntry {
  at: number;
  text: string;
  severity?: string;
}

export class ConsoleViewModel {
  partition = "";
  nodes = new Map<string, TreeNode>();
  runNumber = 0;
  pendingCommand: string | null = null;
  eventLog: LogEntry[] = [];
  metricSeries = new Map<string, MetricPoint[]>();
  histograms = new Map<string, { edges: number[]; counts: number[] }>();
  errorFeed: { at: number; key: string; severity: string; text: string; source: string }[] = [];
  lastHeard = 0;
  banner: string | null = null;

  constructor(private now: () => number = () => Date.now()) {}

  applySnapshot(snapshot: TreeSnapshot): void {
    this.partition = snapshot.partition;
    this.runNumber = snapshot.run_number;
    this.nodes.clear();
    for (const node of snapshot.nodes) this.nodes.set(node.id, node);
    this.lastHeard = this.now();
  }

  rootNode(): TreeNode | undefined {
    for (const node of this.nodes.values()) if (node.parent === null) return node;
    return undefined;
  }

  rootState(): string {
    return this.rootNode()?.state ?? "unknown";
  }

  /** Effective state for button gating: optimistic while a command runs. */
  displayState(): string {
    return this.pendingCommand ? "TRANSITIONING" : this.rootState();
  }

  applyEvent(event: GatewayEvent): void {
    this.lastHeard = this.now();
    if (event.type === "heartbeat") return;
    if (event.type === "state") this.applyState(event);
    else this.applyInfo(event);
  }

  private applyState(event: StateEvent): void {
    const node = this.nodes.get(event.node);
    if (node) {
      node.state = event.state;
      node.run_number = event.run_number;
      if (node.parent === null) this.runNumber = event.run_number;
    }
    this.log(`${event.node} -> ${event.state}`);
  }

  private applyInfo(event: InfoEvent): void {
    if (typeof event.key !== "string" || event.key === "") {
      console.warn("malformed info event skipped", event);
      return;
    }
    if (event.kind === "COUNTER" || event.kind === "GAUGE") {
      if (typeof event.value !== "number") {
        console.warn("malformed metric value skipped", event);
        return;
      }
      const series = this.metricSeries.get(event.key) ?? [];
      series.push({ t: event.updated_at, value: event.value });
      if (series.length > METRIC_WINDOW) series.splice(0, series.length - METRIC_WINDOW);
      this.metricSeries.set(event.key, series);
    } else if (event.kind === "HISTOGRAM") {
      const value = event.value as { edges?: unknown; counts?: unknown };
      if (!Array.isArray(value?.edges) || !Array.isArray(value?.counts)) {
        console.warn("malformed histogram skipped", event);
        return;
      }
      this.histograms.set(event.key, {
        edges: value.edges as number[],
        counts: value.counts as number[],
      });
    } else if (event.kind === "ERROR") {
      const value = event.value as { severity?: string; text?: string };
      this.errorFeed.unshift({
        at: event.updated_at,
        key: event.key,
        severity: value?.severity ?? "ERROR",
        text: value?.text ?? "",
        source: event.source,
      });
      if (this.errorFeed.length > EVENT_RING_SIZE) this.errorFeed.pop();
      this.log(`${value?.severity ?? "ERROR"} ${event.key}: ${value?.text ?? ""}`,
        value?.severity);
    } else {
      this.log(`${event.key} = ${String(event.value)}`);
    }
  }

  log(text: string, severity?: string): void {
    this.eventLog.push({ at: this.now(), text, severity });
    if (this.eventLog.length > EVENT_RING_SIZE) {
      this.eventLog.splice(0, this.eventLog.length - EVENT_RING_SIZE);
    }
  }

  isStale(): boolean {
    return this.lastHeard > 0 && this.now() - this.lastHeard > STALE_AFTER_MS;
  }
}
