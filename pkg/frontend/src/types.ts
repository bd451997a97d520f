// Shapes of the gateway's JSON API (docs/api.md in the backend repo).

export interface TreeNode {
  id: string;
  path: string;
  kind: string;
  parent: string | null;
  state: string;
  run_number: number;
  updated_at: number;
}

export interface TreeSnapshot {
  partition: string;
  run_number: number;
  nodes: TreeNode[];
}

export interface NodeReport {
  path: string;
  old_state: string | null;
  new_state: string;
  error: string;
}

export interface CommandResponse {
  partition: string;
  command: string;
  issued_by: string;
  state: string;
  run_number: number;
  reports: NodeReport[];
}

export interface StateEvent {
  type: "state";
  seq: number;
  partition: string;
  node: string;
  state: string;
  run_number: number;
  at: number;
}

export interface InfoEvent {
  type: "info";
  seq: number;
  dest: string;
  key: string;
  kind: string;
  value: unknown;
  source: string;
  seq_record?: number;
  updated_at: number;
}

export interface HeartbeatEvent {
  type: "heartbeat";
  seq: number;
}

export type GatewayEvent = StateEvent | InfoEvent | HeartbeatEvent;

export interface HistogramValue {
  edges: number[];
  counts: number[];
}

export interface ErrorValue {
  severity: "WARN" | "ERROR" | "FATAL";
  text: string;
}
