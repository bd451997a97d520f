// Application wiring: one partition on screen, one WebSocket, all updates
// applied on a single ordered queue (the WS message handler).
import { CommandGate, CommandRejected, GatewayClient } from "./api.js";
import { renderErrorFeed, renderHistogram, renderLineChart } from "./charts.js";
import { COMMANDS, isLegal } from "./fsm.js";
import { renderTree } from "./tree.js";
import { ConsoleViewModel } from "./viewmodel.js";
import type { GatewayEvent } from "./types.js";

const client = new GatewayClient();
const vm = new ConsoleViewModel();
let gate: CommandGate | null = null;
let socket: WebSocket | null = null;

const el = (id: string) => document.getElementById(id)!;

function showBanner(text: string | null, cls = "banner-error"): void {
  const banner = el("banner");
  banner.className = text ? `banner ${cls}` : "banner hidden";
  banner.textContent = text ?? "";
}

function redraw(): void {
  renderTree(el("tree"), vm.nodes.values());
  el("run-number").textContent = vm.runNumber ? `run #${vm.runNumber}` : "no run";
  const buttons = el("commands").querySelectorAll<HTMLButtonElement>("button");
  buttons.forEach((button) => {
    button.disabled = !isLegal(vm.displayState(), button.dataset.command!) ||
      vm.pendingCommand !== null;
  });
  const badge = el("pending");
  badge.textContent = vm.pendingCommand ? `${vm.pendingCommand}: TRANSITIONING` : "";

  const charts = el("charts");
  charts.textContent = "";
  for (const [key, points] of vm.metricSeries) {
    const box = document.createElement("div");
    box.className = "chart";
    renderLineChart(box, key, points);
    charts.appendChild(box);
  }
  for (const [key, hist] of vm.histograms) {
    const box = document.createElement("div");
    box.className = "chart";
    renderHistogram(box, key, hist.edges, hist.counts);
    charts.appendChild(box);
  }
  renderErrorFeed(el("errors"), vm.errorFeed.slice(0, 50));

  const log = el("log");
  log.textContent = vm.eventLog
    .slice(-200)
    .map((entry) => `${new Date(entry.at).toLocaleTimeString()}  ${entry.text}`)
    .reverse()
    .join("\n");
}

async function issue(command: string): Promise<void> {
  if (!gate) return;
  vm.pendingCommand = command;
  redraw();
  try {
    const report = await gate.issue(command);
    vm.log(`${command} -> ${report.state} (run ${report.run_number})`);
    const failed = report.reports.filter((r) => r.error);
    for (const f of failed) vm.log(`  ${f.path}: ${f.error}`, "ERROR");
    showBanner(failed.length ? `${command} completed with ${failed.length} error(s)` : null);
  } catch (error) {
    if (error instanceof CommandRejected) {
      showBanner(`${command} rejected (${error.status}): ${error.message}`);
    } else {
      showBanner(`${command} failed: network error — retry when the gateway is back`);
    }
  } finally {
    vm.pendingCommand = null;
    await refreshTree();
    redraw();
  }
}

async function refreshTree(): Promise<void> {
  try {
    vm.applySnapshot(await client.tree(vm.partition));
  } catch {
    /* keep the last known tree; staleness banner covers it */
  }
}

function connectEvents(partition: string): void {
  socket?.close();
  // partition-scoped metrics plus process-manager crash records
  socket = new WebSocket(client.eventsUrl(partition, [`${partition}.`, "pmg."]));
  socket.onmessage = (message) => {
    const event = JSON.parse(message.data) as GatewayEvent;
    vm.applyEvent(event);
    redraw();
  };
  socket.onclose = () => {
    showBanner("event stream closed — reconnecting", "banner-warn");
    setTimeout(() => connectEvents(partition), 2000);
  };
}

async function selectPartition(partition: string): Promise<void> {
  vm.partition = partition;
  gate = new CommandGate(client, partition);
  await refreshTree();
  connectEvents(partition);
  redraw();
}

async function start(): Promise<void> {
  const commands = el("commands");
  for (const command of COMMANDS) {
    const button = document.createElement("button");
    button.dataset.command = command;
    button.textContent = command;
    button.disabled = true;
    button.addEventListener("click", () => void issue(command));
    commands.appendChild(button);
  }

  const partitions = await client.partitions();
  const selector = el("partition") as HTMLSelectElement;
  if (partitions.length === 0) {
    el("tree").textContent = "no partitions booted";
    return;
  }
  for (const partition of partitions) {
    const option = document.createElement("option");
    option.value = option.textContent = partition;
    selector.appendChild(option);
  }
  selector.addEventListener("change", () => void selectPartition(selector.value));
  await selectPartition(partitions[0]);

  setInterval(() => {
    if (vm.isStale()) showBanner("stale: no events from the gateway for 5 s", "banner-warn");
    redraw();
  }, 1000);
}

if (typeof document !== "undefined" && document.getElementById("tree")) {
  void start();
}
