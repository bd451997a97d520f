// Collapsible controller-tree rendering. Node color follows the state
// palette: ERROR red, RUNNING green, TRANSITIONING amber, others neutral.
import type { TreeNode } from "./types.js";

const STATE_CLASS: Record<string, string> = {
  ERROR: "state-error",
  RUNNING: "state-running",
  TRANSITIONING: "state-transitioning",
};

export function stateClass(state: string | undefined): string {
  if (!state) return "state-neutral";
  return STATE_CLASS[state] ?? "state-neutral";
}

/** A node is painted ERROR when itself or anything below it is ERROR, so a
 * failing leaf turns its whole ancestor path red. */
export function effectiveState(node: TreeNode, childrenOf: Map<string, TreeNode[]>): string {
  if (node.state === "ERROR") return "ERROR";
  for (const child of childrenOf.get(node.id) ?? []) {
    if (effectiveState(child, childrenOf) === "ERROR") return "ERROR";
  }
  return node.state ?? "unknown";
}

export function buildChildIndex(nodes: Iterable<TreeNode>): Map<string, TreeNode[]> {
  const index = new Map<string, TreeNode[]>();
  for (const node of nodes) {
    if (node.parent === null || node.parent === undefined) continue;
    if (!index.has(node.parent)) index.set(node.parent, []);
    index.get(node.parent)!.push(node);
  }
  for (const children of index.values()) children.sort((a, b) => a.id.localeCompare(b.id));
  return index;
}

export function renderTree(container: HTMLElement, nodes: Iterable<TreeNode>): void {
  container.textContent = "";
  const all = Array.from(nodes);
  const childrenOf = buildChildIndex(all);
  const roots = all.filter((n) => n.parent === null || n.parent === undefined);
  if (roots.length === 0) {
    const empty = document.createElement("div");
    empty.className = "tree-empty";
    empty.textContent = "no nodes registered";
    container.appendChild(empty);
    return;
  }
  const list = document.createElement("ul");
  list.className = "tree";
  for (const root of roots) list.appendChild(renderNode(root, childrenOf));
  container.appendChild(list);
}

function renderNode(node: TreeNode, childrenOf: Map<string, TreeNode[]>): HTMLElement {
  const item = document.createElement("li");
  item.className = "tree-node";
  item.dataset.nodeId = node.id ?? "unknown";

  const label = document.createElement("span");
  const effective = effectiveState(node, childrenOf);
  label.className = `tree-label ${stateClass(effective)}`;
  label.dataset.state = node.state ?? "unknown";
  label.textContent = `${node.id ?? "unknown"} [${node.kind ?? "unknown"}] ` +
    `${node.state ?? "unknown"}`;
  item.appendChild(label);

  const children = childrenOf.get(node.id) ?? [];
  if (children.length) {
    const toggle = document.createElement("button");
    toggle.className = "tree-toggle";
    toggle.textContent = "−";
    const sub = document.createElement("ul");
    sub.className = "tree-children";
    for (const child of children) sub.appendChild(renderNode(child, childrenOf));
    toggle.addEventListener("click", () => {
      const hidden = sub.style.display === "none";
      sub.style.display = hidden ? "" : "none";
      toggle.textContent = hidden ? "−" : "+";
    });
    item.insertBefore(toggle, label);
    item.appendChild(sub);
  }
  return item;
}
