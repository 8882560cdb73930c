/**
 * Topic approval screen: chips for proposed subtopics, 1:1 mapping from
 * user actions to approval-protocol commands. Finalize stays disabled
 * until at least one subtopic is approved, mirroring the server guard.
 */

import type { DecisionCommand, TopicsSnapshot } from "./types.js";

export interface TopicChip {
  index: number;
  text: string;
  approved: boolean;
}

export interface ApprovalView {
  seed: string;
  chips: TopicChip[];
  approvedCount: number;
  canFinalize: boolean;
  finalized: boolean;
}

export function approvalView(topics: TopicsSnapshot): ApprovalView {
  const approved = new Set(topics.approved);
  const chips = topics.proposed.map((text, index) => ({
    index,
    text,
    approved: approved.has(text),
  }));
  return {
    seed: topics.seed,
    chips,
    approvedCount: topics.approved.length,
    canFinalize: topics.approved.length >= 1,
    finalized: topics.finalized,
  };
}

/** Each user gesture maps to exactly one protocol command. */
export function approveCommand(index: number): DecisionCommand {
  return { action: "approve", index };
}

export function removeCommand(index: number): DecisionCommand {
  return { action: "remove", index };
}

export function addCommand(text: string): DecisionCommand {
  return { action: "add", text };
}

export function editCommand(index: number, text: string): DecisionCommand {
  return { action: "edit", index, text };
}

export function finalizeCommand(): DecisionCommand {
  return { action: "finalize" };
}

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function renderApprovalScreen(view: ApprovalView): string {
  if (view.finalized) {
    return `<section class="approval"><h2>Topics finalized</h2>
<p>${view.approvedCount} subtopics approved; the run is proceeding.</p></section>`;
  }
  const chips = view.chips
    .map(
      (chip) => `
    <li class="chip ${chip.approved ? "approved" : ""}" data-index="${chip.index}">
      <span class="chip-text">${escapeHtml(chip.text)}</span>
      <button data-cmd="approve" data-index="${chip.index}" ${chip.approved ? "disabled" : ""}>approve</button>
      <button data-cmd="edit" data-index="${chip.index}">edit</button>
      <button data-cmd="remove" data-index="${chip.index}">remove</button>
    </li>`,
    )
    .join("");
  return `<section class="approval">
  <h2>Proposed subtopics for: ${escapeHtml(view.seed)}</h2>
  <ul class="chips">${chips}</ul>
  <div class="add-row">
    <input id="new-topic" placeholder="add a subtopic" />
    <button data-cmd="add">add</button>
  </div>
  <button id="finalize" data-cmd="finalize" ${view.canFinalize ? "" : "disabled"}>
    finalize (${view.approvedCount} approved)
  </button>
</section>`;
}
