/**
 * SPA wiring: hash routes, a 2s ETag-gated polling loop, and event
 * delegation for the approval/abort commands. All state lives on the
 * server; this file only shuttles payloads into pure render functions.
 */

import { ApiClient } from "./api.js";
import {
  addCommand,
  approvalView,
  approveCommand,
  editCommand,
  finalizeCommand,
  removeCommand,
  renderApprovalScreen,
} from "./approval.js";
import { renderDashboard, roundView, type RoundView } from "./dashboard.js";
import type { DecisionCommand } from "./types.js";

const POLL_MS = 2000;

const token = new URLSearchParams(window.location.search).get("token");
const api = new ApiClient("", token);
const app = document.getElementById("app")!;

let currentDir: string | null = null;
let flash = "";

function setFlash(message: string): void {
  flash = message;
  void render();
}

async function render(): Promise<void> {
  try {
    if (!currentDir) {
      const runs = await api.listRuns();
      app.innerHTML = `
        <h2>Runs</h2>
        <ul class="runs">${runs
          .map(
            (run) =>
              `<li><a href="#/runs/${run.dir}">${run.run_id}</a> - ${run.phase} (round ${run.round_t})</li>`,
          )
          .join("")}</ul>`;
      return;
    }
    const manifest = await api.getState(currentDir);
    const banner = flash ? `<div class="banner error">${flash}</div>` : "";
    if (manifest.state.phase === "scoping") {
      let screen: string;
      try {
        screen = renderApprovalScreen(approvalView(await api.getTopics(currentDir)));
      } catch {
        screen = `<div class="banner">waiting for proposed subtopics...</div>`;
      }
      app.innerHTML = `<a href="#/">runs</a>${banner}${screen}`;
      return;
    }
    const trajectory = await api.getTrajectory(currentDir);
    const rounds: RoundView[] = [];
    for (let t = 0; t < trajectory.points.length; t += 1) {
      try {
        rounds.push(roundView(t, await api.getRoundReviews(currentDir, t)));
      } catch {
        break; // round not persisted yet
      }
    }
    app.innerHTML = `<a href="#/">runs</a>${banner}${renderDashboard(manifest, trajectory, rounds)}`;
  } catch (error) {
    app.innerHTML = `<div class="banner error">cannot reach run service: ${String(error)}</div>`;
  }
}

async function send(command: DecisionCommand): Promise<void> {
  if (!currentDir) return;
  const result = await api.postDecision(currentDir, command);
  setFlash(result.ok ? "" : `${result.status}: ${result.error ?? "rejected"}`);
}

app.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  const cmd = target.dataset["cmd"];
  if (!cmd || !currentDir) return;
  const index = Number(target.dataset["index"] ?? "-1");
  if (cmd === "approve") void send(approveCommand(index));
  else if (cmd === "remove") void send(removeCommand(index));
  else if (cmd === "edit") {
    const text = window.prompt("new subtopic text");
    if (text) void send(editCommand(index, text));
  } else if (cmd === "add") {
    const input = document.getElementById("new-topic") as HTMLInputElement | null;
    if (input && input.value.trim()) void send(addCommand(input.value.trim()));
  } else if (cmd === "finalize") void send(finalizeCommand());
  else if (cmd === "abort") {
    void api.postAbort(currentDir).then((result) => {
      setFlash(result.ok ? "abort requested" : `${result.status}: ${result.error ?? "rejected"}`);
    });
  }
});

function route(): void {
  const match = window.location.hash.match(/^#\/runs\/([^/]+)/);
  currentDir = match?.[1] ?? null;
  flash = "";
  void render();
}

window.addEventListener("hashchange", route);
route();
setInterval(() => void render(), POLL_MS);
