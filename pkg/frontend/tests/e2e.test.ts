import { ChildProcess, spawn } from "node:child_process";
import { join } from "node:path";
import { createInterface } from "node:readline";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { GameUI } from "../src/ui.js";
import type { BinName, TurnView } from "../src/types.js";
import { DESTINATION_BINS } from "../src/types.js";

let server: ChildProcess;
let baseUrl: string;
let agentConstraints: string[];
const payloads: unknown[] = [];

const HUMAN_DESTS: BinName[] = ["bottom_left", "bottom_right"];

function startServer(): Promise<{ port: number; agent_constraints: string[] }> {
  return new Promise((resolve, reject) => {
    server = spawn("python3", [join(process.cwd(), "tests", "serve_e2e.py")], {
      stdio: ["ignore", "pipe", "inherit"],
    });
    server.on("error", reject);
    server.on("exit", (code) => reject(new Error(`server exited early: ${code}`)));
    const lines = createInterface({ input: server.stdout! });
    lines.once("line", (line) => resolve(JSON.parse(line)));
  });
}

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const res = await fetch(`${baseUrl}/sessions/nope/state`);
      if (res.status === 404) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error("service never came up");
}

async function until(cond: () => boolean, what: string): Promise<void> {
  for (let i = 0; i < 200; i++) {
    if (cond()) return;
    await new Promise((r) => setTimeout(r, 25));
  }
  throw new Error(`timed out waiting for ${what}`);
}

/** Every string a payload discloses must keep the agent's private rules
 * secret, except inside a turn record of an agent share action. */
function assertNoLeak(payload: unknown): void {
  const walk = (node: unknown, lastKey: string): void => {
    if (typeof node === "string") {
      for (const secret of agentConstraints) {
        if (node.includes(secret)) {
          expect(lastKey).toBe("action");
          expect(node).toBe(`share(${secret})`);
        }
      }
    } else if (Array.isArray(node)) {
      node.forEach((item) => walk(item, lastKey));
    } else if (node !== null && typeof node === "object") {
      for (const [key, value] of Object.entries(node)) walk(value, key);
    }
  };
  walk(payload, "");
}

beforeAll(async () => {
  const info = await startServer();
  baseUrl = `http://127.0.0.1:${info.port}`;
  agentConstraints = info.agent_constraints;
  expect(agentConstraints.length).toBeGreaterThan(0);
  await waitForServer();
  (globalThis as { EventSource?: unknown }).EventSource = undefined;
});

afterAll(() => {
  server?.removeAllListeners("exit");
  server?.kill();
});

function parseKnownBins(history: TurnView[], own: string[]): Map<string, string> {
  const known = new Map<string, string>();
  const grab = (text: string) => {
    const m = /in_bin\(([^,]+),([^)]+)\)/.exec(text);
    if (m) known.set(m[1]!, m[2]!);
  };
  own.forEach(grab);
  for (const turn of history) {
    if (turn.action.startsWith("share(")) grab(turn.action);
  }
  return known;
}

function parseRejections(history: TurnView[]): Map<string, Set<string>> {
  const rejected = new Map<string, Set<string>>();
  for (const turn of history) {
    if (turn.outcome !== "rejected_placement") continue;
    const m = /move\(([^,]+), ([^,]+), ([^)]+)\)/.exec(turn.action);
    if (!m) continue;
    if (!rejected.has(m[1]!)) rejected.set(m[1]!, new Set());
    rejected.get(m[1]!)!.add(m[3]!);
  }
  return rejected;
}

describe("full human session through the UI", () => {
  it("plays a 4-object game, posts the survey and advances", async () => {
    const api = new ApiClient(baseUrl, (p) => {
      payloads.push(p);
      assertNoLeak(p);
    });
    const root = document.createElement("div");
    document.body.appendChild(root);
    const ui = new GameUI(root, api);
    await ui.start("e2e-tester", "e2e");

    expect(ui.view!.practice).toBe(true);
    expect(ui.view!.objects.length).toBe(4);
    expect(root.querySelectorAll("[data-bin]").length).toBe(7);
    // unreachable zones are visually grayed for seat p1
    expect(root.querySelector('[data-bin="area_p2"]')!.className).toContain("unreachable");
    expect(root.querySelector('[data-bin="top_left"]')!.className).toContain("unreachable");
    expect(root.querySelector('[data-bin="bottom_left"]')!.className).not.toContain(
      "unreachable",
    );

    const exercised = { share: false, ask: false, skip: false, move: false };

    const clickAndSettle = async (el: Element) => {
      const steps = ui.view!.step_count;
      (el as HTMLElement).click();
      await until(
        () => !ui.busy && (ui.view!.step_count > steps || ui.view!.status !== "running"),
        "turn to resolve",
      );
    };

    const humanTurn = async (): Promise<void> => {
      const view = ui.view!;
      if (!exercised.share) {
        const btn = root.querySelector("[data-share]")!;
        await clickAndSettle(btn);
        exercised.share = true;
        return;
      }
      if (!exercised.ask) {
        const btn = root.querySelector("[data-ask]")!;
        await clickAndSettle(btn);
        exercised.ask = true;
        return;
      }
      if (!exercised.skip) {
        await clickAndSettle(root.querySelector("[data-skip]")!);
        exercised.skip = true;
        return;
      }
      const known = parseKnownBins(ui.history, view.your_constraints);
      const rejected = parseRejections(ui.history);
      const movable = view.objects.filter((o) => {
        const bin = view.board[o];
        return bin === "area_p1" || bin === "common";
      });
      const doMove = async (obj: string, dst: BinName) => {
        (root.querySelector(`[data-object="${obj}"]`) as HTMLElement).click();
        await until(() => ui.selected === obj, "object selection");
        await clickAndSettle(root.querySelector(`[data-bin="${dst}"]`)!);
        exercised.move = true;
      };
      for (const obj of movable) {
        const target = known.get(obj);
        if (target && (HUMAN_DESTS as string[]).includes(target)) {
          return doMove(obj, target as BinName);
        }
        if (target && (DESTINATION_BINS as string[]).includes(target)) {
          if (view.board[obj] === "area_p1") return doMove(obj, "common");
        }
      }
      for (const obj of movable) {
        if (known.has(obj)) continue;
        const tried = rejected.get(obj) ?? new Set();
        const untried = HUMAN_DESTS.filter((b) => !tried.has(b));
        if (untried.length > 0) return doMove(obj, untried[0]!);
        if (view.board[obj] === "area_p1") return doMove(obj, "common");
      }
      await clickAndSettle(root.querySelector("[data-skip]")!);
    };

    let guard = 40;
    while (ui.view!.status === "running" && guard-- > 0) {
      expect(ui.view!.turn).toBe("p1"); // agent replies inside the same POST
      await humanTurn();
    }
    expect(ui.view!.status).not.toBe("running");
    expect(exercised).toEqual({ share: true, ask: true, skip: true, move: true });

    // history pane mirrors the server log exactly
    const serverLog = (await api.getHistory(ui.view!.session_id)).history;
    const entries = [...root.querySelectorAll("[data-history-entry]")];
    expect(entries.length).toBe(serverLog.length);
    serverLog.forEach((turn, i) => {
      const who = turn.actor === "p1" ? "You" : "Bot";
      expect(entries[i]!.textContent).toBe(`${who}: ${turn.action} (${turn.outcome})`);
    });

    // survey: three required 1-5 answers, then the next game starts
    const survey = root.querySelector("[data-survey]")!;
    expect(survey.querySelectorAll("[data-survey-question]").length).toBe(3);
    (survey.querySelector("[data-survey-submit]") as HTMLElement).click();
    await until(
      () => root.querySelector("[data-message]")?.textContent !== "",
      "incomplete-survey message",
    );
    expect(ui.view!.game_index).toBe(0); // incomplete form is blocked

    const answers = [4, 2, 5];
    answers.forEach((value, qi) => {
      const radio = survey.querySelector<HTMLInputElement>(
        `input[name="q${qi}"][value="${value}"]`,
      )!;
      radio.checked = true;
    });
    (survey.querySelector("[data-survey-submit]") as HTMLElement).click();
    await until(() => ui.view!.game_index === 1, "advance to the next game");
    expect(ui.view!.practice).toBe(false);
    expect(ui.view!.status).toBe("running");
    expect(ui.history.length).toBe(0);
    expect(root.querySelectorAll("[data-history-entry]").length).toBe(0);

    expect(payloads.length).toBeGreaterThan(10); // leak check really ran
    ui.stop();
  });
});
