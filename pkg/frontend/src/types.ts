/** Payload shapes of the session service; the client renders these verbatim
 * and duplicates no game logic beyond reachability graying. */

export type BinName =
  | "top_left"
  | "top_right"
  | "bottom_left"
  | "bottom_right"
  | "area_p1"
  | "area_p2"
  | "common";

export const DESTINATION_BINS: readonly BinName[] = [
  "top_left",
  "top_right",
  "bottom_left",
  "bottom_right",
];

export const ALL_BINS: readonly BinName[] = [
  ...DESTINATION_BINS,
  "area_p1",
  "area_p2",
  "common",
];

/** Zones the human (always seat p1) may use as move sources and targets. */
export const HUMAN_REACH: ReadonlySet<BinName> = new Set([
  "bottom_left",
  "bottom_right",
  "area_p1",
  "common",
]);

export interface PendingAsk {
  asker: "p1" | "p2";
  object: string;
}

export interface HumanView {
  session_id: string;
  game_index: number;
  game_count: number;
  practice: boolean;
  status: "running" | "solved" | "limit_reached";
  step_count: number;
  step_limit: number;
  turn: "p1" | "p2";
  board: Record<string, BinName>;
  objects: string[];
  your_constraints: string[];
  pending_ask: PendingAsk | null;
  survey_questions: string[];
  complete: boolean;
}

export interface TurnView {
  index: number;
  actor: "p1" | "p2";
  action: string;
  outcome: string;
}

export interface ActionResponse {
  human: TurnView;
  agent: TurnView[];
  state: HumanView;
  survey_due: boolean;
}

export interface FeedbackResponse {
  ok: boolean;
  state: HumanView;
}
