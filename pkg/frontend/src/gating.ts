/**
 * Control gating: every enablement decision mirrors a service flag, never a
 * local computation. Accepted answers linger on the board for a short fade
 * before disappearing.
 */

import { BoardPayload, BoardQuestion } from "./types.js";

export const FADE_MS = 1500;

export interface ControlState {
  refillEnabled: boolean;
  boardVersion: number;
  /** one in-flight mutation at a time, per the single-writer session */
  mutationPending: boolean;
  /** question id -> removal deadline (ms epoch) for accepted-answer fades */
  fading: Map<string, number>;
  /** snapshot of faded questions so they can render during the fade */
  ghosts: Map<string, BoardQuestion>;
}

export function initialControls(): ControlState {
  return {
    refillEnabled: false,
    boardVersion: -1,
    mutationPending: false,
    fading: new Map(),
    ghosts: new Map(),
  };
}

export function applyBoard(state: ControlState, board: BoardPayload): ControlState {
  return {
    ...state,
    refillEnabled: board.refill_enabled,
    boardVersion: board.board_version,
  };
}

export function beginMutation(state: ControlState): ControlState {
  return { ...state, mutationPending: true };
}

export function endMutation(state: ControlState): ControlState {
  return { ...state, mutationPending: false };
}

/** The refill button is active only when the service says so and nothing is in flight. */
export function refillButtonEnabled(state: ControlState): boolean {
  return state.refillEnabled && !state.mutationPending;
}

export function answerControlsEnabled(state: ControlState): boolean {
  return !state.mutationPending;
}

/** Start the accepted-answer fade for a question that just left the board. */
export function scheduleFade(
  state: ControlState,
  question: BoardQuestion,
  now: number
): ControlState {
  const fading = new Map(state.fading);
  const ghosts = new Map(state.ghosts);
  fading.set(question.id, now + FADE_MS);
  ghosts.set(question.id, question);
  return { ...state, fading, ghosts };
}

/** Drop ghosts whose fade deadline has passed. */
export function expireFades(state: ControlState, now: number): ControlState {
  const fading = new Map(state.fading);
  const ghosts = new Map(state.ghosts);
  for (const [qid, deadline] of state.fading) {
    if (now >= deadline) {
      fading.delete(qid);
      ghosts.delete(qid);
    }
  }
  return { ...state, fading, ghosts };
}

export interface VisibleQuestion {
  question: BoardQuestion;
  fading: boolean;
}

/**
 * What the board renders: the service's questions plus not-yet-expired
 * ghosts of just-accepted ones, in their original positions appended last.
 */
export function visibleQuestions(
  board: BoardPayload,
  state: ControlState,
  now: number
): VisibleQuestion[] {
  const live = board.questions.map((q) => ({ question: q, fading: false }));
  const liveIds = new Set(board.questions.map((q) => q.id));
  for (const [qid, deadline] of state.fading) {
    if (now < deadline && !liveIds.has(qid)) {
      const ghost = state.ghosts.get(qid);
      if (ghost) live.push({ question: ghost, fading: true });
    }
  }
  return live;
}
