/** Session state: piece lineage (undo chain), selection, controls, diff.
 *
 * Every transition is a pure function `(state, input) -> state`, so the view
 * is a pure function of (lineage, selection, last API responses) and
 * replaying a lineage reproduces the exact view.
 */

import type { Cell, PieceSummary } from "./api.js";

export interface PendingControls {
  program: number | null;
  density: number | null;
  polyRange: [number, number] | null;
  durRange: [number, number] | null;
  temperature: number;
}

export type CompareSide = "current" | "previous";

export interface SessionState {
  /** Append-only chain of piece ids; `cursor` points at the displayed one. */
  lineage: string[];
  cursor: number;
  pieces: Record<string, PieceSummary>;
  selection: Cell[];
  controls: PendingControls;
  lastChanged: Cell[];
  pending: boolean;
  compare: CompareSide;
}

export const DEFAULT_CONTROLS: PendingControls = {
  program: null,
  density: null,
  polyRange: null,
  durRange: null,
  temperature: 1.0,
};

export function initialState(): SessionState {
  return {
    lineage: [],
    cursor: -1,
    pieces: {},
    selection: [],
    controls: { ...DEFAULT_CONTROLS },
    lastChanged: [],
    pending: false,
    compare: "current",
  };
}

export function currentId(state: SessionState): string | null {
  return state.cursor >= 0 ? (state.lineage[state.cursor] ?? null) : null;
}

export function previousId(state: SessionState): string | null {
  return state.cursor >= 1 ? (state.lineage[state.cursor - 1] ?? null) : null;
}

export function currentPiece(state: SessionState): PieceSummary | null {
  const id = currentId(state);
  return id ? (state.pieces[id] ?? null) : null;
}

export function displayedPiece(state: SessionState): PieceSummary | null {
  if (state.compare === "previous") {
    const id = previousId(state);
    return id ? (state.pieces[id] ?? null) : null;
  }
  return currentPiece(state);
}

export function isValidCell(piece: PieceSummary, cell: Cell): boolean {
  return (
    Number.isInteger(cell.track) &&
    Number.isInteger(cell.bar) &&
    cell.track >= 0 &&
    cell.track < piece.tracks.length &&
    cell.bar >= 0 &&
    cell.bar < piece.bars
  );
}

function dedupe(cells: Cell[]): Cell[] {
  const seen = new Set<string>();
  const out: Cell[] = [];
  for (const cell of cells) {
    const key = `${cell.track}:${cell.bar}`;
    if (!seen.has(key)) {
      seen.add(key);
      out.push(cell);
    }
  }
  return out;
}

/** Replace the session with a freshly uploaded piece (lineage length 1). */
export function loadPiece(
  state: SessionState,
  summary: PieceSummary,
): SessionState {
  return {
    ...initialState(),
    controls: state.controls,
    lineage: [summary.id],
    cursor: 0,
    pieces: { ...state.pieces, [summary.id]: summary },
  };
}

/** Rectangle (or single-cell) selection, clamped to valid cells. */
export function selectCells(state: SessionState, cells: Cell[]): SessionState {
  const piece = currentPiece(state);
  if (!piece) return state;
  const valid = dedupe(cells).filter((c) => isValidCell(piece, c));
  return { ...state, selection: valid };
}

export function clearSelection(state: SessionState): SessionState {
  return { ...state, selection: [] };
}

export function setControls(
  state: SessionState,
  controls: Partial<PendingControls>,
): SessionState {
  return { ...state, controls: { ...state.controls, ...controls } };
}

export function setPending(state: SessionState, pending: boolean): SessionState {
  return { ...state, pending };
}

/** Record a generation result: push the id, remember the changed bars.
 *
 * Editing from the middle of the chain truncates the redo tail, exactly like
 * a text editor's undo buffer; earlier ids stay retrievable by undo.
 */
export function applyResult(
  state: SessionState,
  summary: PieceSummary,
  changed: Cell[],
): SessionState {
  const lineage = [...state.lineage.slice(0, state.cursor + 1), summary.id];
  const next: SessionState = {
    ...state,
    lineage,
    cursor: lineage.length - 1,
    pieces: { ...state.pieces, [summary.id]: summary },
    lastChanged: changed.filter((c) => isValidCell(summary, c)),
    pending: false,
    compare: "current",
  };
  // the selection invariant is against the *displayed* piece
  return { ...next, selection: next.selection.filter((c) => isValidCell(summary, c)) };
}

export function canUndo(state: SessionState): boolean {
  return state.cursor > 0;
}

export function canRedo(state: SessionState): boolean {
  return state.cursor >= 0 && state.cursor < state.lineage.length - 1;
}

export function undo(state: SessionState): SessionState {
  if (!canUndo(state)) return state;
  const next = { ...state, cursor: state.cursor - 1, lastChanged: [], compare: "current" as const };
  const piece = currentPiece(next);
  return piece
    ? { ...next, selection: next.selection.filter((c) => isValidCell(piece, c)) }
    : next;
}

export function redo(state: SessionState): SessionState {
  if (!canRedo(state)) return state;
  const next = { ...state, cursor: state.cursor + 1, compare: "current" as const };
  const piece = currentPiece(next);
  return piece
    ? { ...next, selection: next.selection.filter((c) => isValidCell(piece, c)) }
    : next;
}

export function toggleCompare(state: SessionState): SessionState {
  if (state.compare === "current" && previousId(state) === null) return state;
  return {
    ...state,
    compare: state.compare === "current" ? "previous" : "current",
  };
}

export function isChanged(state: SessionState, cell: Cell): boolean {
  return state.lastChanged.some(
    (c) => c.track === cell.track && c.bar === cell.bar,
  );
}

/** Rebuild a view from a stored lineage by refetching summaries in order. */
export async function replayLineage(
  lineage: string[],
  fetchSummary: (id: string) => Promise<PieceSummary>,
): Promise<SessionState> {
  let state = initialState();
  for (const id of lineage) {
    const summary = await fetchSummary(id);
    state =
      state.lineage.length === 0
        ? loadPiece(state, summary)
        : applyResult(state, summary, []);
  }
  return state;
}
