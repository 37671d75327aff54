/** Canvas painting, split into a pure draw-op builder plus a thin painter. */

import type { Cell, PieceSummary } from "./api.js";
import {
  DEFAULT_LAYOUT,
  GridLayout,
  cellRect,
  gridSize,
  noteRects,
  trackLabel,
} from "./grid.js";
import { SessionState, isChanged } from "./state.js";

export type DrawOp =
  | { kind: "fill"; x: number; y: number; width: number; height: number; color: string }
  | { kind: "stroke"; x: number; y: number; width: number; height: number; color: string }
  | { kind: "text"; x: number; y: number; text: string; color: string };

export const COLORS = {
  background: "#11141a",
  lane: "#181c24",
  laneAlt: "#1d2230",
  grid: "#2a3040",
  note: "#6fb3ff",
  drumNote: "#ffb36f",
  selection: "rgba(120, 180, 255, 0.25)",
  selectionEdge: "#78b4ff",
  changed: "rgba(126, 231, 135, 0.28)",
  changedEdge: "#7ee787",
  label: "#aab4c8",
};

function selected(state: SessionState, cell: Cell): boolean {
  return state.selection.some(
    (c) => c.track === cell.track && c.bar === cell.bar,
  );
}

/** Build the full frame as data; the painter below just replays it. */
export function buildFrame(
  piece: PieceSummary,
  state: SessionState,
  layout: GridLayout = DEFAULT_LAYOUT,
): DrawOp[] {
  const ops: DrawOp[] = [];
  const size = gridSize(piece, layout);
  ops.push({ kind: "fill", ...size, color: COLORS.background });

  for (let track = 0; track < piece.tracks.length; track += 1) {
    const lane = {
      x: 0,
      y: layout.ruler + track * layout.trackHeight,
      width: size.width,
      height: layout.trackHeight,
    };
    ops.push({
      kind: "fill",
      ...lane,
      color: track % 2 ? COLORS.laneAlt : COLORS.lane,
    });
    ops.push({
      kind: "text",
      x: 8,
      y: lane.y + 16,
      text: trackLabel(piece, track),
      color: COLORS.label,
    });
  }

  for (let bar = 0; bar < piece.bars; bar += 1) {
    const x = layout.gutter + bar * layout.barWidth;
    ops.push({
      kind: "fill",
      x,
      y: 0,
      width: 1,
      height: size.height,
      color: COLORS.grid,
    });
    ops.push({
      kind: "text",
      x: x + 4,
      y: 16,
      text: String(bar + 1),
      color: COLORS.label,
    });
  }

  for (let track = 0; track < piece.tracks.length; track += 1) {
    const isDrum = piece.tracks[track]?.is_drum ?? false;
    for (let bar = 0; bar < piece.bars; bar += 1) {
      const cell = { track, bar };
      for (const note of noteRects(piece, layout, cell)) {
        ops.push({
          kind: "fill",
          x: note.x,
          y: note.y,
          width: note.width,
          height: note.height,
          color: isDrum ? COLORS.drumNote : COLORS.note,
        });
      }
      if (isChanged(state, cell)) {
        const rect = cellRect(layout, cell);
        ops.push({ kind: "fill", ...rect, color: COLORS.changed });
        ops.push({ kind: "stroke", ...rect, color: COLORS.changedEdge });
      }
      if (selected(state, cell)) {
        const rect = cellRect(layout, cell);
        ops.push({ kind: "fill", ...rect, color: COLORS.selection });
        ops.push({ kind: "stroke", ...rect, color: COLORS.selectionEdge });
      }
    }
  }
  return ops;
}

export function paint(ctx: CanvasRenderingContext2D, ops: DrawOp[]): void {
  ctx.font = "12px system-ui, sans-serif";
  for (const op of ops) {
    if (op.kind === "fill") {
      ctx.fillStyle = op.color;
      ctx.fillRect(op.x, op.y, op.width, op.height);
    } else if (op.kind === "stroke") {
      ctx.strokeStyle = op.color;
      ctx.lineWidth = 2;
      ctx.strokeRect(op.x + 1, op.y + 1, op.width - 2, op.height - 2);
    } else {
      ctx.fillStyle = op.color;
      ctx.fillText(op.text, op.x, op.y);
    }
  }
}
