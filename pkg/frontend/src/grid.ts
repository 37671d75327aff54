/** Pure grid geometry: pixel <-> (track, bar) mapping and note layout.
 *
 * Kept free of canvas/DOM types so layout and hit-testing are unit-testable.
 */

import type { Cell, PieceSummary } from "./api.js";

export interface GridLayout {
  /** Pixel width of one bar column. */
  barWidth: number;
  /** Pixel height of one track lane. */
  trackHeight: number;
  /** Left gutter for track labels. */
  gutter: number;
  /** Top ruler for bar numbers. */
  ruler: number;
}

export const DEFAULT_LAYOUT: GridLayout = {
  barWidth: 96,
  trackHeight: 72,
  gutter: 120,
  ruler: 24,
};

export interface Rect {
  x: number;
  y: number;
  width: number;
  height: number;
}

export function gridSize(piece: PieceSummary, layout: GridLayout): Rect {
  return {
    x: 0,
    y: 0,
    width: layout.gutter + piece.bars * layout.barWidth,
    height: layout.ruler + piece.tracks.length * layout.trackHeight,
  };
}

/** The cell under a pixel, or null over the gutter/ruler or outside. */
export function cellAt(
  piece: PieceSummary,
  layout: GridLayout,
  x: number,
  y: number,
): Cell | null {
  const bar = Math.floor((x - layout.gutter) / layout.barWidth);
  const track = Math.floor((y - layout.ruler) / layout.trackHeight);
  if (x < layout.gutter || y < layout.ruler) return null;
  if (bar < 0 || bar >= piece.bars) return null;
  if (track < 0 || track >= piece.tracks.length) return null;
  return { track, bar };
}

export function cellRect(layout: GridLayout, cell: Cell): Rect {
  return {
    x: layout.gutter + cell.bar * layout.barWidth,
    y: layout.ruler + cell.track * layout.trackHeight,
    width: layout.barWidth,
    height: layout.trackHeight,
  };
}

/** All cells covered by a drag rectangle between two anchor cells. */
export function cellsInSpan(a: Cell, b: Cell): Cell[] {
  const cells: Cell[] = [];
  const t0 = Math.min(a.track, b.track);
  const t1 = Math.max(a.track, b.track);
  const b0 = Math.min(a.bar, b.bar);
  const b1 = Math.max(a.bar, b.bar);
  for (let track = t0; track <= t1; track += 1) {
    for (let bar = b0; bar <= b1; bar += 1) {
      cells.push({ track, bar });
    }
  }
  return cells;
}

export interface NoteRect extends Rect {
  pitch: number;
  velocity: number;
}

const PITCH_LO = 21;
const PITCH_HI = 109; // rendered register, matching the 88-key span

/** Note rectangles for one bar of one track, in absolute pixels. */
export function noteRects(
  piece: PieceSummary,
  layout: GridLayout,
  cell: Cell,
): NoteRect[] {
  const track = piece.tracks[cell.track];
  const bar = track?.bars[cell.bar];
  if (!track || !bar || bar.length <= 0) return [];
  const frame = cellRect(layout, cell);
  const stepWidth = frame.width / bar.length;
  const span = PITCH_HI - PITCH_LO;
  const pitchHeight = frame.height / span;
  const out: NoteRect[] = [];
  for (const note of bar.notes) {
    const pitch = Math.max(PITCH_LO, Math.min(PITCH_HI - 1, note.pitch));
    // duration may spill past the bar line; clip the drawing to the cell
    const width = Math.min(note.duration, bar.length - note.onset) * stepWidth;
    out.push({
      x: frame.x + note.onset * stepWidth,
      y: frame.y + (PITCH_HI - 1 - pitch) * pitchHeight,
      width: Math.max(width, 1),
      height: Math.max(pitchHeight, 1),
      pitch: note.pitch,
      velocity: note.velocity,
    });
  }
  return out;
}

export function trackLabel(piece: PieceSummary, track: number): string {
  const view = piece.tracks[track];
  if (!view) return "";
  return view.is_drum ? "Drums" : `Program ${view.program}`;
}
