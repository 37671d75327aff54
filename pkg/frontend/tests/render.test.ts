import { describe, expect, it } from "vitest";

import { COLORS, buildFrame } from "../src/render.js";
import { DEFAULT_LAYOUT, cellRect } from "../src/grid.js";
import { applyResult, initialState, loadPiece, selectCells } from "../src/state.js";
import { summary } from "./helpers.js";

function rectsOfColor(ops: ReturnType<typeof buildFrame>, color: string) {
  return ops.filter((op) => op.kind !== "text" && op.color === color);
}

describe("frame building", () => {
  it("is deterministic for identical state", () => {
    const piece = summary("a", 2, 4);
    const state = loadPiece(initialState(), piece);
    expect(buildFrame(piece, state)).toEqual(buildFrame(piece, state));
  });

  it("highlights exactly the changed cells", () => {
    const before = summary("a", 2, 4);
    let state = loadPiece(initialState(), before);
    const after = summary("b", 2, 4);
    state = applyResult(state, after, [
      { track: 1, bar: 0 },
      { track: 1, bar: 1 },
    ]);
    const ops = buildFrame(after, state);
    const highlights = rectsOfColor(ops, COLORS.changed);
    expect(highlights.length).toBe(2);
    const expected = [
      cellRect(DEFAULT_LAYOUT, { track: 1, bar: 0 }),
      cellRect(DEFAULT_LAYOUT, { track: 1, bar: 1 }),
    ];
    for (const [i, rect] of expected.entries()) {
      expect(highlights[i]).toMatchObject(rect);
    }
  });

  it("renders selection overlays for selected cells only", () => {
    const piece = summary("a", 2, 4);
    let state = loadPiece(initialState(), piece);
    state = selectCells(state, [{ track: 0, bar: 2 }]);
    const overlays = rectsOfColor(buildFrame(piece, state), COLORS.selection);
    expect(overlays.length).toBe(1);
    expect(overlays[0]).toMatchObject(cellRect(DEFAULT_LAYOUT, { track: 0, bar: 2 }));
  });

  it("draws one note rectangle per note, drums in their own color", () => {
    const piece = summary("a", 2, 3); // second track is the drum track
    const state = loadPiece(initialState(), piece);
    const ops = buildFrame(piece, state);
    expect(rectsOfColor(ops, COLORS.note).length).toBe(3);
    expect(rectsOfColor(ops, COLORS.drumNote).length).toBe(3);
  });
});
