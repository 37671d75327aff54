/** Scripted end-to-end flow against a live service instance:
 * upload -> select 2 bars -> set controls -> infill -> diff highlight ->
 * undo -> download re-imports cleanly.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { TrackTokClient, type Cell, type PieceSummary } from "../src/api.js";
import {
  applyResult,
  currentId,
  currentPiece,
  initialState,
  isChanged,
  loadPiece,
  selectCells,
  setControls,
  undo,
} from "../src/state.js";

const here = dirname(fileURLToPath(import.meta.url));
const port = 8900 + Math.floor(Math.random() * 500);
const base = `http://127.0.0.1:${port}`;

let server: ChildProcess;
let workspace: string;
const client = new TrackTokClient(base);

async function waitForService(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const vocab = await client.vocab();
      if (vocab.size > 0) return;
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 250));
    }
  }
  throw new Error(`service did not come up on ${base}`);
}

beforeAll(async () => {
  workspace = mkdtempSync(join(tmpdir(), "tracktok-e2e-"));
  server = spawn("tracktok", ["serve", "--port", String(port)], {
    env: { ...process.env, TRACKTOK_WORKSPACE_ROOT: workspace },
    stdio: "ignore",
  });
  await waitForService();
});

afterAll(() => {
  server?.kill("SIGTERM");
  if (workspace) rmSync(workspace, { recursive: true, force: true });
});

function notesOf(piece: PieceSummary, cell: Cell) {
  return piece.tracks[cell.track]!.bars[cell.bar]!.notes;
}

describe("UI flow against a live service", () => {
  it("upload, 2-bar infill, diff highlight, undo, download round trip", async () => {
    const midi = new Uint8Array(readFileSync(join(here, "fixtures", "demo.mid")));

    // upload
    const original = await client.uploadMidi(midi);
    expect(original.bars).toBeGreaterThanOrEqual(4);
    expect(original.tracks.length).toBeGreaterThanOrEqual(2);
    let state = loadPiece(initialState(), original);
    expect(currentId(state)).toBe(original.id);

    // select two bars on one track, set controls
    const mask: Cell[] = [
      { track: 0, bar: 1 },
      { track: 0, bar: 2 },
    ];
    state = selectCells(state, mask);
    expect(state.selection).toEqual(mask);
    state = setControls(state, { density: 5, temperature: 0.9 });

    // infill
    const result = await client.infill(original.id, {
      mask: state.selection,
      temperature: state.controls.temperature,
      seed: 7,
      max_tokens: 16384,
    });
    const edited = await client.getPiece(result.id);
    const changed = result.changed.map(([track, bar]) => ({ track, bar }));
    state = applyResult(state, edited, changed);

    // only the selected bars are highlighted as changed
    const changedSet = new Set(changed.map((c) => `${c.track}:${c.bar}`));
    expect(changedSet).toEqual(new Set(["0:1", "0:2"]));
    for (let t = 0; t < edited.tracks.length; t += 1) {
      for (let b = 0; b < edited.bars; b += 1) {
        const cell = { track: t, bar: b };
        if (changedSet.has(`${t}:${b}`)) {
          expect(isChanged(state, cell)).toBe(true);
        } else {
          expect(isChanged(state, cell)).toBe(false);
          // unmasked material is untouched
          expect(notesOf(edited, cell)).toEqual(notesOf(original, cell));
        }
      }
    }

    // undo restores the exact prior piece
    state = undo(state);
    expect(currentId(state)).toBe(original.id);
    expect(currentPiece(state)).toEqual(original);
    const refetched = await client.getPiece(original.id);
    expect(refetched).toEqual(original);

    // download re-imports cleanly (same content-addressed id)
    const download = await client.downloadMidi(original.id);
    expect(download.length).toBeGreaterThan(0);
    const reimported = await client.uploadMidi(download);
    expect(reimported.id).toBe(original.id);
    expect(reimported).toEqual(original);
  });

  it("generate track with a program override labels the new track", async () => {
    const midi = new Uint8Array(readFileSync(join(here, "fixtures", "demo.mid")));
    const original = await client.uploadMidi(midi);
    const result = await client.generateTracks(original.id, {
      n_new: 1,
      overrides: [{ program: 30 }],
      temperature: 1.0,
      seed: 11,
      max_tokens: 16384,
    });
    expect(result.new_track_indices).toEqual([original.tracks.length]);
    const extended = await client.getPiece(result.id);
    expect(extended.tracks.length).toBe(original.tracks.length + 1);
    expect(extended.tracks.at(-1)!.program).toBe(30);
  });
});
