/** DOM wiring: upload, grid interaction, control panel, actions, download. */

import { TrackTokClient, type Cell } from "./api.js";
import { DEFAULT_LAYOUT, cellAt, cellsInSpan, gridSize } from "./grid.js";
import { buildFrame, paint } from "./render.js";
import {
  SessionState,
  applyResult,
  canUndo,
  clearSelection,
  currentId,
  currentPiece,
  displayedPiece,
  initialState,
  loadPiece,
  previousId,
  redo,
  canRedo,
  selectCells,
  setControls,
  setPending,
  toggleCompare,
  undo,
} from "./state.js";

const client = new TrackTokClient(
  (window as { TRACKTOK_API?: string }).TRACKTOK_API ?? "",
);

let state: SessionState = initialState();
let dragAnchor: Cell | null = null;
let seedCounter = 1;

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

const canvas = byId<HTMLCanvasElement>("roll");
const status = byId<HTMLSpanElement>("status");

function setState(next: SessionState): void {
  state = next;
  render();
}

function render(): void {
  const piece = displayedPiece(state);
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  if (!piece) {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    return;
  }
  const size = gridSize(piece, DEFAULT_LAYOUT);
  canvas.width = size.width;
  canvas.height = size.height;
  paint(ctx, buildFrame(piece, state, DEFAULT_LAYOUT));

  byId<HTMLButtonElement>("infill").disabled =
    state.pending || state.selection.length === 0;
  byId<HTMLButtonElement>("generate").disabled = state.pending;
  byId<HTMLButtonElement>("undo").disabled = !canUndo(state);
  byId<HTMLButtonElement>("redo").disabled = !canRedo(state);
  byId<HTMLButtonElement>("compare").disabled = previousId(state) === null;
  byId<HTMLButtonElement>("compare").textContent =
    state.compare === "current" ? "Show previous" : "Show current";
  byId<HTMLAnchorElement>("download").classList.toggle(
    "disabled",
    currentId(state) === null,
  );
  status.textContent = state.pending
    ? "working…"
    : `piece ${currentId(state) ?? "—"} · ${state.selection.length} bars selected`;
}

function readControls(): void {
  const density = byId<HTMLInputElement>("density").value;
  const program = byId<HTMLInputElement>("program").value;
  const temperature = Number(byId<HTMLInputElement>("temperature").value) || 1;
  setState(
    setControls(state, {
      density: density === "" ? null : Number(density),
      program: program === "" ? null : Number(program),
      temperature,
    }),
  );
}

async function withPending(work: () => Promise<void>): Promise<void> {
  if (state.pending) return; // one in-flight request per session
  setState(setPending(state, true));
  try {
    await work();
  } catch (error) {
    status.textContent = String(error);
    setState(setPending(state, false));
  }
}

byId<HTMLInputElement>("file").addEventListener("change", (event) => {
  const input = event.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  void withPending(async () => {
    const data = new Uint8Array(await file.arrayBuffer());
    const summary = await client.uploadMidi(data);
    setState(setPending(loadPiece(state, summary), false));
  });
});

canvas.addEventListener("mousedown", (event) => {
  const piece = displayedPiece(state);
  if (!piece || state.compare === "previous") return;
  const bounds = canvas.getBoundingClientRect();
  dragAnchor = cellAt(
    piece,
    DEFAULT_LAYOUT,
    event.clientX - bounds.left,
    event.clientY - bounds.top,
  );
  if (dragAnchor) setState(selectCells(state, [dragAnchor]));
  else setState(clearSelection(state));
});

canvas.addEventListener("mousemove", (event) => {
  if (!dragAnchor) return;
  const piece = displayedPiece(state);
  if (!piece) return;
  const bounds = canvas.getBoundingClientRect();
  const cell = cellAt(
    piece,
    DEFAULT_LAYOUT,
    event.clientX - bounds.left,
    event.clientY - bounds.top,
  );
  if (cell) setState(selectCells(state, cellsInSpan(dragAnchor, cell)));
});

window.addEventListener("mouseup", () => {
  dragAnchor = null;
});

byId<HTMLButtonElement>("infill").addEventListener("click", () => {
  const id = currentId(state);
  if (!id || state.selection.length === 0) return;
  readControls();
  void withPending(async () => {
    const result = await client.infill(id, {
      mask: state.selection,
      temperature: state.controls.temperature,
      seed: seedCounter++,
      max_tokens: 16384,
    });
    const summary = await client.getPiece(result.id);
    const changed = result.changed.map(([track, bar]) => ({ track, bar }));
    setState(applyResult(state, summary, changed));
  });
});

byId<HTMLButtonElement>("generate").addEventListener("click", () => {
  const id = currentId(state);
  if (!id) return;
  readControls();
  void withPending(async () => {
    const result = await client.generateTracks(id, {
      n_new: 1,
      overrides: [
        {
          program: state.controls.program,
          density: state.controls.density,
          poly_range: state.controls.polyRange,
          dur_range: state.controls.durRange,
        },
      ],
      temperature: state.controls.temperature,
      seed: seedCounter++,
      max_tokens: 16384,
    });
    const summary = await client.getPiece(result.id);
    setState(applyResult(state, summary, []));
  });
});

byId<HTMLButtonElement>("undo").addEventListener("click", () =>
  setState(undo(state)),
);
byId<HTMLButtonElement>("redo").addEventListener("click", () =>
  setState(redo(state)),
);
byId<HTMLButtonElement>("compare").addEventListener("click", () =>
  setState(toggleCompare(state)),
);

byId<HTMLAnchorElement>("download").addEventListener("click", (event) => {
  event.preventDefault();
  const id = currentId(state);
  if (!id) return;
  void withPending(async () => {
    const data = await client.downloadMidi(id);
    const blob = new Blob([data.slice().buffer], { type: "audio/midi" });
    const url = URL.createObjectURL(blob);
    const link = document.createElement("a");
    link.href = url;
    link.download = `${id}.mid`;
    link.click();
    URL.revokeObjectURL(url);
    setState(setPending(state, false));
  });
});

render();
