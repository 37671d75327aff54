import type { BarView, PieceSummary, TrackView } from "../src/api.js";

export function bar(index: number, notes: BarView["notes"] = []): BarView {
  return {
    index,
    length: 48,
    numerator: 4,
    denominator: 4,
    note_count: notes.length,
    notes,
  };
}

export function track(program: number | null, bars: BarView[], isDrum = false): TrackView {
  return { program, is_drum: isDrum, bars };
}

export function summary(
  id: string,
  nTracks: number,
  nBars: number,
): PieceSummary {
  const tracks: TrackView[] = [];
  for (let t = 0; t < nTracks; t += 1) {
    const bars: BarView[] = [];
    for (let b = 0; b < nBars; b += 1) {
      bars.push(
        bar(b, [
          { onset: (t + b) % 48, pitch: 60 + t, duration: 4, velocity: 100 },
        ]),
      );
    }
    tracks.push(track(t === nTracks - 1 ? null : t, bars, t === nTracks - 1));
  }
  return { id, bars: nBars, tracks };
}
