/** Typed client for the /v1 HTTP API. The UI never touches files directly. */

export interface NoteView {
  onset: number;
  pitch: number;
  duration: number;
  velocity: number;
}

export interface BarView {
  index: number;
  length: number;
  numerator: number;
  denominator: number;
  note_count: number;
  notes: NoteView[];
}

export interface ControlsView {
  density: number;
  poly_range: [number, number];
  dur_range: [number, number];
}

export interface TrackView {
  program: number | null;
  is_drum: boolean;
  bars: BarView[];
  controls?: ControlsView | null;
}

export interface PieceSummary {
  id: string;
  bars: number;
  tracks: TrackView[];
}

export interface Cell {
  track: number;
  bar: number;
}

export interface InfillRequest {
  mask: Cell[];
  temperature: number;
  seed: number;
  l_poly?: number | null;
  max_tokens?: number;
  reject_duplicates?: boolean;
  reject_silence?: boolean;
}

export interface InfillResponse {
  id: string;
  changed: [number, number][];
}

export interface OverridePayload {
  program?: number | null;
  density?: number | null;
  poly_range?: [number, number] | null;
  dur_range?: [number, number] | null;
}

export interface GenerateRequest {
  n_new: number;
  overrides: OverridePayload[];
  temperature: number;
  seed: number;
  l_poly?: number | null;
  max_tokens?: number;
}

export interface GenerateResponse {
  id: string;
  new_track_indices: number[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseError(response: Response): Promise<never> {
  let detail = response.statusText;
  try {
    const body = (await response.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

function bytesToBase64(data: Uint8Array): string {
  let binary = "";
  for (const byte of data) binary += String.fromCharCode(byte);
  return btoa(binary);
}

export class TrackTokClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.url(path), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  async uploadMidi(data: Uint8Array): Promise<PieceSummary> {
    return this.post<PieceSummary>("/v1/pieces", {
      midi_base64: bytesToBase64(data),
    });
  }

  async getPiece(id: string): Promise<PieceSummary> {
    const response = await fetch(this.url(`/v1/pieces/${id}`));
    if (!response.ok) await parseError(response);
    return (await response.json()) as PieceSummary;
  }

  async infill(id: string, request: InfillRequest): Promise<InfillResponse> {
    const payload = {
      ...request,
      mask: request.mask.map((c) => [c.track, c.bar]),
    };
    return this.post<InfillResponse>(`/v1/pieces/${id}/infill`, payload);
  }

  async generateTracks(
    id: string,
    request: GenerateRequest,
  ): Promise<GenerateResponse> {
    return this.post<GenerateResponse>(
      `/v1/pieces/${id}/tracks:generate`,
      request,
    );
  }

  async downloadMidi(id: string): Promise<Uint8Array> {
    const response = await fetch(this.url(`/v1/pieces/${id}/midi`));
    if (!response.ok) await parseError(response);
    return new Uint8Array(await response.arrayBuffer());
  }

  async vocab(): Promise<{ size: number; hash: string }> {
    const response = await fetch(this.url("/v1/meta/vocab"));
    if (!response.ok) await parseError(response);
    return (await response.json()) as { size: number; hash: string };
  }
}
