// Typed client for the /v1 HTTP API. The UI holds no model logic: every
// number it displays comes out of one of these calls.

export interface AffectPrediction {
  emotion: string;
  emotion_id: number;
  probabilities: Record<string, number>;
  valence: number;
  arousal: number;
  models: { classifier: string | null; regressor: string | null };
  latency_ms: number;
}

export interface Track {
  id: string;
  title: string;
  artist: string;
  external_url: string;
}

export interface Recommendation {
  query: {
    seed_genres: string[];
    target_valence: number;
    target_energy: number;
    mode: string;
    limit: number;
  };
  affect: { emotion: string; valence: number; arousal: number };
  tracks: Track[];
}

export interface RatingRecord {
  session_id: string;
  instructed_emotion: string;
  rating: number;
  self_valence: number;
  self_arousal: number;
  track_ids: string[];
  predicted: { emotion: string; valence: number; arousal: number } | null;
}

export interface EmotionSummary {
  mean_rating: number | null;
  count: number;
}

export interface RatingsSummary {
  emotions: Record<string, EmotionSummary>;
  overall: EmotionSummary;
}

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

async function blobBytes(image: Blob): Promise<ArrayBuffer> {
  if (typeof image.arrayBuffer === "function") return image.arrayBuffer();
  // Older Blob implementations only expose FileReader.
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => resolve(reader.result as ArrayBuffer);
    reader.onerror = () => reject(reader.error);
    reader.readAsArrayBuffer(image);
  });
}

async function parseError(resp: Response): Promise<never> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (typeof body.detail === "string") detail = body.detail;
    else if (body.detail) detail = JSON.stringify(body.detail);
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(detail, resp.status);
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async health(): Promise<{ status: string; models_loaded: boolean }> {
    const resp = await fetch(this.url("/v1/health"));
    if (!resp.ok) return parseError(resp);
    return resp.json();
  }

  async predict(image: Blob, bbox?: [number, number, number, number]): Promise<AffectPrediction> {
    const query = bbox ? `?bbox=${bbox.join(",")}` : "";
    // Send the raw bytes: an ArrayBuffer body behaves identically in the
    // browser and in non-browser fetch implementations.
    const resp = await fetch(this.url(`/v1/predict${query}`), {
      method: "POST",
      body: await blobBytes(image),
      headers: { "Content-Type": image.type || "application/octet-stream" },
    });
    if (!resp.ok) return parseError(resp);
    return resp.json();
  }

  async recommend(
    affect: { emotion: string; valence: number; arousal: number },
    limit = 5,
  ): Promise<Recommendation> {
    const resp = await fetch(this.url("/v1/recommend"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ ...affect, limit }),
    });
    if (!resp.ok) return parseError(resp);
    return resp.json();
  }

  async postRating(record: RatingRecord): Promise<{ id: number }> {
    const resp = await fetch(this.url("/v1/ratings"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(record),
    });
    if (!resp.ok) return parseError(resp);
    return resp.json();
  }

  async ratingsSummary(): Promise<RatingsSummary> {
    const resp = await fetch(this.url("/v1/ratings/summary"));
    if (!resp.ok) return parseError(resp);
    return resp.json();
  }
}
