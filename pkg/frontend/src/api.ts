import type { Correction, FrameInfo, FramePayload, SequenceInfo } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public body: unknown) {
    super(`api error ${status}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the review endpoints; fetch is injectable for tests. */
export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path);
    if (!response.ok) {
      throw new ApiError(response.status, await response.json().catch(() => null));
    }
    return (await response.json()) as T;
  }

  sequences(): Promise<SequenceInfo[]> {
    return this.getJson("/api/sequences");
  }

  frames(sequence: string): Promise<FrameInfo[]> {
    return this.getJson(`/api/frames/${encodeURIComponent(sequence)}`);
  }

  frame(sequence: string, ts: number): Promise<FramePayload> {
    return this.getJson(`/api/frame/${encodeURIComponent(sequence)}/${ts}`);
  }

  /** All-or-nothing on the server side; any failure rejects with ApiError. */
  async saveLabels(sequence: string, ts: number, corrections: Correction[]): Promise<void> {
    const response = await this.fetchFn(
      `${this.baseUrl}/api/frame/${encodeURIComponent(sequence)}/${ts}/labels`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(corrections),
      },
    );
    if (!response.ok) {
      throw new ApiError(response.status, await response.json().catch(() => null));
    }
  }
}
