/** Thin typed client for the collection service.
 *
 * Only two endpoints exist for the ballot page: GET /api/spec and
 * POST /api/ballot. HTTP failures map to typed results instead of throws,
 * so the page can render a retry affordance with the session untouched.
 */

import { BallotSpec, parseSpec } from "./session.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface ValidationViolation {
  readonly constraint: string;
  readonly area_id: string | null;
  readonly detail: string;
}

export interface ValidationWire {
  readonly valid: boolean;
  readonly violations: readonly ValidationViolation[];
}

export type SubmitResult =
  | { readonly kind: "accepted"; readonly receiptId: string; readonly acceptedAt: string }
  | { readonly kind: "rejected"; readonly validation: ValidationWire }
  | { readonly kind: "refused"; readonly detail: string }
  | { readonly kind: "transport_error"; readonly message: string };

export interface SubmitOptions {
  readonly challengeToken?: string;
  readonly fetchFn?: FetchLike;
}

const defaultFetch: FetchLike = (input, init) => fetch(input, init);

/** Fetch and validate the ballot spec; retries transient failures. */
export async function fetchSpec(
  baseUrl: string,
  fetchFn: FetchLike = defaultFetch,
  attempts = 3,
): Promise<BallotSpec> {
  let lastError = "";
  for (let attempt = 0; attempt < attempts; attempt++) {
    try {
      const res = await fetchFn(`${baseUrl}/api/spec`);
      if (!res.ok) {
        lastError = `spec request failed with status ${res.status}`;
        continue;
      }
      return parseSpec(await res.json());
    } catch (err) {
      lastError = err instanceof Error ? err.message : String(err);
    }
  }
  throw new Error(`could not load the ballot spec: ${lastError}`);
}

/** One submission attempt. Transport problems come back as a typed result;
 * the caller keeps its state and may call again. */
export async function submitBallot(
  baseUrl: string,
  answers: Record<string, number | string>,
  options: SubmitOptions = {},
): Promise<SubmitResult> {
  const fetchFn = options.fetchFn ?? defaultFetch;
  const body: Record<string, unknown> = { self_cert: true, answers };
  if (options.challengeToken !== undefined) body["challenge_token"] = options.challengeToken;

  let res: Response;
  try {
    res = await fetchFn(`${baseUrl}/api/ballot`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  } catch (err) {
    return {
      kind: "transport_error",
      message: err instanceof Error ? err.message : String(err),
    };
  }

  let doc: unknown;
  try {
    doc = await res.json();
  } catch {
    return { kind: "transport_error", message: `status ${res.status} with unreadable body` };
  }
  const record = (doc ?? {}) as Record<string, unknown>;

  if (res.status === 200) {
    return {
      kind: "accepted",
      receiptId: String(record["receipt_id"] ?? ""),
      acceptedAt: String(record["accepted_at"] ?? ""),
    };
  }
  if (res.status === 422) {
    const validation = (record["validation"] ?? { valid: false, violations: [] }) as ValidationWire;
    return { kind: "rejected", validation };
  }
  return {
    kind: "refused",
    detail: String(record["detail"] ?? `status ${res.status}`),
  };
}
