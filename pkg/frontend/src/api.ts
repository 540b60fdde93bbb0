/**
 * Typed client for the grag HTTP service. The fetch implementation is
 * injectable so the test suite can run against recorded responses.
 */

export interface QueryRequest {
  question: string;
  user_id?: string;
  language?: string;
}

export interface Diagnostics {
  llm_calls: number;
  embedding_calls: number;
  embedded_texts: number;
  wall_time: number;
}

export interface QueryResponse {
  answer: string;
  citations: string[];
  language: string;
  empty_context: boolean;
  diagnostics: Diagnostics;
  /** Serialized context tables, present when the service runs in debug mode. */
  context?: string;
}

export interface UserProfile {
  language: string;
  country: string;
  preferences: Record<string, string>;
}

/** Structured error body the service returns for every failure. */
export interface ServiceErrorBody {
  code: string;
  message: string;
  retryable: boolean;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
    public readonly retryable: boolean,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function toApiError(response: Response): Promise<ApiError> {
  let body: Partial<ServiceErrorBody> = {};
  try {
    body = await response.json();
  } catch {
    // non-JSON error body; fall through to defaults
  }
  return new ApiError(
    response.status,
    body.code ?? 'unknown_error',
    body.message ?? `request failed with status ${response.status}`,
    body.retryable ?? response.status >= 500,
  );
}

export class GragClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, {
        method,
        headers: { 'Content-Type': 'application/json' },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      // Network failures are always worth retrying.
      throw new ApiError(0, 'network_error', String(err), true);
    }
    if (!response.ok) {
      throw await toApiError(response);
    }
    if (response.status === 204) {
      return undefined as T;
    }
    return (await response.json()) as T;
  }

  query(request: QueryRequest): Promise<QueryResponse> {
    return this.request<QueryResponse>('POST', '/query', request);
  }

  getProfile(userId: string): Promise<UserProfile> {
    return this.request<UserProfile>('GET', `/users/${encodeURIComponent(userId)}/metadata`);
  }

  saveProfile(userId: string, profile: UserProfile): Promise<void> {
    return this.request<void>('PUT', `/users/${encodeURIComponent(userId)}/metadata`, profile);
  }

  health(): Promise<{ status: string; graph_loaded: boolean }> {
    return this.request('GET', '/health');
  }
}
