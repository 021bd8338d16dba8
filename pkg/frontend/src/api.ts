import type {
  AnswerResult,
  AnswerValue,
  CatalogAttribute,
  DescriptionAck,
  ItemCardData,
  PendingAction,
  SessionCreated,
  TranscriptStep,
} from './types';

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

/** Thin typed client over the session-service JSON endpoints. The UI holds
 * no dialog logic: every state change goes through these calls. */
export class ApiClient {
  constructor(
    private base: string,
    private fetchImpl: FetchLike = fetch,
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(this.base + path, {
      method,
      headers: { 'Content-Type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(
        response.status,
        (payload as { code?: string }).code ?? 'unknown',
        (payload as { message?: string }).message ?? 'request failed',
      );
    }
    return payload as T;
  }

  createSession(mode: string, seed?: number): Promise<SessionCreated> {
    const body: Record<string, unknown> = { mode };
    if (seed !== undefined) body.seed = seed;
    return this.call<SessionCreated>('POST', '/sessions', body);
  }

  postDescription(sessionId: string, attributes: number[]): Promise<DescriptionAck> {
    return this.call<DescriptionAck>('POST', `/sessions/${sessionId}/description`, {
      attributes,
    });
  }

  nextAction(sessionId: string): Promise<PendingAction> {
    return this.call<PendingAction>('GET', `/sessions/${sessionId}/next`);
  }

  postAnswer(sessionId: string, value: AnswerValue): Promise<AnswerResult> {
    return this.call<AnswerResult>('POST', `/sessions/${sessionId}/answer`, { value });
  }

  transcript(sessionId: string): Promise<TranscriptStep[]> {
    return this.call<TranscriptStep[]>('GET', `/sessions/${sessionId}/transcript`);
  }

  catalog(): Promise<{ attributes: CatalogAttribute[] }> {
    return this.call('GET', '/catalog');
  }

  itemCard(itemId: number): Promise<ItemCardData> {
    return this.call<ItemCardData>('GET', `/items/${itemId}`);
  }
}
