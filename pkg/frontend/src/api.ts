import { SessionInfo, StepEvent, SuggestResponse } from './types';

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, {
    headers: { 'Content-Type': 'application/json' },
    ...init,
  });
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, (body as { error?: string }).error ?? `HTTP ${resp.status}`);
  }
  return body as T;
}

/** Thin client over the session service; every mutation goes through here. */
export class ApiClient {
  constructor(public baseUrl: string) {}

  listModels(): Promise<{ models: string[] }> {
    return request(`${this.baseUrl}/models`);
  }

  createSession(model: string, seed: 'zeros' | 'synth' = 'zeros', objective?: string): Promise<SessionInfo> {
    return request(`${this.baseUrl}/sessions`, {
      method: 'POST',
      body: JSON.stringify(objective && objective !== 'none' ? { model, seed, objective } : { model, seed }),
    });
  }

  sessionInfo(id: string): Promise<SessionInfo> {
    return request(`${this.baseUrl}/sessions/${id}`);
  }

  deleteSession(id: string): Promise<{ ok: boolean }> {
    return request(`${this.baseUrl}/sessions/${id}`, { method: 'DELETE' });
  }

  setMotors(id: string, motors: number[]): Promise<{ ok: boolean }> {
    return request(`${this.baseUrl}/sessions/${id}/motors`, {
      method: 'POST',
      body: JSON.stringify({ motors }),
    });
  }

  step(id: string, n = 1): Promise<{ frames: number[][]; t: number }> {
    return request(`${this.baseUrl}/sessions/${id}/step`, {
      method: 'POST',
      body: JSON.stringify({ n }),
    });
  }

  suggest(id: string, objective: string): Promise<SuggestResponse> {
    return request(`${this.baseUrl}/sessions/${id}/suggest`, {
      method: 'POST',
      body: JSON.stringify({ objective }),
    });
  }

  streamUrl(id: string): string {
    return `${this.baseUrl}/sessions/${id}/stream`;
  }
}

export type { StepEvent };
