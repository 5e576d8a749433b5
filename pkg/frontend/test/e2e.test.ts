/** Scripted control-room session against a live service with a desk-trained
 * checkpoint: move a slider, step ten times, watch the stream deliver ten
 * in-order heatmap updates, then stage (but do not commit) a suggestion. */

import { readFileSync } from 'node:fs';
import { join } from 'node:path';
import { beforeAll, describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api';
import { ControlRoomApp } from '../src/app';
import { RateLimiter } from '../src/ratelimit';

const SERVER_INFO = join(__dirname, '..', '.e2e', 'server.json');

function baseUrl(): string {
  return (JSON.parse(readFileSync(SERVER_INFO, 'utf-8')) as { url: string }).url;
}

async function waitFor(cond: () => boolean, ms = 15_000, what = 'condition'): Promise<void> {
  const deadline = Date.now() + ms;
  while (!cond()) {
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await new Promise((r) => setTimeout(r, 50));
  }
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

describe('control room against the live service', () => {
  let api: ApiClient;

  beforeAll(() => {
    api = new ApiClient(baseUrl());
  });

  it('lists the desk-trained model', async () => {
    const { models } = await api.listModels();
    expect(models).toContain('model');
  });

  it('runs the scripted session end to end', async () => {
    const errors: string[] = [];
    const app = new ControlRoomApp(api, { onError: (m) => errors.push(m) }, 600, new RateLimiter(0));
    const { models } = await api.listModels();

    await app.connect(models[0], 'zeros');
    expect(app.state.sessionId).not.toBeNull();
    const sid = app.state.sessionId as string;
    // the stream's snapshot event arrives first, at the current session time
    await waitFor(() => app.state.heatFrames.length >= 1, 15_000, 'snapshot event');
    expect(app.state.heatFrames[0].t).toBe(0);

    // move one slider; the body sent is 25 floats with only that cell set
    app.onSliderChange(7, 0.6);
    app.flushMotors();
    await sleep(300);
    const pending = (await api.sessionInfo(sid)).motors as number[];
    expect(pending[7]).toBeCloseTo(0.6, 6);
    expect(pending.filter((v) => v !== 0)).toHaveLength(1);

    // step 10 times; the stream delivers 10 updates in order
    await app.step(10);
    await waitFor(() => app.state.heatFrames.length >= 11, 15_000, '10 heatmap updates');
    const ts = app.state.heatFrames.map((e) => e.t);
    expect(ts).toEqual([0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
    for (const frame of app.state.heatFrames.slice(1)) {
      expect(frame.chem).toHaveLength(25);
      expect(frame.motors[7]).toBeCloseTo(0.6, 6);
    }

    // request a suggestion: sliders populate, server-pending motors do not change
    app.setObjective('maximize');
    const ok = await app.requestSuggestion();
    expect(ok).toBe(true);
    expect(app.state.suggestion).not.toBeNull();
    const suggested = [...app.state.motorGrid];
    expect(suggested.every((v) => v > -1 && v < 1)).toBe(true);
    const pendingAfter = (await api.sessionInfo(sid)).motors as number[];
    expect(pendingAfter).toEqual(pending); // populated, NOT committed

    // confirming commits the staged suggestion
    app.confirmSuggestion();
    await sleep(300);
    const committed = (await api.sessionInfo(sid)).motors as number[];
    for (let i = 0; i < 25; i++) {
      expect(committed[i]).toBeCloseTo(suggested[i], 5);
    }

    expect(errors).toEqual([]);
    await app.disconnect();
    expect(app.state.sessionId).toBeNull();
  }, 60_000);

  it('reports a missing controller as a 409 notice without breaking the session', async () => {
    const errors: string[] = [];
    const app = new ControlRoomApp(api, { onError: (m) => errors.push(m) }, 600, new RateLimiter(0));
    const { models } = await api.listModels();
    await app.connect(models[0], 'zeros');
    app.setObjective('minimize'); // only a maximize controller was trained
    const ok = await app.requestSuggestion();
    expect(ok).toBe(false);
    expect(errors.some((m) => m.includes('no controller'))).toBe(true);
    await app.step(1);
    await waitFor(() => app.state.heatFrames.some((e) => e.t >= 1), 10_000, 'step after 409');
    await app.disconnect();
  }, 60_000);
});
