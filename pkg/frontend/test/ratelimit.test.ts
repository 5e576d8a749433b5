import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import { RateLimiter } from '../src/ratelimit';

describe('RateLimiter', () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it('runs the first call immediately', () => {
    const limiter = new RateLimiter(100);
    const fn = vi.fn();
    limiter.schedule(fn);
    expect(fn).toHaveBeenCalledTimes(1);
  });

  it('collapses a burst into first + trailing latest', () => {
    const limiter = new RateLimiter(100);
    const runs: number[] = [];
    for (let i = 0; i < 20; i++) {
      limiter.schedule(() => runs.push(i));
    }
    expect(runs).toEqual([0]);
    vi.advanceTimersByTime(110);
    expect(runs).toEqual([0, 19]);
  });

  it('keeps rate at or below one call per interval under sustained input', () => {
    const limiter = new RateLimiter(100);
    const fn = vi.fn();
    for (let t = 0; t < 1000; t += 10) {
      limiter.schedule(fn);
      vi.advanceTimersByTime(10);
    }
    vi.advanceTimersByTime(200);
    // 1 second of spam at 100 Hz -> at most ~11 sends (10/s + trailing)
    expect(fn.mock.calls.length).toBeLessThanOrEqual(11);
    expect(fn.mock.calls.length).toBeGreaterThanOrEqual(9);
  });

  it('flush runs the pending call right away', () => {
    const limiter = new RateLimiter(100);
    const runs: number[] = [];
    limiter.schedule(() => runs.push(1));
    limiter.schedule(() => runs.push(2));
    limiter.flush();
    expect(runs).toEqual([1, 2]);
  });
});
