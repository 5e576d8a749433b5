/** Trailing rate limiter: runs the latest scheduled call, at most one per
 * `intervalMs`. Slider drags collapse into <= 10 motor updates per second. */
export class RateLimiter {
  private lastRun = -Infinity;
  private pending: (() => void) | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(private intervalMs = 100, private now: () => number = () => Date.now()) {}

  schedule(fn: () => void): void {
    const elapsed = this.now() - this.lastRun;
    if (elapsed >= this.intervalMs && this.timer === null) {
      this.lastRun = this.now();
      fn();
      return;
    }
    this.pending = fn;
    if (this.timer === null) {
      this.timer = setTimeout(() => {
        this.timer = null;
        const run = this.pending;
        this.pending = null;
        if (run) {
          this.lastRun = this.now();
          run();
        }
      }, Math.max(0, this.intervalMs - elapsed));
    }
  }

  /** Run any trailing call immediately (used by tests and page unload). */
  flush(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    const run = this.pending;
    this.pending = null;
    if (run) {
      this.lastRun = this.now();
      run();
    }
  }
}
