import { ApiClient } from './api';
import { RateLimiter } from './ratelimit';
import { SseStream } from './sse';
import { N_CELLS, Objective, StepEvent } from './types';

export interface ViewState {
  sessionId: string | null;
  motorGrid: number[]; // 25 slider values in [-1, 1]
  heatFrames: StepEvent[]; // bounded ring buffer of served frames
  running: boolean;
  objective: Objective;
  rewardTrace: number[];
  suggestion: number[] | null; // staged, not committed
  connected: boolean;
  lastT: number;
}

export interface AppHooks {
  /** called after any state change the view should repaint for */
  onRender?: (state: ViewState) => void;
  onError?: (message: string) => void;
}

const clamp = (v: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, v));

/** The control room's whole behaviour, DOM-free: the browser shell and the
 * scripted e2e session drive exactly these methods. Every server mutation
 * goes through the documented endpoints; displayed frames come only from
 * served stream events. */
export class ControlRoomApp {
  readonly state: ViewState = {
    sessionId: null,
    motorGrid: new Array(N_CELLS).fill(0),
    heatFrames: [],
    running: false,
    objective: 'none',
    rewardTrace: [],
    suggestion: null,
    connected: false,
    lastT: -1,
  };

  private stream: SseStream | null = null;
  private loopTimer: ReturnType<typeof setInterval> | null = null;
  private limiter: RateLimiter;

  constructor(
    private api: ApiClient,
    private hooks: AppHooks = {},
    private maxFrames = 600,
    limiter?: RateLimiter,
  ) {
    this.limiter = limiter ?? new RateLimiter(100);
  }

  private render(): void {
    this.hooks.onRender?.(this.state);
  }

  private fail(err: unknown): void {
    this.hooks.onError?.(err instanceof Error ? err.message : String(err));
  }

  async connect(model: string, seed: 'zeros' | 'synth' = 'zeros'): Promise<void> {
    const info = await this.api.createSession(model, seed, this.state.objective);
    this.state.sessionId = info.id;
    this.state.lastT = -1;
    this.state.heatFrames = [];
    this.state.rewardTrace = [];
    this.openStream();
    this.render();
  }

  private openStream(): void {
    if (!this.state.sessionId) return;
    this.stream?.stop();
    this.stream = new SseStream(this.api.streamUrl(this.state.sessionId), {
      onOpen: () => {
        this.state.connected = true;
        this.render();
      },
      onError: () => {
        this.state.connected = false;
        this.render();
      },
      onData: (data) => this.onEvent(JSON.parse(data) as StepEvent),
    });
    this.stream.start();
  }

  /** Stream consumption: frames append in stream order; stale or replayed
   * events (reconnect snapshots) are dropped so t stays monotone. */
  onEvent(event: StepEvent): void {
    if (event.t <= this.state.lastT) return;
    this.state.lastT = event.t;
    this.state.heatFrames.push(event);
    if (this.state.heatFrames.length > this.maxFrames) {
      this.state.heatFrames.splice(0, this.state.heatFrames.length - this.maxFrames);
    }
    if (this.state.objective !== 'none' && event.reward !== null) {
      this.state.rewardTrace.push(event.reward);
    }
    this.render();
  }

  /** Slider moved: clamp client-side, stage locally, send (rate-limited). */
  onSliderChange(cell: number, value: number): void {
    if (cell < 0 || cell >= N_CELLS) return;
    this.state.motorGrid[cell] = clamp(value, -1, 1);
    this.state.suggestion = null; // manual edit discards a staged suggestion
    this.render();
    this.limiter.schedule(() => this.pushMotors());
  }

  private pushMotors(): void {
    if (!this.state.sessionId) return;
    this.api.setMotors(this.state.sessionId, [...this.state.motorGrid]).catch((err) => this.fail(err));
  }

  /** Force any pending (debounced) motor update out now. */
  flushMotors(): void {
    this.limiter.flush();
  }

  async step(n = 1): Promise<void> {
    if (!this.state.sessionId) return;
    try {
      await this.api.step(this.state.sessionId, n);
    } catch (err) {
      this.fail(err);
    }
  }

  setObjective(objective: Objective): void {
    this.state.objective = objective;
    if (objective === 'none') {
      this.state.rewardTrace = [];
    }
    this.render();
  }

  startLoop(intervalMs = 500): void {
    if (this.loopTimer !== null) return;
    this.state.running = true;
    this.loopTimer = setInterval(() => void this.step(1), intervalMs);
    this.render();
  }

  /** Pause: no further requests after the current interval fires. */
  pauseLoop(): void {
    if (this.loopTimer !== null) {
      clearInterval(this.loopTimer);
      this.loopTimer = null;
    }
    this.state.running = false;
    this.render();
  }

  /** Fetch a controller suggestion and stage it on the sliders. It is NOT
   * sent to the server until the user confirms. */
  async requestSuggestion(): Promise<boolean> {
    if (!this.state.sessionId || this.state.objective === 'none') {
      this.fail('pick an objective before asking for a suggestion');
      return false;
    }
    try {
      const resp = await this.api.suggest(this.state.sessionId, this.state.objective);
      this.state.suggestion = resp.motors;
      this.state.motorGrid = resp.motors.map((v) => clamp(v, -1, 1));
      this.render();
      return true;
    } catch (err) {
      this.fail(err); // 409 (no controller) surfaces as a non-blocking notice
      return false;
    }
  }

  /** User confirmed: commit the staged suggestion as the pending motors. */
  confirmSuggestion(): void {
    if (this.state.suggestion === null) return;
    this.state.suggestion = null;
    this.pushMotors();
    this.render();
  }

  dismissSuggestion(): void {
    this.state.suggestion = null;
    this.render();
  }

  async disconnect(): Promise<void> {
    this.pauseLoop();
    this.stream?.stop();
    this.stream = null;
    if (this.state.sessionId) {
      await this.api.deleteSession(this.state.sessionId).catch(() => undefined);
      this.state.sessionId = null;
    }
    this.state.connected = false;
    this.render();
  }
}
