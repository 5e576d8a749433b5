import { ApiClient } from './api';
import { ControlRoomApp, ViewState } from './app';
import { heatColor, motorColor } from './heatmap';
import { GRID_SIDE, N_CELLS, Objective } from './types';

const baseUrl = new URLSearchParams(window.location.search).get('api') ?? 'http://127.0.0.1:8000';
const api = new ApiClient(baseUrl);

const $ = <T extends HTMLElement>(sel: string): T => {
  const el = document.querySelector<T>(sel);
  if (!el) throw new Error(`missing element ${sel}`);
  return el;
};

const motorGridEl = $('#motor-grid');
const heatGridEl = $('#heat-grid');
const rewardEl = $<HTMLCanvasElement>('#reward-trace');
const statusEl = $('#status');
const noticeEl = $('#notice');

const sliders: HTMLInputElement[] = [];
const heatCells: HTMLDivElement[] = [];

for (let i = 0; i < N_CELLS; i++) {
  const wrap = document.createElement('div');
  wrap.className = 'motor-cell';
  const slider = document.createElement('input');
  slider.type = 'range';
  slider.min = '-1';
  slider.max = '1';
  slider.step = '0.01';
  slider.value = '0';
  slider.dataset.cell = String(i);
  slider.addEventListener('input', () => app.onSliderChange(i, Number(slider.value)));
  const label = document.createElement('span');
  label.textContent = '0.00';
  wrap.append(slider, label);
  motorGridEl.append(wrap);
  sliders.push(slider);

  const cell = document.createElement('div');
  cell.className = 'heat-cell';
  heatGridEl.append(cell);
  heatCells.push(cell);
}

function render(state: ViewState): void {
  const last = state.heatFrames[state.heatFrames.length - 1];
  if (last) {
    last.chem.forEach((v, i) => {
      heatCells[i].style.background = heatColor(v);
      heatCells[i].title = `cell ${Math.floor(i / GRID_SIDE) + 1},${(i % GRID_SIDE) + 1}: ${v.toFixed(3)}`;
    });
  }
  state.motorGrid.forEach((v, i) => {
    if (document.activeElement !== sliders[i]) {
      sliders[i].value = String(v);
    }
    const label = sliders[i].nextElementSibling as HTMLSpanElement;
    label.textContent = v.toFixed(2);
    (sliders[i].parentElement as HTMLDivElement).style.background = motorColor(v);
  });
  statusEl.textContent = state.sessionId
    ? `session ${state.sessionId} | t=${state.lastT} | ${state.connected ? 'live' : 'reconnecting'}${state.running ? ' | running' : ''}`
    : 'no session';
  $('#confirm-suggestion').toggleAttribute('disabled', state.suggestion === null);
  drawRewardTrace(state.rewardTrace);
}

function drawRewardTrace(trace: number[]): void {
  const ctx = rewardEl.getContext('2d');
  if (!ctx) return;
  const { width, height } = rewardEl;
  ctx.clearRect(0, 0, width, height);
  if (trace.length < 2) return;
  const window_ = trace.slice(-200);
  const lo = Math.min(...window_);
  const hi = Math.max(...window_);
  const span = hi - lo || 1;
  ctx.beginPath();
  window_.forEach((r, i) => {
    const x = (i / (window_.length - 1)) * width;
    const y = height - ((r - lo) / span) * (height - 4) - 2;
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.strokeStyle = '#ffb000';
  ctx.stroke();
}

function notify(message: string): void {
  noticeEl.textContent = message;
  noticeEl.classList.add('visible');
  setTimeout(() => noticeEl.classList.remove('visible'), 4000);
}

const app = new ControlRoomApp(api, { onRender: render, onError: notify });

$('#connect').addEventListener('click', async () => {
  try {
    const models = (await api.listModels()).models;
    if (models.length === 0) {
      notify('server has no models');
      return;
    }
    const seed = ($('#seed-mode') as HTMLSelectElement).value as 'zeros' | 'synth';
    await app.disconnect();
    await app.connect(models[0], seed);
    notify(`connected to ${models[0]}`);
  } catch (err) {
    notify(err instanceof Error ? err.message : String(err));
  }
});

$('#step-once').addEventListener('click', () => void app.step(1));
$('#run').addEventListener('click', () => {
  const interval = Number(($('#interval') as HTMLInputElement).value) || 500;
  app.startLoop(interval);
});
$('#pause').addEventListener('click', () => app.pauseLoop());
($('#objective') as HTMLSelectElement).addEventListener('change', (ev) => {
  app.setObjective((ev.target as HTMLSelectElement).value as Objective);
});
$('#suggest').addEventListener('click', () => void app.requestSuggestion());
$('#confirm-suggestion').addEventListener('click', () => app.confirmSuggestion());

window.addEventListener('beforeunload', () => {
  app.flushMotors();
  void app.disconnect();
});

render(app.state);
