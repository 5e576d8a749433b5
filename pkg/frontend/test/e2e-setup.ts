/** Global setup for the e2e smoke: prepare a desk-trained checkpoint and a
 * controller with the Python CLI (cached across runs), then serve them. */

import { execFileSync, spawn, ChildProcess } from 'node:child_process';
import { cpSync, existsSync, mkdirSync, rmSync, writeFileSync } from 'node:fs';
import { createServer } from 'node:net';
import { join } from 'node:path';

const ROOT = join(__dirname, '..');
const E2E = join(ROOT, '.e2e');
const MODELS = join(E2E, 'models');
const SERVER_INFO = join(E2E, 'server.json');

const TINY_INI = `[data]
experiments = 2
steps = 120
seed = 5
[model]
d_model = 16
n_layers = 1
n_heads = 2
d_ff = 32
d_ff_head = 32
seq_len = 10
dropout = 0.0
warmup_steps = 50
encoder_epochs_per_cycle = 1
full_epochs_per_cycle = 2
n_cycles = 1
[train]
batch_size = 32
sample_every = 1
stride = 4
seed = 1
`;

function cli(args: string[]): void {
  execFileSync('python3', ['-m', 'osclab.cli', ...args], {
    cwd: ROOT,
    stdio: 'inherit',
    timeout: 300_000,
  });
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, '127.0.0.1', () => {
      const addr = srv.address();
      if (addr && typeof addr === 'object') {
        const port = addr.port;
        srv.close(() => resolve(port));
      } else {
        reject(new Error('no port'));
      }
    });
  });
}

async function waitForServer(url: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const resp = await fetch(`${url}/models`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error(`service at ${url} did not come up`);
    await new Promise((r) => setTimeout(r, 250));
  }
}

let server: ChildProcess | null = null;

export async function setup(): Promise<void> {
  if (!existsSync(join(MODELS, 'model.ckpt'))) {
    rmSync(E2E, { recursive: true, force: true });
    mkdirSync(MODELS, { recursive: true });
    writeFileSync(join(E2E, 'tiny.ini'), TINY_INI);
    cli(['gen-data', '--config', join(E2E, 'tiny.ini'), '--out', join(E2E, 'data')]);
    cli(['train', '--config', join(E2E, 'tiny.ini'), '--data', join(E2E, 'data'), '--out', join(E2E, 'run')]);
    cpSync(join(E2E, 'run', 'model.ckpt'), join(MODELS, 'model.ckpt'));
    cli([
      'run-rl',
      '--model', join(MODELS, 'model.ckpt'),
      '--out', MODELS,
      '--objective', 'maximize',
      '--episodes', '1',
      '--episode-len', '2',
      '--hidden', '8',
    ]);
  }

  const port = await freePort();
  server = spawn(
    'python3',
    ['-m', 'osclab.cli', 'serve', '--models', MODELS, '--host', '127.0.0.1', '--port', String(port)],
    { cwd: ROOT, stdio: 'inherit' },
  );
  const url = `http://127.0.0.1:${port}`;
  await waitForServer(url);
  writeFileSync(SERVER_INFO, JSON.stringify({ url }));
}

export async function teardown(): Promise<void> {
  server?.kill('SIGTERM');
  await new Promise((r) => setTimeout(r, 300));
  server?.kill('SIGKILL');
}
