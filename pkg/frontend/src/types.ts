export const GRID_SIDE = 5;
export const N_CELLS = GRID_SIDE * GRID_SIDE;

export type Objective = 'maximize' | 'minimize' | 'none';

export interface SessionInfo {
  id: string;
  model: string;
  t: number;
  objective?: string | null;
  motors?: number[];
  chem?: number[];
}

export interface StepEvent {
  t: number;
  chem: number[];
  motors: number[];
  reward: number | null;
}

export interface SuggestResponse {
  motors: number[];
  objective: string;
}
