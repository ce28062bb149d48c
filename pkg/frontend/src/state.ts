/** Viewer state: one source of truth the UI renders from. */

import type { FrameResponse, OrbitPose, RenderMode, SceneInfo } from './api.js';

export interface PaneConfig {
  mode: RenderMode;
}

export interface ViewerState {
  sceneId: string | null;
  scenes: SceneInfo[];
  orbit: OrbitPose;
  sV: number;
  tau: number;
  mode: RenderMode;
  split: boolean;
  left: PaneConfig;
  right: PaneConfig;
  size: number;
  lastStats: { left: FrameResponse | null; right: FrameResponse | null };
  banner: string | null;
}

export const S_V_MIN = 1.0;
export const S_V_MAX = 10.0;
export const S_V_STEP = 0.1;

export function initialState(): ViewerState {
  return {
    sceneId: null,
    scenes: [],
    orbit: { azimuth: 30, elevation: 20, radius: 3, target: [0, 0, 0] },
    sV: 1.0,
    tau: 1 / 255,
    mode: 'clod',
    split: false,
    left: { mode: 'clod' },
    right: { mode: 'clod' },
    size: 256,
    lastStats: { left: null, right: null },
    banner: null,
  };
}

export function clampSV(v: number): number {
  const snapped = Math.round(v / S_V_STEP) * S_V_STEP;
  return Math.min(Math.max(snapped, S_V_MIN), S_V_MAX);
}

/** Top-k count for the comparison pane, matched to the latest filtered
 * frame's rendered count (the service reports it with every frame). */
export function matchedTopkMode(stats: FrameResponse | null): RenderMode {
  if (!stats || stats.rendered_count <= 0) {
    return 'topk:1';
  }
  return `topk:${stats.rendered_count}`;
}

type Listener = (state: ViewerState) => void;

export class Store {
  private state: ViewerState;
  private listeners: Listener[] = [];

  constructor(state: ViewerState = initialState()) {
    this.state = state;
  }

  get(): ViewerState {
    return this.state;
  }

  update(patch: Partial<ViewerState>): ViewerState {
    this.state = { ...this.state, ...patch };
    for (const fn of this.listeners) {
      fn(this.state);
    }
    return this.state;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((f) => f !== fn);
    };
  }
}
