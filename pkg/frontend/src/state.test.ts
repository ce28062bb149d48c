import { describe, expect, it } from 'vitest';

import type { FrameResponse } from './api.js';
import { clampSV, initialState, matchedTopkMode, Store, S_V_MAX, S_V_MIN } from './state.js';

function fakeStats(count: number): FrameResponse {
  return {
    image_b64: '',
    format: 'png',
    width: 64,
    height: 64,
    rendered_count: count,
    n_total: 2000,
    eta_actual: count / 2000,
    render_ms: 12,
    request: {} as never,
  };
}

describe('state', () => {
  it('slider range maps to the service contract', () => {
    expect(S_V_MIN).toBe(1.0);
    expect(S_V_MAX).toBe(10.0);
    expect(clampSV(0.3)).toBe(1.0);
    expect(clampSV(99)).toBe(10.0);
    expect(clampSV(2.34)).toBeCloseTo(2.3);
  });

  it('matched top-k uses the reported count of the previous frame', () => {
    expect(matchedTopkMode(fakeStats(412))).toBe('topk:412');
    expect(matchedTopkMode(null)).toBe('topk:1');
    expect(matchedTopkMode(fakeStats(0))).toBe('topk:1');
  });

  it('store notifies subscribers and applies patches', () => {
    const store = new Store();
    const seen: number[] = [];
    const unsub = store.subscribe((s) => seen.push(s.sV));
    store.update({ sV: 2.5 });
    store.update({ sV: 4.0 });
    unsub();
    store.update({ sV: 9.0 });
    expect(seen).toEqual([2.5, 4.0]);
    expect(store.get().sV).toBe(9.0);
  });

  it('initial state starts at full detail with sane defaults', () => {
    const s = initialState();
    expect(s.sV).toBe(1.0);
    expect(s.mode).toBe('clod');
    expect(s.split).toBe(false);
    expect(s.tau).toBeCloseTo(1 / 255);
  });
});
