import { describe, expect, it } from 'vitest';

import type { OrbitPose } from './api.js';
import { DEFAULT_LIMITS, dragOrbit, frameBounds, wrapAzimuth, zoomOrbit } from './orbit.js';

const pose: OrbitPose = { azimuth: 30, elevation: 20, radius: 3, target: [0, 0, 0] };

describe('orbit math', () => {
  it('wraps azimuth into [0, 360)', () => {
    expect(wrapAzimuth(370)).toBeCloseTo(10);
    expect(wrapAzimuth(-30)).toBeCloseTo(330);
    expect(wrapAzimuth(0)).toBe(0);
  });

  it('drag changes azimuth/elevation and clamps elevation', () => {
    const dragged = dragOrbit(pose, 100, 0);
    expect(dragged.azimuth).toBeCloseTo(wrapAzimuth(30 - 40));
    expect(dragged.elevation).toBe(20);
    const up = dragOrbit(pose, 0, 1000);
    expect(up.elevation).toBe(DEFAULT_LIMITS.maxElevation);
  });

  it('drag leaves radius and target untouched', () => {
    const dragged = dragOrbit(pose, 25, -13);
    expect(dragged.radius).toBe(pose.radius);
    expect(dragged.target).toEqual(pose.target);
  });

  it('zoom is multiplicative and clamped', () => {
    const out = zoomOrbit(pose, 1000);
    expect(out.radius).toBeGreaterThan(pose.radius);
    const inn = zoomOrbit(pose, -1000);
    expect(inn.radius).toBeLessThan(pose.radius);
    const far = zoomOrbit({ ...pose, radius: 49 }, 1e6);
    expect(far.radius).toBe(DEFAULT_LIMITS.maxRadius);
  });

  it('frames scene bounds around the center', () => {
    const framed = frameBounds([-1, -1, -1], [1, 1, 1]);
    expect(framed.target).toEqual([0, 0, 0]);
    expect(framed.radius).toBeGreaterThan(2);
  });
});
