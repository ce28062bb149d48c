/** Orbit-camera parameter math (pure; exercised by unit tests). */

import type { OrbitPose } from './api.js';

export interface OrbitLimits {
  minRadius: number;
  maxRadius: number;
  minElevation: number;
  maxElevation: number;
}

export const DEFAULT_LIMITS: OrbitLimits = {
  minRadius: 0.2,
  maxRadius: 50,
  minElevation: -85,
  maxElevation: 85,
};

const clamp = (v: number, lo: number, hi: number) => Math.min(Math.max(v, lo), hi);

/** Normalize azimuth into [0, 360). */
export function wrapAzimuth(deg: number): number {
  const w = deg % 360;
  return w < 0 ? w + 360 : w;
}

/** Apply a pointer drag (pixels) to the pose; positive dx orbits right. */
export function dragOrbit(
  pose: OrbitPose,
  dxPx: number,
  dyPx: number,
  limits: OrbitLimits = DEFAULT_LIMITS,
  degPerPixel = 0.4,
): OrbitPose {
  return {
    ...pose,
    azimuth: wrapAzimuth(pose.azimuth - dxPx * degPerPixel),
    elevation: clamp(
      pose.elevation + dyPx * degPerPixel,
      limits.minElevation,
      limits.maxElevation,
    ),
  };
}

/** Apply a wheel delta; positive delta zooms out multiplicatively. */
export function zoomOrbit(
  pose: OrbitPose,
  wheelDelta: number,
  limits: OrbitLimits = DEFAULT_LIMITS,
): OrbitPose {
  const factor = Math.exp(wheelDelta * 0.001);
  return {
    ...pose,
    radius: clamp(pose.radius * factor, limits.minRadius, limits.maxRadius),
  };
}

/** Frame a scene's bounding box: aim at its center from a proportional radius. */
export function frameBounds(
  min: [number, number, number],
  max: [number, number, number],
): OrbitPose {
  const target: [number, number, number] = [
    (min[0] + max[0]) / 2,
    (min[1] + max[1]) / 2,
    (min[2] + max[2]) / 2,
  ];
  const dx = max[0] - min[0];
  const dy = max[1] - min[1];
  const dz = max[2] - min[2];
  const extent = Math.sqrt(dx * dx + dy * dy + dz * dz) / 2;
  return {
    azimuth: 30,
    elevation: 20,
    radius: Math.max(extent * 2.5, DEFAULT_LIMITS.minRadius),
    target,
  };
}
