/** Parameter boxes and light parameterization.
 *
 * The numeric ranges mirror the ones the service enforces with 400s; the UI
 * clamps before sending so no request can carry an out-of-range value. The
 * angle convention matches the service: azimuth 0 / elevation 0 points down
 * the camera axis (0, 0, 1), azimuth rotates toward +x, elevation toward +y,
 * and the vector's length is the intensity.
 */

export type Triple = [number, number, number];

export interface LightAngles {
  azimuth: number;
  elevation: number;
  intensity: number;
  ambient: number;
}

export interface EditValues {
  exposure: number;
  saturation: number;
  whiteBalance: Triple;
  colorCurve: Triple;
}

export const EXPOSURE_RANGE = [0.5, 2.0] as const;
export const SATURATION_RANGE = [0.0, 2.0] as const;
export const WHITE_BALANCE_RANGE = [0.1, 1.0] as const;
/** Lower bound exclusive: the service rejects a curve component of exactly 0. */
export const COLOR_CURVE_RANGE = [0.0, 2.0] as const;
export const COLOR_CURVE_FLOOR = 0.01;

export const AZIMUTH_RANGE = [-Math.PI, Math.PI] as const;
export const ELEVATION_RANGE = [-Math.PI / 2, Math.PI / 2] as const;
/** Slider spans; the service only requires intensity and ambient to be >= 0. */
export const INTENSITY_RANGE = [0.0, 3.0] as const;
export const AMBIENT_RANGE = [0.0, 3.0] as const;

export const IDENTITY_EDITS: EditValues = {
  exposure: 1.0,
  saturation: 1.0,
  whiteBalance: [1.0, 1.0, 1.0],
  colorCurve: [1.0, 1.0, 1.0],
};

export function clamp(value: number, lo: number, hi: number): number {
  if (Number.isNaN(value)) return lo;
  return Math.min(hi, Math.max(lo, value));
}

function clampTriple(t: Triple, lo: number, hi: number): Triple {
  return [clamp(t[0], lo, hi), clamp(t[1], lo, hi), clamp(t[2], lo, hi)];
}

export function clampEdits(edits: EditValues): EditValues {
  return {
    exposure: clamp(edits.exposure, ...EXPOSURE_RANGE),
    saturation: clamp(edits.saturation, ...SATURATION_RANGE),
    whiteBalance: clampTriple(edits.whiteBalance, ...WHITE_BALANCE_RANGE),
    colorCurve: clampTriple(edits.colorCurve, COLOR_CURVE_FLOOR, COLOR_CURVE_RANGE[1]),
  };
}

export function clampLight(light: LightAngles): LightAngles {
  return {
    azimuth: clamp(light.azimuth, ...AZIMUTH_RANGE),
    elevation: clamp(light.elevation, ...ELEVATION_RANGE),
    intensity: clamp(light.intensity, ...INTENSITY_RANGE),
    ambient: clamp(light.ambient, ...AMBIENT_RANGE),
  };
}

export interface LightVector {
  lx: number;
  ly: number;
  lz: number;
}

export function anglesToVector(light: LightAngles): LightVector {
  const { azimuth, elevation, intensity } = light;
  const ce = Math.cos(elevation);
  return {
    lx: intensity * ce * Math.sin(azimuth),
    ly: intensity * Math.sin(elevation),
    lz: intensity * ce * Math.cos(azimuth),
  };
}

/** Inverse of anglesToVector; a zero vector maps to all-zero angles and at the
 * poles (cos(elevation) = 0) azimuth collapses to 0. */
export function vectorToAngles(v: LightVector): {
  azimuth: number;
  elevation: number;
  intensity: number;
} {
  const intensity = Math.hypot(v.lx, v.ly, v.lz);
  if (intensity === 0) {
    return { azimuth: 0, elevation: 0, intensity: 0 };
  }
  const elevation = Math.asin(clamp(v.ly / intensity, -1, 1));
  const azimuth = v.lx === 0 && v.lz === 0 ? 0 : Math.atan2(v.lx, v.lz);
  return { azimuth, elevation, intensity };
}

/** Request-body form of the light sliders (the service's angle spec). */
export function lightPayload(light: LightAngles): Record<string, number> {
  return {
    azimuth: light.azimuth,
    elevation: light.elevation,
    intensity: light.intensity,
    ambient: light.ambient,
  };
}

/** Request-body form of the edit sliders (the service's edit payload). */
export function editsPayload(edits: EditValues): Record<string, unknown> {
  return {
    exposure: edits.exposure,
    saturation: edits.saturation,
    white_balance: [...edits.whiteBalance],
    color_curve: [...edits.colorCurve],
    order: "WSCE",
  };
}
