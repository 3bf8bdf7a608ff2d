import { describe, expect, it } from "vitest";
import { covarianceEllipse } from "../src/ellipse.js";
import type { GaussianParams } from "../src/types.js";

function g(sx: number, sy: number, rho: number): GaussianParams {
  return { muX: 1.0, muY: 2.0, sigmaX: sx, sigmaY: sy, rho };
}

describe("covarianceEllipse", () => {
  it("aligns with the axes when rho is zero", () => {
    const tall = covarianceEllipse(g(1, 2, 0), 1);
    expect(tall.rx).toBeCloseTo(2, 12);
    expect(tall.ry).toBeCloseTo(1, 12);
    expect(tall.angleDeg).toBe(90);

    const wide = covarianceEllipse(g(3, 1, 0), 2);
    expect(wide.rx).toBeCloseTo(6, 12);
    expect(wide.ry).toBeCloseTo(2, 12);
    expect(wide.angleDeg).toBe(0);
    expect(wide.cx).toBe(1.0);
    expect(wide.cy).toBe(2.0);
  });

  it("rotates to 45 degrees for equal sigmas with positive correlation", () => {
    const e = covarianceEllipse(g(1, 1, 0.8), 1);
    expect(e.angleDeg).toBeCloseTo(45, 9);
    expect(e.rx).toBeCloseTo(Math.sqrt(1.8), 12);
    expect(e.ry).toBeCloseTo(Math.sqrt(0.2), 12);
  });

  it("diagonalizes the covariance: rotating by -angle recovers the axes", () => {
    const cases = [g(0.7, 1.9, 0.35), g(2.2, 0.4, -0.6), g(1.1, 1.1, -0.05)];
    for (const params of cases) {
      const e = covarianceEllipse(params, 1);
      const a = params.sigmaX ** 2;
      const c = params.sigmaY ** 2;
      const b = params.rho * params.sigmaX * params.sigmaY;
      const th = (-e.angleDeg * Math.PI) / 180;
      const cos = Math.cos(th);
      const sin = Math.sin(th);
      // R * Cov * R^T for rotation by -angle
      const r00 = cos * (cos * a - sin * b) - sin * (cos * b - sin * c);
      const r01 = cos * (cos * b - sin * c) + sin * (cos * a - sin * b);
      const r11 = sin * (sin * a + cos * b) + cos * (sin * b + cos * c);
      expect(r00).toBeCloseTo(e.rx * e.rx, 9);
      expect(r11).toBeCloseTo(e.ry * e.ry, 9);
      expect(r01).toBeCloseTo(0, 9);
      expect(e.rx).toBeGreaterThanOrEqual(e.ry);
    }
  });

  it("stays finite at the correlation rails", () => {
    for (const rho of [0.999, -0.999]) {
      const e = covarianceEllipse(g(1.2, 0.9, rho), 2);
      expect(Number.isFinite(e.rx)).toBe(true);
      expect(Number.isFinite(e.ry)).toBe(true);
      expect(e.ry).toBeGreaterThanOrEqual(0);
    }
  });
});
