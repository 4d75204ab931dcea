import { describe, expect, it } from 'vitest';

import { fmt, linearScale, polylinePath, ticks } from '../src/svg.js';

describe('linearScale', () => {
  it('maps domain endpoints to range endpoints', () => {
    const scale = linearScale([0, 10], [100, 200]);
    expect(scale(0)).toBe(100);
    expect(scale(10)).toBe(200);
    expect(scale(5)).toBe(150);
  });

  it('tolerates a degenerate domain', () => {
    const scale = linearScale([3, 3], [0, 100]);
    expect(Number.isFinite(scale(3))).toBe(true);
  });
});

describe('ticks', () => {
  it('covers the domain with round steps', () => {
    const got = ticks([0, 100], 5);
    expect(got[0]).toBeGreaterThanOrEqual(0);
    expect(got[got.length - 1]).toBeLessThanOrEqual(100);
    const step = got[1] - got[0];
    expect([1, 2, 5, 10, 20, 25, 50]).toContain(step);
    expect(got.every((t, i) => i === 0 || Math.abs(t - got[i - 1] - step) < 1e-9))
      .toBe(true);
  });

  it('handles fractional domains', () => {
    const got = ticks([0.1, 0.9], 5);
    expect(got.length).toBeGreaterThanOrEqual(3);
    expect(got.every((t) => t >= 0.1 - 1e-12 && t <= 0.9 + 1e-12)).toBe(true);
  });
});

describe('polylinePath', () => {
  it('emits move-then-line commands', () => {
    expect(polylinePath([{ x: 1, y: 2 }, { x: 3, y: 4.5 }]))
      .toBe('M1,2L3,4.5');
  });
});

describe('fmt', () => {
  it('keeps integers exact and trims float noise', () => {
    expect(fmt(42)).toBe('42');
    expect(fmt(0.30000000000004)).toBe('0.3');
  });
});
