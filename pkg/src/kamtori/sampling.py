"""Seeded sampling used everywhere randomness appears in reports.

The generator is the splitmix-style 64-bit recurrence, written out so any
implementation can reproduce the exact sample streams:

    state  = (state + 0x9E3779B97F4A7C15) mod 2^64
    z      = state
    z      = (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9  mod 2^64
    z      = (z XOR (z >> 27)) * 0x94D049BB133111EB  mod 2^64
    z      = z XOR (z >> 31)
    output = z

Uniform doubles in [0, 1) are (output >> 11) * 2^-53.
"""

from __future__ import annotations

import numpy as np

__all__ = ["SplitMix64"]

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed):
        self.state = int(seed) & _MASK

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self):
        """Double in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def uniforms(self, *shape):
        total = int(np.prod(shape)) if shape else 1
        vals = [self.uniform() for _ in range(total)]
        return np.array(vals).reshape(shape)

    def torus_points(self, count, n):
        """(count, n) angles uniform on [0, 2 pi)."""
        return 2.0 * np.pi * self.uniforms(count, n)

    def ball_points(self, count, n, radius):
        """(count, n) points with |.|_inf <= radius, componentwise uniform."""
        return radius * (2.0 * self.uniforms(count, n) - 1.0)

    def unit_inf_directions(self, count, n):
        """(count, n) directions scaled to |.|_inf = 1."""
        pts = 2.0 * self.uniforms(count, n) - 1.0
        scale = np.max(np.abs(pts), axis=1, keepdims=True)
        scale[scale == 0.0] = 1.0
        return pts / scale
