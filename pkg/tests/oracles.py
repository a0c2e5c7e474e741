"""Independent reference implementations used as test oracles.

They are written differently from the package code on purpose (complex
arithmetic, brute-force enumeration, hand-derived tables) so that a shared
bug is unlikely.
"""

from __future__ import annotations

import cmath
import itertools
import math

import numpy as np


def directed_fitness(points, start_yaw=0.0, beta0=math.pi / 3, eps=1e-10, coefficient=0.01):
    """f = |p| / (L + eps) * (p / (delta + 1) - c * |orthogonal offset|), in complex form."""
    zs = [complex(x, y) for x, y in points]
    target = cmath.exp(1j * (start_yaw + beta0))
    disp = zs[-1] - zs[0]
    local = disp / target  # real part along the target, imaginary part across it
    proj = local.real
    length = sum(abs(b - a) for a, b in zip(zs, zs[1:]))
    delta = abs(cmath.phase(local)) if disp != 0 else 0.0
    penalty = coefficient * abs(local.imag)
    return abs(proj) / (length + eps) * (proj / (delta + 1) - penalty)


def synthetic_trajectories(rng: np.random.Generator, count: int = 24):
    """(name, points, start_yaw) fixtures: straight, orthogonal, backward and zig-zag paths."""
    out = []
    kinds = ["straight", "orthogonal", "backward", "zigzag"]
    for k in range(count):
        kind = kinds[k % 4]
        yaw = float(rng.uniform(-math.pi, math.pi))
        bearing = yaw + math.pi / 3
        u = np.array([math.cos(bearing), math.sin(bearing)])
        v = np.array([-u[1], u[0]])
        dist = float(rng.uniform(0.1, 3.0))
        n = int(rng.integers(5, 60))
        s = np.linspace(0, dist, n)[:, None]
        start = rng.uniform(-5, 5, size=2)
        if kind == "straight":
            pts = start + s * u
        elif kind == "orthogonal":
            pts = start + s * v
        elif kind == "backward":
            pts = start - s * u + 0.1 * s * v
        else:
            wiggle = 0.2 * np.where(np.arange(n) % 2 == 0, 1.0, -1.0)[:, None]
            pts = start + s * u + wiggle * v
        out.append((kind, pts, yaw))
    return out


def wilcoxon_brute_force(diffs):
    """Two-sided exact p by enumerating every sign assignment of the |d| midranks."""
    d = [x for x in diffs if x != 0]
    n = len(d)
    if n == 0:
        return 0.0, 1.0
    order = sorted(range(n), key=lambda i: abs(d[i]))
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and abs(d[order[j + 1]]) == abs(d[order[i]]):
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    w = sum(r for r, x in zip(ranks, d) if x > 0)
    le = ge = 0
    for signs in itertools.product((0, 1), repeat=n):
        s = sum(r for r, keep in zip(ranks, signs) if keep)
        le += s <= w + 1e-9
        ge += s >= w - 1e-9
    return w, min(1.0, 2 * min(le, ge) / 2 ** n)


# Hand-derived descriptor vectors, in descriptor order:
# branching, coverage, rel_joints, rel_limbs, rel_limb_length, proportion, absolute_size, symmetry
#
# core-only: every ratio is degenerate; coverage 1/1, proportion 1/1, symmetry 1 (nothing off-axis).
CORE_ONLY = (0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1, 1.0)
# chain core + 4 bricks east (m = 5): no 4-link module; box 5x1x1 fully filled;
# one leaf, l_max(5) = 4 -> 1/4; its limb runs back to the core: 4 / (m - 1) = 1;
# proportion 1/5; every cell lies on the x axis -> symmetric.
CHAIN5 = (0.0, 1.0, 0.0, 0.25, 1.0, 0.2, 5, 1.0)
# plus (core + 4 bricks): core has 4 links, b_max = floor(3/3) = 1 -> 1;
# box 3x3x1 holds 5 -> 5/9; four leaves / l_max(5) = 4 -> 1; each limb has
# length 1 (stops at the 4-link core): 1 / 4; square footprint; mirror-symmetric.
PLUS5 = (1.0, 5 / 9, 0.0, 1.0, 0.25, 1.0, 5, 1.0)
