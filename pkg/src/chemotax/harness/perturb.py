"""Random initial-condition perturbations.

A perturbation is a sum of ``count`` Gaussian bumps with periodic images::

    delta(x, y) = sum_i sum_{j,k=-L..L}
        h_i * exp( -((x - x_i + j*Lx)^2 + (y - y_i + k*Ly)^2) / sigma_i )

Per bump, four uniform [0, 1) draws are taken in the fixed order
(height, width, x-center, y-center):

    h_i = height_scale * r1,  sigma_i = width_scale * r2,
    x_i = xmin + Lx * r3,     y_i = ymin + Ly * r4.

The generator is numpy's seedable PCG64 (``default_rng``), so a given seed
reproduces the field bit for bit.  The image sum is separable in x and y,
which keeps large image ranges cheap.
"""

from __future__ import annotations

import numpy as np

from ..grid import GridSpec


def gaussian_perturbation(spec: GridSpec, seed, count: int = 30,
                          height_scale: float = 0.02,
                          width_scale: float = 0.005,
                          images: int = 1) -> np.ndarray:
    """Sample a periodic bump field on the grid nodes.

    ``seed`` is an integer or an existing ``numpy.random.Generator`` (drawn
    from in place, so several perturbations can share one stream).
    ``images`` is the one-sided periodic image range L.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if height_scale < 0 or width_scale <= 0:
        raise ValueError("scales must be positive (height may be zero)")
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    length = spec.extent
    x = spec.nodes()
    shifts = length * np.arange(-images, images + 1)
    delta = np.zeros((spec.n, spec.n))
    for _ in range(count):
        r1, r2, r3, r4 = rng.random(4)
        height = height_scale * r1
        sigma = width_scale * r2
        cx = spec.xmin + length * r3
        cy = spec.xmin + length * r4
        # separable image sum: sum_j exp(-(x-cx+jL)^2/sigma) etc.
        gx = np.exp(-((x[:, None] - cx + shifts[None, :]) ** 2) / sigma).sum(axis=1)
        gy = np.exp(-((x[:, None] - cy + shifts[None, :]) ** 2) / sigma).sum(axis=1)
        delta += height * np.outer(gx, gy)
    return delta
