"""Interpolation schedules and time grids.

Shows the two shipped schedules, the rate factor that drives every
sampler, and the three grid constructions, including the identity that
makes the closed-form grid optimal for the linear schedule: the product
of step width and per-interval rate bound is the same constant in k.
"""

import numpy as np

from discflow import (
    CosineSchedule,
    LinearSchedule,
    RateBoundProfile,
    constant_product_grid,
    make_optimal_linear_grid,
    make_uniform_grid,
    rate_bound,
    rate_factor,
)

linear = LinearSchedule()
cosine = CosineSchedule()

print("== schedules ==")
for t in (0.0, 0.25, 0.5, 0.9):
    print(f"t={t:4.2f}  linear: kappa={linear.kappa(t):.4f} rate={rate_factor(linear, t):8.4f}"
          f"   cosine: kappa={cosine.kappa(t):.4f} rate={rate_factor(cosine, t):8.4f}")

print("\n== uniform vs optimal grid (K=5, delta=0.01) ==")
uni = make_uniform_grid(5, 0.01)
opt = make_optimal_linear_grid(5, 0.01)
print("uniform :", np.round(uni.points, 4))
print("optimal :", np.round(opt.points, 4))

print("\nconstant-product identity on the optimal grid:")
profile = RateBoundProfile(linear)
c_star = 0.01 ** (-1 / 5) - 1
for k in range(5):
    M_k = rate_bound(profile, opt.points[k], opt.points[k + 1])
    print(f"  k={k + 1}: tau_k * M_k = {opt.taus[k] * M_k:.6f}   (c* = {c_star:.6f})")

print("\n== numerically solved grid for the cosine schedule (K=5) ==")
cos_grid = constant_product_grid(RateBoundProfile(cosine), 5, 0.01)
print("points  :", np.round(cos_grid.points, 4))
prods = [cos_grid.taus[k] * rate_bound(RateBoundProfile(cosine),
                                       cos_grid.points[k], cos_grid.points[k + 1])
         for k in range(5)]
print("products:", np.round(prods, 6), "(constant by construction)")
