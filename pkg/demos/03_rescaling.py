"""The same convergence seen through the scaling family.

u_lam(t, x) = lam u(lam^2 t, lam x) keeps the mass fixed and zooms out. The
profile is a fixed point of this map, so ||u_lam(1) - u_M(1)||_1 should shrink
as lam grows. We never integrate the rescaled equation. Every u_lam is read off
one simulation of u.
"""
import numpy as np

from nlcd import (Exponential, Grid, HeatProfile, SolverConfig, discretize, rescale,
                  rescaled_l1_distance, run)

grid = Grid.symmetric(200.0, 2048)
kernel = discretize(Exponential(), grid.dx)
phi = grid.sample(lambda x: np.exp(-x * x / 2) / np.sqrt(2 * np.pi), nonneg=True)
lams = (1.0, 2.0, 4.0, 8.0, 16.0)
store = run(phi, kernel, SolverConfig(q=3, t_end=256, snapshot_times=tuple(l * l for l in lams)))
prof = HeatProfile(1.0, kernel.second_moment_A)

for lam in lams:
    print(f"lambda = {lam:>4g}: ||u_lam(1) - u_M(1)||_1 = {rescaled_l1_distance(store, lam, prof):.4f}")

target = Grid.symmetric(4.0, 9)
print("u_16(1) on a coarse grid:", np.round(rescale(store, 16.0, 1.0, target).values, 4))
print("u_M(1) on the same grid: ", np.round(prof(1.0, target.x), 4))
