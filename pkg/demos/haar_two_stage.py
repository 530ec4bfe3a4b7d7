"""Purity decay of a half-chain cut under Haar-random brickwall and staircase circuits.

Brickwall: a single rate log2(5/4) before and after saturation.
Staircase: an early phantom rate (1/2) log2(3/2) that is slower than the late one.
"""
import math

from twostage import build_schedule, partition_free_boundary, two_stage_fit, predict_rates
from twostage.effective_magnet import Haar

for geometry, L, T in (("brickwall", 14, 60), ("staircase", 20, 50)):
    s = build_schedule(geometry, "open", L)
    series = partition_free_boundary(L // 2, s, Haar(2), T)
    r1, r2 = two_stage_fit(series)
    p = predict_rates(Haar(2), geometry, "open")
    print(f"{geometry:9s} L={L}: measured r1={r1.rate:.4f} on {r1.window}, r2={r2.rate:.4f} on {r2.window}")
    print(f"{'':9s} predicted r1={p.r1:.4f}, r2={p.r2:.4f} ({p.scenario})")
    for t, dz in list(zip(series.t, series.dz))[: 12 : 2]:
        print(f"    t={t:5.1f}  log2 dZ = {math.log2(dz):8.3f}")
