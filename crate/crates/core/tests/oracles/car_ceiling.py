"""Largest CAR@k reachable with the ground truth at rank 1 (alpha = 0.5).

With z-scored top-k scores the best case is one score far above k-1 equal
ones, which pins z to (sqrt(k-1), -1/sqrt(k-1), ...). A random search over
other score shapes confirms nothing beats it.
"""
import random

from mpmath import mp, mpf, exp, log, sqrt

mp.dps = 40


def car_top1(scores, alpha=mpf("0.5")):
    s = [mpf(x) for x in scores]
    n = len(s)
    mu = sum(s) / n
    sd = sqrt(sum((x - mu) ** 2 for x in s) / n)
    z = [(x - mu) / sd for x in s] if sd else [mpf(0)] * n
    e = [exp(v) for v in z]
    p = [v / sum(e) for v in e]
    H = -sum(v * log(v) for v in p if v > 0)
    hmax = log(n)
    h = alpha * hmax
    if H <= h or hmax == h:
        return mpf(1)
    return 1 - (H - h) / (hmax - h) / 2


for k in range(2, 11):
    spike = car_top1([10] + [0] * (k - 1))
    rng = random.Random(k)
    best = max(car_top1(sorted((rng.gauss(0, 1) ** 3 for _ in range(k)), reverse=True)) for _ in range(2000))
    print(k, mp.nstr(spike, 17), mp.nstr(best, 6), "searched <= spike:", best <= spike + mpf("1e-30"))
