"""Error of the acoustic-limit proxy against delta at fixed eps (the U-shaped curve).

usage: python scripts/proxy_delta_sweep.py [eps]
"""
import sys

from mixhilbert.experiments import acoustic_limit_proxy_rate

eps = float(sys.argv[1]) if len(sys.argv) > 1 else 0.01
r = acoustic_limit_proxy_rate(sweep_eps=eps)
for d, l2, s in zip(r.extra["sweep_deltas"], r.extra["sweep_L2"], r.extra["sweep_sup"]):
    print(f"delta {d:6.3f}  L2 {l2:.4e}  sup {s:.4e}")
print("minimum at delta", r.extra["argmin_delta"])
