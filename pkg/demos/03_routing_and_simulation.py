"""Polarized routing on a small instance, then a short throughput sweep
with the cycle-level simulator.

Run with ``python3 demos/03_routing_and_simulation.py``; a couple of minutes
(the first call compiles the simulator kernel).
"""

import numpy as np

from mrls import metrics_report
from mrls.routing import CloserBits, corner_check, max_route_length_bound, polarized_route
from mrls.simulator import SimConfig, run_latency, run_throughput
from mrls.topology import MrlsSpec, build_mrls

t = build_mrls(MrlsSpec(16, 8, 8, 64, 32, seed=1))
report = metrics_report(t)
print(f"64 leaves, 32 spines, {t.S} endpoints: D={report.D} D*={report.Dstar} theta={report.theta:.3f}")

# a network with corners can strand a packet; the simulator refuses those
print("corners:", corner_check(t) or "none")

bits = CloserBits(t)
rng = np.random.default_rng(0)
s, d = (int(x) for x in t.leaves[:2])
route = polarized_route(t, s, d, lambda c, ports: rng.integers(0, 8, len(ports)), bits=bits, rng=rng)
print(f"one route {s} -> {d}: {route.switches} labels {[l.name for l in route.labels]}")

worst = 0
for _ in range(5000):
    s, d = (int(x) for x in rng.choice(t.leaves, 2, replace=False))
    worst = max(worst, polarized_route(t, s, d, lambda c, ports: rng.integers(0, 64, len(ports)),
                                       bits=bits, rng=rng).length)
print(f"longest of 5000 routes under random congestion: {worst} hops (bound {max_route_length_bound(t)})\n")

print("Uniform traffic, offered vs accepted load:")
for load in (0.2, 0.5, 0.8, 1.0):
    st = run_throughput(t, "polarized", "UN",
                        SimConfig(offered_load=load, warmup_cycles=5000, measurement_cycles=20000, seed=1))
    print(f"  offered {load:.1f}  accepted {st.accepted_load:.3f}")
print(f"Accepted load levels off near 0.7, below theta={report.theta:.3f} as the capacity limit predicts.\n")

st = run_latency(t, "polarized", SimConfig(offered_load=0.3, warmup_cycles=5000, measurement_cycles=20000, seed=1))
print("mice/elephant latency percentiles at load 0.3:", st.latency_percentiles)
