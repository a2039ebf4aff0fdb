"""Build a few random leaf-spine networks and compare them with the
fixed-structure alternatives at the same radix.

Run with ``python3 demos/01_build_and_measure.py``; takes a few seconds.
"""

from mrls import metrics_report
from mrls.topology import FtSpec, MrlsSpec, OftSpec, build_fat_tree, build_mrls, build_oft

R = 36


def show(name, t):
    r = metrics_report(t)
    print(f"{name:<22} S={t.S:>6}  switches={t.N:>5}  D={r.D}  D*={r.Dstar}  A={r.A:.3f}  "
          f"theta={r.theta:.3f}  links/ep={r.cost_links:.3f}  switches/ep={r.cost_switches:.3f}")


print("Same radix, roughly 11k endpoints.\n")
show("OFT q=17", build_oft(OftSpec(17)))
show("fat tree h=2", build_fat_tree(FtSpec(R, 2)))
for u in (18, 21, 24):
    S = 11664 if u == 24 else 11052
    show(f"MRLS u={u}", build_mrls(MrlsSpec.for_endpoints(R, u, S, seed=1)))

print("""
The random network with u=18 uses the same wiring budget as the OFT (one
link per endpoint) but has twice the leaf diameter, so its capacity limit
falls below one.  Adding uplinks (u=21, u=24) buys the capacity back, and
unlike the OFT the endpoint count can be any value, not just one per prime.
""")

print("Endpoint count is a free parameter:")
for S in (3000, 7000, 11052, 20000):
    show(f"MRLS u=18 S={S}", build_mrls(MrlsSpec.for_endpoints(R, 18, S, seed=1)))
