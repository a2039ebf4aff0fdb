"""Probabilistic model of random leaf-spine networks.

Expected ball sizes around a switch are grown level by level with a
coupon-collector estimate of the neighborhood of a random set.  From them we
predict the distance distribution, the average distances, and the
probability that the all-switch diameter stays below a given value.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InfeasibleSpec, InvalidK
from .topology import MrlsSpec, is_prime

SATURATION = 1e-9
EXACT_COMB_LIMIT = 2000


def eta(x: float, n1_at_level: float, N_next: float) -> float:
    """Expected size of the neighborhood of ``x`` random switches of one level,
    each with ``n1_at_level`` neighbors among ``N_next`` switches."""
    return N_next * -math.expm1(-x * n1_at_level / N_next)


@dataclass
class SphereModel:
    spec: MrlsSpec
    start_level: int
    b: np.ndarray
    n: np.ndarray
    truncation_r: int

    def level_at(self, r: int) -> int:
        """Level (1 leaf, 2 spine) of the switches at distance ``r``."""
        return 1 + (self.start_level - 1 + r) % 2


def _level_params(spec: MrlsSpec):
    # level -> (own size, degree toward the other level)
    return {1: (spec.N1, float(spec.u)), 2: (spec.N2, spec.mean_spine_degree)}


def ball_sequence(spec: MrlsSpec, start_level: int, r_max: int) -> SphereModel:
    """Iterate expected ball sizes ``b_r`` from a switch at ``start_level``.

    Iteration stops once both levels are saturated to within ``SATURATION``
    or at ``r_max``; the last ball of each parity is then set to the full
    level so that the shells ``n_r`` sum to ``N - 1``.
    """
    if start_level not in (1, 2):
        raise ValueError("start_level must be 1 (leaf) or 2 (spine)")
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    params = _level_params(spec)
    size = {lvl: params[lvl][0] for lvl in (1, 2)}

    def level(r):
        return 1 + (start_level - 1 + r) % 2

    b = [1.0, params[start_level][1]]
    r = 1
    while r < r_max:
        saturated = all(b[k] >= size[level(k)] * (1 - SATURATION) for k in (r - 1, r))
        if saturated:
            break
        lvl = level(r)
        b.append(eta(b[r], params[lvl][1], size[level(r + 1)]))
        r += 1
    b = np.array(b)
    b[-1] = size[level(len(b) - 1)]
    if len(b) >= 3:
        b[-2] = size[level(len(b) - 2)]
    n = b.copy()
    n[2:] = b[2:] - b[:-2]
    return SphereModel(spec, start_level, b, n, len(b) - 1)


def _model_depth(spec: MrlsSpec) -> int:
    # generous bound: shells grow at least by the smaller degree each pass
    growth = max(2.0, min(spec.u, spec.mean_spine_degree) - 1)
    return 2 * int(math.ceil(math.log(spec.N1 + spec.N2) / math.log(growth))) + 8


def predicted_average_distance(spec: MrlsSpec) -> float:
    model = ball_sequence(spec, 1, _model_depth(spec))
    if spec.N1 < 2:
        return 0.0
    r = np.arange(len(model.n))
    even = (r >= 2) & (r % 2 == 0)
    return float((r[even] * model.n[even]).sum() / (spec.N1 - 1))


def predicted_average_distance_star(spec: MrlsSpec) -> float:
    """All-switch average distance, weighting each start level by its population."""
    depth = _model_depth(spec)
    total = 0.0
    for lvl, pop in ((1, spec.N1), (2, spec.N2)):
        model = ball_sequence(spec, lvl, depth)
        r = np.arange(len(model.n))
        total += pop * float((r[1:] * model.n[1:]).sum())
    N = spec.N1 + spec.N2
    return total / (N * (N - 1))


def empty_intersection_prob(n, x, y) -> float:
    """Probability that random subsets of sizes ``x`` and ``y`` of an
    ``n``-set are disjoint: C(n-y, x) / C(n, x).

    Accepts real sizes (generalized binomials via log-gamma).  Integer
    arguments with a small set size are evaluated exactly.
    """
    x, y = sorted((x, y))
    if x < 0 or y > n:
        raise ValueError(f"need 0 <= x, y <= n, got n={n}, x={x}, y={y}")
    if x == 0:
        return 1.0
    if x + y > n:
        return 0.0
    ints = all(float(v).is_integer() for v in (n, x, y))
    if ints and x <= EXACT_COMB_LIMIT:
        n, x, y = int(n), int(x), int(y)
        return float(Fraction(math.comb(n - y, x), math.comb(n, x)))
    lg = math.lgamma
    return math.exp(lg(n - y + 1) + lg(n - x + 1) - lg(n - x - y + 1) - lg(n + 1))


@dataclass(frozen=True)
class DstarTerms:
    """Intermediate quantities of the diameter-threshold estimate."""

    k: int
    x: float
    y: float
    universe: int
    G: int
    p_empty: float

    @property
    def lam(self) -> float:
        return self.G * self.p_empty

    @property
    def prob(self) -> float:
        if self.p_empty >= 1.0:
            return 0.0
        return math.exp(self.G * math.log1p(-self.p_empty))

    @property
    def prob_poisson(self) -> float:
        return math.exp(-self.lam)


def dstar_terms(spec: MrlsSpec, k: int) -> DstarTerms:
    if k < 2:
        raise InvalidK(f"k must be >= 2, got {k}")
    # Pairs tested at distance k-1: a leaf s against t at the level of
    # parity k-1 from s.  k odd -> t leaf (even distance), k even -> t spine.
    # Either way the neighbors of s and the (k-2)-ball of t live on the
    # spine level.  The ball, not the sphere, keeps P monotone in k once
    # the shells have saturated.
    t_level = 1 if k % 2 == 1 else 2
    depth = max(k, _model_depth(spec))
    model = ball_sequence(spec, t_level, depth)
    y = float(model.b[min(k - 2, len(model.b) - 1)])
    x = float(min(spec.u, spec.N2))
    G = math.comb(spec.N1, 2) if t_level == 1 else spec.N1 * spec.N2
    p = empty_intersection_prob(spec.N2, x, min(y, spec.N2))
    return DstarTerms(k=k, x=x, y=y, universe=spec.N2, G=G, p_empty=p)


def prob_dstar_leq(spec: MrlsSpec, k: int) -> float:
    """Estimated probability that every pair of switches is within ``k`` hops."""
    return dstar_terms(spec, k).prob


@dataclass
class SpectrumPoint:
    S: int
    N1: int
    N2: int
    prob_dstar_leq: dict[int, float]
    predicted_A: float
    predicted_theta: float
    spec: MrlsSpec | None = field(default=None, repr=False)

    def likely_dstar(self) -> int:
        """The k with the largest probability mass P[D* = k] among tested ks."""
        ks = sorted(self.prob_dstar_leq)
        best, best_mass = ks[-1] + 1, 1.0 - self.prob_dstar_leq[ks[-1]]
        prev = 0.0
        for k in ks:
            mass = self.prob_dstar_leq[k] - prev
            if mass > best_mass:
                best, best_mass = k, mass
            prev = self.prob_dstar_leq[k]
        return best

    def likely_diameter(self) -> int:
        return 2 * (self.likely_dstar() // 2)


def thickness_split(R: int, f: float) -> tuple[int, int]:
    """Integral (u, d) with u + d = R and u/d = f."""
    u = R * f / (1 + f)
    if abs(u - round(u)) > 1e-9:
        raise InfeasibleSpec(f"f={f} gives non-integral uplinks for R={R}")
    u = int(round(u))
    return u, R - u


def spectrum_sweep(R: int, f: float, S_range, k_set=(3, 4, 5, 6, 7)) -> list[SpectrumPoint]:
    u, d = thickness_split(R, f)
    points = []
    for S in S_range:
        S = int(S)
        spec = MrlsSpec.for_endpoints(R, u, S)
        if spec.N2 < u or spec.N1 < R:
            raise InfeasibleSpec(
                f"S={S}: {spec.N1} leaves and {spec.N2} spines cannot host a simple "
                f"wiring with u={u}, R={R}"
            )
        A = predicted_average_distance(spec)
        probs = {k: prob_dstar_leq(spec, k) for k in k_set}
        theta = 2 * spec.u * spec.N1 / (S * A)
        points.append(SpectrumPoint(S, spec.N1, spec.N2, probs, A, theta, spec))
    return points


def spectrum_csv(points: list[SpectrumPoint]) -> str:
    ks = sorted(points[0].prob_dstar_leq) if points else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["S", "N1", "N2", *[f"prob_dstar_leq_{k}" for k in ks], "predicted_A", "predicted_theta"])
    for p in points:
        w.writerow([p.S, p.N1, p.N2, *[repr(p.prob_dstar_leq[k]) for k in ks],
                    repr(p.predicted_A), repr(p.predicted_theta)])
    return buf.getvalue()


def threshold_crossing(R: int, f: float, k: int, lo: int, hi: int, level=0.5) -> float:
    """Endpoint count where P[D* <= k] falls through ``level`` (bisection on S)."""
    u, _ = thickness_split(R, f)

    def p(S):
        return prob_dstar_leq(MrlsSpec.for_endpoints(R, u, int(S)), k)

    if not p(lo) >= level >= p(hi):
        raise ValueError(f"P[D*<={k}] does not cross {level} in [{lo}, {hi}]")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if p(mid) >= level:
            lo = mid
        else:
            hi = mid
    return float(lo)


def _next_prime(n: int) -> int:
    while not is_prime(n):
        n += 1
    return n


def radix_for_endpoints(family: str, S: int, *, h: int | None = None, f: float = 1.0,
                        target_D: int = 4, R_max: int = 1024) -> int:
    """Smallest radix with which ``family`` reaches ``S`` endpoints.

    FT: full population at height ``h``.  OFT: smallest prime ``q`` with
    ``2(q^2+q+1)(q+1) >= S``.  MRLS: smallest R (thickness ``f``) for which
    an instance with S endpoints has leaf diameter <= ``target_D`` with
    probability at least 1/2, i.e. P[D* <= target_D + 1] >= 0.5.
    """
    if S < 1:
        raise ValueError("S must be positive")
    family = family.lower()
    if family in ("ft", "fat_tree"):
        if h is None:
            raise ValueError("fat-tree radix needs the height h")
        k = 1
        while 2 * k ** (h + 1) < S:
            k += 1
        return 2 * k
    if family == "oft":
        q = 2
        while 2 * (q * q + q + 1) * (q + 1) < S:
            q = _next_prime(q + 1)
        return 2 * (q + 1)
    if family == "mrls":
        for R in range(2, R_max + 1):
            try:
                u, d = thickness_split(R, f)
            except InfeasibleSpec:
                continue
            if u < 1 or d < 1:
                continue
            if S < d:
                return R
            spec = MrlsSpec.for_endpoints(R, u, S)
            if spec.N2 < u or spec.N1 < R:
                continue
            if prob_dstar_leq(spec, target_D + 1) >= 0.5:
                return R
        raise InfeasibleSpec(f"no radix up to {R_max} reaches S={S}")
    raise ValueError(f"unknown family {family!r}; expected mrls, ft or oft")
