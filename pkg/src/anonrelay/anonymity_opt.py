"""Anonymity as normalised equivocation, and the sum-rate price of raising it.

Anonymity of a covert-relay strategy is H(S | observation) / H(S): one means
the eavesdropper learns nothing about the session beyond the prior, zero
means full disclosure. Because the observation is a deterministic function
of (session, covert set), everything here is exact finite computation; the
throughput frontier reduces to a distortion-rate problem solved by the
Blahut-Arimoto iteration.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ._util import fmt
from .network_model import (
    Session,
    SessionPrior,
    Topology,
    covert_sum_rate,
    max_sum_rate_visible,
    observe,
)

__all__ = [
    "entropy_bits",
    "anonymity_level",
    "fano_error_bound",
    "expected_covert_rate",
    "CovertPolicy",
    "AnonymityInfeasibleError",
    "BAConvergenceError",
    "ObservationCollisionError",
    "best_deterministic",
    "deterministic_points",
    "DetPoint",
    "DistortionModel",
    "build_distortion_model",
    "BAResult",
    "blahut_arimoto",
    "CurvePoint",
    "TradeoffCurve",
    "tradeoff_curve",
    "deterministic_hull",
    "deterministic_hull_value",
]

_LN2 = math.log(2.0)


class AnonymityInfeasibleError(ValueError):
    """No enumerated covert subset reaches the requested anonymity level."""

    def __init__(self, target: float, best_alpha: float, best_covert: frozenset):
        self.target = target
        self.best_alpha = best_alpha
        self.best_covert = best_covert
        if target > 1.0:
            msg = f"anonymity {target} unreachable; levels above 1 are undefined"
        else:
            msg = (
                f"anonymity {target} unreachable; best attainable is {best_alpha:.6f} "
                f"with covert set {sorted(best_covert)}"
            )
        super().__init__(msg)


class BAConvergenceError(RuntimeError):
    """Blahut-Arimoto failed to converge; carries the best iterate."""

    def __init__(self, message, distortion, q, mutual_info_bits, gap):
        super().__init__(f"{message} (last objective change {gap:.3e})")
        self.distortion = distortion
        self.q = q
        self.mutual_info_bits = mutual_info_bits
        self.gap = gap


class ObservationCollisionError(RuntimeError):
    """Two covert subsets of one session produced the same observation.

    The subset must be recoverable from (session, observation); a collision
    means the observation map is broken."""


def entropy_bits(prior: SessionPrior) -> float:
    """Shannon entropy of the session prior, in bits."""
    return -sum(p * math.log2(p) for p in prior.probs)


@dataclass(frozen=True)
class CovertPolicy:
    """Conditional distribution over covert subsets, one rule per session."""

    rules: tuple  # ((Session, ((frozenset, prob), ...)), ...)

    def __post_init__(self):
        seen = set()
        for session, dist in self.rules:
            if session in seen:
                raise ValueError("policy repeats a session")
            seen.add(session)
            total = 0.0
            for covert, prob in dist:
                if prob < 0.0:
                    raise ValueError("negative policy probability")
                if not frozenset(covert) <= session.interior_nodes:
                    raise ValueError(
                        f"covert set {sorted(covert)} is not interior to the session"
                    )
                total += prob
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"policy weights for a session sum to {total}")

    @classmethod
    def deterministic(cls, covert: Iterable[str], prior: SessionPrior) -> "CovertPolicy":
        rules = []
        for session in prior.sessions:
            b = frozenset(covert) & session.interior_nodes
            rules.append((session, ((b, 1.0),)))
        return cls(rules=tuple(rules))

    def distribution(self, session: Session):
        for s, dist in self.rules:
            if s == session:
                return dist
        raise KeyError("session not covered by policy")


def _as_policy(policy_or_covert, prior: SessionPrior) -> CovertPolicy:
    if isinstance(policy_or_covert, CovertPolicy):
        return policy_or_covert
    return CovertPolicy.deterministic(frozenset(policy_or_covert), prior)


def anonymity_level(policy_or_covert, prior: SessionPrior) -> float:
    """Normalised equivocation H(S|observation)/H(S) of a covert strategy.

    Accepts a fixed covert set or a randomized per-session policy. The
    observation is the schedule-level eavesdropper's sufficient statistic, so
    this ratio is exactly the anonymity the strategy guarantees. A
    zero-entropy prior has nothing to hide and scores 1.
    """
    policy = _as_policy(policy_or_covert, prior)
    h_prior = entropy_bits(prior)
    if h_prior <= 0.0:
        return 1.0
    joint: dict = {}
    for session, p in prior.entries:
        for covert, q in policy.distribution(session):
            if q <= 0.0:
                continue
            obs = observe(session, covert)
            key = (session, obs)
            joint[key] = joint.get(key, 0.0) + p * q
    marg: dict = {}
    for (_, obs), w in joint.items():
        marg[obs] = marg.get(obs, 0.0) + w
    h_cond = -sum(w * math.log2(w / marg[obs]) for (_, obs), w in joint.items() if w > 0.0)
    alpha = h_cond / h_prior
    if __debug__:
        # the ratio is base invariant; recompute in nats as a cross-check
        h_cond_nats = -sum(
            w * math.log(w / marg[obs]) for (_, obs), w in joint.items() if w > 0.0
        )
        h_prior_nats = -sum(p * math.log(p) for p in prior.probs)
        assert abs(alpha - h_cond_nats / h_prior_nats) < 1e-9
    return alpha


def fano_error_bound(alpha: float, prior: SessionPrior) -> float:
    """Lower bound on the eavesdropper's session-decoding error probability
    implied by an anonymity level, clamped to [0, 1]."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    n = len(prior.entries)
    if n < 2:
        return 0.0
    bound = (alpha * entropy_bits(prior) - 1.0) / math.log2(n)
    return min(1.0, max(0.0, bound))


@dataclass(frozen=True)
class DetPoint:
    """One deterministic strategy: a fixed covert subset used in every session."""

    covert: frozenset
    alpha: float
    sum_rate: float


def _relay_universe(prior: SessionPrior) -> list[str]:
    nodes = set()
    for s in prior.sessions:
        nodes.update(s.interior_nodes)
    return sorted(nodes)


def expected_covert_rate(prior, covert, topo, delay, sim_packets, seed, boost) -> float:
    total = 0.0
    for session, p in prior.entries:
        r = covert_sum_rate(
            session, covert, topo, delay,
            mode="auto", sim_packets=sim_packets, seed=seed, boost=boost,
        )
        total += p * r.sum_rate
    return total


def deterministic_points(
    prior: SessionPrior,
    topo: Topology,
    delay: float,
    sim_packets: int = 200_000,
    seed: int = 0,
    boost: bool = True,
    max_relays: int = 20,
) -> tuple[DetPoint, ...]:
    """(anonymity, expected sum rate) of every fixed covert subset."""
    relays = _relay_universe(prior)
    if len(relays) > max_relays:
        raise ValueError(f"{len(relays)} relays exceed the enumeration cap {max_relays}")
    points = []
    for size in range(len(relays) + 1):
        for combo in itertools.combinations(relays, size):
            b = frozenset(combo)
            points.append(
                DetPoint(
                    covert=b,
                    alpha=anonymity_level(b, prior),
                    sum_rate=expected_covert_rate(prior, b, topo, delay, sim_packets, seed, boost),
                )
            )
    return tuple(points)


def best_deterministic(
    prior: SessionPrior,
    topo: Topology,
    alpha_target: float,
    delay: float,
    sim_packets: int = 200_000,
    seed: int = 0,
    boost: bool = True,
    max_relays: int = 20,
) -> DetPoint:
    """Highest expected sum rate over fixed covert subsets meeting the
    anonymity target. Subsets are enumerated smallest first, so ties go to
    the cheapest set of covert relays."""
    if alpha_target > 1.0:
        raise AnonymityInfeasibleError(alpha_target, 1.0, frozenset())
    relays = _relay_universe(prior)
    if len(relays) > max_relays:
        raise ValueError(f"{len(relays)} relays exceed the enumeration cap {max_relays}")
    best: Optional[DetPoint] = None
    best_alpha = -1.0
    best_alpha_covert: frozenset = frozenset()
    for size in range(len(relays) + 1):
        for combo in itertools.combinations(relays, size):
            b = frozenset(combo)
            alpha = anonymity_level(b, prior)
            if alpha > best_alpha:
                best_alpha = alpha
                best_alpha_covert = b
            if alpha + 1e-12 < alpha_target:
                continue
            rate = expected_covert_rate(prior, b, topo, delay, sim_packets, seed, boost)
            if best is None or rate > best.sum_rate + 1e-15:
                best = DetPoint(covert=b, alpha=alpha, sum_rate=rate)
    if best is None:
        raise AnonymityInfeasibleError(alpha_target, best_alpha, best_alpha_covert)
    return best


@dataclass(frozen=True, eq=False)
class DistortionModel:
    """Per-session sum-rate losses indexed by reachable observations.

    Rows are sessions, columns are observations; the entry is the drop in
    achievable sum rate for the unique covert subset turning that session
    into that observation, and +inf where no subset does. This is the loss
    matrix the distortion-rate computation minimises over.
    """

    sessions: tuple[Session, ...]
    probs: np.ndarray
    observations: tuple
    d: np.ndarray
    covert_for: dict  # (session index, observation index) -> frozenset
    lambda_v: tuple[float, ...]
    rate_zero: float
    delay: float
    metadata: dict


def build_distortion_model(
    prior: SessionPrior,
    topo: Topology,
    delay: float,
    sim_packets: int = 200_000,
    seed: int = 0,
    boost: bool = True,
    max_relays_per_session: int = 20,
) -> DistortionModel:
    """Enumerate every (session, covert subset) pair and tabulate losses.

    Each session contributes one finite column entry per subset of its own
    interior relays; the subset must be recoverable from the observation,
    so a collision raises `ObservationCollisionError`.
    """
    sessions = prior.sessions
    probs = np.asarray(prior.probs)
    rows: list[dict] = []
    lambda_v = []
    obs_index: dict = {}
    observations: list = []
    covert_for: dict = {}
    n_sim = 0
    for si, session in enumerate(sessions):
        relays = sorted(session.interior_nodes)
        if len(relays) > max_relays_per_session:
            raise ValueError(
                f"session has {len(relays)} interior relays, enumeration cap is "
                f"{max_relays_per_session}"
            )
        lv, _ = max_sum_rate_visible(session, topo)
        lambda_v.append(lv)
        row: dict = {}
        seen: dict = {}
        for size in range(len(relays) + 1):
            for combo in itertools.combinations(relays, size):
                b = frozenset(combo)
                obs = observe(session, b)
                if obs in seen:
                    raise ObservationCollisionError(
                        f"covert sets {sorted(seen[obs])} and {sorted(b)} give one "
                        f"observation for the same session"
                    )
                seen[obs] = b
                res = covert_sum_rate(
                    session, b, topo, delay,
                    mode="auto", sim_packets=sim_packets, seed=seed, boost=boost,
                )
                if res.mode == "simulated":
                    n_sim += 1
                loss = lv - res.sum_rate
                if abs(loss) < 1e-12:
                    loss = 0.0
                oi = obs_index.setdefault(obs, len(observations))
                if oi == len(observations):
                    observations.append(obs)
                row[oi] = loss
                covert_for[(si, oi)] = b
        rows.append(row)

    d = np.full((len(sessions), len(observations)), np.inf)
    for si, row in enumerate(rows):
        for oi, loss in row.items():
            d[si, oi] = loss
    rate_zero = float(np.dot(probs, lambda_v))
    return DistortionModel(
        sessions=sessions,
        probs=probs,
        observations=tuple(observations),
        d=d,
        covert_for=covert_for,
        lambda_v=tuple(lambda_v),
        rate_zero=rate_zero,
        delay=delay,
        metadata={"sim_packets": sim_packets, "seed": seed, "boost": boost,
                  "simulated_entries": n_sim},
    )


@dataclass(frozen=True, eq=False)
class BAResult:
    distortion: float
    q: np.ndarray  # conditional distribution, rows = sources
    mutual_info_bits: float
    slope: float
    iterations: int


def _mutual_info_and_distortion(q, probs, d_fin):
    phat = probs @ q
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(q > 0.0, q / np.maximum(phat[None, :], 1e-300), 1.0)
        i_nats = float(np.sum(probs[:, None] * np.where(q > 0.0, q * np.log(ratio), 0.0)))
    dist = float(np.sum(probs[:, None] * q * d_fin))
    return i_nats / _LN2, dist


@dataclass(frozen=True, eq=False)
class _Probe:
    beta: float
    q: np.ndarray
    rate_bits: float
    dist: float
    converged: bool
    gap: float


def _ba_fixed_slope(d, probs, beta, max_iter, finite, d_fin, gap_tol=1e-11):
    """Alternating minimisation at a fixed distortion slope.

    Stops on the duality-gap bound: with z the per-source partition sums and
    c the reproduction update factors, the Lagrangian optimum sits within
    max(c) - 1 of the current iterate. Right at an envelope kink the gap
    decays only sublinearly; the probe then returns unconverged, which is
    fine because the iterate is still a feasible achievable point and the
    kink itself is handled by chord mixing. The variational objective is
    asserted to never rise beyond rounding noise."""
    weight = np.where(finite, np.exp(-beta * d_fin), 0.0)
    allowed = finite.any(axis=0)
    phat = allowed / allowed.sum()
    prev_obj = math.inf
    gap = math.inf
    q = None
    converged = False
    for _ in range(max_iter):
        w = weight * phat[None, :]
        z = w.sum(axis=1)
        if (z <= 0.0).any():
            raise BAConvergenceError("a source lost all reconstruction mass",
                                     math.nan, q, math.nan, math.nan)
        q = w / z[:, None]
        # objective F(phat) = -sum_s p_s ln z_s, nonincreasing in exact arithmetic
        obj = -float(probs @ np.log(z))
        if obj > prev_obj + 1e-9 * max(1.0, abs(prev_obj)):
            raise AssertionError(
                f"objective rose from {prev_obj} to {obj} at slope {beta}"
            )
        prev_obj = obj
        c = (probs / z) @ weight
        gap = float(c.max()) - 1.0
        phat = phat * c
        phat /= phat.sum()
        if gap <= gap_tol:
            converged = True
            break
    rate_bits, dist = _mutual_info_and_distortion(q, probs, d_fin)
    return _Probe(beta=beta, q=q, rate_bits=rate_bits, dist=dist,
                  converged=converged, gap=gap)


def blahut_arimoto(
    d,
    prior,
    rate_bits: float,
    tol: float = 1e-6,
    max_iter: int = 4000,
    probe_cache: Optional[dict] = None,
) -> BAResult:
    """Distortion-rate point D(r): least expected loss over conditionals
    whose mutual information does not exceed `rate_bits`.

    The slope-parametrised iteration traces the convex lower envelope; the
    slope is bisected until the rate target is bracketed within `tol` bits,
    and the two bracketing solutions are mixed, which stays feasible because
    mutual information is convex in the conditional. `max_iter` caps each
    fixed-slope solve. `prior` may be a `SessionPrior` or a bare probability
    vector. Callers evaluating many rate targets on one matrix can pass a
    shared `probe_cache` dict so fixed-slope solves are reused.
    """
    probs = np.asarray(prior.probs if isinstance(prior, SessionPrior) else prior, dtype=float)
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != probs.size:
        raise ValueError("loss matrix and prior sizes disagree")
    if rate_bits < 0.0:
        raise ValueError("rate must be nonnegative")
    finite = np.isfinite(d)
    if not finite.any(axis=1).all():
        raise ValueError("every source needs at least one finite-loss reconstruction")
    d_fin = np.where(finite, d, 0.0)
    ns, no = d.shape

    # floor of the envelope: per-source best reconstruction
    q_min = np.zeros((ns, no))
    q_min[np.arange(ns), np.where(finite, d, np.inf).argmin(axis=1)] = 1.0
    i_min_bits, d_min = _mutual_info_and_distortion(q_min, probs, d_fin)
    if rate_bits >= i_min_bits - 1e-12:
        return BAResult(distortion=d_min, q=q_min, mutual_info_bits=i_min_bits,
                        slope=math.inf, iterations=0)

    n_probes = 0
    cache = probe_cache if probe_cache is not None else {}

    def solve(beta: float) -> _Probe:
        nonlocal n_probes
        if beta not in cache:
            n_probes += 1
            cache[beta] = _ba_fixed_slope(d, probs, beta, max_iter, finite, d_fin)
        return cache[beta]

    # left anchor of the envelope: a common reconstruction gives exact rate
    # zero; otherwise the feasible rate floor is positive and found by a
    # near-zero slope solve
    common = finite.all(axis=0)
    if common.any():
        col = int(np.argmin(np.where(common, probs @ d_fin, np.inf)))
        q_const = np.zeros((ns, no))
        q_const[:, col] = 1.0
        d_const = float(probs @ d_fin[:, col])
        if rate_bits <= tol * 1e-3:
            return BAResult(distortion=d_const, q=q_const, mutual_info_bits=0.0,
                            slope=0.0, iterations=0)
        lo = _Probe(beta=0.0, q=q_const, rate_bits=0.0, dist=d_const,
                    converged=True, gap=0.0)
    else:
        lo = solve(1e-9)
        if lo.rate_bits > rate_bits + tol:
            raise ValueError(
                f"rate target {rate_bits} is below the feasible minimum "
                f"{lo.rate_bits:.6f} bits for this loss matrix"
            )
    hi = None
    beta = 1.0
    for _ in range(80):
        p = solve(beta)
        if p.rate_bits >= rate_bits:
            hi = p
            break
        lo = p
        beta *= 4.0
    if hi is None:
        # envelope saturates below the target; its endpoint is optimal there
        return BAResult(distortion=lo.dist, q=lo.q, mutual_info_bits=lo.rate_bits,
                        slope=lo.beta, iterations=n_probes)

    lo_c = lo if lo.converged else None
    hi_c = hi if hi.converged else None
    for _ in range(100):
        if hi.rate_bits - lo.rate_bits <= tol:
            break
        # a sub-ppm slope bracket makes the chord error second order; going
        # finer only grinds against the kink's sublinear convergence
        if hi.beta - lo.beta <= 1e-6 * max(1.0, hi.beta):
            break
        p = solve(0.5 * (lo.beta + hi.beta))
        if p.rate_bits >= rate_bits:
            hi = p
            if p.converged:
                hi_c = p
        else:
            lo = p
            if p.converged:
                lo_c = p

    def mixed(a: _Probe, b: _Probe):
        """Chord between two achievable points; mutual information is convex
        in the conditional, so the mixture's rate stays at or below the
        interpolated target."""
        span = b.rate_bits - a.rate_bits
        lam = 0.0 if span <= 0.0 else min(1.0, max(0.0, (rate_bits - a.rate_bits) / span))
        q = (1.0 - lam) * a.q + lam * b.q
        i_bits, dist = _mutual_info_and_distortion(q, probs, d_fin)
        return q, i_bits, dist, 0.5 * (a.beta + b.beta)

    candidates = [mixed(lo, hi)]
    if lo_c is not None and hi_c is not None and (lo_c is not lo or hi_c is not hi):
        candidates.append(mixed(lo_c, hi_c))
    candidates = [c for c in candidates if c[1] <= rate_bits + tol]
    if not candidates:
        raise BAConvergenceError("no feasible solution at the rate target",
                                 math.nan, None, math.nan, math.nan)
    q, i_bits, dist, slope = min(candidates, key=lambda c: c[2])
    return BAResult(distortion=dist, q=q, mutual_info_bits=i_bits,
                    slope=slope, iterations=n_probes)


@dataclass(frozen=True, eq=False)
class CurvePoint:
    alpha: float
    rate: float
    distortion: float
    mutual_info_bits: float
    policy: Optional[CovertPolicy]


@dataclass(frozen=True, eq=False)
class TradeoffCurve:
    """Sampled sum-rate/anonymity frontier.

    Rates never increase with anonymity, and the achievable region under the
    curve is convex (time sharing), i.e. the frontier is concave in alpha.
    Both are validated at construction.
    """

    points: tuple[CurvePoint, ...]
    rate_zero: float

    def __post_init__(self):
        pts = self.points
        for a, b in zip(pts, pts[1:]):
            if b.alpha < a.alpha - 1e-12:
                raise ValueError("curve points must be sorted by alpha")
            if b.rate > a.rate + 1e-9:
                raise ValueError("rate must be nonincreasing in alpha")
        for left, mid, right in zip(pts, pts[1:], pts[2:]):
            span = right.alpha - left.alpha
            if span <= 1e-15:
                continue
            t = (mid.alpha - left.alpha) / span
            chord = (1.0 - t) * left.rate + t * right.rate
            if mid.rate < chord - 1e-9:
                raise ValueError("frontier is not concave: achievable region not convex")

    def to_csv(self) -> str:
        lines = ["alpha,rate,mutual_info_bits,policy_id"]
        for k, p in enumerate(self.points):
            lines.append(f"{fmt(p.alpha)},{fmt(p.rate)},{fmt(p.mutual_info_bits)},{k}")
        return "\n".join(lines) + "\n"

    def policies_text(self) -> str:
        """Sidecar listing of each point's covert-set distribution."""
        lines = []
        for k, p in enumerate(self.points):
            lines.append(f"policy {k} alpha {fmt(p.alpha)}")
            if p.policy is None:
                lines.append("  (none)")
                continue
            for si, (session, dist) in enumerate(p.policy.rules):
                for covert, prob in dist:
                    name = "+".join(sorted(covert)) if covert else "-"
                    lines.append(f"  session {si} covert {name} prob {fmt(prob)}")
        return "\n".join(lines) + "\n"


def tradeoff_curve(
    prior: SessionPrior,
    topo: Topology,
    delay: float,
    alpha_grid: Sequence[float],
    sim_packets: int = 200_000,
    seed: int = 0,
    boost: bool = True,
    ba_tol: float = 1e-6,
    model: Optional[DistortionModel] = None,
) -> TradeoffCurve:
    """Randomized-strategy frontier R(alpha) = R(0) - D(H(S)(1 - alpha)).

    For each anonymity level the distortion-rate solution yields both the
    least sum-rate loss and the covert-set distribution achieving it, mapped
    back through the uniqueness of the covert set given (session,
    observation).
    """
    if model is None:
        model = build_distortion_model(
            prior, topo, delay, sim_packets=sim_packets, seed=seed, boost=boost
        )
    h = entropy_bits(prior)
    points = []
    probe_cache: dict = {}
    for alpha in sorted(alpha_grid):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha grid values must be in [0, 1], got {alpha}")
        ba = blahut_arimoto(model.d, model.probs, h * (1.0 - alpha), tol=ba_tol,
                            probe_cache=probe_cache)
        rules = []
        for si, session in enumerate(model.sessions):
            dist = []
            row = ba.q[si]
            for oi in np.nonzero(row > 1e-12)[0]:
                dist.append((model.covert_for[(si, int(oi))], float(row[oi])))
            total = sum(w for _, w in dist)
            dist = tuple((b, w / total) for b, w in dist)
            rules.append((session, dist))
        points.append(
            CurvePoint(
                alpha=alpha,
                rate=model.rate_zero - ba.distortion,
                distortion=ba.distortion,
                mutual_info_bits=ba.mutual_info_bits,
                policy=CovertPolicy(rules=tuple(rules)),
            )
        )
    return TradeoffCurve(points=tuple(points), rate_zero=model.rate_zero)


def deterministic_hull(points: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Time-sharing envelope of deterministic (rate, alpha) points.

    Returns (rate, alpha) vertices, sorted by alpha, after discarding every
    point strictly below some convex combination of others. Anonymity can
    always be thrown away, so the envelope extends flat to the left.
    """
    if not points:
        raise ValueError("need at least one point")
    alphas = sorted({a for _, a in points})
    out = []
    for a in alphas:
        out.append((deterministic_hull_value(points, a), a))
    pruned = []
    for r, a in out:
        while len(pruned) >= 2:
            (r0, a0), (r1, a1) = pruned[-2], pruned[-1]
            if a1 > a0 and abs((r1 - r0) * (a - a0) - (r - r0) * (a1 - a0)) <= 1e-12:
                pruned.pop()  # collinear middle point
            else:
                break
        pruned.append((r, a))
    return pruned


def deterministic_hull_value(points: Sequence[tuple[float, float]], alpha: float) -> float:
    """Best rate reachable at anonymity >= alpha by mixing deterministic
    strategies across sessions."""
    best = -math.inf
    pts = [(float(r), float(a)) for r, a in points]
    for r, a in pts:
        if a >= alpha - 1e-12:
            best = max(best, r)
    for (r1, a1), (r2, a2) in itertools.combinations(pts, 2):
        lo, hi = (r1, a1), (r2, a2)
        if lo[1] > hi[1]:
            lo, hi = hi, lo
        if lo[1] - 1e-12 <= alpha <= hi[1] + 1e-12 and hi[1] > lo[1]:
            t = (alpha - lo[1]) / (hi[1] - lo[1])
            t = min(1.0, max(0.0, t))
            best = max(best, lo[0] + t * (hi[0] - lo[0]))
    if not math.isfinite(best):
        raise ValueError(f"no deterministic point reaches anonymity {alpha}")
    return best
