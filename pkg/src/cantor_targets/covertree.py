"""Finite-level models of the covering and mass-distribution arguments.

Lower bound: pick levels n_1 < n_2 < ..., keep at each level the target
arcs that fit inside a kept arc of the previous level, and spread mass
uniformly down the tree. Upper bound: the t-dimensional sum over one
level of targets and its geometric tail.

Since ``Q_{n_{l+1}} / Q_{n_l}`` is an integer, every parent centre
``j / Q_{n_l}`` is also a grid point ``j M / Q_{n_{l+1}}`` of the next
level, and its children are exactly ``j M + k`` for ``|k| <= h``. A level
is therefore stored as ``(Q, radius, h)`` rather than as a node list; node
lists are produced on demand, subject to the enumeration cap, and all
per-node checks run either over every node or over a deterministic
sample when the level is too large.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from flint import arb, ctx, fmpq

from .dimension import DEFAULT_WINDOW, dimension_limsup, pressure_estimate, tail_window
from .errors import CapExceeded, PreconditionUnmet, ScheduleInfeasible
from .logreal import LogReal, to_arb
from .sequences import BASE, WEIGHT, CumulativeCache, as_cache

DEFAULT_ENUMERATION_CAP = 10**7
DEFAULT_N_CAP = 100_000
FORMAT_VERSION = 1
CHECK_ALL_NODES_UP_TO = 20_000
SAMPLED_NODES = 64
BRUTE_FORCE_CHILDREN_UP_TO = 4096

C_FIRST = "alpha(n_1) > log 2"
C_GROWTH = "(1-s) log Q_n - s alpha(n) >= P(s) n / 2"
C_BUDGET = "P(s) n / 2 >= (l+1) log 2 + sum_{i<l} alpha(n_i) - log C"
C_STRONG = "log(Q_n / Q_{n_prev}) - alpha(n_prev) >= log 4"


class _Undecided(Exception):
    pass


def _floor_int(x: arb) -> int:
    z = x.floor().unique_fmpz()
    if z is None:
        raise _Undecided
    return int(z)


def _ceil_int(x: arb) -> int:
    z = x.ceil().unique_fmpz()
    if z is None:
        raise _Undecided
    return int(z)


def _with_escalation(fn, prec: int, max_factor: int = 16):
    p = prec
    while True:
        try:
            with ctx.workprec(p):
                return fn(p)
        except _Undecided:
            if p >= prec * max_factor:
                raise ArithmeticError(f"comparison undecided at {p} bits (exact boundary?)") from None
            p *= 2


# --- level schedule -----------------------------------------------------------------


@dataclass(frozen=True)
class LevelWitness:
    level: int
    n: int
    margins: dict

    @property
    def ok(self) -> bool:
        return all(m >= 0 for m in self.margins.values())


@dataclass(frozen=True)
class LevelSchedule:
    s: float
    levels: tuple
    C: float = 1.0
    pressure: float = float("nan")
    witnesses: tuple = ()
    rejected: tuple = ()

    @classmethod
    def from_levels(cls, levels, s: float = float("nan"), C: float = 1.0) -> LevelSchedule:
        """A hand-written schedule (no constraint witnesses)."""
        levels = tuple(int(n) for n in levels)
        if not levels or any(b <= a for a, b in zip(levels, levels[1:])) or levels[0] < 1:
            raise ValueError("levels must be a non-empty strictly increasing list of positive integers")
        return cls(float(s), levels, float(C))

    def __len__(self) -> int:
        return len(self.levels)


def _margins(Qc: CumulativeCache, Ac: CumulativeCache, s: float, P: float, C: float,
             level: int, n: int, chosen: list, prec: int) -> dict:
    """Rigorous lower ends of each constraint's slack at ``n`` (>= 0 means satisfied)."""
    Qp, Ap = Qc.at_precision(prec), Ac.at_precision(prec)
    with ctx.workprec(prec):
        s_, P_, logC = arb(s), arb(P), arb(C).log()
        log2 = arb(2).log()
        lq, a = Qp.log_partial_product(n).ball, Ap.alpha_partial_sum(n).ball
        out = {}
        if level == 1:
            out[C_FIRST] = a - log2
        out[C_GROWTH] = (1 - s_) * lq - s_ * a - P_ * n / 2
        if level >= 2:
            spent = sum((Ap.alpha_partial_sum(m).ball for m in chosen), arb(0))
            out[C_BUDGET] = P_ * n / 2 - (level + 1) * log2 - spent + logC
            prev = chosen[-1]
            out[C_STRONG] = lq - Qp.log_partial_product(prev).ball - Ap.alpha_partial_sum(prev).ball - 2 * log2
        result = {}
        for key, m in out.items():
            strict = key == C_FIRST
            certain = m > 0 if strict else m >= 0
            # an undecided constraint counts as failed
            result[key] = max(float(m.lower()), 0.0) if certain else min(float(m.lower()), -math.ulp(0.0))
    return result


def choose_levels(Q, alpha, s: float, L: int, N_cap: int = DEFAULT_N_CAP, C: float = 1.0,
                  window_fraction: float = DEFAULT_WINDOW, strong_counting: bool = True,
                  prec: int = 256) -> LevelSchedule:
    """Greedy level schedule for the mass-distribution construction.

    Each ``n_l`` is the least ``n <= N_cap`` meeting the constraints of
    its level: ``alpha(n_1) > log 2`` for the first level; the growth
    condition against the windowed pressure ``P = P(s)``; the budget
    condition; and (unless ``strong_counting`` is off) a gap ensuring the
    halved counting bound. Monotone constraints are located by doubling
    then bisection, the growth condition by a forward scan; every choice
    is re-verified in ball arithmetic.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    Qc, Ac = as_cache(Q, BASE), as_cache(alpha, WEIGHT)
    N_hi = max(N_cap, 10)
    est = dimension_limsup(Qc, Ac, N_hi, window_fraction)
    if not 0 <= s < est.value:
        raise PreconditionUnmet(f"s = {s} must satisfy 0 <= s < dimension estimate {est.value:.6g}")
    P, _ = pressure_estimate(Qc, Ac, s, N_hi, window_fraction)
    if P <= 0:
        raise PreconditionUnmet(f"windowed pressure at s = {s} is {P:.6g}, not positive")
    logq = Qc.float_prefix(N_cap)
    a = Ac.float_prefix(N_cap)
    log2, logC = math.log(2), math.log(C)
    chosen: list[int] = []
    witnesses = []
    rejected = []
    n_arr = np.arange(1, N_cap + 1, dtype=np.float64)
    growth_ok = (1 - s) * logq - s * a >= 0.5 * P * n_arr

    for level in range(1, L + 1):
        start = chosen[-1] + 1 if chosen else 1
        spent = float(sum(a[m - 1] for m in chosen))

        def monotone_failure(n: int) -> str | None:
            if level == 1:
                return None if a[n - 1] > log2 else C_FIRST
            if 0.5 * P * n < (level + 1) * log2 + spent - logC:
                return C_BUDGET
            prev = chosen[-1]
            if strong_counting and logq[n - 1] - logq[prev - 1] - a[prev - 1] < 2 * log2:
                return C_STRONG
            return None

        if start > N_cap:
            raise ScheduleInfeasible(f"no room left below N_cap = {N_cap}", level, C_GROWTH)
        # doubling, then bisection, for the least n passing the monotone constraints
        bad = monotone_failure(start)
        if bad is None:
            first = start
        else:
            rejected.append((level, start, bad))
            lo, step = start, 1
            while True:
                probe = min(start + step, N_cap)
                bad = monotone_failure(probe)
                if bad is None:
                    hi = probe
                    break
                rejected.append((level, probe, bad))
                if probe == N_cap:
                    raise ScheduleInfeasible(f"no n <= {N_cap} satisfies the constraint", level, bad)
                lo, step = probe, step * 2
            while hi - lo > 1:
                mid = (lo + hi) // 2
                bad = monotone_failure(mid)
                if bad is None:
                    hi = mid
                else:
                    rejected.append((level, mid, bad))
                    lo = mid
            first = hi
        n = first
        while True:
            ahead = np.flatnonzero(growth_ok[n - 1 :])
            if ahead.size == 0:
                raise ScheduleInfeasible(f"growth condition fails for every n in [{first}, {N_cap}]", level, C_GROWTH)
            if ahead[0] > 0:
                rejected.append((level, n, C_GROWTH))
            n = n + int(ahead[0])
            margins = _margins(Qc, Ac, s, P, C, level, n, chosen, prec)
            if not strong_counting:
                margins.pop(C_STRONG, None)
            if all(m >= 0 for m in margins.values()):
                break
            rejected.append((level, n, next(k for k, m in margins.items() if m < 0) + " (ball check)"))
            n += 1
            if n > N_cap:
                raise ScheduleInfeasible(f"no n <= {N_cap} passes the ball check", level, C_GROWTH)
        chosen.append(n)
        witnesses.append(LevelWitness(level, n, margins))
    return LevelSchedule(float(s), tuple(chosen), float(C), float(P), tuple(witnesses), tuple(rejected))


# --- cover tree -----------------------------------------------------------------------


@dataclass(frozen=True)
class TreeLevel:
    """One level of the tree: the kept arcs of ``S_l``.

    Node centres are ``j / Q`` with ``j = parent * multiplier + k`` for
    ``|k| <= half_width`` (level 1 keeps every ``j``). ``child_count`` is
    the number of children of each node (``None`` at the deepest level).
    """

    level: int
    n: int
    Q: int
    log_radius: LogReal
    multiplier: int
    half_width: int | None
    count: int
    mass: Fraction
    child_count: int | None

    @property
    def alpha_n(self) -> arb:
        with ctx.workprec(self.log_radius.prec):
            return -self.log_radius.ball - arb(self.Q).log()


@dataclass
class CoverTree:
    schedule: LevelSchedule
    levels: list
    prec: int
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP
    alpha: CumulativeCache | None = field(default=None, repr=False)

    @property
    def depth(self) -> int:
        return len(self.levels)

    def level(self, l: int) -> TreeLevel:
        return self.levels[l - 1]

    def radius(self, l: int, prec: int | None = None) -> arb:
        lv = self.level(l)
        with ctx.workprec(prec or self.prec):
            return lv.log_radius.ball.exp()

    def iter_nodes(self, l: int):
        """Centre indices of level ``l`` in parent-major order (needs count <= cap)."""
        lv = self.level(l)
        if lv.count > self.enumeration_cap:
            raise CapExceeded(f"level {l} has {lv.count} nodes, above the enumeration cap {self.enumeration_cap}")
        if l == 1:
            yield from range(lv.Q)
            return
        h = lv.half_width
        for parent in self.iter_nodes(l - 1):
            base = parent * lv.multiplier
            for k in range(-h, h + 1):
                yield (base + k) % lv.Q

    def node_by_rank(self, l: int, rank: int) -> int:
        """Centre index of the ``rank``-th node (parent-major order) without enumeration."""
        lv = self.level(l)
        if not 0 <= rank < lv.count:
            raise IndexError(rank)
        if l == 1:
            return rank
        width = 2 * lv.half_width + 1
        parent = self.node_by_rank(l - 1, rank // width)
        return (parent * lv.multiplier + rank % width - lv.half_width) % lv.Q

    def parent_of(self, l: int, j: int) -> int:
        """Index of the level ``l-1`` node containing node ``j`` of level ``l``."""
        lv = self.level(l)
        return round(Fraction(j, lv.multiplier)) % self.level(l - 1).Q

    def sample_ranks(self, l: int, k: int = SAMPLED_NODES, seed: int = 0) -> list:
        """All ranks when the level is small, else ends, wrap-around ranks and a seeded sample."""
        count = self.level(l).count
        if count <= CHECK_ALL_NODES_UP_TO:
            return list(range(count))
        rng = random.Random(f"ranks:{seed}:{l}")
        ranks = {0, 1, count - 1, count - 2, count // 2}
        while len(ranks) < k:
            ranks.add(rng.randrange(count))
        return sorted(ranks)

    def contains(self, l: int, parent: int, child: int, prec: int | None = None) -> bool:
        """Is arc ``child`` of level ``l+1`` inside arc ``parent`` of level ``l``? (circle-aware)"""
        up, lo_ = self.level(l), self.level(l + 1)
        offset = Fraction(child, lo_.Q) - Fraction(parent, up.Q)
        offset -= round(offset)
        dist = abs(offset)

        def decide(p):
            slack = (self.radius(l, p) - self.radius(l + 1, p)) - to_arb(dist, p)
            if slack >= 0:
                return True
            if slack < 0:
                return False
            raise _Undecided

        return _with_escalation(decide, prec or self.prec)


def _schedule_of(schedule) -> LevelSchedule:
    return schedule if isinstance(schedule, LevelSchedule) else LevelSchedule.from_levels(schedule)


def build_cover(Q, alpha, schedule, enumeration_cap: int = DEFAULT_ENUMERATION_CAP,
                prec: int | None = None) -> CoverTree:
    """Build the nested families ``R_1 ⊇ R_2 ⊇ ...`` with uniform masses.

    ``schedule`` is a :class:`LevelSchedule` or a plain list of levels.
    Needs every ``Q_{n_l}`` exactly. Each child offset bound ``h`` is the
    exact ``floor((r_l - r_{l+1}) Q_{n_{l+1}})``, decided in ball
    arithmetic with escalating precision.
    """
    sched = _schedule_of(schedule)
    Qc, Ac = as_cache(Q, BASE), as_cache(alpha, WEIGHT)
    Qs = [Qc.partial_product(n) for n in sched.levels]
    prec = prec or (Qs[-1].bit_length() + 128)
    prec = max(prec, 128)
    Ap = Ac.at_precision(prec)
    with ctx.workprec(prec):
        a1 = Ap.alpha_partial_sum(sched.levels[0]).ball
        if not a1 > arb(2).log():
            raise ScheduleInfeasible("the first level's arcs are not disjoint", 1, C_FIRST)
    log_radii = []
    for n, Qn in zip(sched.levels, Qs):
        with ctx.workprec(prec):
            log_radii.append(LogReal(-Ap.alpha_partial_sum(n).ball - arb(Qn).log(), prec))

    def radius(i, p):
        with ctx.workprec(p):
            return (-Ac.at_precision(p).alpha_partial_sum(sched.levels[i]).ball).exp() / Qs[i]

    half_widths = [None]
    for i in range(1, len(Qs)):
        def h_of(p, i=i):
            return _floor_int((radius(i - 1, p) - radius(i, p)) * Qs[i])

        h = _with_escalation(h_of, prec)
        if h < 0:
            raise ScheduleInfeasible("child arcs do not fit inside their parents", i + 1, "nesting")
        half_widths.append(h)

    levels = []
    count = Qs[0]
    for i, (n, Qn) in enumerate(zip(sched.levels, Qs)):
        if i > 0:
            count *= 2 * half_widths[i] + 1
        child = 2 * half_widths[i + 1] + 1 if i + 1 < len(Qs) else None
        levels.append(
            TreeLevel(
                level=i + 1,
                n=n,
                Q=Qn,
                log_radius=log_radii[i],
                multiplier=Qn // Qs[i - 1] if i else Qn,
                half_width=half_widths[i],
                count=count,
                mass=Fraction(1, count),
                child_count=child,
            )
        )
    return CoverTree(sched, levels, prec, enumeration_cap, Ac)


# --- tree checks -------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckReport:
    name: str
    ok: bool
    levels: list
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"check": self.name, "ok": self.ok, "levels": self.levels, "notes": self.notes}


def _count_children_directly(tree: CoverTree, l: int, parent: int) -> int:
    """Children of ``parent`` by testing containment, independently of ``half_width``.

    Small families are scanned in full; large ones by checking that the
    contained set is the run ``|k| <= h`` (both ends in, both neighbours out).
    """
    lv = tree.level(l + 1)
    base = parent * lv.multiplier
    h = lv.half_width
    if 2 * h + 1 <= BRUTE_FORCE_CHILDREN_UP_TO:
        reach = h + 2
        return sum(tree.contains(l, parent, (base + k) % lv.Q) for k in range(-reach, reach + 1))
    inside = all(tree.contains(l, parent, (base + k) % lv.Q) for k in (-h, h, 0))
    outside = not any(tree.contains(l, parent, (base + k) % lv.Q) for k in (-h - 1, h + 1))
    return 2 * h + 1 if inside and outside else -1


def mass_conservation_check(tree: CoverTree) -> CheckReport:
    """Masses sum to 1 on every level and follow ``m_{l+1} = m_l / #children`` exactly."""
    rows = []
    ok = True
    for lv in tree.levels:
        total = lv.mass * lv.count
        row = {"level": lv.level, "nodes": lv.count, "mass": str(lv.mass), "total": str(total)}
        if lv.count <= CHECK_ALL_NODES_UP_TO:
            row["enumerated_total"] = str(sum((lv.mass for _ in tree.iter_nodes(lv.level)), Fraction(0)))
            ok &= row["enumerated_total"] == "1"
        if lv.level > 1:
            parent = tree.level(lv.level - 1)
            row["recursion_ok"] = lv.mass == parent.mass / parent.child_count
            ok &= row["recursion_ok"]
        ok &= total == 1
        rows.append(row)
    return CheckReport("mass_conservation", bool(ok), rows)


def nesting_check(tree: CoverTree) -> CheckReport:
    """Every (checked) node lies inside the node its index says is its parent."""
    rows = []
    ok = True
    for l in range(2, tree.depth + 1):
        ranks = tree.sample_ranks(l)
        bad = 0
        for rank in ranks:
            j = tree.node_by_rank(l, rank)
            parent = tree.node_by_rank(l - 1, rank // (2 * tree.level(l).half_width + 1))
            if not tree.contains(l - 1, parent, j):
                bad += 1
        rows.append({"level": l, "nodes_checked": len(ranks), "exhaustive": len(ranks) == tree.level(l).count,
                     "violations": bad})
        ok &= bad == 0
    return CheckReport("nesting", bool(ok), rows)


def counting_inequality_check(tree: CoverTree) -> CheckReport:
    """Child counts against the counting inequality.

    ``weak`` is the unconditional bound ``#children >= |Delta| Q_{n_{l+1}} - 2``
    (a failure means a bug); ``ratio_weak`` is the looser
    ``(Q_{n_{l+1}}/Q_{n_l}) e^{-alpha(n_l)} - 2``; ``strong`` is the halved form
    ``>= (1/2)(Q_{n_{l+1}}/Q_{n_l}) e^{-alpha(n_l)}``, reported only. Because
    that form measures the arc by its half-length it always holds;
    ``strong_full_length`` halves ``|Delta| Q_{n_{l+1}}`` instead and does fail
    when consecutive levels are close.
    """
    rows = []
    notes = []
    weak_ok = True
    for l in range(1, tree.depth):
        up, down = tree.level(l), tree.level(l + 1)
        with ctx.workprec(tree.prec):
            r = tree.radius(l)
            ratio_e = arb(down.multiplier) * (-up.alpha_n).exp()
            weak = 2 * r * down.Q - 2
            ratio_weak = ratio_e - 2
            strong = ratio_e / 2
            strong_full = r * down.Q
            count = arb(up.child_count)
            row = {
                "level": l,
                "child_count": up.child_count,
                "weak_bound": float(weak.mid()),
                "ratio_weak_bound": float(ratio_weak.mid()),
                "strong_bound": float(strong.mid()),
                "weak_ok": bool(count >= weak),
                "ratio_weak_ok": bool(count >= ratio_weak),
                "strong_ok": bool(count >= strong),
                "strong_full_length_bound": float(strong_full.mid()),
                "strong_full_length_ok": bool(count >= strong_full),
            }
        ranks = tree.sample_ranks(l, k=16)
        direct = {_count_children_directly(tree, l, tree.node_by_rank(l, rank)) for rank in ranks}
        row["nodes_checked"] = len(ranks)
        row["exhaustive"] = len(ranks) == up.count
        row["direct_counts_agree"] = direct == {up.child_count}
        if not row["strong_ok"]:
            notes.append(f"strong counting bound fails at level {l}: n_{l + 1} = {down.n} is not far enough from n_{l} = {up.n}")
        if not row["strong_full_length_ok"]:
            notes.append(f"halved full-length bound fails at level {l}: {up.child_count} children < "
                         f"{row['strong_full_length_bound']:.6g}")
        weak_ok &= row["weak_ok"] and row["ratio_weak_ok"] and row["direct_counts_agree"]
        rows.append(row)
    return CheckReport("counting_inequality", bool(weak_ok), rows, notes)


def strong_counting_holds(tree: CoverTree) -> list:
    """Levels (1-based, < depth) where the halved counting bound fails."""
    return [row["level"] for row in counting_inequality_check(tree).levels if not row["strong_ok"]]


def cylinder_estimate_check(tree: CoverTree) -> CheckReport:
    """``m(Delta) <= 2^{l-1} exp(alpha(n_1)+...+alpha(n_{l-1})) / Q_{n_l}`` on every level.

    All nodes of a level carry the same mass, so one ball comparison per
    level covers every node. Skipped when the halved counting bound
    fails somewhere, since the estimate is derived from it.
    """
    failing = strong_counting_holds(tree)
    if failing:
        return CheckReport("cylinder_estimate", False, [],
                           [f"skipped: strong counting bound fails at level(s) {failing}"])
    rows = []
    ok = True
    for lv in tree.levels:
        def compare(p, lv=lv):
            # count * 2^{l-1} * exp(spent) >= Q, exact when nothing is spent
            Ap = tree.alpha.at_precision(p)
            spent = sum((Ap.alpha_partial_sum(tree.level(i).n).ball for i in range(1, lv.level)), arb(0))
            lhs = arb(lv.count) * arb(2) ** (lv.level - 1) * spent.exp()
            rhs = arb(lv.Q)
            if lhs >= rhs:
                return True, lhs.log() - rhs.log()
            if lhs < rhs:
                return False, lhs.log() - rhs.log()
            raise _Undecided

        holds, slack = _with_escalation(compare, tree.prec)
        rows.append({"level": lv.level, "nodes": lv.count, "log_slack": float(slack.mid()), "ok": holds})
        ok &= holds
    return CheckReport("cylinder_estimate", bool(ok), rows)


# --- Frostman ball bound -------------------------------------------------------------------


@dataclass(frozen=True)
class FrostmanReport:
    s: float
    C_observed: float
    log_C_observed: float
    worst: dict
    evaluations: int
    cover_bound_failures: list

    def as_dict(self) -> dict:
        return {
            "s": self.s,
            "C_observed": self.C_observed,
            "log_C_observed": self.log_C_observed,
            "worst": self.worst,
            "evaluations": self.evaluations,
            "cover_bound_failures": self.cover_bound_failures,
        }


def _count_in_ball(tree: CoverTree, x: Fraction, log_r: arb, target: int, p: int) -> int:
    """Number of level-``target`` nodes whose arcs meet ``[x - r, x + r]``.

    Works on the real line around ``x``: indices are not reduced mod Q,
    which is safe because the ball is narrower than one level-1 cell.
    """
    r = log_r.exp()
    x_ = to_arb(x, p)
    lv1 = tree.level(1)
    reach = r + tree.radius(1, p)
    lo = _ceil_int((x_ - reach) * lv1.Q)
    hi = _floor_int((x_ + reach) * lv1.Q)
    nodes = list(range(lo, hi + 1))
    for l in range(2, target + 1):
        lv = tree.level(l)
        reach = r + tree.radius(l, p)
        lo_ = (x_ - reach) * lv.Q
        hi_ = (x_ + reach) * lv.Q
        nxt_count = 0
        nxt = []
        for j in nodes:
            base = j * lv.multiplier
            k_lo = max(-lv.half_width, _ceil_int(lo_ - base))
            k_hi = min(lv.half_width, _floor_int(hi_ - base))
            if k_hi < k_lo:
                continue
            if l == target:
                nxt_count += k_hi - k_lo + 1
            else:
                nxt.extend(range(base + k_lo, base + k_hi + 1))
        if l == target:
            return nxt_count
        nodes = nxt
    return len(nodes)


def ball_mass(tree: CoverTree, x, log_r=None, radius_level: int | None = None) -> tuple[Fraction, int]:
    """``m(B(x, r))`` and the level whose nodes were summed.

    The level is ``min(l + 1, L)`` for the largest ``l`` with ``r_l >= r``;
    for ``r > r_1`` the level-1 nodes are used, and ``r >= 1/2`` gives 1.
    Pass ``radius_level=l`` instead of ``log_r`` for ``r = r_l`` exactly.
    """
    if (log_r is None) == (radius_level is None):
        raise ValueError("give exactly one of log_r and radius_level")
    x = Fraction(x) - math.floor(Fraction(x))
    L = tree.depth

    def evaluate(pp):
        if radius_level is not None:
            lr = tree.level(radius_level).log_radius.ball
            level = radius_level
        else:
            lr = to_arb(log_r, pp) if not isinstance(log_r, arb) else log_r
            if lr >= arb(fmpq(1, 2)).log():
                return 1, 0
            radii = [tree.level(l).log_radius.ball for l in range(1, L + 1)]
            if any(not (b >= lr or b < lr) for b in radii):
                raise _Undecided
            level = max((l for l in range(1, L + 1) if radii[l - 1] >= lr), default=0)
        target = min(level + 1, L) if level else 1
        count = _count_in_ball(tree, x, lr, target, pp)
        return min(count, tree.level(target).count), target

    count, target = _with_escalation(evaluate, tree.prec + 64)
    if target == 0:
        return Fraction(1), 0
    return tree.level(target).mass * count, target


def frostman_check(tree: CoverTree, s: float | None = None, sample_count: int = 64,
                   radii_per_sample: int = 32, seed: int = 0) -> FrostmanReport:
    """Largest observed ``m(B(x, r)) / r^s``.

    Centres ``x`` are deepest-level node centres drawn digit by digit from a
    seeded generator (so trees sharing a prefix of levels share a prefix of
    draws). Radii are log-uniform in ``(r_L, r_1)`` plus a point just below
    each ``r_l``, where the ratio peaks within a band. For a radius ``r`` the
    level ``l`` is the largest with ``r_l >= r``, and ``m(B(x, r))`` is the
    mass of the level ``min(l + 1, L)`` nodes meeting the ball.
    """
    s = tree.schedule.s if s is None else s
    if s is None or math.isnan(s):
        raise ValueError("s is required for a schedule without one")
    L = tree.depth
    if L < 2:
        raise ValueError("the Frostman check needs at least two levels")
    p = tree.prec + 64
    with ctx.workprec(p):
        log_r = [lv.log_radius.ball for lv in tree.levels]
        top, bottom = float(log_r[0].mid()), float(log_r[-1].mid())
        s_ = arb(s)
    best = None
    evaluations = 0
    failures = []
    for i in range(sample_count):
        rng = random.Random(f"frostman:{seed}:{i}")
        j = rng.randrange(tree.level(1).Q)
        for l in range(2, L + 1):
            lv = tree.level(l)
            j = (j * lv.multiplier + rng.randrange(-lv.half_width, lv.half_width + 1)) % lv.Q
        x = Fraction(j, tree.level(L).Q)
        rr = random.Random(f"radii:{seed}:{i}")
        with ctx.workprec(p):
            radii = [arb(rr.uniform(bottom, top)) for _ in range(radii_per_sample)]
            radii = [lr for lr in radii if lr < log_r[0] and lr > log_r[-1]]
            radii += [log_r[l] - arb(2) ** -30 for l in range(L - 1)]
        for lr in radii:
            def evaluate(pp, lr=lr):
                level = max(l for l in range(1, L + 1) if log_r[l - 1] >= lr)
                if not all((log_r[l - 1] >= lr) or (log_r[l - 1] < lr) for l in range(1, L + 1)):
                    raise _Undecided
                target = min(level + 1, L)
                count = _count_in_ball(tree, x, lr, target, pp)
                return level, target, count

            level, target, count = _with_escalation(evaluate, p)
            evaluations += 1
            with ctx.workprec(p):
                mass = tree.level(target).mass
                log_ratio = (arb(fmpq(mass.numerator, mass.denominator)) * count).log() - s_ * lr
                rq = (lr.exp() * tree.level(target).Q)
                if not (rq >= 2) or not (arb(count) <= 2 * rq):
                    failures.append({"x": str(x), "log_r": float(lr.mid()), "level": level,
                                     "count": count, "r_times_Q": float(rq.mid())})
            value = float(log_ratio.mid())
            if best is None or value > best[0]:
                best = (value, {"x": str(x), "log_r": float(lr.mid()), "level": level, "count": count,
                                "cover_level": target, "log_mass": math.log(count) - math.log(tree.level(target).count)})
    return FrostmanReport(float(s), math.exp(best[0]), best[0], best[1], evaluations, failures)


# --- export --------------------------------------------------------------------------------


def export_tree(tree: CoverTree, stream, max_nodes: int | None = None) -> int:
    """Write the versioned text dump; returns the number of node lines.

    Header lines start with ``#``; one ``level`` line per level, then one
    ``node`` line per node: level, centre index, centre ``j/Q``, left and
    right endpoints (decimal, 30 significant digits), exact mass, child
    count (``-`` at the deepest level).
    """
    lines = 0
    stream.write(f"# cantor-targets cover-tree v{FORMAT_VERSION}\n")
    stream.write(f"# s={tree.schedule.s!r} C={tree.schedule.C!r} levels={','.join(map(str, tree.schedule.levels))}\n")
    stream.write("# level <l> <n_l> <Q_{n_l}> <log_radius> <half_width> <child_count> <node_count> <mass>\n")
    stream.write("# node <l> <j> <j/Q> <left> <right> <mass> <child_count>\n")
    for lv in tree.levels:
        stream.write(
            f"level {lv.level} {lv.n} {lv.Q} {lv.log_radius.to_str(30)} "
            f"{'-' if lv.half_width is None else lv.half_width} "
            f"{'-' if lv.child_count is None else lv.child_count} {lv.count} {lv.mass}\n"
        )
    for lv in tree.levels:
        with ctx.workprec(tree.prec):
            r = tree.radius(lv.level)
            for j in tree.iter_nodes(lv.level):
                if max_nodes is not None and lines >= max_nodes:
                    return lines
                c = arb(fmpq(j, lv.Q))
                left, right = (c - r).mid().str(30, radius=False), (c + r).mid().str(30, radius=False)
                centre = Fraction(j, lv.Q)
                stream.write(
                    f"node {lv.level} {j} {centre.numerator}/{centre.denominator} {left} {right} {lv.mass} "
                    f"{'-' if lv.child_count is None else lv.child_count}\n"
                )
                lines += 1
    return lines


# --- upper bound ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HausdorffSum:
    n: int
    t: float
    direct: LogReal | None
    closed: LogReal
    relative_error: float | None

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "t": self.t,
            "direct": None if self.direct is None else self.direct.to_str(40),
            "closed": self.closed.to_str(40),
            "relative_error": self.relative_error,
        }


def _pairwise_sum(terms: list) -> arb:
    while len(terms) > 1:
        nxt = [terms[i] + terms[i + 1] for i in range(0, len(terms) - 1, 2)]
        if len(terms) % 2:
            nxt.append(terms[-1])
        terms = nxt
    return terms[0]


def hausdorff_sum(Q, alpha, t, n: int, prec: int = 128,
                  enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> HausdorffSum:
    """``sum_j |Delta_{n,j}|^t`` summed arc by arc, and the closed form ``2^t Q_n^{1-t} e^{-t alpha(n)}``.

    The direct route measures each arc from ``e^{-alpha(n)}`` and the exact
    ``Q_n``; the closed form uses the cached ``log Q_n``. The direct sum is
    skipped (``None``) when ``Q_n`` is capped or exceeds ``enumeration_cap``.
    """
    if not 0 <= float(t) <= 1:
        raise ValueError("t must lie in [0, 1]")
    Qc, Ac = as_cache(Q, BASE), as_cache(alpha, WEIGHT)
    Qp, Ap = Qc.at_precision(prec), Ac.at_precision(prec)
    with ctx.workprec(prec):
        t_ = to_arb(Fraction(t) if not isinstance(t, arb) else t, prec)
        a = Ap.alpha_partial_sum(n).ball
        closed = (t_ * arb(2).log() + (1 - t_) * Qp.log_partial_product(n).ball - t_ * a).exp()
    direct = None
    rel = None
    try:
        Qn = Qc.partial_product(n)
    except CapExceeded:
        Qn = None
    if Qn is not None and Qn <= enumeration_cap:
        with ctx.workprec(prec):
            e_alpha = (-a).exp()
            terms = []
            for j in range(Qn):
                # arc j/Q_n +/- e^{-alpha(n)}/Q_n, clipped to the whole circle
                length = 2 * e_alpha / Qn
                if length > 1:
                    length = arb(1)
                terms.append(length ** t_ if t_ != 0 else arb(1))
            total = _pairwise_sum(terms)
            direct = LogReal(total, prec)
            rel = float(abs(total.mid() - closed.mid()) / closed.mid())
    return HausdorffSum(n, float(t), direct, LogReal(closed, prec), rel)


@dataclass(frozen=True)
class SeriesReport:
    t: float
    pressure: float
    window: tuple
    ok: bool
    worst_margin: float
    tail_log_sums: list
    tail_log_bounds: list

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def upper_bound_series_check(Q, alpha, t: float, N_hi: int = 1000,
                             window_fraction: float = DEFAULT_WINDOW) -> SeriesReport:
    """``sum_j |Delta_{n,j}|^t <= 2^t exp(P(t) n / 2)`` on the tail window, and the tail sums.

    Needs a negative windowed pressure at ``t``. Tail sums
    ``sum_{n=N}^{N_hi}`` are reported in log form at several ``N`` next to the
    geometric bound ``2^t e^{P N/2} / (1 - e^{P/2})``.
    """
    Qc, Ac = as_cache(Q, BASE), as_cache(alpha, WEIGHT)
    P, _ = pressure_estimate(Qc, Ac, t, N_hi, window_fraction)
    if P >= 0:
        raise PreconditionUnmet(f"windowed pressure at t = {t} is {P:.6g} >= 0; t must exceed the dimension")
    lo, hi = tail_window(N_hi, window_fraction)
    logq, a = Qc.float_prefix(hi), Ac.float_prefix(hi)
    n = np.arange(lo, hi + 1, dtype=np.float64)
    log_terms = t * math.log(2) + (1 - t) * logq[lo - 1 :] - t * a[lo - 1 :]
    log_bound = t * math.log(2) + 0.5 * P * n
    margin = log_bound - log_terms
    ok = bool((margin >= -1e-9 * np.maximum(1.0, np.abs(log_bound))).all())
    starts = sorted({lo + (hi - lo) * k // 4 for k in range(4)})
    sums, bounds = [], []
    for N in starts:
        chunk = log_terms[N - lo :]
        m = chunk.max()
        sums.append(float(m + math.log(np.exp(chunk - m).sum())))
        bounds.append(float(t * math.log(2) + 0.5 * P * N - math.log1p(-math.exp(0.5 * P))))
    ok = ok and all(s <= b + 1e-9 * max(1.0, abs(b)) for s, b in zip(sums, bounds))
    ok = ok and all(x > y for x, y in zip(sums, sums[1:]))
    return SeriesReport(float(t), float(P), (lo, hi), ok, float(margin.min()), sums, bounds)
