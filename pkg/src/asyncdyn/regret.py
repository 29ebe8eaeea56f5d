"""No-regret learning when players are only activated on an r-fair schedule.

A player that is not activated keeps playing its last distribution.  When
it is activated again it updates on the sum of the profit vectors it saw
while idle, so each idle stretch acts as one step of the classic setting
with profits in ``[0, r]``.

Distributions are stored as exact rationals (the binary value of the float
weights the learner produced), so every regret figure below is computed
without rounding.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .adapters import NormalFormGame
from .core import SpecError


_SCALE = 1 << 53


def _exact(ws) -> tuple:
    """Exact distribution from nonnegative float weights.

    Probabilities are rounded to multiples of 2^-53 with the largest entry
    absorbing the rounding, so denominators stay small and exact sums over
    long runs remain cheap.
    """
    z = float(sum(ws))
    q = [round(float(w) / z * _SCALE) for w in ws]
    top = max(range(len(q)), key=q.__getitem__)
    q[top] += _SCALE - sum(q)
    return tuple(Fraction(x, _SCALE) for x in q)


def _scaled(dist) -> list:
    """Numerators of a distribution over the common denominator 2^53."""
    out = []
    for x in dist:
        q, rem = divmod(_SCALE, x.denominator)
        if rem:
            raise SpecError("learner distributions must be multiples of 2^-53")
        out.append(x.numerator * q)
    return out


class MultiplicativeWeights:
    """Hedge with a fixed learning rate over ``m`` actions."""

    def __init__(self, m: int, eta: float, prior: Optional[Sequence] = None):
        if m < 1 or eta <= 0:
            raise SpecError("need m >= 1 and eta > 0")
        self.m, self.eta = m, eta
        # prior log-weights, in profit units
        self.cum = [Fraction(x) for x in prior] if prior is not None else [Fraction(0)] * m
        self.pending = [Fraction(0)] * m
        self._pend_int = None  # integer numerators over _pend_scale
        self._pend_scale = 1
        self._update()

    @classmethod
    def tuned(cls, m: int, horizon: int, prior=None) -> "MultiplicativeWeights":
        return cls(m, math.sqrt(math.log(m) / horizon) if m > 1 else 1.0, prior)

    def _update(self):
        top = max(self.cum)
        self._dist = _exact([math.exp(self.eta * float(c - top)) for c in self.cum])

    def distribution(self) -> tuple:
        return self._dist

    def observe(self, profits) -> None:
        self.pending = [a + b for a, b in zip(self.pending, profits)]

    def observe_scaled(self, nums, scale: int) -> None:
        """Same as ``observe([x / scale for x in nums])`` without building fractions."""
        if self._pend_int is None:
            self._pend_int, self._pend_scale = list(nums), scale
        elif scale == self._pend_scale:
            self._pend_int = [a + b for a, b in zip(self._pend_int, nums)]
        else:
            self.observe([Fraction(x, scale) for x in nums])

    def activate(self) -> None:
        if self._pend_int is not None:
            self.pending = [a + Fraction(b, self._pend_scale)
                            for a, b in zip(self.pending, self._pend_int)]
            self._pend_int = None
        self.cum = [a + b for a, b in zip(self.cum, self.pending)]
        self.pending = [Fraction(0)] * self.m
        self._update()


class FixedAction:
    def __init__(self, m: int, action: int):
        if not 0 <= action < m:
            raise SpecError("fixed action out of range")
        self.m = m
        self._dist = tuple(Fraction(int(j == action)) for j in range(m))

    def distribution(self) -> tuple:
        return self._dist

    def observe(self, profits) -> None:
        pass

    def observe_scaled(self, nums, scale: int) -> None:
        pass

    def activate(self) -> None:
        pass


def stationary_distribution(Q: np.ndarray) -> np.ndarray:
    """Row vector ``q`` with ``q Q = q`` for a row-stochastic ``Q``."""
    m = Q.shape[0]
    A = np.vstack([Q.T - np.eye(m), np.ones(m)])
    b = np.zeros(m + 1)
    b[-1] = 1.0
    q, *_ = np.linalg.lstsq(A, b, rcond=None)
    q = np.clip(q, 0.0, None)
    return q / q.sum()


class SwapRegretWrapper:
    """One external-regret learner per action; play the stationary
    distribution of their recommendations and charge learner ``j`` the
    profits scaled by the probability of action ``j``."""

    def __init__(self, m: int, horizon: int, priors: Optional[Sequence] = None):
        self.m = m
        priors = priors or [None] * m
        self.subs = [MultiplicativeWeights.tuned(m, horizon, priors[j]) for j in range(m)]
        self._recompute()

    def _recompute(self):
        Q = np.array([[float(p) for p in s.distribution()] for s in self.subs])
        self._dist = _exact(stationary_distribution(Q))

    def distribution(self) -> tuple:
        return self._dist

    def observe(self, profits) -> None:
        for j, sub in enumerate(self.subs):
            qj = self._dist[j]
            sub.observe([qj * p for p in profits])

    def observe_scaled(self, nums, scale: int) -> None:
        for qj, sub in zip(_scaled(self._dist), self.subs):
            sub.observe_scaled([qj * x for x in nums], scale * _SCALE)

    def activate(self) -> None:
        for sub in self.subs:
            sub.activate()
        self._recompute()


def _random_prior(rng, m, horizon):
    """Log-weights spread over ``[0, 1/eta]`` so the first mix is far from uniform."""
    span = 1 / math.sqrt(math.log(m) / horizon) if m > 1 else 1.0
    return [Fraction(rng.randrange(1000), 1000) * Fraction(span).limit_denominator(1000)
            for _ in range(m)]


def make_learner(kind: str, m: int, horizon: int, rng: Optional[random.Random] = None):
    """Learner by name; with ``rng`` the learner starts from a random prior."""
    if kind == "mw":
        return MultiplicativeWeights.tuned(m, horizon, rng and _random_prior(rng, m, horizon))
    if kind == "swap":
        priors = [_random_prior(rng, m, horizon) for _ in range(m)] if rng else None
        return SwapRegretWrapper(m, horizon, priors)
    if kind.startswith("fixed:"):
        return FixedAction(m, int(kind.split(":", 1)[1]) - 1)
    raise SpecError(f"unknown learner {kind!r}")


# ---------------------------------------------------------------------------
# histories and regret
# ---------------------------------------------------------------------------


class RegretHistory:
    """Per-step activation flag, played distribution and profit vector.

    Stored as integer numerators over two fixed denominators so that exact
    totals over long runs stay cheap; ``dists`` and ``profits`` give the
    rational values.
    """

    def __init__(self, m: int, dist_scale: int = _SCALE, profit_scale: int = 1):
        self.m = m
        self.dist_scale = dist_scale
        self.profit_scale = profit_scale
        self.activated = []
        self._d = []
        self._p = []

    def append_scaled(self, activated: bool, dnums, pnums) -> None:
        if len(dnums) != self.m or len(pnums) != self.m:
            raise SpecError("history entry has the wrong number of actions")
        self.activated.append(activated)
        self._d.append(tuple(dnums))
        self._p.append(tuple(pnums))

    @classmethod
    def from_fractions(cls, dists, profits, activated=None) -> "RegretHistory":
        dists = [[Fraction(x) for x in D] for D in dists]
        profits = [[Fraction(x) for x in P] for P in profits]
        ds = math.lcm(*(x.denominator for D in dists for x in D))
        ps = math.lcm(*(x.denominator for P in profits for x in P))
        h = cls(len(dists[0]), ds, ps)
        for t, (D, P) in enumerate(zip(dists, profits)):
            h.append_scaled(True if activated is None else activated[t],
                            [x.numerator * (ds // x.denominator) for x in D],
                            [x.numerator * (ps // x.denominator) for x in P])
        return h

    @property
    def horizon(self) -> int:
        return len(self._d)

    @property
    def dists(self) -> list:
        return [tuple(Fraction(x, self.dist_scale) for x in D) for D in self._d]

    @property
    def profits(self) -> list:
        return [tuple(Fraction(x, self.profit_scale) for x in P) for P in self._p]

    def frozen_while_idle(self) -> bool:
        return all(self.activated[t] or self._d[t] == self._d[t - 1]
                   for t in range(1, self.horizon))

    def _unit(self) -> int:
        return self.dist_scale * self.profit_scale

    def gain(self) -> Fraction:
        total = sum(sum(d * p for d, p in zip(D, P)) for D, P in zip(self._d, self._p))
        return Fraction(total, self._unit())

    def _pair_ints(self):
        M = [[0] * self.m for _ in range(self.m)]
        for D, P in zip(self._d, self._p):
            for a, da in enumerate(D):
                if da:
                    row = M[a]
                    for b, pb in enumerate(P):
                        row[b] += da * pb
        return M

    def pair_matrix(self):
        """``M[a][b] = sum_t D_t(a) p_t(b)``."""
        return [[Fraction(x, self._unit()) for x in row] for row in self._pair_ints()]


def history_from(dists, profits, activated=None) -> RegretHistory:
    return RegretHistory.from_fractions(dists, profits, activated)


def compute_regret(h: RegretHistory, notion: str = "external", pair=None) -> Fraction:
    """Exact regret of a history.

    ``notion`` is ``external``, ``swap`` or ``internal`` (with ``pair=(a, b)``
    replacing action ``a`` by ``b``).
    """
    if notion == "external":
        totals = [sum(P[j] for P in h._p) for j in range(h.m)]
        return Fraction(max(totals), h.profit_scale) - h.gain()
    M = h.pair_matrix()
    if notion == "internal":
        a, b = pair
        return M[a][b] - M[a][a]
    if notion == "swap":
        base = sum(M[a][a] for a in range(h.m))
        if h.m <= 6:
            best = max(sum(M[a][phi[a]] for a in range(h.m))
                       for phi in itertools.product(range(h.m), repeat=h.m))
        else:
            best = sum(max(M[a]) for a in range(h.m))
        return best - base
    raise SpecError(f"unknown regret notion {notion!r}")


def swap_regret_decomposed(h: RegretHistory) -> Fraction:
    M = h.pair_matrix()
    return sum(max(M[a]) - M[a][a] for a in range(h.m))


def mw_regret_bound(T: int, m: int, r: int) -> float:
    """``2 r sqrt(T ln m)``; Hedge with batched profits in ``[0, r]`` stays below it."""
    return 2 * r * math.sqrt(T * math.log(m))


# ---------------------------------------------------------------------------
# games
# ---------------------------------------------------------------------------


def correlated_eq_gap(dist: dict, game: NormalFormGame) -> Fraction:
    """Largest gain any player gets from a deviation map under the joint distribution."""
    total = sum(dist.values(), Fraction(0))
    if total != 1:
        raise SpecError("joint distribution must sum to 1")
    worst = None
    for i in range(game.n):
        gain = Fraction(0)
        for a in game.strategies[i]:
            best = Fraction(0)
            for b in game.strategies[i]:
                if b == a:
                    continue
                d = sum((pr * (game.utility(i, game.deviate(s, i, b)) - game.utility(i, s))
                         for s, pr in dist.items() if s[i] == a and pr), Fraction(0))
                best = max(best, d)
            gain += best
        worst = gain if worst is None else max(worst, gain)
    return worst


def _solve(A, b):
    """Exact Gaussian elimination; None if singular."""
    n = len(A)
    M = [list(row) + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def minimax_value(game: NormalFormGame) -> Fraction:
    """Value of a two-player zero-sum game for the row player.

    Enumerates square row/column supports, solves the equalising system
    exactly and keeps the best strategy that is a guarantee against every
    column.
    """
    if not game.is_zero_sum():
        raise SpecError("minimax_value needs a two-player zero-sum game")
    rows, cols = game.strategies
    if len(rows) > 8 or len(cols) > 8:
        raise SpecError("minimax_value supports at most 8 strategies per player")
    A = [[game.utility(0, (r, c)) for c in cols] for r in rows]
    best = None
    for k in range(1, min(len(rows), len(cols)) + 1):
        for R in itertools.combinations(range(len(rows)), k):
            for C in itertools.combinations(range(len(cols)), k):
                # unknowns x_R then v: sum_i x_i A[i][j] - v = 0 for j in C; sum x = 1
                mat = [[A[i][j] for i in R] + [Fraction(-1)] for j in C]
                mat.append([Fraction(1)] * k + [Fraction(0)])
                sol = _solve(mat, [Fraction(0)] * k + [Fraction(1)])
                if sol is None:
                    continue
                x = sol[:k]
                if any(xi < 0 for xi in x):
                    continue
                guarantee = min(sum(x[t] * A[i][j] for t, i in enumerate(R))
                                for j in range(len(cols)))
                if best is None or guarantee > best:
                    best = guarantee
    return best


# ---------------------------------------------------------------------------
# running learners in a game
# ---------------------------------------------------------------------------


@dataclass
class PlayerReport:
    gain: Fraction  # normalised profit units
    avg_utility: Fraction
    external: Fraction
    swap: Fraction
    internal: dict


@dataclass
class RegretReport:
    horizon: int
    players: list
    joint: dict
    ce_gap: Fraction


class _IntPayoffs:
    """Normalised utilities of one player as integers over a common denominator."""

    def __init__(self, game: NormalFormGame, i: int, lo: Fraction, span: Fraction):
        self.i = i
        self.others = [j for j in range(game.n) if j != i]
        sizes = [len(game.strategies[j]) for j in self.others]
        self.combos = list(itertools.product(*[range(k) for k in sizes]))
        norm = {}
        for a, sa in enumerate(game.strategies[i]):
            for combo in self.combos:
                prof = [None] * game.n
                prof[i] = sa
                for j, k in zip(self.others, combo):
                    prof[j] = game.strategies[j][k]
                norm[a, combo] = (game.utility(i, prof) - lo) / span
        self.scale = math.lcm(*(x.denominator for x in norm.values()))
        self.table = {key: x.numerator * (self.scale // x.denominator)
                      for key, x in norm.items()}
        self.m = len(game.strategies[i])

    def expected(self, dnums) -> list:
        """Profit numerators over ``scale * 2^(53 (n-1))`` against integer mixes."""
        weights = []
        for combo in self.combos:
            w = 1
            for j, k in zip(self.others, combo):
                w *= dnums[j][k]
                if not w:
                    break
            if w:
                weights.append((combo, w))
        return [sum(w * self.table[a, combo] for combo, w in weights) for a in range(self.m)]

    def pure(self, picks) -> list:
        combo = tuple(picks[j] for j in self.others)
        return [self.table[a, combo] for a in range(self.m)]


def run_learning(game: NormalFormGame, algorithms: Sequence, schedule, T: int,
                 seed: int = 0, feedback: str = "expected", random_start: bool = False):
    """Play ``T`` rounds; returns ``(histories, report)``.

    ``algorithms`` are learner objects or kinds accepted by ``make_learner``.
    With ``expected`` feedback every player sees the expected profit of
    each action against the others' current mixes and the empirical joint
    distribution is the average of the product mixes.  With ``sampled``
    feedback pure actions are drawn and the joint distribution counts them.
    Learner mixes must be multiples of 2^-53; all bookkeeping is exact.
    """
    if T < 1:
        raise SpecError("T must be at least 1")
    if feedback not in ("expected", "sampled"):
        raise SpecError(f"unknown feedback mode {feedback!r}")
    n = game.n
    rng = random.Random(seed)
    learners = [make_learner(a, len(game.strategies[i]), T, rng if random_start else None)
                if isinstance(a, str) else a
                for i, a in enumerate(algorithms)]
    if len(learners) != n:
        raise SpecError("one algorithm per player")
    ranges = [game.utility_range(i) for i in range(n)]
    spans = [(hi - lo) or Fraction(1) for lo, hi in ranges]
    pay = [_IntPayoffs(game, i, ranges[i][0], spans[i]) for i in range(n)]
    expected = feedback == "expected"
    pscale = [p.scale * (_SCALE ** (n - 1) if expected else 1) for p in pay]
    histories = [RegretHistory(p.m, _SCALE, ps) for p, ps in zip(pay, pscale)]
    all_combos = list(itertools.product(*[range(len(s)) for s in game.strategies]))
    joint = dict.fromkeys(all_combos, 0)
    it = iter(schedule)
    dnums = [_scaled(lr.distribution()) for lr in learners]
    for t in range(T):
        active = next(it)
        for i in active:
            learners[i].activate()
            dnums[i] = _scaled(learners[i].distribution())
        if expected:
            profits = [p.expected(dnums) for p in pay]
            for combo in all_combos:
                w = 1
                for j, k in enumerate(combo):
                    w *= dnums[j][k]
                    if not w:
                        break
                joint[combo] += w
        else:
            picks = []
            for j in range(n):
                u = rng.randrange(_SCALE)
                acc, pick = 0, len(dnums[j]) - 1
                for k, x in enumerate(dnums[j]):
                    acc += x
                    if u < acc:
                        pick = k
                        break
                picks.append(pick)
            picks = tuple(picks)
            joint[picks] += 1
            profits = [p.pure(picks) for p in pay]
        for i in range(n):
            histories[i].append_scaled(i in active, dnums[i], profits[i])
            learners[i].observe_scaled(profits[i], pscale[i])
    denom = T * (_SCALE ** n if expected else 1)
    joint = {tuple(game.strategies[j][k] for j, k in enumerate(combo)): Fraction(w, denom)
             for combo, w in joint.items() if w}
    players = []
    for i, h in enumerate(histories):
        gain = h.gain()
        m = h.m
        M = h.pair_matrix()
        players.append(PlayerReport(
            gain=gain,
            avg_utility=ranges[i][0] + spans[i] * gain / T,
            external=compute_regret(h, "external"),
            swap=sum(max(row) - row[a] for a, row in enumerate(M)),
            internal={(a, b): M[a][b] - M[a][a] for a in range(m) for b in range(m) if a != b},
        ))
    return histories, RegretReport(T, players, joint, correlated_eq_gap(joint, game))


REPORT_COLUMNS = ("seed", "player", "T", "ext_regret", "swap_regret", "ce_gap", "avg_gain")


def report_rows(seed: int, report: RegretReport):
    for i, p in enumerate(report.players):
        yield (seed, i + 1, report.horizon, f"{float(p.external):.6f}", f"{float(p.swap):.6f}",
               f"{float(report.ce_gap):.6f}", f"{float(p.avg_utility):.6f}")
