"""Improper distribution learning under KL divergence.

Candidates come from a net (see :mod:`qgen.gates`).  Each candidate is
*perturbed* so that every next-symbol conditional lies in ``[eps1, 1 - eps1]``;
the learner returns the perturbed candidate of least empirical log-loss.

Evaluators expose a prefix cursor: ``cursor()`` gives the root, a cursor's
``probs()`` returns the pair of next-symbol conditionals and ``advance(b)``
moves to the child prefix.  Perturbation is defined entirely on top of it.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .core import (
    ZERO_MASS,
    OutputDistribution,
    QuantumGenerator,
    bits_to_index,
    exact_distribution,
    sequence_probability,
)
from .errors import (
    BadClamp,
    DimensionMismatch,
    EmptyNet,
    EmptySamples,
    InfiniteDivergence,
    QGenError,
    TooLarge,
    Underflow,
)
from .gates import NetEntry

TABLE_MAX_N = 20
TIE_TOL = 1e-12


class Evaluator(ABC):
    """A probability assignment to strings of a fixed length ``n``."""

    n: int

    @abstractmethod
    def prob(self, x: str) -> float: ...

    @abstractmethod
    def cursor(self): ...

    def _check(self, x: str) -> None:
        if len(x) != self.n:
            raise DimensionMismatch(f"string of length {len(x)} for a length-{self.n} evaluator")

    def table(self) -> OutputDistribution:
        """Full table via one pass over the prefix tree."""
        if self.n > TABLE_MAX_N:
            raise TooLarge(f"refusing to tabulate 2^{self.n} strings")
        probs = np.zeros(1 << self.n)

        def walk(cur, depth, index, mass):
            if depth == self.n:
                probs[index] = mass
                return
            q0, q1 = cur.probs()
            for b, q in ((0, q0), (1, q1)):
                if q > 0.0:
                    walk(cur.advance(b), depth + 1, 2 * index + b, mass * q)

        walk(self.cursor(), 0, 0, 1.0)
        return OutputDistribution(self.n, probs)


class _TableCursor:
    __slots__ = ("ev", "level", "prefix")

    def __init__(self, ev: "TableEvaluator", level: int, prefix: int):
        self.ev, self.level, self.prefix = ev, level, prefix

    def probs(self) -> tuple[float, float]:
        masses = self.ev.prefix_masses[self.level + 1]
        m0, m1 = masses[2 * self.prefix], masses[2 * self.prefix + 1]
        total = m0 + m1
        if total <= 0.0:
            raise QGenError("conditional on a zero-mass prefix")
        return float(m0 / total), float(m1 / total)

    def advance(self, b: int) -> "_TableCursor":
        return _TableCursor(self.ev, self.level + 1, 2 * self.prefix + b)


class TableEvaluator(Evaluator):
    def __init__(self, dist: OutputDistribution):
        self.dist = dist
        self.n = dist.length

    @cached_property
    def prefix_masses(self) -> list[np.ndarray]:
        return [self.dist.prefix_masses(level) for level in range(self.n + 1)]

    def prob(self, x: str) -> float:
        return self.dist[x]

    def cursor(self) -> _TableCursor:
        return _TableCursor(self, 0, 0)

    def table(self) -> OutputDistribution:
        return self.dist


class _StateCursor:
    __slots__ = ("qg", "state", "_branches")

    def __init__(self, qg: QuantumGenerator, state: np.ndarray):
        self.qg, self.state = qg, state
        w = qg.evolve(state)
        self._branches = [np.where(mask, w, 0) for mask in qg.masks]

    def probs(self) -> tuple[float, float]:
        p0, p1 = (float(np.vdot(v, v).real) for v in self._branches)
        total = p0 + p1
        return p0 / total, p1 / total

    def advance(self, b: int) -> "_StateCursor":
        v = self._branches[b]
        return _StateCursor(self.qg, v / np.linalg.norm(v))


class GeneratorEvaluator(Evaluator):
    """Length-n output law of a generator, evaluated on demand."""

    def __init__(self, qg: QuantumGenerator, n: int):
        self.qg = qg
        self.n = n

    def prob(self, x: str) -> float:
        self._check(x)
        return sequence_probability(self.qg, x)

    def cursor(self) -> _StateCursor:
        return _StateCursor(self.qg, self.qg.initial)

    def table(self) -> OutputDistribution:
        if self.n > TABLE_MAX_N:
            raise TooLarge(f"refusing to tabulate 2^{self.n} strings")
        return exact_distribution(self.qg, self.n)


def _clamp(q: float, eps1: float) -> float:
    return min(max(q, eps1), 1.0 - eps1)


class _PerturbedCursor:
    __slots__ = ("eps1", "base")

    def __init__(self, eps1: float, base):
        self.eps1, self.base = eps1, base

    def probs(self) -> tuple[float, float]:
        q0, q1 = self.base.probs()
        return _clamp(q0, self.eps1), _clamp(q1, self.eps1)

    def advance(self, b: int) -> "_PerturbedCursor":
        q = self.base.probs()[b]
        # A symbol impossible under the base is corrected to its negation.
        return _PerturbedCursor(self.eps1, self.base.advance(b if q > ZERO_MASS else 1 - b))


class PerturbedEvaluator(Evaluator):
    """``base`` with every next-symbol conditional clamped into [eps1, 1 - eps1].

    After a symbol that is impossible under ``base``, conditionals continue
    from the prefix with that symbol flipped, so every string ends up with
    probability at least ``eps1 ** n``.
    """

    def __init__(self, base: Evaluator, eps1: float):
        if not 0.0 < eps1 < 0.5:
            raise BadClamp(f"eps1 must lie in (0, 1/2), got {eps1}")
        self.base = base
        self.eps1 = eps1
        self.n = base.n

    def cursor(self) -> _PerturbedCursor:
        return _PerturbedCursor(self.eps1, self.base.cursor())

    def prob(self, x: str) -> float:
        self._check(x)
        cur = self.cursor()
        p = 1.0
        for c in x:
            b = int(c)
            p *= cur.probs()[b]
            cur = cur.advance(b)
        return p

    @cached_property
    def _table(self) -> OutputDistribution:
        return Evaluator.table(self)

    def table(self) -> OutputDistribution:
        return self._table


def perturb(p: Evaluator | OutputDistribution, eps1: float) -> PerturbedEvaluator:
    return PerturbedEvaluator(as_evaluator(p), eps1)


def as_evaluator(p: Evaluator | OutputDistribution) -> Evaluator:
    return TableEvaluator(p) if isinstance(p, OutputDistribution) else p


def _as_table(p: Evaluator | OutputDistribution) -> OutputDistribution:
    return p if isinstance(p, OutputDistribution) else p.table()


def kl_divergence(p: Evaluator | OutputDistribution, q: Evaluator | OutputDistribution, base: float = 2.0) -> float:
    """KL(P || Q) with 0 log(0/q) = 0; ``base`` 2 gives bits, ``math.e`` nats.

    ``p`` must be tabulable.  ``q`` is queried only on the support of ``p``.
    """
    pt = _as_table(p)
    n = pt.length
    qn = q.length if isinstance(q, OutputDistribution) else q.n
    if qn != n:
        raise DimensionMismatch("KL between laws on different lengths")
    support = np.flatnonzero(pt.probs)
    pv = pt.probs[support]
    if isinstance(q, OutputDistribution):
        qv = q.probs[support]
    elif isinstance(q, (TableEvaluator, PerturbedEvaluator)) and n <= TABLE_MAX_N:
        qv = q.table().probs[support]
    else:
        qv = np.array([q.prob(format(int(i), f"0{n}b")) for i in support])
    if (qv <= 0).any():
        raise InfiniteDivergence("Q vanishes on the support of P")
    return max(0.0, float(np.sum(pv * np.log(pv / qv))) / math.log(base))


def cross_entropy(p: Evaluator | OutputDistribution, q: Evaluator | OutputDistribution, base: float = 2.0) -> float:
    """E_P[log 1/Q]."""
    pt, qt = _as_table(p), _as_table(q)
    s = pt.probs > 0
    if (qt.probs[s] <= 0).any():
        raise InfiniteDivergence("Q vanishes on the support of P")
    return float(-np.sum(pt.probs[s] * np.log(qt.probs[s]))) / math.log(base)


@dataclass(frozen=True)
class SampleBoundParams:
    M: float
    eps: float
    delta: float
    lnF: float

    def __post_init__(self):
        if not (self.M > 0 and self.eps > 0 and 0 < self.delta <= 1 and self.lnF >= 0):
            raise ValueError(f"invalid sample-bound parameters {self}")
        if self.eps > self.M:
            raise ValueError(f"eps = {self.eps} exceeds the range bound M = {self.M}")


def sample_bound(p: SampleBoundParams) -> int:
    """Samples making every empirical mean of |F| [0, M]-valued variables eps-accurate w.p. 1 - delta."""
    m = (p.M / p.eps) ** 2 * (p.lnF + math.log(1.0 / p.delta))
    # Absorb last-ulp noise so exact integers are not rounded up.
    return max(1, math.ceil(m * (1 - 1e-12)))


def range_bound(n: int, eps0: float, base: float = 2.0) -> float:
    """Largest possible log-loss n * log(2(n+1)/eps0) of a perturbed candidate."""
    return n * math.log(2 * (n + 1) / eps0) / math.log(base)


def choose_clamps(eps_target: float, n: int) -> tuple[float, float]:
    """(eps1, eps2) with eps2 = (eps/(2(n+1)))^(2n) and eps1^n - eps2 = sqrt(eps2).

    eps2 is the l-infinity accuracy the net must reach; below double-precision
    resolution of probabilities near 1 it cannot be realized and
    :class:`Underflow` is raised.
    """
    if eps_target <= 0 or n < 1:
        raise ValueError("need eps_target > 0 and n >= 1")
    eps2 = (eps_target / (2 * (n + 1))) ** (2 * n)
    if eps2 < np.finfo(float).eps:
        raise Underflow(f"eps2 = {eps2:.3e} is below double-precision resolution")
    eps1 = (eps2 + math.sqrt(eps2)) ** (1.0 / n)
    if not eps1 < 0.5:
        raise BadClamp(f"eps_target = {eps_target} yields eps1 = {eps1:.4f} >= 1/2")
    return eps1, eps2


@dataclass(frozen=True)
class LearnResult:
    index: int
    evaluator: PerturbedEvaluator
    losses: np.ndarray = field(repr=False)
    entry: NetEntry | None = None

    def trace_csv(self) -> str:
        return "entry_index,loss\n" + "".join(f"{i},{float(loss)!r}\n" for i, loss in enumerate(self.losses))


def _candidate(c: NetEntry | Evaluator | OutputDistribution, n: int) -> Evaluator:
    if isinstance(c, NetEntry):
        return GeneratorEvaluator(c.generator(), n)
    ev = as_evaluator(c)
    if ev.n != n:
        raise DimensionMismatch(f"candidate of length {ev.n} for samples of length {n}")
    return ev


def empirical_log_loss(ev: Evaluator, strings: Sequence[str], counts: np.ndarray, base: float = 2.0) -> float:
    """(1/m) sum_i log 1/ev(x_i) given distinct strings and their multiplicities."""
    if ev.n <= TABLE_MAX_N and (1 << ev.n) <= 4 * len(strings):
        table = ev.table().probs
        p = np.array([table[bits_to_index(x)] for x in strings])
    else:
        p = np.array([ev.prob(x) for x in strings])
    with np.errstate(divide="ignore"):
        return float(np.sum(counts * -np.log(p)) / counts.sum()) / math.log(base)


def learn(
    samples: Sequence[str],
    net: Sequence[NetEntry | Evaluator | OutputDistribution],
    eps1: float,
    threads: int = 1,
    base: float = 2.0,
) -> LearnResult:
    """Return the perturbed candidate minimizing empirical log-loss.

    Ties go to the earliest candidate.
    """
    if len(samples) == 0:
        raise EmptySamples("no samples")
    if len(net) == 0:
        raise EmptyNet("no candidates")
    n = len(samples[0])
    strings, counts = np.unique(np.asarray(samples), return_counts=True)
    strings = [str(s) for s in strings]
    if any(len(s) != n for s in strings):
        raise DimensionMismatch("samples have mixed lengths")

    def score(c):
        return empirical_log_loss(PerturbedEvaluator(_candidate(c, n), eps1), strings, counts, base)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            losses = np.array(list(pool.map(score, net)))
    else:
        losses = np.array([score(c) for c in net])
    best = int(np.flatnonzero(losses <= losses.min() + TIE_TOL)[0])
    chosen = net[best]
    return LearnResult(
        index=best,
        evaluator=PerturbedEvaluator(_candidate(chosen, n), eps1),
        losses=losses,
        entry=chosen if isinstance(chosen, NetEntry) else None,
    )
