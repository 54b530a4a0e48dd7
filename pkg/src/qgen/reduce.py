"""From a distribution evaluator back to a parity predictor and the hidden set.

An evaluator E over {0,1}^(n+1) induces the predictor E'(x) = argmax_b E(x.b)
(ties to 0).  If KL(P_S || E) <= eps * (1 - H(eta)) bits, E' errs on at most an
eps fraction of inputs.  The module also carries the corrupted-evaluator
families used to exercise that implication.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import OutputDistribution, index_to_bits
from .errors import BadEta, InfiniteDivergence, QGenError, TooLarge
from .learn import TABLE_MAX_N, Evaluator, as_evaluator, kl_divergence, perturb
from .parity import ParitySpec, reference_noisy_parity

EXHAUSTIVE_MAX_N = 20


def binary_entropy(eta: float) -> float:
    if eta in (0.0, 1.0):
        return 0.0
    return -eta * math.log2(eta) - (1 - eta) * math.log2(1 - eta)


def kl_threshold(eps: float, eta: float) -> float:
    """KL budget eps * (1 - H(eta)) in bits."""
    if not 0.0 < eta < 0.5:
        raise BadEta(f"eta must lie in (0, 1/2), got {eta}")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return eps * (1.0 - binary_entropy(eta))


@dataclass(frozen=True)
class ReductionBudget:
    eps: float
    eta: float

    @property
    def threshold(self) -> float:
        return kl_threshold(self.eps, self.eta)


def parity_labels(n: int, S) -> np.ndarray:
    """f_S on every x in {0,1}^n, in table order."""
    x = np.arange(1 << n)
    f = np.zeros_like(x)
    for i in S:
        f ^= (x >> (n - i)) & 1
    return f


class ParityPredictor:
    """E'(x) = 1 iff E(x.1) > E(x.0)."""

    def __init__(self, evaluator: Evaluator | OutputDistribution):
        self.evaluator = as_evaluator(evaluator)
        self.n = self.evaluator.n - 1

    def __call__(self, x: str) -> int:
        return int(self.evaluator.prob(x + "1") > self.evaluator.prob(x + "0"))

    def table(self) -> np.ndarray:
        """Predictions for every x in table order."""
        if self.n + 1 > TABLE_MAX_N:
            raise TooLarge(f"refusing to tabulate 2^{self.n + 1} strings")
        p = self.evaluator.table().probs.reshape(-1, 2)
        return (p[:, 1] > p[:, 0]).astype(np.int64)


def predictor_from_evaluator(e: Evaluator | OutputDistribution) -> ParityPredictor:
    return ParityPredictor(e)


def _unit(n: int, i: int) -> str:
    return "".join("1" if j == i else "0" for j in range(1, n + 1))


def _xor(x: str, i: int) -> str:
    return x[: i - 1] + ("0" if x[i - 1] == "1" else "1") + x[i:]


def recover_set(
    pred: Callable[[str], int],
    n: int,
    mode: str = "exact",
    trials: int = 400,
    seed: int | None = None,
) -> frozenset[int]:
    """Recover S from a predictor of f_S.

    ``exact`` reads f_S(e_i) directly.  ``voting`` takes, for each i, the
    majority over random x of pred(x) xor pred(x xor e_i), which tolerates a
    small fraction of wrong predictions.
    """
    if mode == "exact":
        return frozenset(i for i in range(1, n + 1) if pred(_unit(n, i)) == 1)
    if mode != "voting":
        raise QGenError(f"unknown recovery mode {mode!r}")
    if seed is None:
        raise QGenError("voting mode needs an explicit seed")
    rng = np.random.default_rng(seed)
    found = set()
    for i in range(1, n + 1):
        xs = rng.integers(0, 2, size=(trials, n))
        votes = 0
        for row in xs:
            x = "".join(map(str, row))
            votes += pred(x) ^ pred(_xor(x, i))
        if 2 * votes > trials:
            found.add(i)
    return frozenset(found)


def prediction_error(
    pred: ParityPredictor | Callable[[str], int],
    spec: ParitySpec,
    mode: str = "exhaustive",
    trials: int = 10_000,
    seed: int | None = None,
) -> float:
    """Pr_x[pred(x) != f_S(x)] under uniform x, exact or Monte Carlo."""
    n = spec.n
    if mode == "exhaustive":
        if n > EXHAUSTIVE_MAX_N:
            raise TooLarge(f"exhaustive sweep over 2^{n} inputs")
        f = parity_labels(n, spec.S)
        if isinstance(pred, ParityPredictor) and n + 1 <= TABLE_MAX_N:
            guesses = pred.table()
        else:
            guesses = np.array([pred(index_to_bits(i, n)) for i in range(1 << n)])
        return float(np.mean(guesses != f))
    if mode != "sampled":
        raise QGenError(f"unknown error mode {mode!r}")
    if seed is None:
        raise QGenError("sampled mode needs an explicit seed")
    rng = np.random.default_rng(seed)
    wrong = 0
    for row in rng.integers(0, 2, size=(trials, n)):
        x = "".join(map(str, row))
        wrong += pred(x) != spec.parity(x)
    return wrong / trials


@dataclass(frozen=True)
class ReductionReport:
    kl_measured: float
    threshold: float
    error_rate: float
    recovered_S: frozenset[int]
    match: bool

    def to_json(self) -> dict:
        return {
            "kl_measured": self.kl_measured,
            "threshold": self.threshold,
            "error_rate": self.error_rate,
            "recovered_S": sorted(self.recovered_S),
            "match": self.match,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def run_reduction(
    evaluator: Evaluator | OutputDistribution,
    spec: ParitySpec,
    eps: float = 0.1,
    mode: str = "exact",
    trials: int = 400,
    seed: int | None = None,
) -> ReductionReport:
    pred = ParityPredictor(evaluator)
    try:
        kl = kl_divergence(reference_noisy_parity(spec), evaluator)
    except InfiniteDivergence:
        kl = math.inf
    recovered = recover_set(pred, spec.n, mode, trials, seed)
    return ReductionReport(
        kl_measured=kl,
        threshold=kl_threshold(eps, spec.eta),
        error_rate=prediction_error(pred, spec),
        recovered_S=recovered,
        match=recovered == spec.S,
    )


# Corrupted evaluators.  Each family is indexed by a scalar "strength";
# calibrate() pushes the strength as far as the KL budget allows.


def tie_corruption(spec: ParitySpec, count: int, rng: np.random.Generator) -> OutputDistribution:
    """Equalize both labels on ``count`` random inputs."""
    p = reference_noisy_parity(spec).probs.reshape(-1, 2).copy()
    rows = rng.permutation(len(p))[:count]
    p[rows] = p[rows].sum(axis=1, keepdims=True) / 2
    return OutputDistribution(spec.n + 1, p.ravel())


def swap_corruption(spec: ParitySpec, count: int, rng: np.random.Generator) -> OutputDistribution:
    """Swap the two label probabilities on ``count`` random inputs."""
    p = reference_noisy_parity(spec).probs.reshape(-1, 2).copy()
    rows = rng.permutation(len(p))[:count]
    p[rows] = p[rows][:, ::-1]
    return OutputDistribution(spec.n + 1, p.ravel())


def mass_shift(spec: ParitySpec, weight: float, rng: np.random.Generator) -> OutputDistribution:
    """Mix the reference with a random law on the wrong labels."""
    ref = reference_noisy_parity(spec).probs.reshape(-1, 2)
    f = parity_labels(spec.n, spec.S)
    wrong = np.zeros_like(ref)
    wrong[np.arange(len(ref)), 1 - f] = rng.dirichlet(np.ones(len(ref)))
    mixed = (1 - weight) * ref + weight * wrong
    return OutputDistribution(spec.n + 1, mixed.ravel())


def uniform_mix(spec: ParitySpec, weight: float) -> OutputDistribution:
    ref = reference_noisy_parity(spec).probs
    return OutputDistribution(spec.n + 1, (1 - weight) * ref + weight / ref.size)


def clamped(spec: ParitySpec, eps1: float) -> OutputDistribution:
    return perturb(reference_noisy_parity(spec), eps1).table()


def calibrate(
    family: Callable[[float], OutputDistribution],
    spec: ParitySpec,
    budget: float,
    lo: float,
    hi: float,
    integer: bool = False,
    iters: int = 60,
) -> tuple[float, OutputDistribution, float]:
    """Largest strength in [lo, hi] whose member has KL(P_S || member) <= budget.

    Assumes KL grows with strength.  Returns (strength, member, kl).
    """
    ref = reference_noisy_parity(spec)

    def kl_at(s):
        member = family(s)
        try:
            return member, kl_divergence(ref, member)
        except InfiniteDivergence:
            return member, math.inf

    best = lo, *kl_at(lo)
    if best[2] > budget:
        raise QGenError("even the weakest corruption exceeds the budget")
    member, kl = kl_at(hi)
    if kl <= budget:
        return hi, member, kl
    for _ in range(iters):
        if (integer and hi - lo <= 1) or (not integer and hi - lo <= 1e-12):
            break
        mid = (lo + hi) // 2 if integer else 0.5 * (lo + hi)
        member, kl = kl_at(mid)
        if kl <= budget:
            lo, best = mid, (mid, member, kl)
        else:
            hi = mid
    return best
