"""The 4(n+1)-state generator whose output is a stream of noisy parity examples.

Basis states are triples ``(j, k, l)`` with column ``j`` in 0..n and two bits;
they are laid out as ``index = 4*j + 2*k + l``.  Every block of n+1 output
symbols is ``x_1 .. x_n`` followed by the label ``f_S(x) xor noise``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import (
    DIST_TOL,
    OutputDistribution,
    QuantumGenerator,
    basis_state,
    exact_distribution,
    measure_step,
    unitarity_residual,
    validate,
)
from .errors import InvalidSpec, TooLong, VerificationFailed, ZeroProbabilityPath

VERIFY_MAX_N = 10


@dataclass(frozen=True)
class ParitySpec:
    n: int
    S: frozenset[int]
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "S", frozenset(int(i) for i in self.S))
        if self.n < 1:
            raise InvalidSpec(f"n must be positive, got {self.n}")
        if not self.S:
            raise InvalidSpec("S must be nonempty")
        if not all(1 <= i <= self.n for i in self.S):
            raise InvalidSpec(f"S = {sorted(self.S)} is not a subset of 1..{self.n}")
        if not 0.0 < self.eta < 0.5:
            raise InvalidSpec(f"eta must lie in (0, 1/2), got {self.eta}")

    @property
    def k(self) -> int:
        return 4 * (self.n + 1)

    @property
    def first(self) -> int:
        return min(self.S)

    def parity(self, x: str) -> int:
        """f_S(x) for an n-bit string, positions counted from 1."""
        return sum(x[i - 1] == "1" for i in self.S) & 1

    def to_json(self) -> dict:
        return {"n": self.n, "S": sorted(self.S), "eta": self.eta}

    @classmethod
    def from_json(cls, obj: dict) -> "ParitySpec":
        try:
            return cls(int(obj["n"]), frozenset(obj["S"]), float(obj["eta"]))
        except (KeyError, TypeError) as exc:
            raise InvalidSpec(f"malformed spec: {exc}") from exc


class BasisIndex(NamedTuple):
    j: int
    k_bit: int
    l_bit: int

    @property
    def index(self) -> int:
        return 4 * self.j + 2 * self.k_bit + self.l_bit

    @classmethod
    def from_index(cls, i: int) -> "BasisIndex":
        return cls(i // 4, (i >> 1) & 1, i & 1)


def _idx(j: int, k: int, l: int) -> int:
    return 4 * j + 2 * k + l


def column_targets(spec: ParitySpec, j: int, k: int, l: int) -> tuple[tuple[int, complex], tuple[int, complex]]:
    """The two nonzero entries (row index, value) of unitary column (j, k, l)."""
    r = 1 / np.sqrt(2)
    if j == spec.n:
        return (_idx(0, k, l), np.sqrt(1 - spec.eta)), (_idx(0, k ^ 1, l), 1j * np.sqrt(spec.eta))
    c = j + 1
    if c not in spec.S:
        return (_idx(c, k, l), r), (_idx(c, k, l ^ 1), 1j * r)
    if c == spec.first:
        return (_idx(c, k, l), r), (_idx(c, k ^ 1, l), 1j * r)
    return (_idx(c, k ^ l, k), r), (_idx(c, 1 ^ k ^ l, k), 1j * r)


def outcome_of(spec: ParitySpec, j: int, k: int, l: int) -> int:
    if j != 0 and j not in spec.S:
        return l
    if j in spec.S and j != spec.first:
        return k ^ l
    return k


def build_parity_qg(spec: ParitySpec) -> QuantumGenerator:
    u = np.zeros((spec.k, spec.k), dtype=complex)
    meas = np.zeros(spec.k, dtype=np.int8)
    for j in range(spec.n + 1):
        for k in (0, 1):
            for l in (0, 1):
                col = _idx(j, k, l)
                for row, val in column_targets(spec, j, k, l):
                    u[row, col] = val
                meas[col] = outcome_of(spec, j, k, l)
    return validate(QuantumGenerator(basis_state(spec.k, 0), u, meas))


def reference_noisy_parity(spec: ParitySpec) -> OutputDistribution:
    """(x, f_S(x) xor b) with x uniform on {0,1}^n and b ~ Bernoulli(eta)."""
    n = spec.n
    x = np.arange(1 << n)
    f = np.zeros_like(x)
    for i in spec.S:
        f ^= (x >> (n - i)) & 1
    probs = np.empty(1 << (n + 1))
    base = 2.0 ** -n
    probs[2 * x + f] = base * (1 - spec.eta)
    probs[2 * x + (1 - f)] = base * spec.eta
    return OutputDistribution(n + 1, probs)


@dataclass(frozen=True)
class VerificationReport:
    unitarity_residual: float
    tv_distance: float
    block_residual: float
    tolerance: float = DIST_TOL

    @property
    def passed(self) -> bool:
        return (
            self.unitarity_residual <= self.tolerance
            and self.tv_distance <= self.tolerance
            and self.block_residual <= self.tolerance
        )

    def to_json(self) -> dict:
        return {
            "unitarity_residual": self.unitarity_residual,
            "tv_distance": self.tv_distance,
            "block_residual": self.block_residual,
            "pass": self.passed,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def block_residual(qg: QuantumGenerator, block: int) -> float:
    """max |P_{2b}(x.y) - P_b(x) P_b(y)| over all pairs of length-b blocks."""
    one = exact_distribution(qg, block).probs
    two = exact_distribution(qg, 2 * block).probs
    return float(np.max(np.abs(two - np.outer(one, one).ravel())))


def verify_construction(spec: ParitySpec, strict: bool = True, max_n: int = VERIFY_MAX_N) -> VerificationReport:
    """Check unitarity, exactness of the output law, and independence of blocks.

    With ``strict`` a failing quantity raises :class:`VerificationFailed`;
    otherwise the report is returned with ``passed`` false.
    """
    if spec.n > max_n:
        raise TooLong(f"n = {spec.n} exceeds the verification cap {max_n}")
    qg = build_parity_qg(spec)
    report = VerificationReport(
        unitarity_residual=unitarity_residual(qg.unitary),
        tv_distance=exact_distribution(qg, spec.n + 1).tv_distance(reference_noisy_parity(spec)),
        block_residual=block_residual(qg, spec.n + 1),
    )
    if strict:
        for name in ("unitarity_residual", "tv_distance", "block_residual"):
            value = getattr(report, name)
            if not value <= report.tolerance:
                raise VerificationFailed(name, value, report.tolerance)
    return report


def running_parity(spec: ParitySpec, outcomes: str, t: int) -> int:
    """XOR of x_t' over the current block's S-positions with t' <= t (t is 1-based)."""
    j = t % (spec.n + 1)
    start = t - j
    return sum(outcomes[tp - 1] == "1" for tp in range(start + 1, t + 1) if tp - start in spec.S) & 1


def trace_basis_path(
    spec: ParitySpec, outcomes: str, tol: float = 1e-9, qg: QuantumGenerator | None = None
) -> list[BasisIndex]:
    """The basis state supporting psi_0, psi_1, ... along the given outcomes.

    Raises :class:`VerificationFailed` if a state is not a single phased basis
    vector or its column bit disagrees with the running parity.  ``qg`` may
    pass in an already built generator for ``spec``.
    """
    if qg is None:
        qg = build_parity_qg(spec)
    state = qg.initial
    path = [BasisIndex.from_index(0)]
    for t, c in enumerate(outcomes, start=1):
        branch = next((br for br in measure_step(state, qg) if br.outcome == int(c)), None)
        if branch is None:
            raise ZeroProbabilityPath(f"outcome {c} at step {t} has zero probability")
        state = branch.state
        mags = np.abs(state)
        support = np.flatnonzero(mags > tol)
        if support.size != 1 or abs(mags[support[0]] - 1.0) > tol:
            raise VerificationFailed("basis_state_defect", float(np.sort(mags)[-2]), tol)
        b = BasisIndex.from_index(int(support[0]))
        if b.j != t % (spec.n + 1):
            raise VerificationFailed("column_mismatch", float(b.j), 0.0)
        if b.j >= spec.first and b.k_bit != running_parity(spec, outcomes, t):
            raise VerificationFailed("parity_mismatch", float(t), 0.0)
        path.append(b)
    return path
