"""Quantum Generators with a binary projective measurement.

A k-state generator is a triple ``(initial, unitary, measurement)``: a unit
vector in C^k, a k x k unitary, and a length-k array assigning every basis
index to outcome 0 or 1.  Each step applies the unitary, measures, emits the
outcome and collapses onto the outcome's coordinate subspace.

Strings over {0,1} are plain ``str`` objects such as ``"0110"``.  Tables are
indexed by the integer whose binary expansion is the string, first symbol
most significant, so integer order and lexicographic order coincide.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimensionMismatch,
    IncompletePartition,
    NonUnitary,
    TooLong,
    UnnormalizedState,
)

UNITARY_TOL = 1e-10
NORM_TOL = 1e-9
DIST_TOL = 1e-9
# Branches carrying less mass than this are treated as exactly zero.
ZERO_MASS = 1e-12
DEFAULT_MAX_LENGTH = 22

# Rows per block in the chunked enumeration of exact_distribution.
_CHUNK_ROWS = 1 << 15


def bits_to_index(x: str) -> int:
    return int(x, 2) if x else 0


def index_to_bits(i: int, n: int) -> str:
    return format(i, f"0{n}b") if n else ""


def all_strings(n: int) -> list[str]:
    return [index_to_bits(i, n) for i in range(1 << n)]


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def unitarity_residual(u: np.ndarray) -> float:
    """Largest entry of |U^dagger U - I|."""
    u = np.asarray(u, dtype=complex)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def basis_state(k: int, i: int) -> np.ndarray:
    e = np.zeros(k, dtype=complex)
    e[i] = 1.0
    return e


@dataclass(frozen=True, eq=False)
class QuantumGenerator:
    """A finite-state quantum source.  Construction only coerces; see :func:`validate`."""

    initial: np.ndarray
    unitary: np.ndarray
    measurement: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "initial", _readonly(np.array(self.initial, dtype=complex)))
        object.__setattr__(self, "unitary", _readonly(np.array(self.unitary, dtype=complex)))
        object.__setattr__(self, "measurement", _readonly(np.array(self.measurement, dtype=np.int8)))

    @property
    def k(self) -> int:
        return self.initial.shape[0]

    @cached_property
    def masks(self) -> tuple[np.ndarray, np.ndarray]:
        """Boolean coordinate masks of the two projectors M_0, M_1."""
        return _readonly(self.measurement == 0), _readonly(self.measurement == 1)

    @cached_property
    def _sparse_unitary(self):
        u = self.unitary
        if u.shape[0] >= 16 and np.count_nonzero(u) <= u.size // 4:
            return sp.csr_matrix(u)
        return None

    def evolve(self, v: np.ndarray) -> np.ndarray:
        """Apply U to a single vector or to every row of a (m, k) batch."""
        usp = self._sparse_unitary
        if v.ndim == 1:
            return usp @ v if usp is not None else self.unitary @ v
        if usp is not None:
            return np.asarray((usp @ v.T).T)
        return v @ self.unitary.T

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "initial": [[float(z.real), float(z.imag)] for z in self.initial],
            "unitary": [[[float(z.real), float(z.imag)] for z in row] for row in self.unitary],
            "measurement": [int(b) for b in self.measurement],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "QuantumGenerator":
        def cplx(pairs):
            return np.array([complex(re, im) for re, im in pairs], dtype=complex)

        try:
            k = int(obj["k"])
            initial = cplx(obj["initial"])
            unitary = np.array([cplx(row) for row in obj["unitary"]], dtype=complex)
            measurement = np.array(obj["measurement"], dtype=np.int64)
        except (KeyError, TypeError, ValueError) as exc:
            raise DimensionMismatch(f"malformed generator JSON: {exc}") from exc
        if initial.shape != (k,) or unitary.shape != (k, k) or measurement.shape != (k,):
            raise DimensionMismatch(f"generator JSON declares k={k} but components disagree")
        return cls(initial, unitary, measurement)


def validate(qg: QuantumGenerator) -> QuantumGenerator:
    """Return ``qg`` unchanged if every invariant holds, else raise on the first violation."""
    psi, u, m = qg.initial, qg.unitary, np.asarray(qg.measurement)
    if psi.ndim != 1 or u.shape != (psi.shape[0], psi.shape[0]) or m.shape != psi.shape:
        raise DimensionMismatch(
            f"initial {psi.shape}, unitary {u.shape}, measurement {m.shape} do not share k"
        )
    if psi.shape[0] < 2:
        raise DimensionMismatch(f"need k >= 2 basis states, got {psi.shape[0]}")
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > NORM_TOL:
        raise UnnormalizedState(f"initial state has l2 norm {norm!r}")
    res = unitarity_residual(u)
    if not res <= UNITARY_TOL:
        raise NonUnitary(f"max |U^dagger U - I| = {res:.3e} > {UNITARY_TOL:.0e}")
    if not np.isin(m, (0, 1)).all():
        raise IncompletePartition("measurement outcomes must be 0 or 1")
    if not (m == 0).any() or not (m == 1).any():
        raise IncompletePartition("both outcomes need a nonempty projector")
    return qg


class Branch(NamedTuple):
    outcome: int
    probability: float
    state: np.ndarray


def measure_step(state: np.ndarray, qg: QuantumGenerator) -> list[Branch]:
    """One evolve-and-measure step from a normalized ``state``.

    Returns one branch per outcome whose probability exceeds ``ZERO_MASS``;
    each branch carries the renormalized post-measurement state.
    """
    state = np.asarray(state, dtype=complex)
    if state.shape != (qg.k,):
        raise DimensionMismatch(f"state has shape {state.shape}, generator has k={qg.k}")
    w = qg.evolve(state)
    branches = []
    for b, mask in enumerate(qg.masks):
        proj = np.where(mask, w, 0)
        p = float(np.vdot(proj, proj).real)
        if p > ZERO_MASS:
            branches.append(Branch(b, p, proj / np.sqrt(p)))
    return branches


def forward_vector(qg: QuantumGenerator, x: str) -> np.ndarray:
    """M_{x_n} U ... M_{x_1} U psi_0, unnormalized."""
    v = qg.initial
    masks = qg.masks
    for c in x:
        v = np.where(masks[c == "1"], qg.evolve(v), 0)
    return v


def sequence_probability(qg: QuantumGenerator, x: str) -> float:
    v = forward_vector(qg, x)
    return float(np.vdot(v, v).real)


@dataclass(frozen=True, eq=False)
class OutputDistribution:
    """Explicit probability table over {0,1}^length."""

    length: int
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.shape != (1 << self.length,):
            raise DimensionMismatch(f"table of shape {p.shape} for length {self.length}")
        if (p < 0).any() or (p > 1 + DIST_TOL).any():
            raise ValueError("probabilities must lie in [0, 1]")
        total = float(p.sum())
        if abs(total - 1.0) > DIST_TOL:
            raise ValueError(f"probabilities sum to {total!r}")
        object.__setattr__(self, "probs", _readonly(p))

    def __getitem__(self, x: str) -> float:
        if len(x) != self.length:
            raise DimensionMismatch(f"string of length {len(x)} for a length-{self.length} table")
        return float(self.probs[bits_to_index(x)])

    def items(self) -> Iterator[tuple[str, float]]:
        """Nonzero entries in lexicographic order."""
        for i in np.flatnonzero(self.probs):
            yield index_to_bits(int(i), self.length), float(self.probs[i])

    def prefix_masses(self, level: int) -> np.ndarray:
        """Probability of every prefix of the given length, indexed like a table."""
        return self.probs.reshape(1 << level, -1).sum(axis=1)

    def marginal(self, t: int) -> float:
        """Pr[x_t = 1] for the 1-based position ``t``."""
        bit = (np.arange(self.probs.size) >> (self.length - t)) & 1
        return float(self.probs[bit == 1].sum())

    def tv_distance(self, other: "OutputDistribution") -> float:
        if other.length != self.length:
            raise DimensionMismatch("tables have different lengths")
        return 0.5 * float(np.abs(self.probs - other.probs).sum())

    def to_text(self) -> str:
        return "".join(f"{x} {p:.16e}\n" for x, p in self.items())

    @classmethod
    def from_text(cls, text: str, length: int | None = None) -> "OutputDistribution":
        rows = [line.split() for line in text.splitlines() if line.strip()]
        if length is None:
            if not rows:
                raise ValueError("empty table with no declared length")
            length = len(rows[0][0])
        probs = np.zeros(1 << length)
        for x, p in rows:
            if len(x) != length:
                raise DimensionMismatch(f"row {x!r} does not have length {length}")
            probs[bits_to_index(x)] = float(p)
        return cls(length, probs)


def exact_distribution(
    qg: QuantumGenerator,
    n: int,
    max_length: int = DEFAULT_MAX_LENGTH,
    threshold: float = ZERO_MASS,
) -> OutputDistribution:
    """Enumerate P(x) for every x in {0,1}^n.

    The outcome tree is expanded breadth-first inside blocks of at most
    ``_CHUNK_ROWS`` prefixes and depth-first across blocks, using the
    unnormalized forward vectors.  Branches whose mass falls below
    ``threshold`` are pruned.
    """
    if n > max_length:
        raise TooLong(f"length {n} exceeds the enumeration cap {max_length}")
    probs = np.zeros(1 << n)
    m0, m1 = qg.masks

    def expand(vecs: np.ndarray, prefixes: np.ndarray, depth: int) -> None:
        if depth == n:
            probs[prefixes] = np.einsum("ij,ij->i", vecs.conj(), vecs).real
            return
        w = qg.evolve(vecs)
        children, child_idx = [], []
        for b, mask in ((0, m0), (1, m1)):
            proj = w * mask
            mass = np.einsum("ij,ij->i", proj.conj(), proj).real
            keep = mass > threshold
            children.append(proj[keep])
            child_idx.append(2 * prefixes[keep] + b)
        vecs = np.concatenate(children)
        prefixes = np.concatenate(child_idx)
        for start in range(0, len(prefixes), _CHUNK_ROWS):
            expand(vecs[start:start + _CHUNK_ROWS], prefixes[start:start + _CHUNK_ROWS], depth + 1)

    expand(qg.initial[None, :], np.zeros(1, dtype=np.int64), 0)
    return OutputDistribution(n, probs)


def sample_indices(qg: QuantumGenerator, n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` independent length-n trajectories; returns table indices.

    Every trajectory collapses and renormalizes after each step.  A branch
    whose conditional probability is below ``ZERO_MASS`` is never taken.
    """
    m0, m1 = qg.masks
    v = np.tile(qg.initial, (count, 1))
    idx = np.zeros(count, dtype=np.int64)
    for _ in range(n):
        w = qg.evolve(v)
        sq = np.abs(w) ** 2
        p0 = sq[:, m0].sum(axis=1)
        p1 = sq[:, m1].sum(axis=1)
        q1 = p1 / (p0 + p1)
        q1 = np.where(q1 < ZERO_MASS, 0.0, np.where(q1 > 1.0 - ZERO_MASS, 1.0, q1))
        b = rng.random(count) < q1
        w = np.where(b[:, None], w * m1, w * m0)
        v = w / np.sqrt(np.where(b, p1, p0))[:, None]
        idx = 2 * idx + b
    return idx


def sample_many(qg: QuantumGenerator, n: int, count: int, seed: int) -> list[str]:
    rng = np.random.default_rng(seed)
    return [index_to_bits(int(i), n) for i in sample_indices(qg, n, count, rng)]


def sample(qg: QuantumGenerator, n: int, seed: int) -> str:
    return sample_many(qg, n, 1, seed)[0]


def empirical_counts(samples: Sequence[str], n: int) -> np.ndarray:
    counts = np.zeros(1 << n, dtype=np.int64)
    for x in samples:
        if len(x) != n:
            raise DimensionMismatch(f"sample {x!r} does not have length {n}")
        counts[bits_to_index(x)] += 1
    return counts
