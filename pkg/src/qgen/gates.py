"""Gate circuits over {I, S, K, CNOT, Toffoli} and a bounded-depth net of generators.

Wire 0 is the most significant qubit, so on two wires ``|a, b>`` is basis
index ``2a + b``.  A circuit applies its gates left to right.

The net crosses every distinct unitary reachable in at most ``max_gates``
gates with a grid of discretized initial states and caller-supplied
measurement partitions, then drops entries whose output law is already
represented.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import QuantumGenerator, exact_distribution, validate
from .errors import BadWires, EnumerationTooLarge, QGenError

GATE_ARITY = {"I": 1, "S": 1, "K": 1, "CNOT": 2, "TOFFOLI": 3}

S_MATRIX = (1 + 1j) / 2 * np.array([[1, 1], [1, -1]], dtype=complex)
K_MATRIX = np.array([[1, 0], [0, 1j]], dtype=complex)
_ONE_QUBIT = {"I": np.eye(2, dtype=complex), "S": S_MATRIX, "K": K_MATRIX}

DEDUP_TOL = 1e-12
MAX_NET_ENTRIES = 200_000
MAX_WIDTH = 3


@dataclass(frozen=True)
class Gate:
    kind: str
    wires: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", self.kind.upper())
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        if self.kind not in GATE_ARITY:
            raise BadWires(f"unknown gate {self.kind!r}")
        if len(self.wires) != GATE_ARITY[self.kind]:
            raise BadWires(f"{self.kind} acts on {GATE_ARITY[self.kind]} wires, got {self.wires}")
        if len(set(self.wires)) != len(self.wires):
            raise BadWires(f"repeated wire in {self.wires}")

    def __str__(self) -> str:
        return f"{self.kind}({','.join(map(str, self.wires))})"

    @classmethod
    def parse(cls, token: str) -> "Gate":
        m = re.fullmatch(r"\s*([A-Za-z]+)\(([\d,\s]*)\)\s*", token)
        if m is None:
            raise BadWires(f"cannot parse gate {token!r}")
        return cls(m.group(1), tuple(int(w) for w in m.group(2).split(",") if w.strip()))


def _check_wires(g: Gate, width: int) -> None:
    if any(w < 0 or w >= width for w in g.wires):
        raise BadWires(f"{g} does not fit in width {width}")


def gate_unitary(g: Gate, width: int) -> np.ndarray:
    _check_wires(g, width)
    dim = 1 << width
    if g.kind in _ONE_QUBIT:
        (w,) = g.wires
        return np.kron(np.kron(np.eye(1 << w), _ONE_QUBIT[g.kind]), np.eye(1 << (width - w - 1)))
    shifts = [width - 1 - w for w in g.wires]
    u = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> s) & 1 for s in shifts]
        flip = bits[0] if g.kind == "CNOT" else bits[0] & bits[1]
        u[col ^ (flip << shifts[-1]), col] = 1.0
    return u


@dataclass(frozen=True)
class GateCircuit:
    width: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            _check_wires(g, self.width)

    def __str__(self) -> str:
        return ";".join(map(str, self.gates)) or "-"

    @classmethod
    def parse(cls, text: str, width: int) -> "GateCircuit":
        text = text.strip()
        if text in ("", "-"):
            return cls(width)
        return cls(width, tuple(Gate.parse(tok) for tok in text.split(";")))


def circuit_unitary(c: GateCircuit) -> np.ndarray:
    u = np.eye(1 << c.width, dtype=complex)
    for g in c.gates:
        u = gate_unitary(g, c.width) @ u
    return u


def max_exponent(k: int, eps0: float) -> int:
    """Exponent beyond which (1 - eps0/k)^b is below eps0/k."""
    return math.ceil((k / eps0) * math.log(k / eps0))


@dataclass(frozen=True)
class DiscretizedState:
    """Normalization of ((1 - eps0/k)^b_1, ..., (1 - eps0/k)^b_k).

    An exponent of ``None`` marks a negligible coordinate whose amplitude is
    set to zero; at least one exponent must be finite.
    """

    exponents: tuple[int | None, ...]
    eps0: float

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(self.exponents))
        k = len(self.exponents)
        if k < 2:
            raise QGenError("a discretized state needs k >= 2 coordinates")
        if not 0 < self.eps0 < k:
            raise QGenError(f"eps0 must lie in (0, k), got {self.eps0}")
        cap = max_exponent(k, self.eps0)
        finite = [b for b in self.exponents if b is not None]
        if not finite:
            raise QGenError("every coordinate is negligible")
        if any(b < 0 or b > cap for b in finite):
            raise QGenError(f"exponents {self.exponents} outside 0..{cap}")

    @property
    def k(self) -> int:
        return len(self.exponents)

    def vector(self) -> np.ndarray:
        r = 1 - self.eps0 / self.k
        v = np.array([0.0 if b is None else r ** b for b in self.exponents], dtype=complex)
        return v / np.linalg.norm(v)

    def __str__(self) -> str:
        return ",".join("x" if b is None else str(b) for b in self.exponents)

    @classmethod
    def parse(cls, text: str, eps0: float) -> "DiscretizedState":
        return cls(tuple(None if t.strip() == "x" else int(t) for t in text.split(",")), eps0)


def state_grid(k: int, grid: int, eps0: float) -> list[DiscretizedState]:
    """All grid states with exponents in 0..grid or negligible, up to scaling.

    Shifting every finite exponent by the same amount leaves the normalized
    vector unchanged, so only tuples whose smallest finite exponent is 0 are kept.
    """
    grid = min(grid, max_exponent(k, eps0))
    out = []
    for exps in itertools.product([None, *range(grid + 1)], repeat=k):
        finite = [b for b in exps if b is not None]
        if finite and min(finite) == 0:
            out.append(DiscretizedState(exps, eps0))
    return out


@dataclass(frozen=True)
class NetEntry:
    circuit: GateCircuit
    state: DiscretizedState
    measurement: tuple[int, ...]
    unitary: np.ndarray = field(default=None, repr=False, compare=False)

    def generator(self) -> QuantumGenerator:
        u = self.unitary if self.unitary is not None else circuit_unitary(self.circuit)
        return validate(QuantumGenerator(self.state.vector(), u, self.measurement))

    def manifest_line(self) -> str:
        return f"circuit={self.circuit} state={self.state} meas={''.join(map(str, self.measurement))}"

    @classmethod
    def parse(cls, line: str, eps0: float) -> "NetEntry":
        fields = dict(part.split("=", 1) for part in line.split())
        meas = tuple(int(c) for c in fields["meas"])
        width = len(meas).bit_length() - 1
        if 1 << width != len(meas):
            raise BadWires(f"measurement of length {len(meas)} is not a power of two")
        return cls(GateCircuit.parse(fields["circuit"], width), DiscretizedState.parse(fields["state"], eps0), meas)


def _gate_alphabet(width: int) -> list[Gate]:
    gates = []
    for kind in ("I", "S", "K", "CNOT", "TOFFOLI"):
        arity = GATE_ARITY[kind]
        if arity <= width:
            gates.extend(Gate(kind, w) for w in itertools.permutations(range(width), arity))
    return gates


def _matrix_key(u: np.ndarray) -> bytes:
    return (np.round(u, 9) + 0.0).tobytes()  # + 0.0 folds -0.0 into 0.0


def distinct_unitaries(width: int, max_gates: int) -> list[tuple[GateCircuit, np.ndarray]]:
    """Every distinct unitary of at most ``max_gates`` gates, each with its first circuit.

    Circuits are visited by gate count and then lexicographically over the
    gate alphabet, so the representative is the shortest, earliest circuit.
    """
    if width < 1 or width > MAX_WIDTH:
        raise EnumerationTooLarge(f"width {width} outside 1..{MAX_WIDTH}")
    alphabet = [(g, gate_unitary(g, width)) for g in _gate_alphabet(width)]
    eye = np.eye(1 << width, dtype=complex)
    found = [(GateCircuit(width), eye)]
    seen = {_matrix_key(eye)}
    frontier = list(found)
    for _ in range(max_gates):
        nxt = []
        for circ, u in frontier:
            for g, gu in alphabet:
                v = gu @ u
                key = _matrix_key(v)
                if key not in seen:
                    seen.add(key)
                    item = (GateCircuit(width, circ.gates + (g,)), v)
                    nxt.append(item)
                    found.append(item)
        if not nxt:
            break
        frontier = nxt
    return found


def all_partitions(k: int) -> list[tuple[int, ...]]:
    """Every binary partition of k basis states with both outcomes present."""
    return [p for p in itertools.product((0, 1), repeat=k) if 0 < sum(p) < k]


def enumerate_net(
    width: int,
    max_gates: int,
    states: int | Sequence[DiscretizedState],
    measurements: Iterable[Sequence[int]],
    n: int,
    eps0: float = 0.1,
    max_entries: int = MAX_NET_ENTRIES,
) -> list[NetEntry]:
    """Distribution-distinct generators from bounded-depth circuits.

    ``states`` is either a grid bound (see :func:`state_grid`) or an explicit
    list.  Entries whose length-``n`` output table is within ``DEDUP_TOL`` in
    l-infinity of an earlier entry are dropped.
    """
    k = 1 << width
    unitaries = distinct_unitaries(width, max_gates)
    if isinstance(states, int):
        states = state_grid(k, states, eps0)
    measurements = [tuple(int(b) for b in m) for m in measurements]
    for st in states:
        if st.k != k:
            raise BadWires(f"state of dimension {st.k} in a width-{width} net")
    for m in measurements:
        if len(m) != k:
            raise BadWires(f"measurement of length {len(m)} in a width-{width} net")
    total = len(unitaries) * len(states) * len(measurements)
    if total > max_entries:
        raise EnumerationTooLarge(f"{total} candidate entries exceed the limit {max_entries}")

    kept: list[NetEntry] = []
    tables = np.empty((min(total, 1024), 1 << n))
    for circ, u in unitaries:
        for st in states:
            for m in measurements:
                entry = NetEntry(circ, st, m, u)
                p = exact_distribution(entry.generator(), n).probs
                if kept and np.min(np.max(np.abs(tables[: len(kept)] - p), axis=1)) <= DEDUP_TOL:
                    continue
                if len(kept) == len(tables):
                    tables = np.concatenate([tables, np.empty_like(tables)])
                tables[len(kept)] = p
                kept.append(entry)
    return kept


def state_distance_bound(eps0: float, n: int) -> float:
    """l-infinity bound (n + 2) * eps0 on the output-law error of an eps0-accurate entry."""
    if eps0 < 0:
        raise ValueError("eps0 must be nonnegative")
    return (n + 2) * eps0


def write_manifest(entries: Sequence[NetEntry], eps0: float) -> str:
    lines = [f"# eps0={float(eps0)!r}"]
    lines.extend(e.manifest_line() for e in entries)
    return "\n".join(lines) + "\n"


def read_manifest(text: str) -> list[NetEntry]:
    eps0 = None
    entries = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = re.search(r"eps0=([0-9.eE+-]+)", line)
            if m:
                eps0 = float(m.group(1))
            continue
        if eps0 is None:
            raise QGenError("manifest is missing its '# eps0=' header")
        entries.append(NetEntry.parse(line, eps0))
    return entries
