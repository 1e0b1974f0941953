"""Spectator planning, modified-GHZ preparation/inversion circuits with the
dynamical-decoupling stabilizer, and the closed-form detection / mismatch
mathematics of the single-flag crosstalk detector.

Angles here are Bloch-sphere rotation angles: a plan's ``deltas`` are the
per-event Bloch rotations of each spectator, and the flag probability after
``m`` events is ``(1 - cos(m * sum(deltas))) / 2``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from . import ops

GATE_KINDS = ("H", "X", "CNOT", "axis-rotation", "measure", "reset")

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


@dataclass(frozen=True)
class SpectatorPlan:
    """A chosen spectator set: qubit indices, per-qubit rotation axes, the
    per-event rotation angles, and the total-angle target they approximate."""

    qubits: tuple
    axes: np.ndarray  # (n, 3) unit vectors
    deltas: np.ndarray  # (n,) per-event Bloch angles
    target_angle: float

    def __post_init__(self):
        qubits = tuple(int(q) for q in self.qubits)
        axes = np.atleast_2d(np.asarray(self.axes, dtype=float))
        deltas = np.atleast_1d(np.asarray(self.deltas, dtype=float))
        if not (len(qubits) == axes.shape[0] == deltas.size):
            raise ValueError("qubits, axes, and deltas must have matching length")
        if axes.shape[1] != 3 or np.max(np.abs(np.linalg.norm(axes, axis=1) - 1)) > 1e-9:
            raise ValueError("axes must be unit 3-vectors")
        if np.any(deltas <= 0):
            raise ValueError("per-event rotation angles must be positive")
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "deltas", deltas)

    @property
    def n_spectators(self) -> int:
        return len(self.qubits)

    @property
    def total_angle(self) -> float:
        return float(np.sum(self.deltas))

    @property
    def residual(self) -> float:
        return abs(self.total_angle - self.target_angle)


@dataclass(frozen=True)
class Gate:
    layer: int
    kind: str
    qubits: tuple
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(self.params))


@dataclass(frozen=True)
class GateList:
    gates: tuple

    def __post_init__(self):
        gates = tuple(self.gates)
        layers = [g.layer for g in gates]
        if layers != sorted(layers):
            raise ValueError("gate layer indices must be nondecreasing")
        object.__setattr__(self, "gates", gates)

    @property
    def n_layers(self) -> int:
        return 0 if not self.gates else max(g.layer for g in self.gates) + 1

    def shifted(self, offset: int) -> "GateList":
        return GateList(tuple(Gate(g.layer + offset, g.kind, g.qubits, g.params) for g in self.gates))

    def to_json(self) -> str:
        return json.dumps(
            [
                {"layer": g.layer, "kind": g.kind, "qubits": list(g.qubits), "params": list(g.params)}
                for g in self.gates
            ],
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "GateList":
        return cls(tuple(Gate(d["layer"], d["kind"], tuple(d["qubits"]), tuple(d.get("params", ()))) for d in json.loads(text)))


def gate_unitary(gate: Gate, n_qubits: int) -> np.ndarray:
    """Dense unitary for one gate embedded in the full register."""
    if gate.kind == "H":
        return ops.expand_operator(_H, gate.qubits, n_qubits)
    if gate.kind == "X":
        return ops.expand_operator(ops.PAULI["X"], gate.qubits, n_qubits)
    if gate.kind == "CNOT":
        return ops.expand_operator(_CNOT, gate.qubits, n_qubits)
    if gate.kind == "axis-rotation":
        axis = np.asarray(gate.params[:3], dtype=float)
        angle = float(gate.params[3])
        return ops.expand_operator(ops.rotation_operator(axis, angle), gate.qubits, n_qubits)
    raise ValueError(f"gate kind {gate.kind!r} has no unitary")


def circuit_unitary(circuit: GateList, n_qubits: int) -> np.ndarray:
    """Product of all gate unitaries in list order (earliest applied first)."""
    u = np.eye(2**n_qubits, dtype=complex)
    for g in circuit.gates:
        u = gate_unitary(g, n_qubits) @ u
    return u


# ---------------------------------------------------------------------------
# Planning


def _best_subset_exhaustive(deltas: np.ndarray, target: float) -> tuple:
    """Meet-in-the-middle search over all nonempty subsets."""
    n = deltas.size
    half = n // 2
    left_idx = list(range(half))
    right_idx = list(range(half, n))

    def subset_sums(idx):
        sums = np.zeros(1)
        masks = [()]
        for i in idx:
            sums = np.concatenate([sums, sums + deltas[i]])
            masks = masks + [m + (i,) for m in masks]
        return sums, masks

    ls, lm = subset_sums(left_idx)
    rs, rm = subset_sums(right_idx)
    # for each left sum, the best right partner brackets target - left
    order = np.argsort(rs, kind="stable")
    rs_sorted = rs[order]
    best = None
    for li, lsum in enumerate(ls):
        pos = np.searchsorted(rs_sorted, target - lsum)
        for p in (pos - 1, pos, pos + 1):
            if 0 <= p < rs_sorted.size:
                ri = order[p]
                if li == 0 and ri == 0:
                    continue  # empty subset
                res = abs(lsum + rs[ri] - target)
                if best is None or res < best[0] - 1e-15:
                    best = (res, tuple(sorted(lm[li] + rm[ri])))
    return best[1]


def _best_subset_greedy(deltas: np.ndarray, target: float) -> tuple:
    """Greedy fill plus single-element add/remove/swap local search."""
    chosen = set()
    for i in np.argsort(-deltas):
        if abs(sum(deltas[j] for j in chosen | {i}) - target) <= abs(
            sum(deltas[j] for j in chosen) - target
        ) or not chosen:
            chosen.add(int(i))
    improved = True
    while improved:
        improved = False
        cur = abs(sum(deltas[j] for j in chosen) - target)
        moves = []
        for i in range(deltas.size):
            if i in chosen and len(chosen) > 1:
                moves.append(chosen - {i})
            if i not in chosen:
                moves.append(chosen | {i})
                moves.extend(chosen - {j} | {i} for j in chosen)
        for cand in moves:
            res = abs(sum(deltas[j] for j in cand) - target)
            if res < cur - 1e-15:
                chosen, cur, improved = set(cand), res, True
    return tuple(sorted(chosen))


def plan_spectators(candidate_deltas, target: float, axes=None, qubits=None) -> SpectatorPlan:
    """Choose the candidate subset whose total rotation angle best matches
    ``target``.

    Exhaustive (meet-in-the-middle) for up to 20 candidates, greedy with
    local swaps beyond. ``axes`` defaults to +z for every qubit; ``qubits``
    defaults to the candidate positions.
    """
    deltas = np.asarray(candidate_deltas, dtype=float)
    if deltas.size == 0:
        raise ValueError("no candidate spectators")
    if np.any(deltas <= 0):
        raise ValueError("candidate rotation angles must be positive")
    if deltas.size <= 20:
        pick = _best_subset_exhaustive(deltas, target)
    else:
        pick = _best_subset_greedy(deltas, target)
    all_axes = np.tile([0.0, 0.0, 1.0], (deltas.size, 1)) if axes is None else np.asarray(axes, dtype=float)
    all_qubits = list(range(deltas.size)) if qubits is None else list(qubits)
    return SpectatorPlan(
        qubits=tuple(all_qubits[i] for i in pick),
        axes=all_axes[list(pick)],
        deltas=deltas[list(pick)],
        target_angle=float(target),
    )


# ---------------------------------------------------------------------------
# Circuits


def axis_alignment_unitary(k) -> np.ndarray:
    """Geodesic rotation U(k) taking the z-axis onto k, so U(k)|0> is the
    +k eigenstate of k.sigma and U(k)|1> the -k eigenstate."""
    k = np.asarray(k, dtype=float)
    if abs(np.linalg.norm(k) - 1.0) > 1e-9:
        raise ValueError("alignment axis must be a unit 3-vector")
    axis, angle = _alignment_axis_angle(k)
    return ops.rotation_operator(axis, angle)


def _alignment_axis_angle(k: np.ndarray) -> tuple:
    """Rotation axis/angle used by :func:`axis_alignment_unitary`."""
    z = np.array([0.0, 0.0, 1.0])
    cross = np.cross(z, k)
    norm = np.linalg.norm(cross)
    if norm < 1e-12:
        if k[2] > 0:
            return np.array([1.0, 0.0, 0.0]), 0.0  # identity
        return np.array([1.0, 0.0, 0.0]), np.pi  # k = -z
    return cross / norm, float(np.arccos(np.clip(k[2], -1.0, 1.0)))


def _alignment_gates(plan: SpectatorPlan, layer: int, adjoint: bool = False) -> list:
    gates = []
    for q, k in zip(plan.qubits, plan.axes):
        axis, angle = _alignment_axis_angle(k)
        if angle != 0.0:
            sign = -1.0 if adjoint else 1.0
            gates.append(Gate(layer, "axis-rotation", (q,), (*axis, sign * angle)))
    return gates


def mghz_prep_circuit(plan: SpectatorPlan) -> GateList:
    """H on the first spectator, CNOT chain, X pulse layer, then per-qubit
    axis alignment: |0...0> -> |MGHZ_n(K)>."""
    q = plan.qubits
    gates = [Gate(0, "H", (q[0],))]
    for i in range(len(q) - 1):
        gates.append(Gate(1 + i, "CNOT", (q[i], q[i + 1])))
    x_layer = len(q)
    gates.extend(Gate(x_layer, "X", (qi,)) for qi in q)
    gates.extend(_alignment_gates(plan, x_layer + 1))
    return GateList(tuple(gates))


def inversion_circuit(plan: SpectatorPlan) -> GateList:
    """Adjoint of :func:`mghz_prep_circuit` in reverse order."""
    q = plan.qubits
    gates = _alignment_gates(plan, 0, adjoint=True)
    gates.extend(Gate(1, "X", (qi,)) for qi in q)
    for i in reversed(range(len(q) - 1)):
        gates.append(Gate(2 + (len(q) - 2 - i), "CNOT", (q[i], q[i + 1])))
    gates.append(Gate(len(q) + 1, "H", (q[0],)))
    return GateList(tuple(gates))


def mghz_state(plan: SpectatorPlan) -> np.ndarray:
    """Direct construction (tensor of alignment unitaries applied to GHZ),
    on a register of exactly the plan's spectators in plan order."""
    n = plan.n_spectators
    ghz = np.zeros(2**n, dtype=complex)
    ghz[0] = ghz[-1] = 1 / np.sqrt(2)
    u = np.array([[1.0 + 0j]])
    for k in plan.axes:
        u = np.kron(u, axis_alignment_unitary(k))
    return u @ ghz


def dd_stabilizer(plan: SpectatorPlan) -> np.ndarray:
    """Transformed stabilizer S = U X^{tensor n} U^dag on the spectator
    register (plan order); stabilizes |MGHZ_n(K)>."""
    n = plan.n_spectators
    u = np.array([[1.0 + 0j]])
    for k in plan.axes:
        u = np.kron(u, axis_alignment_unitary(k))
    xs = ops.pauli_string_matrix("X" * n)
    return u @ xs @ u.conj().T


def dd_pulse_schedule(plan: SpectatorPlan, detection_layers: int) -> GateList:
    """Decoupling pulses inside the detection window: each spectator gets an
    even number of pi rotations about its own axis, and nearest neighbours
    (adjacent in plan order) are never pulsed in the same layer.

    Spectator i is pulsed at layers i and i + n.
    """
    n = plan.n_spectators
    if detection_layers < 2 * n:
        raise ValueError(f"need at least {2 * n} layers for even, offset pulse counts")
    gates = []
    for rep in range(2):
        for i, (q, k) in enumerate(zip(plan.qubits, plan.axes)):
            gates.append(Gate(i + rep * n, "axis-rotation", (q,), (*k, np.pi)))
    gates.sort(key=lambda g: g.layer)
    return GateList(tuple(gates))


# ---------------------------------------------------------------------------
# Closed-form mathematics


def detection_probability(m: int, total_angle: float) -> float:
    """P(flag=1) after m crosstalk events: (1 - cos(m*theta))/2."""
    if m < 0:
        raise ValueError("event count must be nonnegative")
    return float((1.0 - np.cos(m * total_angle)) / 2.0)


def worst_case_theta(k: int, n: int) -> float:
    """Worst-case total angle 2*pi/(2kn+1) for a set of n spectators serving
    the count class with smallest member k."""
    if k < 1 or n < 1:
        raise ValueError("k and n must be positive")
    return 2.0 * np.pi / (2 * k * n + 1)


def mismatch_delta_theta(k: int, n: int, k_prime: int) -> float:
    """Phase deviation pi*k'/(k*(2kn+1)) when k' events hit a set tuned for
    multiples of k at the worst-case angle."""
    if k_prime < 0:
        raise ValueError("event count must be nonnegative")
    return np.pi * k_prime / (k * (2 * k * n + 1))


def expected_false_negative(dtheta: float) -> float:
    """P(flag=0) at phase deviation dtheta from pi: (1 - cos(dtheta))/2."""
    return float((1.0 - np.cos(dtheta)) / 2.0)


# ---------------------------------------------------------------------------
# Multi-set layout


@dataclass(frozen=True)
class DetectorLayout:
    """Several spectator sets with target angles pi, pi/2, pi/4, ... whose
    count classes jointly cover 1..max_count, plus frame windows."""

    sets: tuple  # SpectatorPlan per set
    count_classes: tuple  # tuple of detectable counts per set
    frames: tuple  # (prep, detect, invert, reset) layer ranges per frame

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(self.sets))
        object.__setattr__(self, "count_classes", tuple(tuple(c) for c in self.count_classes))
        object.__setattr__(self, "frames", tuple(tuple(f) for f in self.frames))


def count_class(k: int, max_count: int) -> tuple:
    """Counts detected by a set with target angle pi/k: odd multiples of k."""
    return tuple(k * odd for odd in range(1, max_count // k + 1, 2))


def multi_set_layout(max_count: int, per_event_deltas, detection_layers: int | None = None) -> DetectorLayout:
    """Plan sets for targets pi, pi/2, pi/4, ... until counts 1..max_count are
    covered or the target falls below the smallest available per-event angle.

    Each set is planned independently against the full candidate pool; a
    deployment time-multiplexes shared qubits across frames.
    """
    if max_count < 1:
        raise ValueError("max_count must be at least 1")
    deltas = np.asarray(per_event_deltas, dtype=float)
    min_delta = float(np.min(deltas))
    sets, classes = [], []
    k = 1
    while k <= max_count:
        target = np.pi / k
        if target < min_delta - 1e-12:
            break
        sets.append(plan_spectators(deltas, target))
        classes.append(count_class(k, max_count))
        k *= 2
    n_max = max(s.n_spectators for s in sets)
    window = detection_layers if detection_layers is not None else 2 * n_max
    prep_len = n_max + 2  # H + CNOT chain + X/alignment layers
    frames = [
        (
            (0, prep_len),
            (prep_len, prep_len + window),
            (prep_len + window, 2 * prep_len + window),
            (2 * prep_len + window, 2 * prep_len + window + 1),
        )
    ]
    return DetectorLayout(sets=tuple(sets), count_classes=tuple(classes), frames=tuple(frames))
