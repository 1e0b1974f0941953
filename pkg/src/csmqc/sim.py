"""Layered-schedule execution on pure-state and density-matrix engines, with
measurement sampling, perturbation placement, and post-selection.

Within a layer the fixed ordering is gates -> idle step -> crosstalk event;
schedules built for the random-circuit study flip the crosstalk to precede the
coinciding gates (``crosstalk_before_gates``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import channels, ops, protocol


@dataclass(frozen=True)
class Layer:
    """One schedule layer: simultaneous gates plus noise flags.

    ``gate_crosstalk`` marks layers whose own gates (e.g. prep/inversion
    CNOTs) induce a crosstalk event, drawn from the schedule's separate
    unamplified channel.
    """

    gates: tuple = ()
    idle: bool = False
    crosstalk: bool = False
    gate_crosstalk: bool = False

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))


@dataclass(frozen=True)
class CircuitSchedule:
    n_qubits: int
    layers: tuple
    crosstalk: np.ndarray | None = None  # unitary (d x d) or superoperator (d^2 x d^2)
    gate_crosstalk_channel: np.ndarray | None = None
    idle: channels.IdleNoiseParams | None = None
    engine: str = "density"
    crosstalk_before_gates: bool = False

    def __post_init__(self):
        if self.engine not in ("pure", "density"):
            raise ValueError(f"unknown engine {self.engine!r}")
        object.__setattr__(self, "layers", tuple(self.layers))
        d = 2**self.n_qubits
        for ch in (self.crosstalk, self.gate_crosstalk_channel):
            if ch is not None and ch.shape not in ((d, d), (d * d, d * d)):
                raise ValueError("crosstalk operator dimension does not match qubit count")
        if self.engine == "pure":
            for ch in (self.crosstalk, self.gate_crosstalk_channel):
                if ch is not None and (ch.shape != (d, d) or not ops.is_unitary(ch, atol=1e-9)):
                    raise ValueError("pure engine requires a unitary crosstalk operator")
            if self.idle is not None and (self.idle.T1 != np.inf or self.idle.t_dephase != np.inf):
                raise ValueError("pure engine supports only the unitary (ZZ) part of idle noise")


@dataclass(frozen=True)
class PerturbationPattern:
    """Layer indices (within the detection window) hit by crosstalk events."""

    m: int
    layer_indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.layer_indices)
        if len(idx) != self.m or list(idx) != sorted(set(idx)):
            raise ValueError("layer indices must be m strictly increasing values")
        object.__setattr__(self, "layer_indices", idx)


@dataclass(frozen=True)
class ShotRecord:
    bitstring: str
    flag: int
    perturbed: bool

    def __post_init__(self):
        if any(c not in "01" for c in self.bitstring) or self.flag not in (0, 1):
            raise ValueError("bit values must be 0 or 1")


def _idle_ops(schedule: CircuitSchedule):
    """Precompute the per-layer idle operator for the schedule's engine."""
    p = schedule.idle
    if p is None:
        return None
    if schedule.engine == "pure":
        if p.alpha == 0.0:
            return None
        return channels.zz_coupling_unitary(p.alpha, schedule.n_qubits)
    return channels.idle_channel_superop(p, schedule.n_qubits)


def _apply_unitary(state: np.ndarray, u: np.ndarray, pure: bool) -> np.ndarray:
    return u @ state if pure else u @ state @ u.conj().T


def _apply_crosstalk(state: np.ndarray, ch: np.ndarray, pure: bool) -> np.ndarray:
    if pure:
        return ch @ state
    if ch.shape[0] == state.shape[0]:
        return ch @ state @ ch.conj().T
    return ops.devectorize(ch @ ops.vectorize(state))


def evolve(schedule: CircuitSchedule, initial: np.ndarray) -> np.ndarray:
    """Run the schedule: per layer, gates then idle step then crosstalk event
    (order per the schedule's ``crosstalk_before_gates`` flag).

    Pure engine takes/returns state vectors; density engine density matrices.
    """
    pure = schedule.engine == "pure"
    n = schedule.n_qubits
    state = np.asarray(initial, dtype=complex).copy()
    expected = 2**n if pure else (2**n, 2**n)
    if (state.shape[0] if pure else state.shape) != expected:
        raise ValueError("initial state dimension does not match schedule")
    idle_op = _idle_ops(schedule)
    for layer in schedule.layers:
        if layer.crosstalk and schedule.crosstalk is None:
            raise ValueError("layer flags a crosstalk event but no channel is configured")
        if layer.crosstalk and schedule.crosstalk_before_gates:
            state = _apply_crosstalk(state, schedule.crosstalk, pure)
        for g in layer.gates:
            if g.kind in ("measure", "reset"):
                raise ValueError("mid-circuit measure/reset must go through the branch helpers")
            state = _apply_unitary(state, protocol.gate_unitary(g, n), pure)
        if layer.gate_crosstalk:
            if schedule.gate_crosstalk_channel is None:
                raise ValueError("layer flags gate crosstalk but no channel is configured")
            state = _apply_crosstalk(state, schedule.gate_crosstalk_channel, pure)
        if layer.idle and idle_op is not None:
            if pure:
                state = idle_op @ state
            else:
                state = ops.devectorize(idle_op @ ops.vectorize(state))
        if layer.crosstalk and not schedule.crosstalk_before_gates:
            state = _apply_crosstalk(state, schedule.crosstalk, pure)
    return state


# ---------------------------------------------------------------------------
# Measurement


def measurement_probabilities(state: np.ndarray, qubits) -> dict:
    """Exact Born probabilities of bitstrings on ``qubits`` (plan order)."""
    qubits = list(qubits)
    if state.ndim == 1:
        probs_full = np.abs(state) ** 2
    else:
        probs_full = np.real(np.diag(state))
    n = ops.num_qubits(probs_full.size)
    probs_full = probs_full.reshape([2] * n)
    rest = [q for q in range(n) if q not in qubits]
    marg = np.transpose(probs_full, qubits + rest).reshape([2] * len(qubits) + [-1]).sum(axis=-1)
    out = {}
    for idx in np.ndindex(*([2] * len(qubits))):
        p = float(marg[idx])
        if p > 0:
            out["".join(map(str, idx))] = p
    return out


def sample_measurement(state: np.ndarray, qubits, shots: int, rng) -> dict:
    """Multinomial bitstring counts; deterministic for a seeded Generator."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    probs = measurement_probabilities(state, qubits)
    keys = sorted(probs)
    p = np.array([probs[k] for k in keys])
    p = p / p.sum()
    counts = rng.multinomial(shots, p)
    return {k: int(c) for k, c in zip(keys, counts) if c > 0}


def place_perturbations(window: int, m: int, rng) -> PerturbationPattern:
    """Uniformly choose m distinct layers out of ``window``."""
    if m > window or m < 0:
        raise ValueError(f"cannot place {m} events in a {window}-layer window")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    idx = np.sort(rng.choice(window, size=m, replace=False))
    return PerturbationPattern(m=m, layer_indices=tuple(int(i) for i in idx))


def postselect(records) -> tuple:
    """Keep flag-0 shots; also report the discarded fraction."""
    records = list(records)
    kept = [r for r in records if r.flag == 0]
    discard = 0.0 if not records else 1.0 - len(kept) / len(records)
    return kept, discard


# ---------------------------------------------------------------------------
# Reductions and mid-circuit projection helpers


def partial_trace(rho: np.ndarray, keep) -> np.ndarray:
    """Reduced density operator on the ``keep`` qubits (in the given order)."""
    keep = list(keep)
    n = ops.num_qubits(rho.shape[0])
    drop = [q for q in range(n) if q not in keep]
    t = rho.reshape([2] * (2 * n))
    for q in sorted(drop, reverse=True):
        t = np.trace(t, axis1=q, axis2=q + t.ndim // 2)
    # remaining axes are the kept qubits in ascending order; restore requested order
    asc = sorted(keep)
    perm = [asc.index(q) for q in keep]
    t = np.transpose(t, perm + [len(keep) + p for p in perm])
    d = 2 ** len(keep)
    return t.reshape((d, d))


def pauli_expectation(rho: np.ndarray, pauli) -> float:
    """tr(P rho) for a Pauli string label or explicit Hermitian operator."""
    p = ops.pauli_string_matrix(pauli) if isinstance(pauli, str) else pauli
    val = np.trace(p @ rho)
    if abs(val.imag) > 1e-9:
        raise ValueError("expectation of a non-Hermitian operator")
    return float(val.real)


def project_qubit(rho: np.ndarray, qubit: int, outcome: int) -> np.ndarray:
    """Unnormalized projection of one qubit onto |outcome>; the trace of the
    result is the branch probability."""
    n = ops.num_qubits(rho.shape[0])
    proj = np.zeros((2, 2), dtype=complex)
    proj[outcome, outcome] = 1.0
    p = ops.expand_operator(proj, [qubit], n)
    return p @ rho @ p


def reset_qubit(rho: np.ndarray, qubit: int) -> np.ndarray:
    """Trace out one qubit and re-prepare it in |0> (trace-preserving)."""
    n = ops.num_qubits(rho.shape[0])
    rest = [q for q in range(n) if q != qubit]
    reduced = partial_trace(rho, rest)
    zero = np.zeros((2, 2), dtype=complex)
    zero[0, 0] = 1.0
    full = np.kron(zero, reduced)  # qubit first, then rest in order
    # move the fresh qubit from position 0 back to `qubit`
    order = [qubit] + rest
    t = full.reshape([2] * (2 * n))
    perm = [order.index(q) for q in range(n)]
    t = np.transpose(t, perm + [n + p for p in perm])
    return t.reshape((2**n, 2**n))
