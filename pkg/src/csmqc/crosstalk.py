"""Synthetic crosstalk unitaries, H/S/A-parameterized crosstalk channels,
parameter-set ingestion/amplification, and geometry-distance statistics.

Angle convention: ``CrosstalkSpec.theta`` and ``phi`` multiply the rotation
generators directly, ``U = exp(-i*theta*n.sigma - ...)``, so the Bloch-sphere
rotation produced on a single qubit per event is ``2*theta``. Callers that
think in Bloch angles (the protocol layer does) must pass half their angle.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from . import channels, ops

PAIR_BASIS = [a + b for a in "XYZ" for b in "XYZ"]  # XX, XY, ..., ZZ


def chain_pairs(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)]


@dataclass(frozen=True)
class CrosstalkSpec:
    """Synthetic coherent-crosstalk parameters for one event.

    single_axes: (n, 3) unit vectors, one rotation axis per target qubit.
    pair_axes: mapping (i, j) -> unit 9-vector over the two-qubit Pauli basis.
    theta, phi: single- and two-qubit rotation rates (generator coefficients).
    """

    single_axes: np.ndarray
    theta: float
    phi: float = 0.0
    pair_axes: dict = field(default_factory=dict)
    pair_topology: tuple = ()

    def __post_init__(self):
        axes = np.atleast_2d(np.asarray(self.single_axes, dtype=float))
        if axes.shape[1] != 3:
            raise ValueError("single_axes must be (n, 3)")
        if np.max(np.abs(np.linalg.norm(axes, axis=1) - 1.0)) > 1e-9:
            raise ValueError("single-qubit axes must be unit vectors")
        if self.theta < 0 or self.phi < 0:
            raise ValueError("rotation rates must be nonnegative")
        pairs = tuple(tuple(p) for p in (self.pair_topology or self.pair_axes.keys()))
        pair_axes = {}
        for p, v in self.pair_axes.items():
            v = np.asarray(v, dtype=float)
            if v.shape != (9,):
                raise ValueError("pair axes must be 9-vectors")
            if abs(np.linalg.norm(v) - 1.0) > 1e-9:
                raise ValueError("pair axes must be unit vectors")
            pair_axes[tuple(p)] = v
        object.__setattr__(self, "single_axes", axes)
        object.__setattr__(self, "pair_axes", pair_axes)
        object.__setattr__(self, "pair_topology", pairs)

    @property
    def n_qubits(self) -> int:
        return self.single_axes.shape[0]


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def sample_random_axes(n_qubits: int, pairs, rng) -> tuple[np.ndarray, dict]:
    """Uniform random unit axes: a 3-vector per qubit, a 9-vector per pair.

    Deterministic for a given Generator state (pass np.random.default_rng(seed)).
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    single = np.stack([_unit(rng.normal(size=3)) for _ in range(n_qubits)])
    pair = {tuple(p): _unit(rng.normal(size=9)) for p in pairs}
    return single, pair


def crosstalk_generator(spec: CrosstalkSpec, n: int) -> np.ndarray:
    """Hermitian generator G with U_event = exp(-i G)."""
    if spec.n_qubits != n:
        raise ValueError("spec does not cover the requested qubit count")
    dim = 2**n
    gen = np.zeros((dim, dim), dtype=complex)
    if spec.theta != 0.0:
        for i in range(n):
            for comp, pauli in enumerate("XYZ"):
                if spec.single_axes[i, comp] != 0.0:
                    label = "".join(pauli if q == i else "I" for q in range(n))
                    gen += spec.theta * spec.single_axes[i, comp] * ops.pauli_string_matrix(label)
    if spec.phi != 0.0:
        for (i, j) in spec.pair_topology:
            axis = spec.pair_axes[(i, j)]
            for comp, pq in enumerate(PAIR_BASIS):
                if axis[comp] != 0.0:
                    label = "".join(
                        pq[0] if q == i else pq[1] if q == j else "I" for q in range(n)
                    )
                    gen += spec.phi * axis[comp] * ops.pauli_string_matrix(label)
    return gen


def synthetic_crosstalk_unitary(spec: CrosstalkSpec, n: int) -> np.ndarray:
    """U_event = exp(-i*theta*sum_i n_i.sigma_i - i*phi*sum_ij m_ij.sigma_ij)."""
    return ops.matrix_exp(-1j * crosstalk_generator(spec, n))


# ---------------------------------------------------------------------------
# H/S/A parameter sets


@dataclass(frozen=True)
class HsaEntry:
    targets: tuple  # (i,) or (i, j)
    kind: str  # H | S | A
    pauli: str  # non-identity Paulis on the targets, e.g. "X" or "XY"
    coeff: float
    pauli2: str | None = None  # second Pauli for affine terms

    def __post_init__(self):
        if self.kind not in channels.HSA_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if len(self.targets) not in (1, 2) or len(self.pauli) != len(self.targets):
            raise ValueError("pauli label length must match target count")
        if self.kind == "A" and self.pauli2 is None:
            raise ValueError("affine entries require an explicit Pauli pair")
        if self.kind == "S" and self.coeff < 0:
            raise ValueError("stochastic coefficients must be nonnegative")
        if not np.isfinite(self.coeff):
            raise ValueError("non-finite coefficient")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))


@dataclass(frozen=True)
class HsaParameterSet:
    entries: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    @classmethod
    def from_json(cls, text: str) -> "HsaParameterSet":
        doc = json.loads(text)
        entries = [
            HsaEntry(
                targets=tuple(e["targets"]),
                kind=e["kind"],
                pauli=e["pauli"],
                coeff=e["coeff"],
                pauli2=e.get("pauli2"),
            )
            for e in doc["entries"]
        ]
        return cls(entries=entries, metadata=doc.get("metadata", {}))

    def to_json(self) -> str:
        doc = {
            "entries": [
                {
                    "targets": list(e.targets),
                    "kind": e.kind,
                    "pauli": e.pauli,
                    "coeff": e.coeff,
                    **({"pauli2": e.pauli2} if e.pauli2 is not None else {}),
                }
                for e in self.entries
            ],
            "metadata": self.metadata,
        }
        return json.dumps(doc, indent=2)


def _full_label(targets, pauli: str, n: int) -> str:
    label = ["I"] * n
    for t, ch in zip(targets, pauli):
        label[t] = ch
    return "".join(label)


def hsa_lindbladian(params: HsaParameterSet, n_qubits: int) -> np.ndarray:
    """Net Lindbladian superoperator for one crosstalk event."""
    dim = 2**n_qubits
    terms = []
    for e in params.entries:
        if any(t >= n_qubits for t in e.targets):
            raise ValueError(f"entry targets {e.targets} exceed qubit count {n_qubits}")
        label = _full_label(e.targets, e.pauli, n_qubits)
        if e.kind == "A":
            label2 = _full_label(e.targets, e.pauli2, n_qubits)
            terms.append(("A", (label, label2), e.coeff))
        else:
            terms.append((e.kind, (label,), e.coeff))
    return channels.build_lindbladian(channels.LindbladGenerator(terms), dim)


def hsa_crosstalk_channel(params: HsaParameterSet, n_qubits: int) -> np.ndarray:
    """Superoperator e^L for one crosstalk event."""
    return ops.matrix_exp(hsa_lindbladian(params, n_qubits))


def is_hamiltonian_only(params: HsaParameterSet) -> bool:
    return all(e.kind == "H" for e in params.entries)


def hsa_event_unitary(params: HsaParameterSet, n_qubits: int) -> np.ndarray:
    """Fast path: for H-only sets, e^L is conjugation by exp(-i sum eps_P P)."""
    if not is_hamiltonian_only(params):
        raise ValueError("unitary fast path requires Hamiltonian-only entries")
    dim = 2**n_qubits
    ham = np.zeros((dim, dim), dtype=complex)
    for e in params.entries:
        ham += e.coeff * ops.pauli_string_matrix(_full_label(e.targets, e.pauli, n_qubits))
    return ops.matrix_exp(-1j * ham)


def single_qubit_axes(params: HsaParameterSet, n_qubits: int) -> np.ndarray:
    """Per-qubit rotation axes implied by the single-qubit H coefficients.

    Rows are unit vectors (X, Y, Z components); zero rows stay zero.
    """
    vecs = np.zeros((n_qubits, 3))
    for e in params.entries:
        if e.kind == "H" and len(e.targets) == 1:
            vecs[e.targets[0], "XYZ".index(e.pauli)] += e.coeff
    norms = np.linalg.norm(vecs, axis=1)
    out = vecs.copy()
    nz = norms > 0
    out[nz] = vecs[nz] / norms[nz, None]
    return out


def amplify_parameters(params: HsaParameterSet, factor: float, mode: str = "all") -> HsaParameterSet:
    """Scale coefficients by ``factor``; mode 'single_H_only' touches only
    Hamiltonian entries with a single-qubit Pauli label."""
    if factor <= 0:
        raise ValueError("amplification factor must be positive")
    if mode not in ("all", "single_H_only"):
        raise ValueError(f"unknown amplification mode {mode!r}")
    entries = []
    for e in params.entries:
        scale = factor if mode == "all" or (e.kind == "H" and len(e.targets) == 1) else 1.0
        entries.append(HsaEntry(e.targets, e.kind, e.pauli, e.coeff * scale, e.pauli2))
    return HsaParameterSet(entries=entries, metadata=dict(params.metadata))


def mean_rotation_angle(params: HsaParameterSet, spectators, n_qubits: int) -> float:
    """Mean per-event Bloch rotation angle on the given spectator qubits,
    estimated the same way a tomography run would: three simulated Bloch
    points per qubit, circumcircle fit, angle per gate."""
    from . import characterize  # local import to avoid a cycle

    if is_hamiltonian_only(params):
        channel = hsa_event_unitary(params, n_qubits)
    else:
        channel = hsa_crosstalk_channel(params, n_qubits)
    axes = single_qubit_axes(params, n_qubits)
    # start each qubit well off its own rotation axis so the circle is wide
    state = np.array([[1.0 + 0j]])
    for q in range(n_qubits):
        ax = axes[q]
        if abs(ax[2]) < 0.9:
            state = np.kron(state, np.array([1.0, 0.0], dtype=complex))  # |0>
        else:
            state = np.kron(state, np.array([1.0, 1.0], dtype=complex) / np.sqrt(2))  # |+>
    rho = np.outer(state, state.conj())
    trajectory = [rho]
    for _ in range(3):
        trajectory.append(channels.apply_channel(channel, trajectory[-1]))
    angles = []
    for q in spectators:
        pts = [characterize.bloch_coordinates(r, q) for r in trajectory[1:]]
        center = characterize.circumcenter(pts[0].coords, pts[1].coords, pts[2].coords)
        angles.append(characterize.angle_per_gate(pts, g=1, i=0, j=1, center=center))
    return float(np.mean(angles))


def calibrate_amplification(
    params: HsaParameterSet,
    target_delta: float,
    spectators,
    n_qubits: int,
    mode: str = "all",
    tol: float = 1e-3,
    max_iter: int = 40,
) -> float:
    """Amplification factor so the mean per-spectator Bloch angle per event
    equals ``target_delta`` within ``tol``."""
    base = mean_rotation_angle(params, spectators, n_qubits)
    if base < 1e-9:
        raise ValueError("parameters induce no rotation on the spectators")
    factor = target_delta / base  # exact for pure single-H noise
    for _ in range(max_iter):
        angle = mean_rotation_angle(amplify_parameters(params, factor, mode), spectators, n_qubits)
        err = angle - target_delta
        if abs(err) < tol:
            return float(factor)
        factor *= target_delta / angle
    raise RuntimeError("amplification calibration did not converge")


def l2_norm(coeffs) -> float:
    """Euclidean magnitude of a coefficient vector."""
    return float(np.linalg.norm(np.asarray(coeffs, dtype=float)))


# ---------------------------------------------------------------------------
# Device geometry and distance statistics


@dataclass(frozen=True)
class DeviceGeometry:
    n_qubits: int
    edges: tuple
    action: tuple  # the two crosstalk-source qubits

    def __post_init__(self):
        if len(self.action) != 2:
            raise ValueError("action must name exactly two qubits")
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        object.__setattr__(self, "action", tuple(self.action))

    @classmethod
    def from_json(cls, text: str) -> "DeviceGeometry":
        doc = json.loads(text)
        return cls(n_qubits=doc["n"], edges=tuple(tuple(e) for e in doc["edges"]), action=tuple(doc["action"]))

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_qubits))
        g.add_edges_from(self.edges)
        return g


def _path_len(g: nx.Graph, a: int, b: int) -> int:
    try:
        return nx.shortest_path_length(g, a, b)
    except nx.NetworkXNoPath as exc:
        raise ValueError(f"qubits {a} and {b} are disconnected") from exc


def distance_single(geom: DeviceGeometry, v: int) -> int:
    """Minimum shortest-path length from either action qubit to v."""
    g = geom.graph()
    return min(_path_len(g, a, v) for a in geom.action)


def distance_double(geom: DeviceGeometry, t1: int, t2: int) -> int:
    """(min action-to-target path length) * (target-to-target path length)."""
    g = geom.graph()
    near = min(_path_len(g, a, t) for a in geom.action for t in (t1, t2))
    return near * _path_len(g, t1, t2)


def magnitude_vs_distance(params: HsaParameterSet, geom: DeviceGeometry):
    """Rows of (kind, n_targets, distance, mean L2 magnitude).

    Coefficients are grouped per (kind, target set) into a basis vector whose
    L2 norm is that target set's magnitude, then averaged per distance.
    """
    groups: dict = {}
    for e in params.entries:
        groups.setdefault((e.kind, e.targets), []).append(e.coeff)
    accum: dict = {}
    for (kind, targets), coeffs in groups.items():
        if len(targets) == 1:
            d = distance_single(geom, targets[0])
        else:
            d = distance_double(geom, targets[0], targets[1])
        accum.setdefault((kind, len(targets), d), []).append(l2_norm(coeffs))
    rows = [
        {"kind": kind, "n_targets": nt, "distance": d, "mean_magnitude": float(np.mean(mags))}
        for (kind, nt, d), mags in sorted(accum.items())
    ]
    return rows


def synthetic_hsa_parameters(
    n_qubits: int,
    single_coeff: float,
    pair_ratio: float,
    rng,
    pairs=None,
    stochastic_coeff: float = 0.0,
    metadata: dict | None = None,
) -> HsaParameterSet:
    """Random synthetic parameter set: per-qubit single-H axes with magnitude
    ``single_coeff``, chain-pair two-qubit H axes with magnitude
    ``pair_ratio * single_coeff``, and optional uniform stochastic terms."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    pairs = chain_pairs(n_qubits) if pairs is None else list(pairs)
    single, pair = sample_random_axes(n_qubits, pairs, rng)
    entries = []
    for q in range(n_qubits):
        for comp, pauli in enumerate("XYZ"):
            entries.append(HsaEntry((q,), "H", pauli, single_coeff * single[q, comp]))
    for (i, j) in pairs:
        for comp, pq in enumerate(PAIR_BASIS):
            entries.append(HsaEntry((i, j), "H", pq, pair_ratio * single_coeff * pair[(i, j)][comp]))
    if stochastic_coeff > 0:
        for q in range(n_qubits):
            for pauli in "XYZ":
                entries.append(HsaEntry((q,), "S", pauli, stochastic_coeff))
    return HsaParameterSet(entries=entries, metadata=metadata or {"source": "synthetic"})
