"""Dense complex-matrix primitives: Pauli strings, Kronecker products, matrix
exponentials, axis-angle rotations, and the vectorization convention.

Conventions fixed here and used everywhere else in the package:

- Qubit 0 is the *leftmost* tensor factor. A Pauli string label reads left to
  right in qubit order, and measurement bitstrings follow the same order.
- Vectorization is column-stacking, so that

      vec(A rho B^dag) = (conj(B) kron A) vec(rho).

- ``rotation_operator(axis, angle)`` uses the half-angle convention
  ``exp(-i*(angle/2)*(axis . sigma))``, i.e. ``angle`` is the Bloch-sphere
  rotation angle.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

ATOL_UNITARY = 1e-10
ATOL_STATE = 1e-10
ATOL_DENSITY = 1e-10
EIG_FLOOR = -1e-9

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

SIGMA = np.stack([PAULI["X"], PAULI["Y"], PAULI["Z"]])


def num_qubits(dim: int) -> int:
    """Number of qubits for a power-of-two dimension; raises otherwise."""
    q = int(round(np.log2(dim)))
    if 2**q != dim or q < 1:
        raise ValueError(f"dimension {dim} is not a power of two >= 2")
    return q


def pauli_string_matrix(label: str) -> np.ndarray:
    """Tensor product of single-qubit Paulis, leftmost character = qubit 0."""
    if not label:
        raise ValueError("empty Pauli string label")
    out = np.array([[1.0 + 0j]])
    for ch in label:
        if ch not in PAULI:
            raise ValueError(f"invalid Pauli character {ch!r} in {label!r}")
        out = np.kron(out, PAULI[ch])
    return out


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two operators."""
    return np.kron(a, b)


def is_hermitian(a: np.ndarray, atol: float = 1e-12) -> bool:
    return bool(np.allclose(a, a.conj().T, atol=atol))


def is_unitary(u: np.ndarray, atol: float = ATOL_UNITARY) -> bool:
    d = u.shape[0]
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(d))) < atol)


def matrix_exp(a: np.ndarray) -> np.ndarray:
    """Matrix exponential.

    Uses an eigendecomposition when the input is Hermitian or anti-Hermitian
    (exact for Hamiltonian evolution) and scaling-and-squaring Pade otherwise
    (Lindbladians are generally non-normal).
    """
    a = np.asarray(a, dtype=complex)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite entries in matrix_exp input")
    if is_hermitian(a):
        w, v = np.linalg.eigh(a)
        return (v * np.exp(w)) @ v.conj().T
    if is_hermitian(1j * a):
        w, v = np.linalg.eigh(1j * a)
        return (v * np.exp(-1j * w)) @ v.conj().T
    return scipy.linalg.expm(a)


def rotation_operator(axis, angle: float) -> np.ndarray:
    """Single-qubit rotation ``exp(-i*(angle/2)*(axis . sigma))``."""
    axis = np.asarray(axis, dtype=float)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
        raise ValueError("rotation axis must be a unit 3-vector")
    n_dot_sigma = np.tensordot(axis, SIGMA, axes=1)
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * n_dot_sigma


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(rho).reshape(-1, order="F")


def devectorize(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vectorize` for square matrices."""
    v = np.asarray(v).reshape(-1)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValueError("vector length is not a perfect square")
    return v.reshape((d, d), order="F")


def sandwich_superop(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator M with M vec(rho) = vec(A rho B^dag)."""
    if a.shape != b.shape:
        raise ValueError("operator dimension mismatch in sandwich_superop")
    return np.kron(b.conj(), a)


def expand_operator(op: np.ndarray, targets, n_qubits: int) -> np.ndarray:
    """Embed an operator acting on ``targets`` into the full n-qubit space."""
    targets = list(targets)
    k = len(targets)
    if op.shape != (2**k, 2**k):
        raise ValueError("operator shape does not match target count")
    if len(set(targets)) != k or any(t < 0 or t >= n_qubits for t in targets):
        raise ValueError(f"invalid target qubits {targets} for n={n_qubits}")
    rest = [q for q in range(n_qubits) if q not in targets]
    order = targets + rest
    full = np.kron(op, np.eye(2 ** (n_qubits - k), dtype=complex))
    t = full.reshape([2] * (2 * n_qubits))
    perm = [order.index(q) for q in range(n_qubits)]
    t = np.transpose(t, perm + [n_qubits + p for p in perm])
    return np.ascontiguousarray(t.reshape((2**n_qubits, 2**n_qubits)))


def check_state(psi: np.ndarray, atol: float = ATOL_STATE) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    num_qubits(psi.size)
    if abs(np.linalg.norm(psi) - 1.0) > atol:
        raise ValueError("state vector is not normalized")
    return psi


def check_density(rho: np.ndarray, atol: float = ATOL_DENSITY) -> np.ndarray:
    """Validate Hermiticity, unit trace, and positivity of a density matrix."""
    rho = np.asarray(rho, dtype=complex)
    num_qubits(rho.shape[0])
    if np.max(np.abs(rho - rho.conj().T)) > atol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > atol:
        raise ValueError("density matrix trace is not 1")
    if np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2)) < EIG_FLOOR:
        raise ValueError("density matrix has a significantly negative eigenvalue")
    return rho


def basis_state(n_qubits: int, index: int = 0) -> np.ndarray:
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[index] = 1.0
    return psi


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random full-rank (by default) density matrix."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)
