"""Rotation-axis and per-gate-angle estimation from three-point single-qubit
Bloch trajectories: circumcenter fit in barycentric coordinates, cross-product
axis recovery, and the per-gate angle from the dot product about the center.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import ops, sim

AREA_TOL = 1e-9
RADIUS_TOL = 1e-6


@dataclass(frozen=True)
class BlochPoint:
    """A Bloch-vector sample: coordinates, timestep index, gates per step."""

    coords: np.ndarray
    step: int = 0
    g: int = 1

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.shape != (3,):
            raise ValueError("Bloch coordinates must be a 3-vector")
        if np.linalg.norm(coords) > 1 + 1e-9:
            raise ValueError("Bloch vector lies outside the unit ball")
        if self.g < 1:
            raise ValueError("gates-per-step must be at least 1")
        object.__setattr__(self, "coords", coords)


@dataclass(frozen=True)
class AxisFit:
    """Recovered rotation axis, circle center, per-gate angle, and the
    conditioning diagnostics of the underlying triangle."""

    axis: np.ndarray
    center: np.ndarray
    delta: float
    min_separation: float
    circumradius: float

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ValueError("fitted axis must be unit-norm")
        if self.delta < 0:
            raise ValueError("per-gate angle must be nonnegative")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))


def bloch_coordinates(rho: np.ndarray, qubit: int, step: int = 0, g: int = 1) -> BlochPoint:
    """(tr(X rho_i), tr(Y rho_i), tr(Z rho_i)) from the reduced operator."""
    reduced = sim.partial_trace(rho, [qubit]) if rho.shape[0] > 2 else rho
    coords = [sim.pauli_expectation(reduced, p) for p in ("X", "Y", "Z")]
    return BlochPoint(coords=np.array(coords), step=step, g=g)


def _coords(p) -> np.ndarray:
    return p.coords if isinstance(p, BlochPoint) else np.asarray(p, dtype=float)


def circumcenter(p1, p2, p3) -> np.ndarray:
    """Circumcenter of three points in 3-space via barycentric weights
    b_mu = h_mu^2 (sum_{nu != mu} h_nu^2 - h_mu^2), h_mu the side opposite
    point mu."""
    x = np.stack([_coords(p1), _coords(p2), _coords(p3)])
    h = np.array(
        [
            np.linalg.norm(x[1] - x[2]),
            np.linalg.norm(x[2] - x[0]),
            np.linalg.norm(x[0] - x[1]),
        ]
    )
    area = 0.5 * np.linalg.norm(np.cross(x[1] - x[0], x[2] - x[0]))
    if area < AREA_TOL:
        raise ValueError(
            f"degenerate Bloch triangle (area {area:.3e} < {AREA_TOL:.0e}); "
            f"side lengths {h.round(6).tolist()}"
        )
    h2 = h**2
    b = h2 * (h2.sum() - 2 * h2)
    return (b[:, None] * x).sum(axis=0) / b.sum()


def fit_rotation_axis(points) -> AxisFit:
    """Axis, center, and per-gate angle from three trajectory points.

    The axis sign is right-handed with respect to trajectory order: rotating
    the earliest point toward the next about the returned axis goes the
    short way around.
    """
    if len(points) != 3:
        raise ValueError("exactly three Bloch points are required")
    pts = [_coords(p) for p in points]
    center = circumcenter(*pts)
    v = [p - center for p in pts]
    radius = float(np.mean([np.linalg.norm(vi) for vi in v]))
    if radius < RADIUS_TOL:
        raise ValueError(f"circumradius {radius:.3e} below {RADIUS_TOL:.0e}")
    cross = np.cross(v[0], v[1])
    norm = np.linalg.norm(cross)
    if norm < AREA_TOL:
        raise ValueError("degenerate cross product in axis fit")
    axis = cross / norm
    g = points[0].g if isinstance(points[0], BlochPoint) else 1
    delta = angle_per_gate(points, g=g, i=0, j=1, center=center)
    min_sep = float(
        min(np.linalg.norm(pts[a] - pts[b]) for a in range(3) for b in range(a + 1, 3))
    )
    return AxisFit(axis=axis, center=center, delta=delta, min_separation=min_sep, circumradius=radius)


def angle_per_gate(points, g: int, i: int, j: int, center) -> float:
    """Per-gate rotation angle from two trajectory points about ``center``:

        delta = arccos[ (x_i - O).(x_j - O) / (|x_i - O| |x_j - O|) ] / (g (j - i))

    Valid (no aliasing) only while g*(j-i)*delta < pi.
    """
    if not i < j:
        raise ValueError("point indices must satisfy i < j")
    if g < 1:
        raise ValueError("gates-per-step must be at least 1")
    o = np.asarray(center, dtype=float)
    vi = _coords(points[i]) - o
    vj = _coords(points[j]) - o
    ni, nj = np.linalg.norm(vi), np.linalg.norm(vj)
    if min(ni, nj) < RADIUS_TOL:
        raise ValueError("zero-radius vector in angle estimate")
    cosang = np.clip(np.dot(vi, vj) / (ni * nj), -1.0, 1.0)
    return float(np.arccos(cosang) / (g * (j - i)))


def read_bloch_csv(path) -> dict:
    """Parse tomography expectations (columns qubit, step, g, x, y, z) into
    per-qubit BlochPoint lists ordered by step."""
    rows: dict = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            q = int(rec["qubit"])
            pt = BlochPoint(
                coords=np.array([float(rec["x"]), float(rec["y"]), float(rec["z"])]),
                step=int(rec["step"]),
                g=int(rec["g"]),
            )
            rows.setdefault(q, []).append(pt)
    return {q: sorted(pts, key=lambda p: p.step) for q, pts in rows.items()}
