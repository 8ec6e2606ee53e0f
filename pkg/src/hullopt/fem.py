"""Bilinear plane-stress quadrilaterals and sparse assembly.

Internal units are N and mm throughout: coordinates in mm, Young's modulus
in MPa (N/mm^2), thickness in mm, so displacements come out in mm and
stresses in MPa.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import HullOptError

GAUSS_2x2 = np.array([-1.0, 1.0]) / np.sqrt(3.0)

# Reference-node ordering: counter-clockwise from (-1, -1).
_XI = np.array([-1.0, 1.0, 1.0, -1.0])
_ETA = np.array([-1.0, -1.0, 1.0, 1.0])


class SolverError(HullOptError, RuntimeError):
    """Raised when the stiffness system cannot be factorized."""


def plane_stress_matrix(E: float, nu: float) -> np.ndarray:
    return E / (1.0 - nu**2) * np.array(
        [[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]]
    )


def _shape_gradients(xy: np.ndarray, xi: float, eta: float):
    """Return (B, detJ) of a Q4 element at reference point (xi, eta)."""
    dN_dxi = 0.25 * _XI * (1.0 + eta * _ETA)
    dN_deta = 0.25 * _ETA * (1.0 + xi * _XI)
    J = np.array([dN_dxi @ xy, dN_deta @ xy])
    detJ = np.linalg.det(J)
    if detJ <= 0.0:
        raise ValueError("element has non-positive Jacobian (check node ordering)")
    dN = np.linalg.solve(J, np.vstack([dN_dxi, dN_deta]))
    B = np.zeros((3, 8))
    B[0, 0::2] = dN[0]
    B[1, 1::2] = dN[1]
    B[2, 0::2] = dN[1]
    B[2, 1::2] = dN[0]
    return B, detJ


def q4_stiffness(xy: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Unit-thickness stiffness of one Q4 element, 2x2 Gauss quadrature.

    Parameters
    ----------
    xy : (4, 2) array
        Node coordinates, counter-clockwise.
    D : (3, 3) array
        Plane-stress constitutive matrix.
    """
    K = np.zeros((8, 8))
    for xi in GAUSS_2x2:
        for eta in GAUSS_2x2:
            B, detJ = _shape_gradients(xy, xi, eta)
            K += B.T @ D @ B * detJ
    return K


def q4_centroid_strain_operator(xy: np.ndarray) -> np.ndarray:
    B, _ = _shape_gradients(xy, 0.0, 0.0)
    return B


class PlaneStressAssembler:
    """Precomputes per-element unit stiffnesses so that assembly for a new
    thickness vector is a single scaled sparse sum."""

    def __init__(self, nodes: np.ndarray, connectivity: np.ndarray, E: float, nu: float):
        self.nodes = np.asarray(nodes, dtype=float)
        self.connectivity = np.asarray(connectivity, dtype=np.int64)
        self.n_dof = 2 * len(self.nodes)
        self.D = plane_stress_matrix(E, nu)

        n_el = len(self.connectivity)
        self.k_unit = np.empty((n_el, 8, 8))
        self.b_centroid = np.empty((n_el, 3, 8))
        cache: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}
        for e, conn in enumerate(self.connectivity):
            xy = self.nodes[conn]
            # rectangles of equal size share the same matrices
            key = tuple(np.round(xy - xy[0], 9).ravel())
            if key not in cache:
                cache[key] = (q4_stiffness(xy, self.D), q4_centroid_strain_operator(xy))
            self.k_unit[e], self.b_centroid[e] = cache[key]

        dofs = np.empty((n_el, 8), dtype=np.int64)
        dofs[:, 0::2] = 2 * self.connectivity
        dofs[:, 1::2] = 2 * self.connectivity + 1
        self.element_dofs = dofs
        self._rows = np.repeat(dofs, 8, axis=1).ravel()
        self._cols = np.tile(dofs, (1, 8)).ravel()

    def stiffness(self, thickness: np.ndarray) -> sp.csc_matrix:
        data = (np.asarray(thickness, dtype=float)[:, None, None] * self.k_unit).ravel()
        K = sp.coo_matrix((data, (self._rows, self._cols)), shape=(self.n_dof, self.n_dof))
        return K.tocsc()

    def solve(self, thickness: np.ndarray, loads: np.ndarray, fixed_dofs: np.ndarray) -> np.ndarray:
        """Solve K u = f for each column of ``loads`` with homogeneous Dirichlet
        conditions on ``fixed_dofs``. Returns displacements (n_dof, n_cases)."""
        loads = np.atleast_2d(np.asarray(loads, dtype=float).T).T
        self.check_singular(fixed_dofs)
        fixed = np.unique(np.asarray(fixed_dofs, dtype=np.int64))
        free = np.setdiff1d(np.arange(self.n_dof), fixed)
        K = self.stiffness(thickness)
        Kff = K[free][:, free].tocsc()
        u = np.zeros((self.n_dof, loads.shape[1]))
        if not np.any(loads[free]):
            return u
        try:
            lu = spla.splu(Kff)
        except RuntimeError as exc:
            raise SolverError(f"stiffness matrix is singular: {exc}") from exc
        sol = lu.solve(loads[free])
        if not np.all(np.isfinite(sol)):
            raise SolverError("stiffness matrix is singular (non-finite solution)")
        u[free] = sol
        return u

    def centroid_stress(self, u: np.ndarray) -> np.ndarray:
        """Element-centroid stresses (sigma_x, sigma_y, tau_xy), shape (n_el, 3)."""
        ue = u[self.element_dofs]
        strain = np.einsum("eij,ej->ei", self.b_centroid, ue)
        return strain @ self.D.T

    def check_singular(self, fixed_dofs) -> None:
        if len(np.unique(fixed_dofs)) < 3:
            raise SolverError("fewer than 3 constrained dofs: rigid-body modes remain")
