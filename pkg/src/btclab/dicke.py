"""Collective spin operators on the symmetric (Dicke) sector.

N spin-1/2 particles restricted to the maximal-spin sector S = N/2 live in an
(N+1)-dimensional space spanned by |S, m> with m = S, S-1, ..., -S.  Index 0
corresponds to m = +S throughout the package, so matrix layouts and file
schemas are fixed once here.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CollectiveSpinBasis",
    "build_basis",
    "spin_operator",
    "spin_projection",
    "projection_eigenbasis",
]

_AXES = ("x", "y", "z", "plus", "minus")


@dataclass(frozen=True)
class CollectiveSpinBasis:
    """The symmetric spin sector of N spin-1/2 particles.

    Attributes:
        n_spins: particle number N (>= 1)
        total_spin: S = N/2
        dim: N + 1
        m_values: eigenvalues of Sz in descending order, index 0 <-> m = +S
    """

    n_spins: int
    total_spin: float = field(init=False)
    dim: int = field(init=False)
    m_values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.n_spins) != self.n_spins or self.n_spins < 1:
            raise ValueError(f"n_spins must be a positive integer, got {self.n_spins!r}")
        object.__setattr__(self, "n_spins", int(self.n_spins))
        s = self.n_spins / 2.0
        object.__setattr__(self, "total_spin", s)
        object.__setattr__(self, "dim", self.n_spins + 1)
        m = s - np.arange(self.dim, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "m_values", m)


def build_basis(n_spins: int) -> CollectiveSpinBasis:
    """Construct the symmetric sector for ``n_spins`` particles."""
    return CollectiveSpinBasis(n_spins)


def spin_operator(basis: CollectiveSpinBasis, axis: str) -> np.ndarray:
    """Collective spin operator as a dense (dim x dim) complex matrix.

    ``axis`` is one of 'x', 'y', 'z', 'plus', 'minus'.  The ladder operators
    follow S+|S,m> = sqrt(S(S+1) - m(m+1)) |S,m+1>, and
    Sx = (S+ + S-)/2, Sy = (S+ - S-)/(2i).
    """
    if axis not in _AXES:
        raise ValueError(f"unknown axis {axis!r}; expected one of {_AXES}")
    s = basis.total_spin
    m = basis.m_values
    if axis == "z":
        return np.diag(m).astype(complex)
    # raising operator: index i holds m_i = S - i, so m_i + 1 sits at index i-1
    sp = np.zeros((basis.dim, basis.dim), dtype=complex)
    for i in range(1, basis.dim):
        sp[i - 1, i] = np.sqrt(s * (s + 1) - m[i] * (m[i] + 1))
    if axis == "plus":
        return sp
    sm = sp.conj().T
    if axis == "minus":
        return sm
    if axis == "x":
        return 0.5 * (sp + sm)
    return (sp - sm) / 2j


def spin_projection(basis: CollectiveSpinBasis, theta: float, phi: float) -> np.ndarray:
    """Spin component along the unit vector (theta, phi) in spherical coordinates.

    S_n = sin(theta)cos(phi) Sx + sin(theta)sin(phi) Sy + cos(theta) Sz.
    Hermitian with the integer/half-integer ladder spectrum {-S, ..., +S}.
    """
    if not (np.isfinite(theta) and np.isfinite(phi)):
        raise ValueError("angles must be finite")
    nx = np.sin(theta) * np.cos(phi)
    ny = np.sin(theta) * np.sin(phi)
    nz = np.cos(theta)
    return (
        nx * spin_operator(basis, "x")
        + ny * spin_operator(basis, "y")
        + nz * spin_operator(basis, "z")
    )


def projection_eigenbasis(
    basis: CollectiveSpinBasis, theta: float, phi: float, orth_tol: float = 1e-10
):
    """Eigenbasis of the projected spin component S_n.

    Returns ``(s_values, vectors)`` where ``s_values`` is ascending
    (-S, ..., +S) and ``vectors[:, i]`` is the eigenvector of eigenvalue
    ``s_values[i]``.  The phase of each vector is fixed by making its
    largest-magnitude component real and positive, so measurement
    probability vectors are reproducible bit-for-bit.
    """
    op = spin_projection(basis, theta, phi)
    s_values, vectors = np.linalg.eigh(op)
    vectors = np.array(vectors, dtype=complex)
    for i in range(vectors.shape[1]):
        col = vectors[:, i]
        k = int(np.argmax(np.abs(col)))
        ph = col[k] / abs(col[k])
        vectors[:, i] = col / ph
    gram = vectors.conj().T @ vectors
    err = np.max(np.abs(gram - np.eye(basis.dim)))
    if err > orth_tol:
        raise RuntimeError(f"projection eigenbasis not orthonormal: deviation {err:.3e}")
    return s_values, vectors
