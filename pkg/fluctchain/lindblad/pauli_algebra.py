"""
Pauli-string algebra on n qubits.

Strings are encoded digit-wise (0 = identity, 1 = x, 2 = y, 3 = z); the flat
index of a string is sum_j alpha_j 4^(n-1-j), which matches the ordering of
np.kron(sigma_{alpha_1}, ..., sigma_{alpha_n}). Products use the XOR rule on
digits plus a phase i^e read from a table, so commutators are exact and
never densify.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Tuple
import logging

import numpy as np

logger = logging.getLogger(__name__)

LETTERS = 'IXYZ'
MAX_DENSE_QUBITS = 6

PAULI_MATRICES = np.array([
    [[1, 0], [0, 1]],
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)

# sigma^a sigma^b = i^PHASE_EXP[a, b] sigma^(a ^ b)
PHASE_EXP = np.array([
    [0, 0, 0, 0],
    [0, 0, 1, 3],
    [0, 3, 0, 1],
    [0, 1, 3, 0],
], dtype=np.int64)

I_POWERS = np.array([1, 1j, -1, -1j])


@lru_cache(maxsize=8)
def pauli_digits(n: int) -> np.ndarray:
    """All 4^n strings as a read-only (4^n, n) digit array in index order."""
    index = np.arange(4 ** n)
    digits = np.empty((4 ** n, n), dtype=np.int64)
    for site in range(n):
        digits[:, site] = (index // 4 ** (n - 1 - site)) % 4
    digits.setflags(write=False)
    return digits


def digits_to_index(digits: np.ndarray) -> np.ndarray:
    """Flat index of digit rows (last axis = sites)."""
    n = digits.shape[-1]
    weights = 4 ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return digits @ weights


def multiply_strings(left: np.ndarray, right: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Product of broadcastable digit arrays.

    Returns:
        Tuple of (product digits, phase exponent mod 4) with left*right = i^e * product
    """
    product = np.bitwise_xor(left, right)
    exponent = PHASE_EXP[left, right].sum(axis=-1) % 4
    return product, exponent


@dataclass
class PauliOperatorRep:
    """Operator sum_alpha c_alpha B_alpha on n qubits."""
    n: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.n < 1:
            raise ValueError(f"n must be >= 1 (got {self.n})")
        if self.coeffs.shape != (4 ** self.n,):
            raise ValueError(f"coeffs must have shape ({4 ** self.n},) for n={self.n} (got {self.coeffs.shape})")

    @classmethod
    def zero(cls, n: int) -> 'PauliOperatorRep':
        return cls(n, np.zeros(4 ** n, dtype=complex))

    @classmethod
    def identity(cls, n: int) -> 'PauliOperatorRep':
        coeffs = np.zeros(4 ** n, dtype=complex)
        coeffs[0] = 1.0
        return cls(n, coeffs)

    @classmethod
    def maximally_mixed(cls, n: int) -> 'PauliOperatorRep':
        """(I/2)^n."""
        coeffs = np.zeros(4 ** n, dtype=complex)
        coeffs[0] = 2.0 ** -n
        return cls(n, coeffs)

    @classmethod
    def from_labels(cls, n: int, terms: Dict[str, complex]) -> 'PauliOperatorRep':
        """
        Build from labelled strings, e.g. {'XX': 1, 'YY': 1}.

        Args:
            n: Qubit count
            terms: Mapping of n-letter labels over 'IXYZ' to coefficients

        Returns:
            PauliOperatorRep
        """
        coeffs = np.zeros(4 ** n, dtype=complex)
        for label, value in terms.items():
            label = label.upper()
            if len(label) != n or any(ch not in LETTERS for ch in label):
                raise ValueError(f"Invalid Pauli label '{label}' for n={n}")
            digits = np.array([LETTERS.index(ch) for ch in label], dtype=np.int64)
            coeffs[int(digits_to_index(digits))] += value
        return cls(n, coeffs)

    @classmethod
    def single_site(cls, n: int, site: int, letter: str, coeff: complex = 1.0) -> 'PauliOperatorRep':
        """coeff * sigma^letter acting on one site (0-based)."""
        if not 0 <= site < n:
            raise ValueError(f"site must be in [0, {n}) (got {site})")
        label = ['I'] * n
        label[site] = letter.upper()
        return cls.from_labels(n, {''.join(label): coeff})

    @classmethod
    def product_state(cls, spins: str) -> 'PauliOperatorRep':
        """Density of a z-basis product state, spins over 'u' (up) / 'd' (down)."""
        coeffs = np.ones(1, dtype=complex)
        for spin in spins.lower():
            if spin not in 'ud':
                raise ValueError(f"spins must use 'u' and 'd' (got '{spins}')")
            sign = 1.0 if spin == 'u' else -1.0
            coeffs = np.kron(coeffs, np.array([0.5, 0.0, 0.0, 0.5 * sign]))
        return cls(len(spins), coeffs)

    @classmethod
    def from_dense(cls, matrix: np.ndarray) -> 'PauliOperatorRep':
        """Expand a 2^n x 2^n matrix as c_alpha = tr(B_alpha M) / 2^n."""
        matrix = np.asarray(matrix, dtype=complex)
        dim = matrix.shape[0]
        n = int(round(np.log2(dim)))
        if matrix.shape != (dim, dim) or 2 ** n != dim or n < 1:
            raise ValueError(f"matrix must be 2^n x 2^n (got shape {matrix.shape})")
        return cls(n, _dense_to_coeffs(matrix))

    def to_dense(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix (n <= 6)."""
        if self.n > MAX_DENSE_QUBITS:
            raise ValueError(f"densification limited to n <= {MAX_DENSE_QUBITS} (got {self.n})")
        return _coeffs_to_dense(self.coeffs)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.coeffs.imag) <= tol))

    def norm(self) -> float:
        """Operator norm by densification."""
        return float(np.linalg.norm(self.to_dense(), 2))

    def trace(self) -> complex:
        return complex(self.coeffs[0] * 2 ** self.n)

    def weight(self) -> np.ndarray:
        """Pauli weight of every basis string."""
        return np.count_nonzero(pauli_digits(self.n), axis=1)

    def __add__(self, other: 'PauliOperatorRep') -> 'PauliOperatorRep':
        _check_same_size(self, other)
        return PauliOperatorRep(self.n, self.coeffs + other.coeffs)

    def __sub__(self, other: 'PauliOperatorRep') -> 'PauliOperatorRep':
        _check_same_size(self, other)
        return PauliOperatorRep(self.n, self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> 'PauliOperatorRep':
        return PauliOperatorRep(self.n, self.coeffs * scalar)

    __rmul__ = __mul__


def _check_same_size(a: PauliOperatorRep, b: PauliOperatorRep) -> None:
    if a.n != b.n:
        raise ValueError(f"Pauli operators act on different qubit counts ({a.n} vs {b.n})")


def _coeffs_to_dense(coeffs: np.ndarray) -> np.ndarray:
    if coeffs.size == 1:
        return np.array([[coeffs[0]]], dtype=complex)
    blocks = coeffs.reshape(4, -1)
    sub_dim = int(round(np.sqrt(blocks.shape[1])))
    dense = np.zeros((2 * sub_dim, 2 * sub_dim), dtype=complex)
    for a in range(4):
        if np.any(blocks[a]):
            dense += np.kron(PAULI_MATRICES[a], _coeffs_to_dense(blocks[a]))
    return dense


def _dense_to_coeffs(matrix: np.ndarray) -> np.ndarray:
    if matrix.shape[0] == 1:
        return np.array([matrix[0, 0]], dtype=complex)
    half = matrix.shape[0] // 2
    sub = {(r, s): _dense_to_coeffs(matrix[r * half:(r + 1) * half, s * half:(s + 1) * half])
           for r in range(2) for s in range(2)}
    parts = []
    for a in range(4):
        sigma = PAULI_MATRICES[a]
        parts.append(0.5 * sum(sigma[s, r] * sub[(r, s)] for r in range(2) for s in range(2)))
    return np.concatenate(parts)


def pauli_commutator(a: PauliOperatorRep, b: PauliOperatorRep,
                     chunk: int = 256) -> PauliOperatorRep:
    """
    Exact commutator [a, b] through the single-site multiplication table.

    Args:
        a: Left operator
        b: Right operator
        chunk: Rows of a processed per vectorised block

    Returns:
        PauliOperatorRep of [a, b]
    """
    _check_same_size(a, b)
    n = a.n
    digits = pauli_digits(n)
    ia = np.flatnonzero(a.coeffs)
    ib = np.flatnonzero(b.coeffs)
    real = np.zeros(4 ** n)
    imag = np.zeros(4 ** n)
    if ia.size == 0 or ib.size == 0:
        return PauliOperatorRep.zero(n)

    db = digits[ib]
    cb = b.coeffs[ib]
    for start in range(0, ia.size, chunk):
        sel = ia[start:start + chunk]
        da = digits[sel][:, None, :]
        product, e_ab = multiply_strings(da, db[None, :, :])
        _, e_ba = multiply_strings(db[None, :, :], da)
        values = (a.coeffs[sel][:, None] * cb[None, :]) * (I_POWERS[e_ab] - I_POWERS[e_ba])
        target = digits_to_index(product).ravel()
        values = values.ravel()
        real += np.bincount(target, weights=values.real, minlength=4 ** n)
        imag += np.bincount(target, weights=values.imag, minlength=4 ** n)
    return PauliOperatorRep(n, real + 1j * imag)


def embed_single_site(matrix: np.ndarray, site: int, n: int) -> np.ndarray:
    """Dense I (x) ... (x) matrix (x) ... (x) I with matrix on one site."""
    left = np.eye(2 ** site)
    right = np.eye(2 ** (n - site - 1))
    return np.kron(np.kron(left, matrix), right)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of a - b for Hermitian dense matrices."""
    diff = np.asarray(a) - np.asarray(b)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))
