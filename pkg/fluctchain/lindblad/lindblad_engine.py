"""
Exact many-body evolution in the Pauli basis for small chains.

Builds the averaged master-equation generator for isotropic or fixed
(z) direction noise, evolves densities and observables, evaluates
Lieb-Robinson commutators numerically and checks mixing through the
structure matrix F and the spectrum of the generator.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np
import scipy.linalg
import scipy.sparse
from dataclasses_json import dataclass_json
from scipy.sparse.linalg import expm_multiply

from ..models.chain_model import RngStreamSpec
from .pauli_algebra import (
    I_POWERS,
    MAX_DENSE_QUBITS,
    PAULI_MATRICES,
    PauliOperatorRep,
    digits_to_index,
    embed_single_site,
    multiply_strings,
    pauli_digits,
)

logger = logging.getLogger(__name__)

GENERATOR_KINDS = ('isotropic', 'z-only')
H0_PRESETS = ('xx', 'heisenberg', 'xx_field', 'custom')
MAX_SPECTRAL_QUBITS = 5
DISSIPATION_PER_SITE = 8.0
RANK_TOLERANCE = 1e-10


@dataclass
class H0Spec:
    """
    Intrinsic Hamiltonian H0 = sum_j h_j (+ optional on-site fields).

    bonds[j] holds the 16 coefficients of h_j on sites (j, j+1), indexed
    4*a + b for sigma^a (x) sigma^b. fields is an (n, 4) array of single-site
    coefficients.
    """
    n: int
    bonds: List[np.ndarray] = field(default_factory=list, repr=False)
    fields: Optional[np.ndarray] = field(default=None, repr=False)
    name: str = 'custom'

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1 (got {self.n})")
        self.bonds = [np.asarray(b, dtype=complex).reshape(16) for b in self.bonds]
        if len(self.bonds) not in (0, self.n - 1):
            raise ValueError(f"expected {self.n - 1} bond terms for n={self.n} (got {len(self.bonds)})")
        if self.fields is None:
            self.fields = np.zeros((self.n, 4))
        self.fields = np.asarray(self.fields, dtype=complex).reshape(self.n, 4)
        for j, bond in enumerate(self.bonds):
            if np.any(np.abs(bond.imag) > 1e-12):
                raise ValueError(f"bond term h_{j} is not Hermitian (complex Pauli coefficients)")
        if np.any(np.abs(self.fields.imag) > 1e-12):
            raise ValueError("on-site fields are not Hermitian (complex Pauli coefficients)")
        self._norm: Optional[float] = None

    @classmethod
    def preset(cls, name: str, n: int, field_strength: float = 1.0,
               coefficients: Optional[Sequence[Sequence[float]]] = None) -> 'H0Spec':
        """
        Named Hamiltonians.

        Args:
            name: 'xx', 'heisenberg', 'xx_field' or 'custom'
            n: Number of sites
            field_strength: Transverse sigma^x field for 'xx_field'
            coefficients: Per-bond 16-coefficient lists for 'custom'

        Returns:
            H0Spec
        """
        if name not in H0_PRESETS:
            raise ValueError(f"Unknown H0 preset '{name}' (expected one of {H0_PRESETS})")
        bond = np.zeros(16)
        fields = np.zeros((n, 4))
        if name == 'custom':
            if coefficients is None:
                raise ValueError("custom H0 requires a coefficients list")
            return cls(n=n, bonds=[np.asarray(c, dtype=float) for c in coefficients], name=name)
        bond[4 * 1 + 1] = 1.0
        bond[4 * 2 + 2] = 1.0
        if name == 'heisenberg':
            bond[4 * 3 + 3] = 1.0
        if name == 'xx_field':
            fields[:, 1] = field_strength
        bonds = [bond.copy() for _ in range(n - 1)]
        return cls(n=n, bonds=bonds, fields=fields, name=name)

    @classmethod
    def from_operator(cls, op: PauliOperatorRep, name: str = 'custom') -> 'H0Spec':
        """Wrap an arbitrary Hermitian operator (used for single-site tests)."""
        if not op.is_hermitian():
            raise ValueError("H0 must be Hermitian (real Pauli coefficients)")
        spec = cls(n=op.n, name=name)
        spec._operator = op
        return spec

    def terms(self) -> Tuple[np.ndarray, np.ndarray]:
        """Nonzero Pauli strings of H0 as (digits, real coefficients)."""
        op = self.to_pauli()
        idx = np.flatnonzero(np.abs(op.coeffs) > 0)
        return pauli_digits(self.n)[idx], op.coeffs[idx].real

    def to_pauli(self) -> PauliOperatorRep:
        """Assemble H0 as a Pauli expansion."""
        explicit = getattr(self, '_operator', None)
        if explicit is not None:
            return explicit
        n = self.n
        coeffs = np.zeros(4 ** n, dtype=complex)
        for j, bond in enumerate(self.bonds):
            for ab in np.flatnonzero(bond):
                digits = np.zeros(n, dtype=np.int64)
                digits[j], digits[j + 1] = divmod(int(ab), 4)
                coeffs[int(digits_to_index(digits))] += bond[ab]
        for site in range(n):
            for a in np.flatnonzero(self.fields[site]):
                digits = np.zeros(n, dtype=np.int64)
                digits[site] = a
                coeffs[int(digits_to_index(digits))] += self.fields[site, a]
        return PauliOperatorRep(n, coeffs)

    @property
    def h0_norm(self) -> float:
        """Operator norm of the assembled H0 (n <= 6)."""
        if self._norm is None:
            dense = self.to_pauli().to_dense()
            self._norm = float(np.max(np.abs(np.linalg.eigvalsh(dense)))) if dense.size else 0.0
        return self._norm


@dataclass(frozen=True)
class Superoperator:
    """Schroedinger-picture generator acting on Pauli coefficient vectors."""
    matrix: scipy.sparse.csr_matrix = field(repr=False)
    kind: str
    gamma: float
    n: int
    h0_name: str = 'custom'
    noise_x: float = 0.0
    noise_y: float = 1.0

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    @property
    def adjoint(self) -> scipy.sparse.csr_matrix:
        """Heisenberg-picture generator (transpose in the orthogonal Pauli basis)."""
        return self.matrix.T.tocsr()


@dataclass(frozen=True)
class StructureMatrix:
    """F with -i[H0, B_alpha] = sum_beta F[alpha, beta] B_beta."""
    F: np.ndarray = field(repr=False)
    n: int
    in_index_set: np.ndarray = field(repr=False)


@dataclass_json
@dataclass
class RankReport:
    """Rank of the F submatrix with rows outside I and columns inside I."""
    rows: int
    cols: int
    rank: int
    max_rank: int
    full_rank: bool
    tolerance: float
    singular_values: List[float]


@dataclass_json
@dataclass
class RelaxationReport:
    """Spectral verdict on relaxation to the maximally mixed state."""
    gap: float
    kernel_dimension: int
    maximally_mixing: bool
    steady_states: List[List[float]]


def _structure_entries(h0: H0Spec) -> scipy.sparse.csr_matrix:
    n = h0.n
    digits = pauli_digits(n)
    rows = np.arange(4 ** n)
    h_digits, h_coeffs = h0.terms()
    data, row_idx, col_idx = [], [], []
    for h, w in zip(h_digits, h_coeffs):
        product, e_hb = multiply_strings(h[None, :], digits)
        _, e_bh = multiply_strings(digits, h[None, :])
        values = (-1j * w * (I_POWERS[e_hb] - I_POWERS[e_bh])).real
        keep = values != 0
        data.append(values[keep])
        row_idx.append(rows[keep])
        col_idx.append(digits_to_index(product[keep]))
    if not data:
        return scipy.sparse.csr_matrix((4 ** n, 4 ** n))
    return scipy.sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(row_idx), np.concatenate(col_idx))),
        shape=(4 ** n, 4 ** n),
    ).tocsr()


def dissipation_rates(n: int, kind: str, noise_y: float = 1.0) -> np.ndarray:
    """
    Decay rate per unit gamma of every Pauli string.

    Isotropic noise damps each non-identity site by 8; z-direction noise
    damps x and y sites by 8 y^2 and leaves identity and z sites alone.
    """
    digits = pauli_digits(n)
    if kind == 'isotropic':
        return DISSIPATION_PER_SITE * np.count_nonzero(digits, axis=1)
    if kind == 'z-only':
        transverse = np.count_nonzero((digits == 1) | (digits == 2), axis=1)
        return DISSIPATION_PER_SITE * noise_y ** 2 * transverse
    raise ValueError(f"kind must be one of {GENERATOR_KINDS} (got {kind!r})")


def build_generator(h0: H0Spec, kind: str, gamma: float, n: Optional[int] = None,
                    noise_x: float = 0.0, noise_y: float = 1.0) -> Superoperator:
    """
    Build the averaged master-equation generator.

    d c/dt = (F^T - gamma diag(rates)) c for rho = sum_alpha c_alpha B_alpha.

    Args:
        h0: Intrinsic Hamiltonian
        kind: 'isotropic' or 'z-only'
        gamma: Noise strength (>= 0)
        n: Qubit count (defaults to h0.n; must agree)
        noise_x: Identity weight of X_j = x 1 + y sigma^z (drops out)
        noise_y: sigma^z weight of X_j

    Returns:
        Superoperator
    """
    n = h0.n if n is None else n
    if n != h0.n:
        raise ValueError(f"n={n} does not match H0 on {h0.n} sites")
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"n must be <= {MAX_DENSE_QUBITS} for generator construction (got {n})")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0 (got {gamma})")
    if kind not in GENERATOR_KINDS:
        raise ValueError(f"kind must be one of {GENERATOR_KINDS} (got {kind!r})")

    F = _structure_entries(h0)
    rates = dissipation_rates(n, kind, noise_y)
    matrix = (F.T - scipy.sparse.diags(gamma * rates)).tocsr()
    logger.debug(f"Built {kind} generator: n={n}, gamma={gamma}, nnz={matrix.nnz}")
    return Superoperator(matrix=matrix, kind=kind, gamma=float(gamma), n=n, h0_name=h0.name,
                         noise_x=float(noise_x), noise_y=float(noise_y))


def validate_density(rho: PauliOperatorRep, tol: float = 1e-10) -> None:
    """Raise ValueError unless rho is a Hermitian, unit-trace, positive operator."""
    if rho.n > MAX_DENSE_QUBITS:
        raise ValueError(f"density validation limited to n <= {MAX_DENSE_QUBITS}")
    if not rho.is_hermitian(tol):
        raise ValueError("rho0 must be Hermitian")
    trace = rho.trace().real
    if abs(trace - 1.0) > tol:
        raise ValueError(f"rho0 must have unit trace (got {trace})")
    min_eig = np.linalg.eigvalsh(rho.to_dense()).min()
    if min_eig < -tol:
        raise ValueError(f"rho0 must be positive semidefinite (min eigenvalue {min_eig})")


def _check_times(t_grid: Sequence[float]) -> np.ndarray:
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("t_grid must be a non-empty list of times")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("t_grid must be nonnegative and strictly increasing")
    return times


def evolve_density(gen: Superoperator, rho0: PauliOperatorRep,
                   t_grid: Sequence[float]) -> List[PauliOperatorRep]:
    """
    Evolve a density operator under the generator.

    Args:
        gen: Generator
        rho0: Initial density (validated by densification)
        t_grid: Nonnegative increasing times

    Returns:
        Densities at each requested time
    """
    if rho0.n != gen.n:
        raise ValueError(f"rho0 acts on {rho0.n} qubits, generator on {gen.n}")
    validate_density(rho0)
    times = _check_times(t_grid)

    vec = rho0.coeffs.copy()
    t_now = 0.0
    out = []
    for t in times:
        if t > t_now:
            vec = expm_multiply(gen.matrix * (t - t_now), vec)
            t_now = t
        out.append(PauliOperatorRep(gen.n, vec.copy()))
    return out


def heisenberg_evolve(gen: Superoperator, b0: PauliOperatorRep, t: float) -> PauliOperatorRep:
    """Evolve an observable with the adjoint generator up to time t."""
    if b0.n != gen.n:
        raise ValueError(f"observable acts on {b0.n} qubits, generator on {gen.n}")
    if t < 0:
        raise ValueError(f"t must be >= 0 (got {t})")
    if t == 0:
        return PauliOperatorRep(gen.n, b0.coeffs.copy())
    return PauliOperatorRep(gen.n, expm_multiply(gen.adjoint * t, b0.coeffs))


def _random_unit_hermitian(generator: np.random.Generator) -> np.ndarray:
    coeffs = generator.normal(size=4)
    op = np.tensordot(coeffs, PAULI_MATRICES, axes=1)
    return op / np.linalg.norm(op, 2)


def lr_commutator(gen: Superoperator, b0: PauliOperatorRep, x: int, t: float,
                  samples: int = 20, seed: int = 0) -> float:
    """
    Lower estimate of C_B(x, t) = sup_A ||[A_x, B(t)]|| / ||A_x||.

    The supremum is taken over sigma^x, sigma^y, sigma^z and `samples` random
    single-site Hermitian unit-norm operators at site x (0-based).
    """
    n = gen.n
    if n > MAX_SPECTRAL_QUBITS:
        raise ValueError(f"lr_commutator needs dense norms: n must be <= {MAX_SPECTRAL_QUBITS} (got {n})")
    if not 0 <= x < n:
        raise ValueError(f"site x must be in [0, {n}) (got {x})")

    b_t = heisenberg_evolve(gen, b0, t).to_dense()
    generator = RngStreamSpec(seed, x).generator()
    candidates = [PAULI_MATRICES[a] for a in (1, 2, 3)]
    candidates += [_random_unit_hermitian(generator) for _ in range(samples)]

    best = 0.0
    for local in candidates:
        a_x = embed_single_site(local, x, n)
        value = np.linalg.norm(a_x @ b_t - b_t @ a_x, 2) / np.linalg.norm(local, 2)
        best = max(best, float(value))
    return best


def build_structure_matrix(h0: H0Spec, n: Optional[int] = None) -> StructureMatrix:
    """Dense F for n <= 5, with the index set I of strings containing x or y."""
    n = h0.n if n is None else n
    if n != h0.n:
        raise ValueError(f"n={n} does not match H0 on {h0.n} sites")
    if n > MAX_SPECTRAL_QUBITS:
        raise ValueError(f"structure matrix limited to n <= {MAX_SPECTRAL_QUBITS} (got {n})")
    if not h0.to_pauli().is_hermitian():
        raise ValueError("H0 must be Hermitian")
    digits = pauli_digits(n)
    in_index_set = np.any((digits == 1) | (digits == 2), axis=1)
    return StructureMatrix(F=_structure_entries(h0).toarray(), n=n, in_index_set=in_index_set)


def rank_condition_report(F: StructureMatrix) -> RankReport:
    """Numerical rank of F restricted to rows outside I and columns inside I."""
    rows = ~F.in_index_set
    cols = F.in_index_set
    sub = F.F[np.ix_(rows, cols)]
    if sub.size == 0:
        singular = np.zeros(0)
    else:
        singular = scipy.linalg.svdvals(sub)
    top = singular.max() if singular.size else 0.0
    rank = int(np.count_nonzero(singular > RANK_TOLERANCE * top)) if top > 0 else 0
    max_rank = int(min(sub.shape))
    return RankReport(
        rows=int(sub.shape[0]),
        cols=int(sub.shape[1]),
        rank=rank,
        max_rank=max_rank,
        full_rank=rank == max_rank and max_rank > 0,
        tolerance=RANK_TOLERANCE,
        singular_values=[float(s) for s in singular],
    )


def relaxation_check(gen: Superoperator, tol: float = 1e-9) -> RelaxationReport:
    """
    Spectral mixing verdict from the eigendecomposition of the generator.

    maximally_mixing holds when the kernel is one-dimensional and spanned by
    the identity coefficient vector.
    """
    if gen.n > MAX_SPECTRAL_QUBITS:
        raise ValueError(f"relaxation_check limited to n <= {MAX_SPECTRAL_QUBITS} (got {gen.n})")
    dense = gen.dense()
    scale = max(1.0, float(np.abs(dense).max()))
    kernel = scipy.linalg.null_space(dense, rcond=tol)
    eigenvalues = scipy.linalg.eigvals(dense)
    nonzero = eigenvalues[np.abs(eigenvalues) > 1e-7 * scale]
    # purely oscillating modes have roundoff-sized real parts of either sign
    decay = np.where(np.abs(nonzero.real) > 1e-7 * scale, nonzero.real, 0.0)
    gap = float(-np.max(decay)) + 0.0 if decay.size else float('inf')

    mixing = False
    if kernel.shape[1] == 1:
        vec = kernel[:, 0] / np.linalg.norm(kernel[:, 0])
        mixing = bool(abs(abs(vec[0]) - 1.0) < 1e-8)

    logger.info(f"Relaxation check: kernel dimension {kernel.shape[1]}, gap {gap:.6g}, "
                f"maximally mixing={mixing}")
    return RelaxationReport(
        gap=gap,
        kernel_dimension=int(kernel.shape[1]),
        maximally_mixing=mixing,
        steady_states=[[float(v) for v in col] for col in kernel.T],
    )


def pauli_expectations(rho: PauliOperatorRep, letter: str = 'Z') -> np.ndarray:
    """<sigma^letter_j> for every site j: tr(sigma B) = 2^n c."""
    n = rho.n
    values = np.empty(n)
    for site in range(n):
        probe = PauliOperatorRep.single_site(n, site, letter)
        idx = int(np.flatnonzero(probe.coeffs)[0])
        values[site] = (rho.coeffs[idx] * 2 ** n).real
    return values
