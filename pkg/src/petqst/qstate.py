"""Density matrices: random generation, noise channels and state metrics.

States are plain complex ``numpy`` arrays of shape ``(d, d)`` with
``d = 2**n``. Metric and channel functions also accept stacks ``(..., d, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidSpec, InvalidState, OutOfRange
from .numerics import hermitian_eig, hermitian_part, matrix_sqrt_psd, rand_uniform_matrix

NOISE_KINDS = ("none", "depolarizing", "exp-state")
_NOISE_ALIASES = {
    "none": "none",
    "depol": "depolarizing",
    "depolarizing": "depolarizing",
    "exp": "exp-state",
    "exp-state": "exp-state",
    "state-error": "exp-state",
}


def dim_of(n_qubits: int) -> int:
    return 1 << n_qubits


def n_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise DimensionMismatch(f"dimension {dim} is not a power of two >= 2")
    return n


@dataclass(frozen=True)
class StateSpec:
    """Sparsity and rank of a random state: ``zeros`` vanishing diagonal entries, rank ``rank``."""

    n_qubits: int
    zeros: int
    rank: int
    pure: bool = False

    def validate(self) -> None:
        if self.n_qubits < 1:
            raise InvalidSpec("n_qubits must be >= 1")
        d = dim_of(self.n_qubits)
        if not 0 <= self.zeros <= d - 2:
            raise InvalidSpec(f"zeros={self.zeros} outside [0, {d - 2}]")
        if self.pure:
            if self.rank != 1:
                raise InvalidSpec("pure states have rank 1")
        elif not 2 <= self.rank <= d - self.zeros:
            raise InvalidSpec(f"rank={self.rank} outside [2, {d - self.zeros}] for zeros={self.zeros}")


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "none"
    strength: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InvalidSpec(f"unknown noise kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str | None) -> "NoiseSpec":
        """Parse ``"depol:0.05"``, ``"exp:0.1"`` or ``"none"``."""
        if text is None or text.strip().lower() in ("", "none"):
            return cls()
        kind, _, value = text.partition(":")
        try:
            name = _NOISE_ALIASES[kind.strip().lower()]
            strength = float(value)
        except (KeyError, ValueError):
            raise InvalidSpec(f"cannot parse noise spec {text!r}") from None
        return cls(name, strength)

    def label(self) -> str:
        return "none" if self.kind == "none" else f"{self.kind}:{self.strength:g}"

    def validate(self, n_qubits: int) -> None:
        if self.kind == "depolarizing":
            _check_depol_range(self.strength, dim_of(n_qubits))
        elif self.kind == "exp-state":
            _check_eps_range(self.strength)


def generate_state(rng: np.random.Generator, spec: StateSpec) -> np.ndarray:
    """Random density matrix with ``spec.zeros`` vanishing diagonal entries and rank ``spec.rank``.

    The support (``d - zeros`` basis states, chosen uniformly) carries a
    Ginibre state ``A A^dagger / Tr`` built from a ``(d - zeros) x rank``
    standard complex Gaussian matrix; pure states use a normalised Gaussian
    vector.
    """
    spec.validate()
    d = dim_of(spec.n_qubits)
    k = d - spec.zeros
    support = np.sort(rng.permutation(d)[:k])
    a = rng.standard_normal((k, spec.rank)) + 1j * rng.standard_normal((k, spec.rank))
    sub = a @ np.conj(a.T)
    sub = hermitian_part(sub / np.trace(sub).real)
    rho = np.zeros((d, d), dtype=complex)
    rho[np.ix_(support, support)] = sub
    return rho


def basis_state(n_qubits: int, index: int = 0) -> np.ndarray:
    d = dim_of(n_qubits)
    rho = np.zeros((d, d), dtype=complex)
    rho[index, index] = 1.0
    return rho


def maximally_mixed(n_qubits: int) -> np.ndarray:
    d = dim_of(n_qubits)
    return np.eye(d, dtype=complex) / d


def bell_phi_minus() -> np.ndarray:
    """|phi-> = (|00> - |11>)/sqrt(2)."""
    psi = np.array([1.0, 0.0, 0.0, -1.0], dtype=complex) / np.sqrt(2.0)
    return np.outer(psi, np.conj(psi))


def density_matrix_violations(rho: np.ndarray, tol: float = 1e-10) -> list[str]:
    """List every density-matrix invariant ``rho`` breaks (empty when valid)."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return [f"not square: {rho.shape}"]
    problems = []
    herm = np.abs(rho - np.conj(rho.T)).max()
    if herm > tol:
        problems.append(f"not Hermitian ({herm:.2e})")
        return problems
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        problems.append(f"trace {tr.real:.12f}")
    wmin = hermitian_eig(rho).eigenvalues[0]
    if wmin < -1e-9:
        problems.append(f"min eigenvalue {wmin:.2e}")
    diag = np.clip(np.diag(rho).real, 0.0, None)
    bound = np.sqrt(np.outer(diag, diag)) + 1e-9
    if np.any(np.abs(rho) > bound):
        problems.append("off-diagonal exceeds sqrt(rho_ii rho_jj)")
    return problems


def validate_density_matrix(rho: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    problems = density_matrix_violations(rho, tol)
    if problems:
        raise InvalidState("; ".join(problems))
    return rho


def purity(rho: np.ndarray) -> np.ndarray | float:
    """Tr[rho^2]; for Hermitian rho this is the squared Frobenius norm."""
    p = np.sum(np.abs(np.asarray(rho)) ** 2, axis=(-2, -1))
    return float(p) if np.ndim(p) == 0 else p


def fidelity(a: np.ndarray, b: np.ndarray) -> np.ndarray | float:
    """Root fidelity Tr sqrt(sqrt(a) b sqrt(a)), in [0, 1] for valid states."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-2:] != b.shape[-2:]:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    ra = matrix_sqrt_psd(a)
    inner = hermitian_part(ra @ b @ ra)
    w = hermitian_eig(inner).eigenvalues
    f = np.sum(np.sqrt(np.clip(w, 0.0, None)), axis=-1)
    return float(f) if np.ndim(f) == 0 else f


def _check_depol_range(p: float, d: int) -> None:
    upper = 1.0 + 1.0 / (d * d - 1)
    if not 0.0 <= p <= upper:
        raise OutOfRange(f"depolarizing strength {p} outside [0, {upper}]")


def _check_eps_range(eps: float) -> None:
    if not 0.0 <= eps <= 1.0:
        raise OutOfRange(f"state-error strength {eps} outside [0, 1]")


def depolarize(rho: np.ndarray, p: float) -> np.ndarray:
    """(1 - p) rho + p I / d."""
    rho = np.asarray(rho)
    d = rho.shape[-1]
    _check_depol_range(p, d)
    return (1.0 - p) * rho + (p / d) * np.eye(d)


def random_error_state(rng: np.random.Generator, d: int) -> np.ndarray:
    """R^dagger R / Tr[R^dagger R] with R = 2U - 1 + i(2U' - 1), U, U' uniform on (0, 1)."""
    re = 2.0 * rand_uniform_matrix(rng, d) - 1.0
    im = 2.0 * rand_uniform_matrix(rng, d) - 1.0
    r = re + 1j * im
    m = np.conj(r.T) @ r
    return hermitian_part(m / np.trace(m).real)


def exp_state_error(rng: np.random.Generator, rho: np.ndarray, eps: float) -> np.ndarray:
    """(1 - eps) rho + eps rho_random (experimental state-preparation error)."""
    _check_eps_range(eps)
    rho = np.asarray(rho)
    return (1.0 - eps) * rho + eps * random_error_state(rng, rho.shape[-1])


def apply_noise(rng: np.random.Generator, rho: np.ndarray, noise: NoiseSpec) -> np.ndarray:
    if noise.kind == "depolarizing":
        return depolarize(rho, noise.strength)
    if noise.kind == "exp-state":
        return exp_state_error(rng, rho, noise.strength)
    return rho
