"""Dense statevector algebra for qubits and 4-dim ancillas.

Everything here is small (total dimension <= 16) and immutable, so plain
numpy arrays behind frozen dataclasses are enough.  Basis-vector order is
fixed: Z = (|0>, |1>), X = (|+>, |->), Bell = (Phi+, Phi-, Psi+, Psi-).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

TOL = 1e-9
SQRT1_2 = 1.0 / np.sqrt(2.0)

HADAMARD = SQRT1_2 * np.array([[1, 1], [1, -1]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)


class QuantumError(ValueError):
    """Invalid quantum object or incompatible dimensions."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StateVector:
    dims: tuple[int, ...]
    amps: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d not in (2, 4) for d in dims):
            raise QuantumError(f"subsystem dims must be 2 or 4, got {dims}")
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        if amps.size != int(np.prod(dims)):
            raise QuantumError(f"{amps.size} amplitudes do not match dims {dims}")
        if not np.all(np.isfinite(amps)):
            raise QuantumError("non-finite amplitude")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > TOL:
            raise QuantumError(f"state not normalized (norm {norm:.12g})")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amps", _frozen(amps))

    @classmethod
    def from_unnormalized(cls, dims: Sequence[int], amps) -> "StateVector":
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm < TOL:
            raise QuantumError("cannot normalize a zero vector")
        return cls(tuple(dims), amps / norm)

    @property
    def dim(self) -> int:
        return self.amps.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def tensor(self) -> np.ndarray:
        return self.amps.reshape(self.dims)

    def overlap(self, other: "StateVector") -> complex:
        if self.dims != other.dims:
            raise QuantumError("overlap of states with different dims")
        return complex(np.vdot(self.amps, other.amps))

    def allclose(self, other: "StateVector", atol: float = TOL, up_to_phase: bool = False) -> bool:
        if self.dims != other.dims:
            return False
        if up_to_phase:
            return abs(abs(self.overlap(other)) - 1.0) <= atol
        return bool(np.allclose(self.amps, other.amps, atol=atol, rtol=0))

    def projector(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amps, self.amps.conj()))


@dataclass(frozen=True, eq=False)
class Gate:
    matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (2, 4):
            raise QuantumError(f"gate must be 2x2 or 4x4, got shape {m.shape}")
        if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=TOL, rtol=0):
            raise QuantumError(f"gate {self.name or '?'} is not unitary")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


H = Gate(HADAMARD, "H")
Z = Gate(SIGMA_Z, "Z")
I2 = Gate(IDENTITY2, "I")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or not 1 <= m.shape[0] <= 16:
            raise QuantumError(f"density matrix must be square, got shape {m.shape}")
        if not np.allclose(m, m.conj().T, atol=TOL, rtol=0):
            raise QuantumError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > TOL:
            raise QuantumError(f"density matrix trace {np.trace(m).real:.12g} != 1")
        if np.linalg.eigvalsh(m).min() < -TOL:
            raise QuantumError("density matrix has negative eigenvalues")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def allclose(self, other: "DensityMatrix", atol: float = TOL) -> bool:
        return self.dim == other.dim and bool(
            np.allclose(self.matrix, other.matrix, atol=atol, rtol=0)
        )


@dataclass(frozen=True, eq=False)
class Basis:
    kind: str
    vectors: np.ndarray  # rows are basis vectors
    labels: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise QuantumError("basis must be a square array of row vectors")
        if not np.allclose(v.conj() @ v.T, np.eye(v.shape[0]), atol=TOL, rtol=0):
            raise QuantumError(f"basis {self.kind} is not orthonormal")
        object.__setattr__(self, "vectors", _frozen(v))

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]


Z_BASIS = Basis("Z", np.eye(2), ("0", "1"))
X_BASIS = Basis("X", SQRT1_2 * np.array([[1, 1], [1, -1]]), ("+", "-"))
BELL_BASIS = Basis(
    "Bell",
    SQRT1_2 * np.array([[1, 0, 0, 1], [1, 0, 0, -1], [0, 1, 1, 0], [0, 1, -1, 0]]),
    ("Phi+", "Phi-", "Psi+", "Psi-"),
)
BASES = {"Z": Z_BASIS, "X": X_BASIS, "Bell": BELL_BASIS}

_LABELS = {
    "0": ((2,), [1, 0]),
    "1": ((2,), [0, 1]),
    "+": ((2,), X_BASIS.vectors[0]),
    "-": ((2,), X_BASIS.vectors[1]),
    "Phi+": ((2, 2), BELL_BASIS.vectors[0]),
    "Phi-": ((2, 2), BELL_BASIS.vectors[1]),
    "Psi+": ((2, 2), BELL_BASIS.vectors[2]),
    "Psi-": ((2, 2), BELL_BASIS.vectors[3]),
}
_ALIASES = {"−": "-", "Φ+": "Phi+", "Φ−": "Phi-", "Φ-": "Phi-", "Ψ+": "Psi+", "Ψ−": "Psi-", "Ψ-": "Psi-"}


def basis_state(label) -> StateVector:
    """Canonical state for ``0, 1, +, -, Phi+, Phi-, Psi+, Psi-``."""
    key = _ALIASES.get(str(label), str(label))
    if key not in _LABELS:
        raise QuantumError(f"unknown state label {label!r}")
    dims, amps = _LABELS[key]
    return StateVector(dims, amps)


def tensor(a: StateVector, b: StateVector) -> StateVector:
    return StateVector(a.dims + b.dims, np.kron(a.amps, b.amps))


def apply_gate(state: StateVector, gate: Gate, target: int) -> StateVector:
    """Apply ``gate`` to subsystem ``target`` (identity elsewhere)."""
    if not 0 <= target < len(state.dims):
        raise QuantumError(f"target {target} out of range for dims {state.dims}")
    if gate.dim != state.dims[target]:
        raise QuantumError(
            f"gate of dim {gate.dim} cannot act on subsystem of dim {state.dims[target]}"
        )
    t = np.moveaxis(state.tensor(), target, 0)
    t = np.tensordot(gate.matrix, t, axes=([1], [0]))
    return StateVector(state.dims, np.moveaxis(t, 0, target).reshape(-1))


@dataclass(frozen=True, eq=False)
class MeasurementOutcome:
    """Sampled outcome plus the data both collapse conventions need.

    ``post_state`` has the measured subsystems removed (``None`` when
    nothing remains); ``collapsed`` keeps them, replaced by the observed
    basis vector, which is what a measure-resend party forwards.
    """

    index: int
    label: str
    probability: float
    probabilities: np.ndarray
    post_state: StateVector | None
    collapsed: StateVector


def outcome_probabilities(state: StateVector, basis: Basis, targets: Sequence[int]) -> np.ndarray:
    comps = _project(state, basis, targets)
    return np.array([np.vdot(c, c).real for c in comps])


def _project(state: StateVector, basis: Basis, targets: Sequence[int]) -> list[np.ndarray]:
    targets = list(targets)
    if len(set(targets)) != len(targets) or not targets:
        raise QuantumError("targets must be distinct and nonempty")
    if any(not 0 <= t < len(state.dims) for t in targets):
        raise QuantumError(f"targets {targets} out of range for dims {state.dims}")
    tdim = int(np.prod([state.dims[t] for t in targets]))
    if tdim != basis.dim:
        raise QuantumError(f"basis of dim {basis.dim} cannot measure subsystems of dim {tdim}")
    rest = [i for i in range(len(state.dims)) if i not in targets]
    t = np.transpose(state.tensor(), targets + rest).reshape(tdim, -1)
    return [basis.vectors[k].conj() @ t for k in range(basis.dim)]

_PROB_EPS = 1e-15


def measure(state: StateVector, basis: Basis, targets: Sequence[int], rand: float) -> MeasurementOutcome:
    """Born-rule measurement driven by an external uniform draw.

    The outcome is the first basis index whose cumulative probability
    exceeds ``rand``.
    """
    if not 0.0 <= rand < 1.0:
        raise QuantumError("rand must lie in [0, 1)")
    targets = list(targets)
    comps = _project(state, basis, targets)
    probs = np.array([np.vdot(c, c).real for c in comps])
    probs[probs < _PROB_EPS] = 0.0  # rounding residue must not be selectable
    cum = np.cumsum(probs)
    k = int(np.searchsorted(cum, rand, side="right"))
    k = min(k, basis.dim - 1)
    while probs[k] <= 0.0 and k > 0:  # rounding past the end of the support
        k -= 1
    rest = [i for i in range(len(state.dims)) if i not in targets]
    rem = comps[k] / np.sqrt(probs[k])
    post = StateVector([state.dims[i] for i in rest], rem) if rest else None

    # collapsed: basis vector on targets, remainder on the rest, original order
    order = targets + rest
    full = np.outer(basis.vectors[k], rem).reshape([state.dims[i] for i in order])
    full = np.transpose(full, np.argsort(order))
    collapsed = StateVector(state.dims, full.reshape(-1))
    return MeasurementOutcome(k, basis.labels[k], float(probs[k]), probs, post, collapsed)


def partial_trace(state: StateVector, keep: Sequence[int]) -> DensityMatrix:
    keep = sorted(set(keep))
    if not keep:
        raise QuantumError("keep must name at least one subsystem")
    if any(not 0 <= k < len(state.dims) for k in keep):
        raise QuantumError(f"keep {keep} out of range for dims {state.dims}")
    rest = [i for i in range(len(state.dims)) if i not in keep]
    kdim = int(np.prod([state.dims[k] for k in keep]))
    t = np.transpose(state.tensor(), keep + rest).reshape(kdim, -1)
    rho = t @ t.conj().T
    return DensityMatrix(0.5 * (rho + rho.conj().T))


def density(matrix) -> DensityMatrix:
    """Build a DensityMatrix after symmetrizing away round-off."""
    m = np.asarray(matrix, dtype=complex)
    return DensityMatrix(0.5 * (m + m.conj().T))


def vn_entropy(rho: DensityMatrix) -> float:
    """Von Neumann entropy in bits."""
    lam = rho.eigenvalues()
    if lam.min() < -TOL:
        raise QuantumError("density matrix is not positive semidefinite")
    lam = lam[lam > 1e-15]
    s = float(-np.sum(lam * np.log2(lam)))
    return min(max(s, 0.0), float(np.log2(rho.dim)))


def trace_norm(m: np.ndarray) -> float:
    m = np.asarray(m, dtype=complex)
    return float(np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T))).sum())


def helstrom_success(rho0: DensityMatrix, rho1: DensityMatrix, p0: float = 0.5) -> float:
    """Optimal single-shot probability of telling ``rho0`` from ``rho1``."""
    if rho0.dim != rho1.dim:
        raise QuantumError("helstrom_success needs equal dimensions")
    if not 0.0 <= p0 <= 1.0:
        raise QuantumError("p0 must lie in [0, 1]")
    gamma = p0 * rho0.matrix - (1.0 - p0) * rho1.matrix
    p = 0.5 + 0.5 * trace_norm(gamma)
    return min(max(p, max(p0, 1.0 - p0)), 1.0)


def helstrom_projector(rho0: DensityMatrix, rho1: DensityMatrix, p0: float = 0.5) -> np.ndarray:
    """Projector of the optimal measurement element that answers "0".

    Zero eigenvalues go to whichever hypothesis has the larger prior.
    """
    gamma = p0 * rho0.matrix - (1.0 - p0) * rho1.matrix
    lam, vec = np.linalg.eigh(0.5 * (gamma + gamma.conj().T))
    pick = lam > 1e-12 if p0 < 0.5 else lam > -1e-12
    v = vec[:, pick]
    return v @ v.conj().T


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
