"""Attack models on the quantum legs and what Eve can learn from them.

A collective attack entangles each transiting qubit with a fresh ancilla
``|E>`` through one fixed isometry.  Strategy 1 is only specified on the
``|+>`` that the TP emits::

    U |+>|E> = |+> u + |-> w           u = a0|e0>, w = a1|e1>  (C^2)

Strategy 2 is specified on the computational basis::

    U |0>|E> = |0> v0 + |1> v1         v0 = a0|e0>, v1 = a1|e1>  (C^4)
    U |1>|E> = |0> w0 + |1> w1         w0 = b0|f0>, w1 = b1|f1>  (C^4)

The vectors are stored unnormalized, so the ancilla states need not be
orthogonal.  Intercept-resend in basis B is handled by the simulator as a
literal measurement; for information accounting it is equivalent to the
isometry ``|b_k> -> |b_k>|k>`` with a 2-dim classical register.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import quantum_core as qc
from .kinds import AttackKind, Location, ProtocolKind

TOL = 1e-9

Vector = tuple[complex, ...]


class AttackConfigError(ValueError):
    """Attack parameters or placement are invalid."""

    def __init__(self, message: str, violations: Sequence["Violation"] = ()):
        super().__init__(message)
        self.violations = list(violations)


@dataclass(frozen=True)
class Violation:
    constraint: str
    residual: float

    def __str__(self) -> str:
        return f"{self.constraint} (residual {self.residual:.3e})"


def _vec(values, dim: int, name: str) -> Vector:
    arr = np.asarray(values, dtype=complex).reshape(-1)
    if arr.size != dim:
        raise AttackConfigError(f"{name} must have {dim} components, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise AttackConfigError(f"{name} has non-finite components")
    return tuple(complex(x) for x in arr)


@dataclass(frozen=True)
class AttackModel:
    kind: AttackKind = AttackKind.NONE
    location: Location = Location.TP_TO_ALICE
    basis: str | None = None  # intercept-resend only: "Z" or "X"
    u: Vector | None = None
    w: Vector | None = None
    v0: Vector | None = None
    v1: Vector | None = None
    w0: Vector | None = None
    w1: Vector | None = None

    @classmethod
    def none(cls) -> "AttackModel":
        return cls()

    @classmethod
    def intercept_resend(cls, location=Location.ALICE_TO_BOB, basis: str = "Z") -> "AttackModel":
        if basis not in ("Z", "X"):
            raise AttackConfigError(f"intercept-resend basis must be Z or X, got {basis!r}")
        return cls(AttackKind.INTERCEPT_RESEND, Location(location), basis=basis)

    @classmethod
    def collective_s1(cls, u, w, location=Location.TP_TO_ALICE) -> "AttackModel":
        return cls(AttackKind.COLLECTIVE_S1, Location(location), u=_vec(u, 2, "u"), w=_vec(w, 2, "w"))

    @classmethod
    def s1_theta(cls, theta: float) -> "AttackModel":
        """The one-parameter family u=(cos t, 0), w=(0, sin t)."""
        return cls.collective_s1([np.cos(theta), 0.0], [0.0, np.sin(theta)])

    @classmethod
    def collective_s2(cls, v0, v1, w0, w1, location=Location.ALICE_TO_BOB) -> "AttackModel":
        return cls(
            AttackKind.COLLECTIVE_S2,
            Location(location),
            v0=_vec(v0, 4, "v0"),
            v1=_vec(v1, 4, "v1"),
            w0=_vec(w0, 4, "w0"),
            w1=_vec(w1, 4, "w1"),
        )

    @property
    def is_collective(self) -> bool:
        return self.kind in (AttackKind.COLLECTIVE_S1, AttackKind.COLLECTIVE_S2)

    def arrays(self) -> dict[str, np.ndarray]:
        names = ("u", "w") if self.kind is AttackKind.COLLECTIVE_S1 else ("v0", "v1", "w0", "w1")
        return {n: np.array(getattr(self, n), dtype=complex) for n in names if getattr(self, n) is not None}

    def describe(self) -> str:
        if self.kind is AttackKind.NONE:
            return "none"
        extra = f"/{self.basis}" if self.basis else ""
        return f"{self.kind.value}{extra}@{self.location.value}"


# ---------------------------------------------------------------- validation


def validate_attack(attack: AttackModel, kind: ProtocolKind) -> list[Violation]:
    """Return every violated constraint; an empty list means the attack is usable."""
    out: list[Violation] = []
    kind = ProtocolKind(kind)
    if attack.kind is AttackKind.NONE:
        return out
    if attack.location is Location.BOB_TO_TP and kind is not ProtocolKind.IMPROVED:
        out.append(Violation(f"leg bob_to_tp exists only in the improved protocol, not {kind.value}", 1.0))

    if attack.kind is AttackKind.INTERCEPT_RESEND:
        if attack.basis not in ("Z", "X"):
            out.append(Violation(f"intercept-resend basis must be Z or X, got {attack.basis!r}", 1.0))
        return out

    if attack.kind is AttackKind.COLLECTIVE_S1:
        if attack.u is None or attack.w is None:
            return out + [Violation("collective_s1 needs vectors u and w", 1.0)]
        a = attack.arrays()
        r = abs(np.vdot(a["u"], a["u"]).real + np.vdot(a["w"], a["w"]).real - 1.0)
        if r > TOL:
            out.append(Violation("|u|^2 + |w|^2 = 1", r))
        if attack.location is not Location.TP_TO_ALICE or kind is ProtocolKind.KRAWEC:
            out.append(Violation("collective_s1 acts only on the |+> sent TP->Alice (base/improved)", 1.0))
        return out

    if attack.kind is AttackKind.COLLECTIVE_S2:
        if any(getattr(attack, n) is None for n in ("v0", "v1", "w0", "w1")):
            return out + [Violation("collective_s2 needs vectors v0, v1, w0, w1", 1.0)]
        a = attack.arrays()
        n0 = np.vdot(a["v0"], a["v0"]).real + np.vdot(a["v1"], a["v1"]).real
        n1 = np.vdot(a["w0"], a["w0"]).real + np.vdot(a["w1"], a["w1"]).real
        cross = np.vdot(a["v0"], a["w0"]) + np.vdot(a["v1"], a["w1"])
        if abs(n0 - 1.0) > TOL:
            out.append(Violation("|v0|^2 + |v1|^2 = 1", abs(n0 - 1.0)))
        if abs(n1 - 1.0) > TOL:
            out.append(Violation("|w0|^2 + |w1|^2 = 1", abs(n1 - 1.0)))
        if abs(cross) > TOL:
            out.append(Violation("<v0,w0> + <v1,w1> = 0", float(abs(cross))))
    return out


def ensure_valid(attack: AttackModel, kind: ProtocolKind) -> AttackModel:
    violations = validate_attack(attack, kind)
    if violations:
        raise AttackConfigError(
            "invalid attack: " + "; ".join(str(v) for v in violations), violations
        )
    return attack


# ---------------------------------------------------------------- isometries


def isometry(attack: AttackModel) -> np.ndarray:
    """Array ``iso[j, k, :]``: ancilla vector attached to output ``|k>`` for input ``|j>``.

    Shape is ``(2, 2, d)`` with ``d`` = 2 (S1, intercept-resend register)
    or 4 (S2).  S1 is completed on ``|->`` by ``|->|e2>`` (an ancilla
    direction outside span(u, w)); this is never reached for valid
    placements because Strategy 1 only ever sees ``|+>``.
    """
    if attack.kind is AttackKind.COLLECTIVE_S2:
        a = attack.arrays()
        return np.array([[a["v0"], a["v1"]], [a["w0"], a["w1"]]])
    if attack.kind is AttackKind.COLLECTIVE_S1:
        a = attack.arrays()
        plus, minus = qc.X_BASIS.vectors
        u = np.concatenate([a["u"], [0, 0]])
        w = np.concatenate([a["w"], [0, 0]])
        e2 = np.array([0, 0, 1, 0], dtype=complex)
        img_plus = np.outer(plus, u) + np.outer(minus, w)
        img_minus = np.outer(minus, e2)
        return np.array([img_plus + img_minus, img_plus - img_minus]) * qc.SQRT1_2
    if attack.kind is AttackKind.INTERCEPT_RESEND:
        b = qc.BASES[attack.basis].vectors  # rows b_k
        iso = np.zeros((2, 2, 2), dtype=complex)
        for j in range(2):
            for k in range(2):
                # |j> = sum_k <b_k|j> |b_k>  ->  sum_k <b_k|j> |b_k>|k>
                iso[j, :, k] += b[k].conj()[j] * b[k]
        return iso
    iso = np.zeros((2, 2, 1), dtype=complex)
    iso[0, 0, 0] = iso[1, 1, 0] = 1.0
    return iso


def _attach(state: qc.StateVector, iso: np.ndarray, target: int) -> qc.StateVector:
    t = np.moveaxis(state.tensor(), target, -1)  # (..., j)
    out = np.tensordot(t, iso, axes=([t.ndim - 1], [0]))  # (..., k, anc)
    out = np.moveaxis(out, -2, target)
    dims = state.dims + (iso.shape[2],)
    return qc.StateVector(dims, out.reshape(-1))


@dataclass(frozen=True, eq=False)
class AttackOutput:
    state: qc.StateVector
    eve_outcome: int | None = None


def apply_attack(attack: AttackModel, transit: qc.StateVector, rand: float = 0.0, target: int = 0) -> AttackOutput:
    """Act on subsystem ``target`` of ``transit``.

    Collective attacks append the ancilla as a new last subsystem.
    Intercept-resend measures with the draw ``rand`` and returns the
    re-prepared state together with Eve's outcome index.
    """
    if attack.kind is AttackKind.NONE:
        return AttackOutput(transit)
    if attack.kind is AttackKind.INTERCEPT_RESEND:
        m = qc.measure(transit, qc.BASES[attack.basis], [target], rand)
        return AttackOutput(m.collapsed, m.index)
    if attack.kind is AttackKind.COLLECTIVE_S1:
        if transit.dims != (2,) or not transit.allclose(qc.basis_state("+"), up_to_phase=True):
            raise AttackConfigError("collective_s1 is defined only on a lone |+> input")
        a = attack.arrays()
        plus, minus = qc.X_BASIS.vectors
        amps = np.kron(plus, a["u"]) + np.kron(minus, a["w"])
        phase = transit.overlap(qc.basis_state("+"))
        return AttackOutput(qc.StateVector((2, 2), amps * np.conj(phase)))
    return AttackOutput(_attach(transit, isometry(attack), target))


# ---------------------------------------------------------------- predictions


def predicted_case1_error(attack: AttackModel, kind: ProtocolKind) -> float:
    """Closed-form probability that one attacked Case-1 round is flagged."""
    kind = ProtocolKind(kind)
    if attack.kind is AttackKind.NONE:
        return 0.0
    if attack.kind is AttackKind.COLLECTIVE_S1:
        return float(np.vdot(attack.arrays()["w"], attack.arrays()["w"]).real)
    if attack.kind is AttackKind.INTERCEPT_RESEND:
        # X measurement leaves every Case-1 state (|+-> or Phi+) intact; Z randomizes it
        return 0.5 if attack.basis == "Z" else 0.0
    iso = isometry(attack)
    v0, v1, w0, w1 = iso[0, 0], iso[0, 1], iso[1, 0], iso[1, 1]
    if kind is ProtocolKind.KRAWEC:
        # weight of Phi- after U acts on one half of Phi+
        return 0.25 * _sq(v0 - w1)
    plus_err = 0.25 * _sq(v0 - v1 + w0 - w1)
    if attack.location is Location.BOB_TO_TP:
        # Bob's sigma_z sends |+> or |-> with equal odds
        minus_err = 0.25 * _sq(v0 + v1 - w0 - w1)
        return 0.5 * (plus_err + minus_err)
    return plus_err


def _sq(v: np.ndarray) -> float:
    return float(np.vdot(v, v).real)


class EveConditionals(NamedTuple):
    rho_given_0: qc.DensityMatrix
    rho_given_1: qc.DensityMatrix
    p0: float


def eve_conditional_states(attack: AttackModel, kind: ProtocolKind = ProtocolKind.BASE) -> EveConditionals:
    """Eve's ancilla state conditioned on Alice's measure-resend bit.

    Computed by exact evolution of the attacked leg; Bob's later action on
    the transit is traced out, which is the same whatever basis he uses.
    In Krawec's protocol the states are further conditioned on the public
    "-1" message that marks a key round.
    """
    if not attack.is_collective:
        raise AttackConfigError("conditional ancilla states exist only for collective attacks")
    return _conditionals(attack, ProtocolKind(kind), isometry(attack))


def _conditionals(attack: AttackModel, kind: ProtocolKind, iso: np.ndarray) -> EveConditionals:
    loc = attack.location
    rhos, probs = [], []
    if kind is ProtocolKind.KRAWEC:
        # Key rounds are those announced "-1" (Phi-), which forces Bob's bit to
        # equal Alice's; on either leg Eve is then left holding iso[a, a].
        for a in (0, 1):
            vec = iso[a, a]
            p = _sq(vec)
            probs.append(p)
            rhos.append(np.outer(vec, vec.conj()) / p if p > 0 else np.eye(iso.shape[2]) / iso.shape[2])
    elif loc is Location.TP_TO_ALICE:
        if attack.kind is AttackKind.COLLECTIVE_S1:
            joint = apply_attack(attack, qc.basis_state("+")).state.tensor()[:, None, :]
        else:
            joint = _attach(qc.basis_state("+"), iso, 0).tensor()[:, None, :]
        for a in (0, 1):
            anc_dim = joint.shape[-1]
            comp = joint[a].reshape(-1, anc_dim)  # rows: remaining qubit
            p = float(np.vdot(comp, comp).real)
            probs.append(p)
            rhos.append(comp.T @ comp.conj() / p if p > 0 else np.eye(anc_dim) / anc_dim)
    else:
        for a in (0, 1):
            sent = [qc.basis_state(str(a))]
            if loc is Location.BOB_TO_TP:
                h = qc.apply_gate(sent[0], qc.H, 0)
                sent = [h, qc.apply_gate(h, qc.Z, 0)]
            rho = sum(qc.partial_trace(_attach(s, iso, 0), [1]).matrix for s in sent) / len(sent)
            rhos.append(rho)
            probs.append(0.5)
    if attack.kind is AttackKind.COLLECTIVE_S1:
        rhos = [r[:2, :2] for r in rhos]  # S1 ancilla lives in C^2
    return EveConditionals(qc.density(rhos[0]), qc.density(rhos[1]), probs[0] / sum(probs))


def holevo_info(rho0: qc.DensityMatrix, rho1: qc.DensityMatrix, p0: float = 0.5) -> float:
    """Holevo quantity of the binary ensemble {p0: rho0, 1-p0: rho1}, in bits."""
    p1 = 1.0 - p0
    avg = qc.density(p0 * rho0.matrix + p1 * rho1.matrix)
    chi = qc.vn_entropy(avg) - p0 * qc.vn_entropy(rho0) - p1 * qc.vn_entropy(rho1)
    return max(chi, 0.0)


@dataclass(frozen=True)
class EveInformation:
    holevo_bits: float
    helstrom_success: float
    guess_projector: np.ndarray | None  # 4x4, None when Eve holds no quantum ancilla


def eve_information(attack: AttackModel, kind: ProtocolKind) -> EveInformation:
    """Holevo bound and Helstrom success for Eve's knowledge of Alice's bit.

    Intercept-resend is scored through its equivalent register isometry.
    """
    kind = ProtocolKind(kind)
    if attack.kind is AttackKind.NONE:
        return EveInformation(0.0, 0.5, None)
    cond = _conditionals(attack, kind, isometry(attack))
    chi = holevo_info(cond.rho_given_0, cond.rho_given_1, cond.p0)
    succ = qc.helstrom_success(cond.rho_given_0, cond.rho_given_1, cond.p0)
    proj = None
    if attack.is_collective:
        p = qc.helstrom_projector(cond.rho_given_0, cond.rho_given_1, cond.p0)
        proj = np.zeros((4, 4), dtype=complex)
        proj[: p.shape[0], : p.shape[1]] = p
    return EveInformation(chi, succ, proj)


# ---------------------------------------------------------------- constructors


def make_undetectable_s2(v0, v1, location=Location.ALICE_TO_BOB) -> AttackModel:
    """Strategy-2 attack with w0 = v1 and w1 = v0, which never trips Case 1."""
    v0 = np.asarray(_vec(v0, 4, "v0"))
    v1 = np.asarray(_vec(v1, 4, "v1"))
    norm = _sq(v0) + _sq(v1)
    if abs(norm - 1.0) > TOL:
        raise AttackConfigError(
            f"|v0|^2 + |v1|^2 = 1 violated (residual {abs(norm - 1.0):.3e})",
            [Violation("|v0|^2 + |v1|^2 = 1", abs(norm - 1.0))],
        )
    cross = np.vdot(v0, v1).real
    if abs(cross) > TOL:
        raise AttackConfigError(
            f"Re<v0,v1> = 0 violated (residual {abs(cross):.3e})",
            [Violation("Re<v0,v1> = 0", abs(cross))],
        )
    return AttackModel.collective_s2(v0, v1, v1, v0, location=location)


def random_s2(rng: np.random.Generator, location=Location.ALICE_TO_BOB) -> AttackModel:
    """Haar-ish random isometry C^2 -> C^2 (x) C^4."""
    cols = qc.random_unitary(8, rng)[:, :2]
    img0, img1 = cols[:, 0].reshape(2, 4), cols[:, 1].reshape(2, 4)
    return AttackModel.collective_s2(img0[0], img0[1], img1[0], img1[1], location=location)


def random_undetectable_s2(rng: np.random.Generator, location=Location.ALICE_TO_BOB) -> AttackModel:
    v0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    v1 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    v1 = v1 - (np.vdot(v0, v1).real / _sq(v0)) * v0
    scale = np.sqrt(_sq(v0) + _sq(v1))
    return make_undetectable_s2(v0 / scale, v1 / scale, location=location)
