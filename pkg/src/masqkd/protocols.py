"""Round engines for the base and improved MASQKD protocols and Krawec's
mediated SQKD reference.

Rounds are simulated by the compiled kernel in ``_kernels`` and stored
column-wise in a :class:`Transcript`; :class:`RoundRecord` objects are
built on demand.  The per-party decision rules (case classification,
Table-style bit sharing, check evaluation, TP messages) live here as small
scalar functions and are also applied in vectorized form to whole
transcripts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from . import _kernels
from . import adversary as adv
from ._accel import resolve_backend
from .kinds import LOCATION_CODE, PROTOCOL_CODE, Action, AttackKind, Case, ProtocolKind
from .rng import CounterRNG

X_LABELS = ("+", "-")
BELL_LABELS = ("Phi+", "Phi-", "Psi+", "Psi-")
_ALIASES = {"−": "-", "Φ+": "Phi+", "Φ−": "Phi-", "Φ-": "Phi-", "Ψ+": "Psi+", "Ψ−": "Psi-", "Ψ-": "Psi-"}


class ProtocolConfigError(ValueError):
    """Adversary placement or parameters incompatible with the protocol."""


# ---------------------------------------------------------------- choices


@dataclass(frozen=True)
class AliceChoice:
    action: Action
    measured_bit: int | None = None

    def __post_init__(self):
        if (self.action is Action.MEASURE_RESEND) != (self.measured_bit is not None):
            raise ValueError("measured_bit must be present exactly for measure-resend")


@dataclass(frozen=True)
class BobChoice:
    """Bob's private decisions.

    ``hadamard`` applies to the MASQKD variants, ``sigma_z`` only to the
    improved one and ``measured_bit`` to the base one.  In Krawec's
    protocol Bob is a reflect/measure-resend party like Alice, recorded in
    ``action`` (with ``measured_bit`` when he measures).
    """

    hadamard: bool | None = None
    sigma_z: bool | None = None
    measured_bit: int | None = None
    action: Action | None = None


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    kind: ProtocolKind
    alice: AliceChoice
    bob: BobChoice
    tp_result: str | int | None  # improved: "+"/"-"; krawec: +1/-1
    case: Case
    check_error: bool
    shared_bit: int | None
    prepared_count: int
    bell_outcome: str | None = None
    key_mismatch: bool = False
    eve_guess: int | None = None


@dataclass(frozen=True, eq=False)
class EveRecord:
    round_index: int
    ancilla_state: np.ndarray | None
    eve_guess: int | None


class Message(NamedTuple):
    sender: str
    receiver: str
    payload: dict


# ---------------------------------------------------------------- decision rules


def classify_case(kind: ProtocolKind, alice: AliceChoice, bob: BobChoice) -> Case:
    kind = ProtocolKind(kind)
    a_reflect = alice.action is Action.REFLECT
    if kind is ProtocolKind.KRAWEC:
        b_reflect = bob.action is Action.REFLECT
        if a_reflect and b_reflect:
            return Case.CASE1
        if not a_reflect and not b_reflect:
            return Case.CASE2
        return Case.CASE3
    h = bool(bob.hadamard)
    if kind is ProtocolKind.BASE:
        check, key = a_reflect and h, not a_reflect and not h
    else:
        check, key = a_reflect and not h, not a_reflect and h
    if check:
        return Case.CASE1
    if key:
        return Case.CASE2
    return Case.CASE3


def shared_bit_base(alice_bit: int, bob_bit: int) -> int | None:
    return alice_bit if alice_bit == bob_bit else None


def shared_bit_improved(alice_bit: int, tp_x_result: str) -> tuple[int, bool]:
    """Alice's key bit and her inference of Bob's sigma_z from the public X result.

    Bob's H maps |a> to |+> (a=0) or |-> (a=1); sigma_z flips the sign.
    The shared bit is 0 exactly when sigma_z was applied.
    """
    tp_x_result = _ALIASES.get(tp_x_result, tp_x_result)
    if tp_x_result not in X_LABELS:
        raise ValueError(f"X result must be '+' or '-', got {tp_x_result!r}")
    flipped = (alice_bit == 0) == (tp_x_result == "-")
    return (0 if flipped else 1), flipped


def check_case1_improved(bob_sigma_z: bool, tp_x_result: str) -> bool:
    """True when the published X result contradicts Bob's sigma_z choice."""
    expected = "-" if bob_sigma_z else "+"
    return _ALIASES.get(tp_x_result, tp_x_result) != expected


def krawec_tp_message(bell_outcome: str) -> int:
    bell_outcome = _ALIASES.get(bell_outcome, bell_outcome)
    if bell_outcome not in BELL_LABELS:
        raise ValueError(f"unknown Bell outcome {bell_outcome!r}")
    return -1 if bell_outcome == "Phi-" else 1


# ---------------------------------------------------------------- kernel glue


@dataclass(frozen=True, eq=False)
class KernelAttack:
    code: int
    location: int
    iso: np.ndarray
    ir_basis: int
    eve_proj: np.ndarray
    info: adv.EveInformation


def prepare_attack(attack: adv.AttackModel, kind: ProtocolKind) -> KernelAttack:
    kind = ProtocolKind(kind)
    violations = adv.validate_attack(attack, kind)
    if violations:
        raise ProtocolConfigError("; ".join(str(v) for v in violations))
    iso = np.zeros((2, 2, 4), dtype=np.complex128)
    iso[0, 0, 0] = iso[1, 1, 0] = 1.0
    code = _kernels.ATK_NONE
    if attack.is_collective:
        raw = adv.isometry(attack)
        iso = np.zeros((2, 2, 4), dtype=np.complex128)
        iso[:, :, : raw.shape[2]] = raw
        code = _kernels.ATK_ISO
    elif attack.kind is AttackKind.INTERCEPT_RESEND:
        code = _kernels.ATK_IR
    info = adv.eve_information(attack, kind)
    proj = info.guess_projector if info.guess_projector is not None else np.eye(4, dtype=np.complex128)
    loc = LOCATION_CODE[attack.location] if attack.kind is not AttackKind.NONE else -1
    return KernelAttack(
        code, loc, iso, 1 if attack.basis == "X" else 0, np.ascontiguousarray(proj, dtype=np.complex128), info
    )


def _simulate(kind, katk: KernelAttack, seed: int, start: int, stop: int, backend: str):
    fn = _kernels.simulate_numba if backend == "numba" else _kernels.simulate_numpy
    return fn(
        PROTOCOL_CODE[kind], katk.code, katk.location, katk.iso, katk.ir_basis, katk.eve_proj, int(seed), start, stop
    )


def simulate_columns(kind, attack, seed: int, n_rounds: int, *, workers: int = 1, backend: str | None = None,
                     start: int = 0):
    """Raw kernel output for rounds ``start .. start + n_rounds``.

    Work is split into contiguous chunks, one per worker; the counter-based
    draws make the result independent of the split.
    """
    kind = ProtocolKind(kind)
    backend = resolve_backend(backend)
    katk = attack if isinstance(attack, KernelAttack) else prepare_attack(attack, kind)
    workers = max(1, int(workers))
    bounds = np.linspace(start, start + n_rounds, workers + 1).astype(int)
    spans = [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if len(spans) <= 1:
        return _simulate(kind, katk, seed, start, start + n_rounds, backend)
    with ThreadPoolExecutor(max_workers=len(spans)) as pool:
        parts = list(pool.map(lambda s: _simulate(kind, katk, seed, s[0], s[1], backend), spans))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


# ---------------------------------------------------------------- transcript


class Transcript:
    """Complete record of one protocol run, stored column-wise.

    Raw columns mirror the kernel output (-1 = not applicable); derived
    columns (``case``, ``check_error``, key bits, ...) are computed with the
    same rules as :func:`classify_case` and friends.
    """

    def __init__(self, kind, attack: adv.AttackModel, seed: int, columns: np.ndarray, eve_ancilla: np.ndarray,
                 config: dict | None = None, start: int = 0, eve_info: adv.EveInformation | None = None):
        self.kind = ProtocolKind(kind)
        self.attack = attack
        self.seed = int(seed)
        self.config = dict(config or {})
        self.start = int(start)
        self.eve_info = eve_info
        cols = np.asarray(columns, dtype=np.int8)
        self.raw = cols
        for i, name in enumerate(_kernels.COLUMNS):
            setattr(self, name, cols[:, i])
        self.eve_ancilla = eve_ancilla
        self._derive()

    def __len__(self) -> int:
        return self.raw.shape[0]

    @property
    def round_indices(self) -> np.ndarray:
        return np.arange(self.start, self.start + len(self))

    def _derive(self):
        k = self.kind
        a_mr = self.alice_mr == 1
        if k is ProtocolKind.KRAWEC:
            b_mr = self.bob_second == 1
            c1, c2 = ~a_mr & ~b_mr, a_mr & b_mr
            self.check_error = c1 & (self.tp_result == 1)
            candidate = c2 & (self.tp_result == 1)
            alice_key, bob_key = self.alice_bit, self.bob_bit
            self.prepared = (2 + a_mr + b_mr).astype(np.int8)
        else:
            h = self.bob_h == 1
            if k is ProtocolKind.BASE:
                c1, c2 = ~a_mr & h, a_mr & ~h
                self.check_error = c1 & (self.bob_bit == 1)
                alice_key, bob_key = self.alice_bit, self.bob_bit
            else:
                c1, c2 = ~a_mr & ~h, a_mr & h
                self.check_error = c1 & (self.tp_result != self.bob_second)
                alice_key = (1 - (self.alice_bit ^ self.tp_result)).astype(np.int8)
                bob_key = (1 - self.bob_second).astype(np.int8)
            candidate = c2
            self.prepared = (1 + a_mr).astype(np.int8)
        self.case = np.full(len(self), Case.CASE3.value, dtype=np.int8)
        self.case[c1] = Case.CASE1.value
        self.case[c2] = Case.CASE2.value
        self.candidate = candidate
        self.alice_key = np.where(candidate, alice_key, -1).astype(np.int8)
        self.bob_key = np.where(candidate, bob_key, -1).astype(np.int8)
        self.key_mismatch = candidate & (self.alice_key != self.bob_key)
        self.shared_bit = np.where(candidate & ~self.key_mismatch, self.alice_key, -1).astype(np.int8)

    # ---- counts

    def case_counts(self) -> dict[str, int]:
        return {f"case{c}": int(np.count_nonzero(self.case == c)) for c in (1, 2, 3)}

    @property
    def prepared_total(self) -> int:
        return int(self.prepared.sum(dtype=np.int64))

    # ---- object views

    def record(self, i: int) -> RoundRecord:
        """RoundRecord for position ``i`` (round index ``start + i``)."""
        r = self.raw[i]
        a_mr, a_bit, b_h, b_2, b_bit, tp, eve = (int(x) for x in r)
        alice = AliceChoice(Action.MEASURE_RESEND, a_bit) if a_mr else AliceChoice(Action.REFLECT)
        tp_result: str | int | None = None
        bell = None
        if self.kind is ProtocolKind.BASE:
            bob = BobChoice(hadamard=bool(b_h), measured_bit=b_bit)
        elif self.kind is ProtocolKind.IMPROVED:
            bob = BobChoice(hadamard=bool(b_h), sigma_z=bool(b_2))
            tp_result = X_LABELS[tp]
        else:
            bob = BobChoice(action=Action.MEASURE_RESEND if b_2 else Action.REFLECT,
                            measured_bit=b_bit if b_2 else None)
            bell = BELL_LABELS[tp]
            tp_result = krawec_tp_message(bell)
        sb = int(self.shared_bit[i])
        return RoundRecord(
            round_index=self.start + i,
            kind=self.kind,
            alice=alice,
            bob=bob,
            tp_result=tp_result,
            case=Case(int(self.case[i])),
            check_error=bool(self.check_error[i]),
            shared_bit=None if sb < 0 else sb,
            prepared_count=int(self.prepared[i]),
            bell_outcome=bell,
            key_mismatch=bool(self.key_mismatch[i]),
            eve_guess=None if eve < 0 else eve,
        )

    @property
    def rounds(self) -> "_RoundView":
        return _RoundView(self)

    def eve_records(self) -> list[EveRecord]:
        if self.attack.kind is AttackKind.NONE:
            return []
        keep_state = self.attack.is_collective
        return [
            EveRecord(self.start + i, self.eve_ancilla[i].copy() if keep_state else None,
                      None if self.eve[i] < 0 else int(self.eve[i]))
            for i in range(len(self))
        ]

    @cached_property
    def classical_messages(self) -> list[Message]:
        """Authenticated-channel log in protocol step order.

        Public TP announcements for every round come first, then the
        Alice/Bob discussion round by round.
        """
        log: list[Message] = []
        idx = self.round_indices
        if self.kind is ProtocolKind.IMPROVED:
            for r, tp in zip(idx, self.tp_result):
                log.append(Message("TP", "public", {"round": int(r), "x_result": X_LABELS[tp]}))
        elif self.kind is ProtocolKind.KRAWEC:
            for r, tp in zip(idx, self.tp_result):
                msg = -1 if tp == 1 else 1
                log.append(Message("TP", "Alice", {"round": int(r), "message": msg}))
                log.append(Message("TP", "Bob", {"round": int(r), "message": msg}))
        for i, r in enumerate(idx):
            op = "measure_resend" if self.alice_mr[i] else "reflect"
            log.append(Message("Alice", "Bob", {"round": int(r), "operation": op}))
            if self.kind is ProtocolKind.KRAWEC:
                bop = "measure_resend" if self.bob_second[i] else "reflect"
                log.append(Message("Bob", "Alice", {"round": int(r), "operation": bop}))
            else:
                log.append(Message("Bob", "Alice", {"round": int(r), "hadamard": bool(self.bob_h[i])}))
            if self.kind is ProtocolKind.IMPROVED and self.case[i] == Case.CASE1.value:
                verdict = "fail" if self.check_error[i] else "pass"
                log.append(Message("Bob", "Alice", {"round": int(r), "case1_check": verdict}))
        return log

    def fingerprint(self) -> bytes:
        """Byte string covering every recorded value, for equality checks."""
        return (
            self.kind.value.encode()
            + self.seed.to_bytes(8, "little")
            + self.raw.tobytes()
            + np.round(self.eve_ancilla, 12).tobytes()
        )


class _RoundView(Sequence):
    def __init__(self, t: Transcript):
        self._t = t

    def __len__(self) -> int:
        return len(self._t)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self._t.record(j) for j in range(*i.indices(len(self._t)))]
        if i < 0:
            i += len(self._t)
        if not 0 <= i < len(self._t):
            raise IndexError(i)
        return self._t.record(i)

    def __iter__(self) -> Iterator[RoundRecord]:
        for i in range(len(self._t)):
            yield self._t.record(i)


# ---------------------------------------------------------------- entry points


def simulate(kind, n_rounds: int, seed: int, attack: adv.AttackModel | None = None, *, workers: int = 1,
             backend: str | None = None, start: int = 0, config: dict | None = None) -> Transcript:
    kind = ProtocolKind(kind)
    attack = attack or adv.AttackModel.none()
    katk = prepare_attack(attack, kind)
    cols, anc = simulate_columns(kind, katk, seed, n_rounds, workers=workers, backend=backend, start=start)
    return Transcript(kind, attack, seed, cols, anc, config=config, start=start, eve_info=katk.info)


def run_protocol(config, *, workers: int = 1, backend: str | None = None) -> Transcript:
    """All ``8 n`` rounds of ``config``; abort decisions are left to post-processing."""
    return simulate(config.protocol, config.rounds, config.seed, config.attack, workers=workers,
                    backend=backend, config=config.to_dict())


def run_round(kind, round_index: int, adversary: adv.AttackModel | None, rng: CounterRNG | int,
              backend: str | None = None) -> RoundRecord:
    """Simulate a single round and classify it with the scalar decision rules."""
    kind = ProtocolKind(kind)
    seed = rng.seed if isinstance(rng, CounterRNG) else int(rng)
    adversary = adversary or adv.AttackModel.none()
    cols, _ = simulate_columns(kind, prepare_attack(adversary, kind), seed, 1, backend=backend, start=round_index)
    a_mr, a_bit, b_h, b_2, b_bit, tp, eve = (int(x) for x in cols[0])
    alice = AliceChoice(Action.MEASURE_RESEND, a_bit) if a_mr else AliceChoice(Action.REFLECT)
    tp_result: str | int | None = None
    bell = None
    shared = None
    mismatch = False
    check = False
    if kind is ProtocolKind.BASE:
        bob = BobChoice(hadamard=bool(b_h), measured_bit=b_bit)
        case = classify_case(kind, alice, bob)
        if case is Case.CASE1:
            check = b_bit != 0
        elif case is Case.CASE2:
            shared = shared_bit_base(a_bit, b_bit)
            mismatch = shared is None
        prepared = 1 + a_mr
    elif kind is ProtocolKind.IMPROVED:
        bob = BobChoice(hadamard=bool(b_h), sigma_z=bool(b_2))
        tp_result = X_LABELS[tp]
        case = classify_case(kind, alice, bob)
        if case is Case.CASE1:
            check = check_case1_improved(bool(b_2), tp_result)
        elif case is Case.CASE2:
            bit, _ = shared_bit_improved(a_bit, tp_result)
            mismatch = bit != 1 - b_2
            shared = None if mismatch else bit
        prepared = 1 + a_mr
    else:
        bob = BobChoice(action=Action.MEASURE_RESEND if b_2 else Action.REFLECT, measured_bit=b_bit if b_2 else None)
        bell = BELL_LABELS[tp]
        tp_result = krawec_tp_message(bell)
        case = classify_case(kind, alice, bob)
        if case is Case.CASE1:
            check = tp_result == -1
        elif case is Case.CASE2 and tp_result == -1:
            shared = shared_bit_base(a_bit, b_bit)
            mismatch = shared is None
        prepared = 2 + a_mr + b_2
    return RoundRecord(round_index, kind, alice, bob, tp_result, case, check, shared, prepared, bell, mismatch,
                       None if eve < 0 else eve)
