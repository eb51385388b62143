"""Round simulation kernels.

One round's quantum state is a ``(2, 2, 4)`` complex tensor: axis 0 is the
transit qubit (Alice's qubit in Krawec's protocol), axis 1 is Bob's half of
the Bell pair (unused, fixed at ``|0>``, in the MASQKD variants) and axis 2
is Eve's ancilla, starting in basis state 0.  Attack isometries are padded
to ``(2, 2, 4)``.

``simulate_numba`` loops rounds inside one compiled function;
``simulate_numpy`` runs the same steps on all rounds at once with masks.
Both read identical counter-based draws, so their outputs agree exactly.

Output columns (int8, -1 = not applicable):
"""

from __future__ import annotations

import numpy as np

from . import rng as _rng
from ._accel import njit

COLUMNS = ("alice_mr", "alice_bit", "bob_h", "bob_second", "bob_bit", "tp_result", "eve")
__doc__ += "\n".join(f"    {i}  {c}" for i, c in enumerate(COLUMNS)) + "\n"

PROTO_BASE, PROTO_IMPROVED, PROTO_KRAWEC = 0, 1, 2
ATK_NONE, ATK_IR, ATK_ISO = 0, 1, 2
LOC_TP_ALICE, LOC_ALICE_BOB, LOC_BOB_TP = 0, 1, 2

_R = 0.7071067811865476


# ---------------------------------------------------------------- numba path


@njit(cache=True, nogil=True)
def _hadamard_q0(psi):
    for b in range(2):
        for m in range(4):
            x = psi[0, b, m]
            y = psi[1, b, m]
            psi[0, b, m] = _R * (x + y)
            psi[1, b, m] = _R * (x - y)


@njit(cache=True, nogil=True)
def _sigma_z_q0(psi):
    for b in range(2):
        for m in range(4):
            psi[1, b, m] = -psi[1, b, m]


@njit(cache=True, nogil=True)
def _measure_z(psi, axis, u):
    p0 = 0.0
    for i in range(2):
        for m in range(4):
            v = psi[0, i, m] if axis == 0 else psi[i, 0, m]
            p0 += v.real * v.real + v.imag * v.imag
    k = 0 if u < p0 else 1
    p = p0 if k == 0 else 1.0 - p0
    s = 1.0 / np.sqrt(p)
    for i in range(2):
        for m in range(4):
            if axis == 0:
                psi[k, i, m] *= s
                psi[1 - k, i, m] = 0.0
            else:
                psi[i, k, m] *= s
                psi[i, 1 - k, m] = 0.0
    return k


@njit(cache=True, nogil=True)
def _measure_x_q0(psi, u):
    _hadamard_q0(psi)
    k = _measure_z(psi, 0, u)
    _hadamard_q0(psi)
    return k


@njit(cache=True, nogil=True)
def _attach(psi, iso):
    tmp = np.zeros((2, 2), dtype=np.complex128)
    for j in range(2):
        for b in range(2):
            tmp[j, b] = psi[j, b, 0]
    for k in range(2):
        for b in range(2):
            for m in range(4):
                psi[k, b, m] = tmp[0, b] * iso[0, k, m] + tmp[1, b] * iso[1, k, m]


@njit(cache=True, nogil=True)
def _bell_measure(psi, u):
    # CNOT(0->1) then H(0) maps Phi+, Phi-, Psi+, Psi- to |00>, |10>, |01>, |11>
    for m in range(4):
        x = psi[1, 0, m]
        psi[1, 0, m] = psi[1, 1, m]
        psi[1, 1, m] = x
    _hadamard_q0(psi)
    acc = 0.0
    out = -1
    last = 0
    for idx in range(4):
        a = idx % 2
        b = idx // 2
        p = 0.0
        for m in range(4):
            v = psi[a, b, m]
            p += v.real * v.real + v.imag * v.imag
        acc += p
        if p > 0.0:
            last = idx
            if u < acc:
                out = idx
                break
    if out < 0:
        out = last
    a = out % 2
    b = out // 2
    norm = 0.0
    for m in range(4):
        v = psi[a, b, m]
        norm += v.real * v.real + v.imag * v.imag
    s = 1.0 / np.sqrt(norm)
    for i in range(2):
        for j in range(2):
            for m in range(4):
                if i == a and j == b:
                    psi[i, j, m] *= s
                else:
                    psi[i, j, m] = 0.0
    return out


@njit(cache=True, nogil=True)
def simulate_numba(proto, atk, loc, iso, ir_basis, eve_proj, seed, start, stop):
    n = stop - start
    out = np.full((n, 7), -1, dtype=np.int8)
    anc = np.zeros((n, 4), dtype=np.complex128)
    psi = np.zeros((2, 2, 4), dtype=np.complex128)
    sseed = np.uint64(seed)
    stream = np.uint64(0)
    u = np.empty(8)
    for i in range(n):
        r = np.uint64(start + i)
        for d in range(8):
            u[d] = _rng.uniform_scalar(sseed, stream, r, np.uint64(d))
        psi[:, :, :] = 0.0
        if proto == PROTO_KRAWEC:
            psi[0, 0, 0] = _R
            psi[1, 1, 0] = _R
        else:
            psi[0, 0, 0] = _R
            psi[1, 0, 0] = _R

        alice_mr = u[0] >= 0.5
        out[i, 0] = 1 if alice_mr else 0
        if proto != PROTO_KRAWEC:
            bob_h = u[1] < 0.5
            out[i, 2] = 1 if bob_h else 0
        else:
            bob_h = False
        second = False
        if proto == PROTO_IMPROVED:
            second = u[2] < 0.5
            out[i, 3] = 1 if second else 0
        elif proto == PROTO_KRAWEC:
            second = u[2] >= 0.5
            out[i, 3] = 1 if second else 0

        eve = -1
        # leg: TP -> Alice
        if loc == LOC_TP_ALICE:
            eve = _attack(psi, atk, iso, ir_basis, u[4])
        if alice_mr:
            out[i, 1] = _measure_z(psi, 0, u[3])
        # leg: Alice -> Bob (A -> C in Krawec)
        if loc == LOC_ALICE_BOB:
            eve = _attack(psi, atk, iso, ir_basis, u[4])

        if proto == PROTO_BASE:
            if bob_h:
                _hadamard_q0(psi)
            out[i, 4] = _measure_z(psi, 0, u[5])
            a0 = out[i, 4]
            a1 = 0
        elif proto == PROTO_IMPROVED:
            if bob_h:
                _hadamard_q0(psi)
            if second:
                _sigma_z_q0(psi)
            if loc == LOC_BOB_TP:
                eve = _attack(psi, atk, iso, ir_basis, u[4])
            _hadamard_q0(psi)  # TP's X measurement, left in the rotated frame
            out[i, 5] = _measure_z(psi, 0, u[6])
            a0 = out[i, 5]
            a1 = 0
        else:
            if second:
                out[i, 4] = _measure_z(psi, 1, u[5])
            out[i, 5] = _bell_measure(psi, u[6])
            a0 = out[i, 5] % 2
            a1 = out[i, 5] // 2

        if atk == ATK_ISO:
            p0 = 0.0
            norm = 0.0
            for m in range(4):
                anc[i, m] = psi[a0, a1, m]
                norm += psi[a0, a1, m].real ** 2 + psi[a0, a1, m].imag ** 2
            for m in range(4):
                anc[i, m] /= np.sqrt(norm)
            for m in range(4):
                for k in range(4):
                    p0 += (np.conj(anc[i, m]) * eve_proj[m, k] * anc[i, k]).real
            eve = 0 if u[7] < p0 else 1
        out[i, 6] = eve
    return out, anc


@njit(cache=True, nogil=True)
def _attack(psi, atk, iso, ir_basis, u):
    if atk == ATK_ISO:
        _attach(psi, iso)
        return -1
    if atk == ATK_IR:
        if ir_basis == 1:
            return _measure_x_q0(psi, u)
        return _measure_z(psi, 0, u)
    return -1


# ---------------------------------------------------------------- numpy path

_H = np.array([[1, 1], [1, -1]], dtype=complex) * _R
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def _np_gate(psi, mask, g):
    if mask.any():
        psi[mask] = np.einsum("kj,rjbm->rkbm", g, psi[mask])


def _np_measure_z(psi, mask, axis, u):
    out = np.full(psi.shape[0], -1, dtype=np.int8)
    if not mask.any():
        return out
    sub = psi[mask]
    sl0 = sub[:, 0] if axis == 0 else sub[:, :, 0]
    p0 = np.einsum("rbm,rbm->r", sl0, sl0.conj()).real
    k = (u[mask] >= p0).astype(np.int8)
    p = np.where(k == 0, p0, 1.0 - p0)
    keep = np.zeros(sub.shape, dtype=bool)
    if axis == 0:
        keep[k == 0, 0] = True
        keep[k == 1, 1] = True
    else:
        keep[k == 0, :, 0] = True
        keep[k == 1, :, 1] = True
    sub = np.where(keep, sub / np.sqrt(p)[:, None, None, None], 0.0)
    psi[mask] = sub
    out[mask] = k
    return out


def _np_attack(psi, atk, iso, ir_basis, u):
    n = psi.shape[0]
    if atk == ATK_ISO:
        base = psi[:, :, :, 0].copy()
        psi[...] = np.einsum("rjb,jkm->rkbm", base, iso)
        return np.full(n, -1, dtype=np.int8)
    if atk == ATK_IR:
        allm = np.ones(n, dtype=bool)
        if ir_basis == 1:
            _np_gate(psi, allm, _H)
            k = _np_measure_z(psi, allm, 0, u)
            _np_gate(psi, allm, _H)
            return k
        return _np_measure_z(psi, allm, 0, u)
    return np.full(n, -1, dtype=np.int8)


def simulate_numpy(proto, atk, loc, iso, ir_basis, eve_proj, seed, start, stop):
    rounds = np.arange(start, stop, dtype=np.uint64)
    n = rounds.size
    u = [_rng.uniforms(seed, _rng.STREAM_ROUNDS, rounds, d) for d in range(8)]
    out = np.full((n, 7), -1, dtype=np.int8)
    psi = np.zeros((n, 2, 2, 4), dtype=complex)
    if proto == PROTO_KRAWEC:
        psi[:, 0, 0, 0] = psi[:, 1, 1, 0] = _R
    else:
        psi[:, 0, 0, 0] = psi[:, 1, 0, 0] = _R
    alice_mr = u[0] >= 0.5
    out[:, 0] = alice_mr
    bob_h = np.zeros(n, dtype=bool)
    if proto != PROTO_KRAWEC:
        bob_h = u[1] < 0.5
        out[:, 2] = bob_h
    second = np.zeros(n, dtype=bool)
    if proto == PROTO_IMPROVED:
        second = u[2] < 0.5
        out[:, 3] = second
    elif proto == PROTO_KRAWEC:
        second = u[2] >= 0.5
        out[:, 3] = second

    eve = np.full(n, -1, dtype=np.int8)
    if loc == LOC_TP_ALICE:
        eve = _np_attack(psi, atk, iso, ir_basis, u[4])
    out[:, 1] = _np_measure_z(psi, alice_mr, 0, u[3])
    if loc == LOC_ALICE_BOB:
        eve = _np_attack(psi, atk, iso, ir_basis, u[4])

    allm = np.ones(n, dtype=bool)
    if proto == PROTO_BASE:
        _np_gate(psi, bob_h, _H)
        out[:, 4] = _np_measure_z(psi, allm, 0, u[5])
        a0, a1 = out[:, 4].astype(np.intp), np.zeros(n, dtype=np.intp)
    elif proto == PROTO_IMPROVED:
        _np_gate(psi, bob_h, _H)
        _np_gate(psi, second, _SZ)
        if loc == LOC_BOB_TP:
            eve = _np_attack(psi, atk, iso, ir_basis, u[4])
        _np_gate(psi, allm, _H)
        out[:, 5] = _np_measure_z(psi, allm, 0, u[6])
        a0, a1 = out[:, 5].astype(np.intp), np.zeros(n, dtype=np.intp)
    else:
        out[:, 4] = _np_measure_z(psi, second, 1, u[5])
        # Bell measurement: CNOT(0->1), H(0), then Z on both
        psi[:, 1] = psi[:, 1, ::-1].copy()
        _np_gate(psi, allm, _H)
        probs = np.einsum("rabm,rabm->rba", psi, psi.conj()).real.reshape(n, 4)  # idx = a + 2b
        cum = np.cumsum(probs, axis=1)
        hit = (u[6][:, None] < cum) & (probs > 0.0)
        last = 3 - np.argmax(probs[:, ::-1] > 0.0, axis=1)
        idx = np.where(hit.any(axis=1), np.argmax(hit, axis=1), last)
        out[:, 5] = idx
        a0, a1 = idx % 2, idx // 2

    anc = np.zeros((n, 4), dtype=complex)
    if atk == ATK_ISO:
        r = np.arange(n)
        anc = psi[r, a0, a1, :]
        anc = anc / np.linalg.norm(anc, axis=1)[:, None]
        p0 = np.einsum("rm,mk,rk->r", anc.conj(), eve_proj, anc).real
        eve = np.where(u[7] < p0, 0, 1).astype(np.int8)
    out[:, 6] = eve
    return out, anc
