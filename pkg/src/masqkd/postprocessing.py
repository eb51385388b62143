"""Sifting, checking, privacy amplification and efficiency accounting."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .kinds import Case, EfficiencyConvention
from .protocols import Transcript
from .rng import STREAM_DISCLOSURE, STREAM_TOEPLITZ, uniforms


@dataclass(frozen=True, eq=False)
class SiftedKey:
    bits: np.ndarray
    source_rounds: np.ndarray

    def __len__(self) -> int:
        return int(self.bits.size)


@dataclass(frozen=True, eq=False)
class CheckReport:
    case1_rounds: int
    case1_errors: int
    case1_error_rate: float | None
    candidate_rounds: np.ndarray  # Case-2 rounds the parties believe carry a bit
    case2_disclosed_indices: np.ndarray  # round indices
    case2_mismatch_count: int  # mismatches among disclosed bits
    case2_true_mismatches: int
    case2_mismatch_rate: float | None
    threshold: float
    abort: bool

    @property
    def disclosed_count(self) -> int:
        return int(self.case2_disclosed_indices.size)


@dataclass(frozen=True, eq=False)
class KeyMaterial:
    bits: np.ndarray
    pa_seed: int | np.ndarray

    def __len__(self) -> int:
        return int(self.bits.size)

    def hex_digest(self) -> str:
        payload = len(self.bits).to_bytes(8, "little") + np.packbits(self.bits.astype(np.uint8)).tobytes()
        return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class EfficiencyReport:
    prepared_total: int
    key_bits: int
    convention: EfficiencyConvention
    eta: float


def sift(transcript: Transcript) -> SiftedKey:
    """Shared bits of Case-2 rounds in round order, mismatches excluded."""
    keep = transcript.shared_bit >= 0
    return SiftedKey(transcript.shared_bit[keep].astype(np.uint8), transcript.round_indices[keep])


def disclosure_sample(count: int, k: int, seed: int) -> np.ndarray:
    """Sorted positions of ``k`` out of ``count`` items, chosen uniformly.

    Each position gets a counter-based key; the ``k`` smallest keys win.
    """
    if k <= 0 or count <= 0:
        return np.zeros(0, dtype=np.int64)
    keys = uniforms(seed, STREAM_DISCLOSURE, np.arange(count), 0)
    return np.sort(np.argsort(keys, kind="stable")[:k])


def estimate_and_decide(transcript: Transcript, threshold: float, disclosure_fraction: float = 0.5,
                        seed: int | None = None) -> CheckReport:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    if not 0.0 <= disclosure_fraction <= 1.0:
        raise ValueError("disclosure_fraction must lie in [0, 1]")
    seed = transcript.seed if seed is None else seed
    c1 = transcript.case == Case.CASE1.value
    n1 = int(np.count_nonzero(c1))
    e1 = int(np.count_nonzero(transcript.check_error & c1))
    rate1 = e1 / n1 if n1 else None

    cand = np.flatnonzero(transcript.candidate)
    k = int(math.floor(disclosure_fraction * cand.size))
    picked = cand[disclosure_sample(cand.size, k, seed)]
    found = int(np.count_nonzero(transcript.key_mismatch[picked]))
    rate2 = found / picked.size if picked.size else None

    abort = (rate1 is not None and rate1 > threshold) or (rate2 is not None and rate2 > threshold)
    return CheckReport(
        case1_rounds=n1,
        case1_errors=e1,
        case1_error_rate=rate1,
        candidate_rounds=transcript.round_indices[cand],
        case2_disclosed_indices=transcript.round_indices[picked],
        case2_mismatch_count=found,
        case2_true_mismatches=int(np.count_nonzero(transcript.key_mismatch)),
        case2_mismatch_rate=rate2,
        threshold=float(threshold),
        abort=bool(abort),
    )


def remaining_key(sifted: SiftedKey, report: CheckReport) -> SiftedKey:
    """Sifted bits whose rounds were not disclosed."""
    keep = ~np.isin(sifted.source_rounds, report.case2_disclosed_indices)
    return SiftedKey(sifted.bits[keep], sifted.source_rounds[keep])


def binary_entropy(q: float) -> float:
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"binary entropy needs q in [0, 1], got {q}")
    if q in (0.0, 1.0):
        return 0.0
    return float(-q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q))


def key_rate_estimate(qber: float, eve_info_bits: float) -> float:
    """max(0, I(A:B) - I(A:E)) with I(A:B) = 1 - h(qber)."""
    if not 0.0 <= qber <= 0.5:
        raise ValueError("qber must lie in [0, 0.5]")
    if eve_info_bits < 0.0:
        raise ValueError("eve_info_bits must be nonnegative")
    return max(0.0, 1.0 - binary_entropy(qber) - eve_info_bits)


def toeplitz_bits(seed: int, count: int) -> np.ndarray:
    return (uniforms(seed, STREAM_TOEPLITZ, np.arange(count), 0) < 0.5).astype(np.uint8)


def privacy_amplification(bits, out_len: int, pa_seed: int | np.ndarray) -> KeyMaterial:
    """Hash ``bits`` with an ``out_len x len(bits)`` Toeplitz matrix over GF(2).

    The matrix is ``T[i, j] = d[i - j + len(bits) - 1]`` for a diagonal
    string ``d`` of ``out_len + len(bits) - 1`` bits, drawn from the
    counter-based generator when ``pa_seed`` is an int or taken verbatim
    when it is a bit array.
    """
    x = np.asarray(bits, dtype=np.uint8).reshape(-1)
    n = x.size
    if not 0 <= out_len <= n:
        raise ValueError(f"out_len must lie in [0, {n}], got {out_len}")
    if out_len == 0:
        return KeyMaterial(np.zeros(0, dtype=np.uint8), pa_seed)
    need = out_len + n - 1
    if isinstance(pa_seed, (int, np.integer)):
        diag = toeplitz_bits(int(pa_seed), need)
    else:
        diag = np.asarray(pa_seed, dtype=np.uint8).reshape(-1)
        if diag.size != need:
            raise ValueError(f"explicit Toeplitz diagonal needs {need} bits, got {diag.size}")
    # (T x)[i] = sum_j d[i - j + n - 1] x[j] = (d * x)[i + n - 1]
    full = np.convolve(diag.astype(np.int64), x.astype(np.int64))
    out = (full[n - 1 : n - 1 + out_len] & 1).astype(np.uint8)
    return KeyMaterial(out, pa_seed)


def qubit_efficiency(transcript: Transcript, check_report: CheckReport,
                     convention: EfficiencyConvention = EfficiencyConvention.FINAL_OVER_PREPARED) -> EfficiencyReport:
    convention = EfficiencyConvention(convention)
    m = transcript.prepared_total
    sifted = sift(transcript)
    if convention is EfficiencyConvention.RAW_OVER_PREPARED:
        n_key = len(sifted)
    else:
        n_key = len(remaining_key(sifted, check_report))
    return EfficiencyReport(m, n_key, convention, n_key / m)
