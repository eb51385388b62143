"""Round-kernel throughput: compiled (numba) versus pure numpy.

Usage::

    python3 benchmarks/bench_kernels.py [--rounds 40000] [--repeat 5]

Both backends are run on identical inputs and their outputs compared
before any timing is reported.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from masqkd import adversary as adv
from masqkd import protocols as pr
from masqkd._accel import HAS_NUMBA
from masqkd.kinds import Location, ProtocolKind

CASES = [
    ("base/honest", ProtocolKind.BASE, adv.AttackModel.none()),
    ("base/s2", ProtocolKind.BASE, adv.random_s2(np.random.default_rng(0), Location.ALICE_TO_BOB)),
    ("improved/s2@bob_to_tp", ProtocolKind.IMPROVED, adv.random_s2(np.random.default_rng(1), Location.BOB_TO_TP)),
    ("krawec/intercept", ProtocolKind.KRAWEC, adv.AttackModel.intercept_resend(Location.TP_TO_ALICE, "Z")),
]


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rounds", type=int, default=40_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not HAS_NUMBA:
        print("numba is not importable; only the numpy backend can be timed")
    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])

    print(f"{'case':24s} " + " ".join(f"{b:>12s}" for b in backends) + ("     speedup" if HAS_NUMBA else ""))
    for name, kind, attack in CASES:
        run = {b: (lambda b=b: pr.simulate(kind, args.rounds, 1, attack, backend=b)) for b in backends}
        outs = {b: run[b]() for b in backends}  # also triggers compilation
        ref = outs["numpy"]
        for b in backends[1:]:
            if not np.array_equal(outs[b].raw, ref.raw):
                raise SystemExit(f"{name}: backend {b} disagrees with numpy")
        t = {b: best_of(run[b], args.repeat) for b in backends}
        row = f"{name:24s} " + " ".join(f"{t[b] * 1e3:10.1f}ms" for b in backends)
        if HAS_NUMBA:
            row += f"  {t['numpy'] / t['numba']:9.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
