"""Command line entry point: ``masqkd run|sweep|compare|attack-check``.

Exit codes: 0 success, 1 when a run aborts (``--abort-exit 0`` disables
this), 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import adversary as adv
from .config import ConfigError, attack_from_dict, load_config
from .harness import COMPARE_COLUMNS, compare_protocols, report_json, rows_to_csv, run_experiment, sweep
from .kinds import ProtocolKind

EXIT_OK, EXIT_ABORT, EXIT_CONFIG = 0, 1, 2


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _grid(text: str) -> list[float]:
    if not text.strip():
        return []
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated numbers, got {text!r}") from None


def cmd_run(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    report = run_experiment(cfg, workers=args.workers, backend=args.backend)
    _emit(report_json(report), args.out or cfg.output_path)
    return args.abort_exit if report["abort"] else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, seed_override=args.seed)
    raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    raw["seed"] = cfg.seed
    _emit(sweep(raw, args.param, args.grid, workers=args.workers, backend=args.backend), args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    rows = compare_protocols(args.n, args.seed, workers=args.workers, backend=args.backend)
    _emit(rows_to_csv(rows, COMPARE_COLUMNS), args.out)
    return EXIT_OK


def cmd_attack_check(args) -> int:
    try:
        data = json.loads(Path(args.attack_file).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.attack_file}: JSON parse error at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{args.attack_file}: attack file must hold a JSON object")
    try:
        kind = ProtocolKind(data.pop("protocol", args.protocol))
    except ValueError:
        raise ConfigError(f"{args.attack_file}: unknown protocol") from None
    attack = attack_from_dict(data)
    violations = adv.validate_attack(attack, kind)
    result = {
        "attack": attack.describe(),
        "protocol": kind.value,
        "valid": not violations,
        "violations": [{"constraint": v.constraint, "residual": v.residual} for v in violations],
    }
    if not violations:
        info = adv.eve_information(attack, kind)
        result.update(
            predicted_case1_error=adv.predicted_case1_error(attack, kind),
            holevo_bits=info.holevo_bits,
            helstrom_success=info.helstrom_success,
        )
    _emit(json.dumps(result, indent=2) + "\n", args.out)
    return EXIT_OK if not violations else EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="masqkd", description="Mediated asymmetric semi-quantum key distribution simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--out", help="write output here instead of stdout")
        sp.add_argument("--workers", type=int, default=1, help="threads used for round simulation")
        sp.add_argument("--backend", choices=("numba", "numpy"), default=None)
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="overrides MASQKD_SEED and the config file")

    sp = sub.add_parser("run", help="run one experiment and print the JSON report")
    sp.add_argument("config")
    sp.add_argument("--abort-exit", type=int, default=EXIT_ABORT, help="exit code when the run aborts")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="vary one config scalar and emit CSV")
    sp.add_argument("config")
    sp.add_argument("--param", required=True, help="dotted path, e.g. n or attack.params.theta")
    sp.add_argument("--grid", required=True, type=_grid, help="comma-separated values")
    common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("compare", help="qubit-efficiency comparison table as CSV")
    sp.add_argument("--n", type=int, default=2000)
    sp.add_argument("--seed", type=int, default=0)
    common(sp, seed=False)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("attack-check", help="validate an attack file and print its predictions")
    sp.add_argument("attack_file")
    sp.add_argument("--protocol", default="base", choices=[k.value for k in ProtocolKind])
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_attack_check)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, adv.AttackConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
