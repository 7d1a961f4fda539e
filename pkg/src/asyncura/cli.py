"""Command line entry point: ``asyncura run | dump-codes | selftest``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import SystemConfig
from .harness import monte_carlo
from .ldpc import make_ldpc
from .tx import tree_code


def _config(path: str | None) -> SystemConfig:
    return SystemConfig.load(path) if path else SystemConfig()


def cmd_run(args) -> int:
    cfg = _config(args.config)
    summaries = monte_carlo(
        cfg,
        sweep=args.sweep,
        trials=args.trials,
        workers=args.workers,
        seed=args.seed,
        out=args.out,
        records=args.records,
        trace=args.trace,
        timing=args.timing,
    )
    if args.out is None:
        for s in summaries:
            print(",".join(s.row()))
    return 0


def cmd_dump_codes(args) -> int:
    cfg = _config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    code = make_ldpc(cfg.L_code, cfg.B_c, cfg.code_seed)
    code.dump(out / "ldpc_H.txt")
    np.savetxt(out / "ldpc_G.txt", code.generator, fmt="%d")
    tree = tree_code(cfg.B_p, cfg.code_seed)
    for i, g in enumerate(tree.G, 1):
        np.savetxt(out / f"tree_G{i}.txt", g, fmt="%d")
    print(f"wrote LDPC ({code.n},{code.k}) and tree code matrices to {out}")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import selftest

    return 0 if selftest() else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asyncura", description="Asynchronous MIMO-OFDM unsourced random access simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="Monte Carlo run or sweep")
    r.add_argument("--config", help="JSON file with SystemConfig fields (defaults otherwise)")
    r.add_argument("--trials", type=int, default=10)
    r.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    r.add_argument("--sweep", help="param:v1,v2,... with param ebn0_db, P_db or any config field")
    r.add_argument("--out", help="CSV output path (stdout if omitted)")
    r.add_argument("--trace", help="write the per-trial path extraction trace here")
    r.add_argument("--records", help="write one JSON record per trial here")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--timing", action="store_true", help="fill in runtime_s (breaks byte-identical output)")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("dump-codes", help="write the LDPC and tree-code matrices")
    d.add_argument("--out", required=True)
    d.add_argument("--config")
    d.set_defaults(func=cmd_dump_codes)

    s = sub.add_parser("selftest", help="run the built-in invariant checks")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "trials", 1) < 1:
        print("--trials must be positive", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
