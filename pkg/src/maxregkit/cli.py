"""Command line front-end: ``maxregkit run|sweep|bench --config path``."""
from __future__ import annotations

import argparse
import sys

from .driver import ConfigError, bench, load_config, run, sweep
from .errors import GeneratorError

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxregkit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep", "bench"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON run configuration")
        s.add_argument("--out", help="report path (default: config output.path, else stdout)")
        s.add_argument("--format", choices=("csv", "json"), help="report format (default json)")
        s.add_argument("--seed", type=int, help="override the config seed")
        s.add_argument("--quiet", action="store_true", help="suppress the summary on stderr")
        if name in ("sweep", "bench"):
            s.add_argument("--N", type=int, nargs="+", dest="N_list", help="grid sizes")
        if name == "bench":
            s.add_argument("--n", type=int, nargs="+", dest="n_list", help="matrix sizes")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.command == "run":
            report = run(cfg)
        elif args.command == "sweep":
            report = sweep(cfg, args.N_list or cfg.sweep.get("N", [512, 1024, 2048]))
        else:
            report = bench(cfg, args.N_list or cfg.bench.get("N", [512, 2048, 8192]),
                           args.n_list or cfg.bench.get("n", [4]))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GeneratorError, ArithmeticError) as exc:
        print(f"numerical validation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    fmt = args.format or cfg.output.get("format", "json")
    out = args.out or cfg.output.get("path")
    text = report.to_csv() if fmt == "csv" else report.to_json()
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    if not args.quiet:
        for r in report.rows:
            status = "PASS" if r["pass"] else "FAIL"
            value = r.get("value")
            shown = "error: " + r["error"]["message"] if "error" in r else f"{value:.3e}" if value is not None else "-"
            print(f"{status}  {r['experiment']:<24} {r.get('path') or '':<8} N={r.get('N')}  {shown}",
                  file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
