"""Command-line entry point: compile, monitor, train, eval and diag."""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .automata import (
    UnsupportedFragment,
    compile_monitor,
    export_hoa,
    ltl_to_nba,
    reach_avoid_decompose,
)
from .config import ConfigError, RunConfig, dump_config, load_config, set_path, validate_config
from .ltl import LTLError, parse
from .monitor import MonitorSet, Spec, load_specs
from .rl.core import NaNGradient

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _emit_csv(rows: List[Dict[str, object]], path: Optional[str], timestamp: bool = False) -> None:
    from .rl.trainer import format_row, write_csv

    if path:
        write_csv(path, rows, timestamp)
        return
    if not rows:
        return
    cols = list(rows[0].keys())
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow(format_row(r, cols))


# --------------------------------------------------------------------- compile
def _specs_from_args(args) -> List[Spec]:
    if args.spec_file:
        return load_specs(args.spec_file, args.alphabet)
    if not args.formula:
        raise UsageError("give a formula or --spec-file")
    return [Spec.from_text("spec", args.formula, args.alphabet)]


def cmd_compile(args) -> int:
    specs = _specs_from_args(args)
    hoa_parts = []
    for spec in specs:
        seq = reach_avoid_decompose(spec.formula)
        A = compile_monitor(seq)
        nba = ltl_to_nba(spec.formula)
        print(f"spec {spec.id}: {spec.formula}")
        for i, st in enumerate(seq.stages):
            print(f"  stage {i}: reach {st.reach}  avoid {st.avoid}")
        if seq.global_safety is not None:
            print(f"  global safety: {seq.global_safety}")
        print(f"  monitor: {A.n_states} states over {list(A.atoms)}")
        for i, name in enumerate(A.names):
            tags = [t for t, q in (("initial", A.initial), ("final", A.final), ("reject", A.reject)) if q == i]
            print(f"    {i} {name}" + (f" [{', '.join(tags)}]" if tags else ""))
        for s, label, d in A.edges():
            print(f"    {A.names[s]} --{label}--> {A.names[d]}")
        print(f"  buchi: {nba.n_states} states, {len(nba.edges)} edges, {len(nba.accepting)} accepting")
        hoa_parts.append(export_hoa(A, spec.id))
    if args.hoa:
        Path(args.hoa).write_text("".join(hoa_parts))
        print(f"wrote {args.hoa}")
    return EXIT_OK


# --------------------------------------------------------------------- monitor
def read_trace(path) -> List[frozenset]:
    """One letter per line: propositions separated by spaces or commas; ``-`` or
    ``{}`` is the empty letter. Blank lines and ``#`` comments are skipped."""
    letters = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line in ("-", "{}"):
            letters.append(frozenset())
            continue
        letters.append(frozenset(p for p in line.replace(",", " ").strip("{}").split() if p))
    return letters


def cmd_monitor(args) -> int:
    specs = _specs_from_args(args)
    letters = read_trace(args.trace)
    if not letters:
        raise UsageError(f"{args.trace}: empty trace")
    ms = MonitorSet(specs)
    rows = []
    disc = np.zeros(len(specs))
    for t, a in enumerate(letters):
        cv = ms.observe(a)
        disc += args.gamma**t * cv.weighted
        row: Dict[str, object] = {"t": t, "letter": " ".join(sorted(a)) or "-"}
        for k, s in enumerate(specs):
            row[f"state_{s.id}"] = cv.states[k]
            row[f"event_{s.id}"] = cv.events[k].name
            row[f"cost_{s.id}"] = float(cv.weighted[k])
        rows.append(row)
    _emit_csv(rows, args.csv)
    out = sys.stderr if not args.csv else sys.stdout
    for k, s in enumerate(specs):
        print(f"{s.id}: discounted cost {disc[k]:.6g}, final state {ms.state_names()[k]}", file=out)
    return EXIT_OK


# ----------------------------------------------------------------------- train
def parse_sweep(items: Sequence[str]) -> List[Dict[str, object]]:
    """``key=v1,v2 key2=w1,w2`` -> list of override dicts (cartesian product)."""
    axes = []
    for item in items:
        if "=" not in item:
            raise UsageError(f"bad sweep axis {item!r}; expected key=v1,v2")
        key, vals = item.split("=", 1)
        try:
            values = [json.loads(v) for v in vals.split(",") if v]
        except json.JSONDecodeError as e:
            raise UsageError(f"bad sweep value in {item!r}: {e}") from None
        if not values:
            raise UsageError(f"sweep axis {key} has no values")
        axes.append([(key, v) for v in values])
    return [dict(combo) for combo in itertools.product(*axes)]


def parse_overrides(items: Sequence[str]) -> Dict[str, object]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"bad override {item!r}; expected key=value")
        key, raw = item.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def summarize(summaries: List[Dict[str, float]]) -> Dict[str, float]:
    """Mean and standard deviation across seeds for every summary key."""
    out: Dict[str, float] = {"seeds": len(summaries)}
    for key in summaries[0]:
        v = np.array([s[key] for s in summaries], dtype=float)
        out[f"{key}_mean"] = float(v.mean())
        out[f"{key}_std"] = float(v.std())
    return out


def summary_line(label: str, agg: Dict[str, float]) -> str:
    parts = []
    for key in [k[:-5] for k in agg if k.endswith("_mean")]:
        if key in ("length", "cost") or key.startswith("vr_") or key == "budget":
            continue
        parts.append(f"{key} {agg[key + '_mean']:.4g} ± {agg[key + '_std']:.2g}")
    return f"{label}: " + " | ".join(parts)


def run_seeds(cfg: RunConfig, seeds: Sequence[int], out: Path, timestamp: bool, verbose: bool) -> Dict[str, float]:
    from .rl.trainer import train

    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(dump_config(cfg))
    summaries = []
    for seed in seeds:
        def progress(row, seed=seed):
            if verbose and row["iteration"] % 20 == 0:
                print(f"  seed {seed} it {row['iteration']} steps {row['steps']} reward {row['reward']:.4g}", file=sys.stderr)

        tr = train(cfg, seed, out / f"seed_{seed}", timestamp, progress)
        s = tr.summary()
        summaries.append(s)
        print(f"seed {seed}: " + " ".join(f"{k} {v:.4g}" for k, v in s.items() if not k.startswith("vr_")))
    return summarize(summaries)


def cmd_train(args) -> int:
    from .rl.trainer import write_csv

    cfg = load_config(args.config, parse_overrides(args.set))
    seeds = [args.seed] if args.seed is not None else list(cfg.seeds)
    root = Path(args.out if args.out else cfg.out) / cfg.name
    timestamp = not args.no_timestamp
    rows = []
    if args.sweep:
        cells = parse_sweep(args.sweep)
        base = json.loads(dump_config(cfg))
        for i, cell in enumerate(cells):
            data = json.loads(json.dumps(base))
            for k, v in cell.items():
                set_path(data, k, v)
            cell_cfg = validate_config(data, f"sweep cell {cell}")
            tag = "_".join(f"{k}{v}" for k, v in cell.items())
            agg = run_seeds(cell_cfg, seeds, root / f"cell_{i:02d}_{tag}", timestamp, args.verbose)
            rows.append({**{k: float(v) for k, v in cell.items()}, **agg})
            print(summary_line(f"cell {cell}", agg))
    else:
        agg = run_seeds(cfg, seeds, root, timestamp, args.verbose)
        rows.append(agg)
        print(summary_line("summary", agg))
    path = Path(args.csv) if args.csv else root / "summary.csv"
    write_csv(path, rows, timestamp)
    print(f"wrote {path}")
    return EXIT_OK


# ------------------------------------------------------------------------ eval
def cmd_eval(args) -> int:
    from .rl.trainer import Trainer, evaluate

    cfg = load_config(args.config, parse_overrides(args.set))
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    tr = Trainer(cfg, seed)
    try:
        tr.load_checkpoint(args.checkpoint)
    except (KeyError, FileNotFoundError) as e:
        raise UsageError(f"cannot load checkpoint {args.checkpoint}: {e}") from None
    episodes = args.episodes if args.episodes is not None else cfg.eval_episodes
    trace = [] if args.trace else None
    res = evaluate(tr, episodes, trace=trace)
    rep = res["report"]
    subtasks = np.mean([r["subtasks"] for r in res["rows"]]) if res["rows"] else float("nan")
    print(f"episodes {episodes} reward {rep['reward']:.4g} length {rep['length']:.4g} "
          f"success {rep['success']:.3g} hit_wall {rep['hit_wall']:.3g} subtasks {subtasks:.3g}")
    for s in tr.problem.spec_ids:
        print(f"  VR {s}: {rep[f'vr_{s}']:.3g}")
    if args.csv:
        _emit_csv(res["rows"], args.csv)
    if args.trace:
        cols = ["episode", "t", "x", "y", "letter", "reward", *[f"cost_{s}" for s in tr.problem.spec_ids], "events"]
        _emit_csv([dict(zip(cols, row)) for row in trace], args.trace)
    return EXIT_OK


# ------------------------------------------------------------------------ diag
def cmd_diag(args) -> int:
    from .theory import diagnose, get_instance

    try:
        inst = get_instance(args.instance)
    except KeyError as e:
        raise UsageError(str(e.args[0])) from None
    r = diagnose(inst, args.seed, T=args.T, dual_ratio=args.dual_ratio)
    rows = [
        {"t": s.t, "G": s.G, "H": s.H, "lambda": s.lam, "J_R": s.J_R, "J_C": s.J_C, "G_mean": s.G_mean, "H_mean": s.H_mean}
        for s in r.samples
    ]
    if args.csv:
        _emit_csv(rows, args.csv)
    print(f"{inst.name} seed {args.seed}: alpha {r.alpha:.4g} beta {r.beta:.4g} "
          f"G first quarter {r.G_first:.4g} last quarter {r.G_last:.4g} ({'ok' if r.primal_ok else 'FAIL'}) "
          f"H mean {r.H_mean:.4g} floor {r.floor:.4g} ({'ok' if r.dual_ok else 'FAIL'})")
    return EXIT_OK


# ------------------------------------------------------------------------ main
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ltlppo", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def spec_args(sp):
        sp.add_argument("formula", nargs="?", help="LTL formula text")
        sp.add_argument("--spec-file", help="JSON spec file")
        sp.add_argument("--alphabet", nargs="+", help="allowed propositions")

    c = sub.add_parser("compile", help="decompose a formula and print its monitor")
    spec_args(c)
    c.add_argument("--hoa", help="write the monitor(s) in HOA format")
    c.set_defaults(func=cmd_compile)

    m = sub.add_parser("monitor", help="replay a letter trace through the monitors")
    m.add_argument("trace", help="trace file, one letter per line")
    m.add_argument("--formula", dest="formula")
    m.add_argument("--spec-file")
    m.add_argument("--alphabet", nargs="+")
    m.add_argument("--gamma", type=float, default=0.99)
    m.add_argument("--csv")
    m.set_defaults(func=cmd_monitor)

    t = sub.add_parser("train", help="train one or more seeds from a config")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--out")
    t.add_argument("--sweep", nargs="+", metavar="KEY=V1,V2")
    t.add_argument("--set", nargs="+", metavar="KEY=VALUE", help="config overrides (dotted paths)")
    t.add_argument("--no-timestamp", action="store_true")
    t.add_argument("--csv", help="summary CSV path (default <out>/<name>/summary.csv)")
    t.add_argument("-v", "--verbose", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="deterministic evaluation of a checkpoint")
    e.add_argument("--config", required=True)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--set", nargs="+", metavar="KEY=VALUE")
    e.add_argument("--csv", help="per-episode CSV")
    e.add_argument("--trace", help="per-step CSV of position, letter, reward, costs and monitor events (Zones only)")
    e.set_defaults(func=cmd_eval)

    d = sub.add_parser("diag", help="exact primal-dual run on a shipped tabular instance")
    d.add_argument("--instance", default="chain")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--T", type=int, default=5000)
    d.add_argument("--dual-ratio", type=float, default=0.01)
    d.add_argument("--csv")
    d.set_defaults(func=cmd_diag)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NaNGradient as e:
        _err(str(e))
        return EXIT_NUMERIC
    except UnsupportedFragment as e:
        _err(f"unsupported formula: {e}")
        return EXIT_USAGE
    except (ConfigError, UsageError, LTLError, FileNotFoundError, ValueError) as e:
        _err(str(e))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
