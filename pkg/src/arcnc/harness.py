"""Command-line front door: topology generation, golden traces, Monte Carlo
campaigns, bound tables and RLNC comparisons.

Subcommands: gen, trace, run, bounds, compare (= run --mode both).
Configuration can come from a flat ``key = value`` file (--config); command
line flags override file values.  Exit codes: 0 success, 1 validation
error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction

from . import analysis
from .baseline import rlnc_success_curve, sink_success_fractions, expected_attempts
from .engine import OverrideError, SimConfig, collect_campaign, run_trial
from .gf import FieldError, field_new
from .topology import (TopologyError, combination_network, eta, load_topology,
                       save_topology, two_node_cycle_network, validate_multicast)

# Analytic properties of the deterministic binary network code of Xiao et
# al. on combination networks, shown in reports as static reference
# columns.  These are literature values, not simulated.
BNC_LITERATURE = {
    "label": "literature value (deterministic BNC, Xiao et al.)",
    "decoding_delay": 1,
    "memory_bits_per_node": 4,
    "block_length_note": "block length p >= n - m",
}

# Fig. 1 golden-trace realization: the source's local kernel matrix at
# t=0 and the update drawn at t=1 for the two unfrozen right columns.
_FIG1_T0 = {0: (1, 0), 1: (0, 1), 2: (1, 1), 3: (1, 1)}
_FIG1_T1 = {2: (0, 0), 3: (1, 0)}


def fig1_override_text() -> str:
    lines = ["# golden-trace kernel script for the (4,2) combination network",
             "# k <from-edge-id> <to-edge-id> <t> <value>; ids -1,-2 are the",
             "# source's two message inputs"]
    for t, table in ((0, _FIG1_T0), (1, _FIG1_T1)):
        for e, (a, b) in sorted(table.items()):
            lines.append(f"k -1 {e} {t} {a}")
            lines.append(f"k -2 {e} {t} {b}")
    return "\n".join(lines) + "\n"


def parse_override_script(text: str) -> dict:
    """Parse ``k <from-edge-id> <to-edge-id> <t> <value>`` lines."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] != "k" or len(parts) != 5:
            raise OverrideError(f"override line {lineno}: expected "
                                f"'k <from> <to> <t> <value>', got {raw.strip()!r}")
        try:
            ein, eout, t, val = map(int, parts[1:])
        except ValueError:
            raise OverrideError(f"override line {lineno}: non-integer field") from None
        key = (ein, eout, t)
        if key in out:
            raise OverrideError(f"override line {lineno}: duplicate entry for "
                                f"({ein} -> {eout}, t={t})")
        out[key] = val
    return out


def parse_config_file(text: str) -> dict:
    """Flat ``key = value`` configuration; '#' comments."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        out[key.strip()] = val.strip()
    return out


_CONFIG_INT_KEYS = {"n", "m", "q", "trials", "max_rounds", "seed", "workers"}
_CONFIG_FLOAT_KEYS = {"tol"}

# Options that are None until the CLI or a config file supplies them; real
# defaults are applied after merging so file values are distinguishable
# from defaults.
_OPTION_DEFAULTS = {"m": 2, "q": 2, "seed": 0, "max_rounds": 50,
                    "tol": 1e-9, "trials": 1000, "workers": 1}


def _merge_config(args, parser):
    """Fill unset options from a config file; CLI flags win."""
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                file_vals = parse_config_file(fh.read())
        except OSError as exc:
            raise IOFailure(str(exc)) from exc
        for key, val in file_vals.items():
            dest = key.replace("-", "_")
            if not hasattr(args, dest):
                raise ValueError(f"unknown config key {key!r}")
            if getattr(args, dest) is None:
                if dest in _CONFIG_INT_KEYS:
                    val = int(val)
                elif dest in _CONFIG_FLOAT_KEYS:
                    val = float(val)
                setattr(args, dest, val)
    for dest, dv in _OPTION_DEFAULTS.items():
        if hasattr(args, dest) and getattr(args, dest) is None:
            setattr(args, dest, dv)
    if getattr(args, "mode", None) is None and hasattr(args, "default_mode"):
        args.mode = args.default_mode
    return args


class IOFailure(Exception):
    """Wrapper marking an error as I/O (exit code 2)."""


def _load_topology_arg(args):
    if getattr(args, "topology", None):
        try:
            with open(args.topology) as fh:
                return load_topology(fh.read())
        except OSError as exc:
            raise IOFailure(str(exc)) from exc
    if getattr(args, "n", None):
        return combination_network(args.n, args.m)
    raise ValueError("no topology: give --topology FILE or --n/--m")


def _write_text(path, text):
    try:
        if path is None or path == "-":
            sys.stdout.write(text)
        else:
            with open(path, "w") as fh:
                fh.write(text)
    except OSError as exc:
        raise IOFailure(str(exc)) from exc


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.network == "comb":
        if not args.n or not args.m:
            raise ValueError("gen comb needs --n and --m")
        topo = combination_network(args.n, args.m)
        _write_text(args.out, save_topology(topo))
    elif args.network == "fig1":
        outdir = args.out or "."
        try:
            os.makedirs(outdir, exist_ok=True)
        except OSError as exc:
            raise IOFailure(str(exc)) from exc
        topo = combination_network(4, 2)
        _write_text(os.path.join(outdir, "fig1_topology.txt"),
                    save_topology(topo))
        _write_text(os.path.join(outdir, "fig1_overrides.txt"),
                    fig1_override_text())
    elif args.network == "cycle":
        _write_text(args.out, save_topology(two_node_cycle_network()))
    else:
        raise ValueError(f"unknown generator {args.network!r}")
    return 0


def _trial_result_json(res) -> dict:
    return {
        "trial": res.trial,
        "seed": res.seed,
        "success": res.success,
        "rounds": res.rounds,
        "T": {str(k): v for k, v in sorted(res.T.items())},
        "T_N": res.T_N,
        "delta": {str(k): v for k, v in sorted(res.delta.items())},
        "L": {str(k): v for k, v in sorted(res.L.items())},
        "memory_bits": {str(k): v for k, v in sorted(res.memory_bits.items())},
        "avg_T": res.avg_T,
        "avg_code_len": res.avg_code_len,
        "avg_memory_bits": res.avg_memory_bits,
    }


def cmd_trace(args) -> int:
    topo = _load_topology_arg(args)
    report = validate_multicast(topo)
    if not report.ok:
        raise ValueError(f"multicast validation failed: sinks {report.failures} "
                         f"have max-flow below m={topo.m}")
    if not args.override:
        raise ValueError("trace needs --override SCRIPT")
    try:
        with open(args.override) as fh:
            overrides = parse_override_script(fh.read())
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    field = field_new(args.q)
    cfg = SimConfig(topology=topo, field=field, max_rounds=args.max_rounds,
                    base_seed=args.seed, overrides=overrides,
                    strict_overrides=True, trace=True)
    res = run_trial(cfg, 0)
    for line in res.trace_lines:
        print(line)
    payload = json.dumps(_trial_result_json(res), indent=2, sort_keys=True) + "\n"
    if args.out:
        _write_text(args.out, payload)
    else:
        print(payload, end="")
    return 0


def _analysis_columns(topo, q, tol, t_max):
    m = topo.m
    d = len(topo.sinks)
    cols = {
        "et_upper": float(analysis.et_upper(m, q)),
        "et_lower": float(analysis.et_lower(m, q)),
        "et2_upper": float(analysis.et2_upper(m, q)),
        "exact_ET": analysis.exact_ET(q, m, tol),
    }
    net_eta = eta(topo)
    ho = {}
    for t in range(t_max + 1):
        try:
            ho[str(t)] = float(analysis.ho_bound(d, q, net_eta, t))
        except analysis.BoundNotApplicable:
            ho[str(t)] = "N/A"
    cols["ho_bound_by_t"] = ho
    cols["eta"] = net_eta
    # var_upper needs the combination-network parameter n = source degree.
    n = len(topo.out_edges(topo.source))
    if m >= 1 and n >= m and math.comb(n, m) == d:
        cols["var_upper"] = float(analysis.var_upper(n, m, q))
    return cols


def cmd_run(args) -> int:
    topo = _load_topology_arg(args)
    report = validate_multicast(topo)
    if not report.ok:
        raise ValueError(f"multicast validation failed: sinks {report.failures} "
                         f"have max-flow below m={topo.m}")
    field = field_new(args.q)
    overrides = None
    if args.override:
        try:
            with open(args.override) as fh:
                overrides = parse_override_script(fh.read())
        except OSError as exc:
            raise IOFailure(str(exc)) from exc
    outdir = args.out or "."
    try:
        os.makedirs(outdir, exist_ok=True)
    except OSError as exc:
        raise IOFailure(str(exc)) from exc

    summary_doc = {"bnc_comparison": BNC_LITERATURE}
    if args.mode in ("arcnc", "both"):
        cfg = SimConfig(topology=topo, field=field, max_rounds=args.max_rounds,
                        base_seed=args.seed, overrides=overrides,
                        verify_decode=args.verify, verify_headers=args.verify)
        sink_buf = io.StringIO()
        trial_buf = io.StringIO()
        summary = collect_campaign(cfg, args.trials, workers=args.workers,
                                   sink_csv=sink_buf, trial_csv=trial_buf)
        _write_text(os.path.join(outdir, "campaign_sinks.csv"),
                    sink_buf.getvalue())
        _write_text(os.path.join(outdir, "campaign_trials.csv"),
                    trial_buf.getvalue())
        doc = summary.to_json_dict()
        doc["analysis"] = _analysis_columns(topo, args.q, args.tol,
                                            max(2, summary.max_T_N()))
        summary_doc["arcnc"] = doc
    if args.mode in ("rlnc", "both"):
        fracs, overall = sink_success_fractions(topo, field, args.trials,
                                                args.seed)
        curve = rlnc_success_curve(topo, [args.q], args.trials, args.seed)
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["q", "sink", "success_fraction", "ho_bound"])
        for row in curve:
            writer.writerow([row["q"], row["sink"],
                             f"{row['success_fraction']:.10g}",
                             row["ho_bound"] if row["ho_bound"] == "N/A"
                             else f"{row['ho_bound']:.10g}"])
        _write_text(os.path.join(outdir, "rlnc_curve.csv"), buf.getvalue())
        summary_doc["rlnc"] = {
            "per_sink_success": {str(r): v for r, v in sorted(fracs.items())},
            "overall_success": overall,
            "expected_attempts_derived": expected_attempts(overall),
            "memory_bits_per_node": topo.m * math.log2(args.q),
        }
    _write_text(os.path.join(outdir, "summary.json"),
                json.dumps(summary_doc, indent=2, sort_keys=True) + "\n")
    return 0


def _fmt_exact(val) -> str:
    f = Fraction(val)
    return f"{f.numerator}/{f.denominator}" if f.denominator != 1 \
        else str(f.numerator)


def cmd_bounds(args) -> int:
    m, q, n = args.m, args.q, args.n
    if not (m and q and n):
        raise ValueError("bounds needs --m, --q and --n")
    if n < m:
        raise ValueError("bounds needs n >= m")
    d = math.comb(n, m)
    topo = combination_network(n, m)
    net_eta = eta(topo)
    sink_eta = eta(topo, topo.sinks[0])
    rows = []

    def row(quantity, t, value, mode):
        rows.append([quantity, m, q, n, d, net_eta, t, value, mode])

    for t in range(args.t_max + 1):
        try:
            row("ho_bound_network", t,
                _fmt_exact(analysis.ho_bound(d, q, net_eta, t, exact=True)),
                "exact")
        except analysis.BoundNotApplicable:
            row("ho_bound_network", t, "N/A", "exact")
    for t in range(args.t_max + 1):
        try:
            val = analysis.ho_bound(1, q, sink_eta, t, exact=True)
            rows.append(["ho_bound_sink", m, q, n, 1, sink_eta, t,
                         _fmt_exact(val), "exact"])
        except analysis.BoundNotApplicable:
            rows.append(["ho_bound_sink", m, q, n, 1, sink_eta, t,
                         "N/A", "exact"])
    row("et_upper", "", _fmt_exact(analysis.et_upper(m, q, exact=True)), "exact")
    row("et_lower", "", _fmt_exact(analysis.et_lower(m, q, exact=True)), "exact")
    row("et2_upper", "", _fmt_exact(analysis.et2_upper(m, q, exact=True)), "exact")
    row("exact_ET", "", f"{analysis.exact_ET(q, m, args.tol):.12g}", "float")
    if m >= 2:
        row("rho_ub", "", _fmt_exact(analysis.rho_ub(m, q, exact=True)), "exact")
    row("var_upper", "", _fmt_exact(analysis.var_upper(n, m, q, exact=True)),
        "exact")
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["quantity", "m", "q", "n", "d", "eta", "t", "value", "mode"])
    writer.writerows(rows)
    _write_text(args.out, buf.getvalue())
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arcnc",
        description="Adaptive convolutional network coding simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trials=True):
        p.add_argument("--n", type=int, help="combination network parameter n")
        p.add_argument("--m", type=int, help="multicast rate m (default 2)")
        p.add_argument("--q", type=int, help="field size (default 2)")
        p.add_argument("--seed", type=int, help="base seed (default 0)")
        p.add_argument("--max-rounds", type=int, help="default 50")
        p.add_argument("--topology", help="topology file path")
        p.add_argument("--override", help="kernel override script path")
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--tol", type=float, help="series tolerance (default 1e-9)")
        if trials:
            p.add_argument("--trials", type=int, help="default 1000")
            p.add_argument("--workers", type=int, help="default 1")

    p_gen = sub.add_parser("gen", help="write a topology file")
    p_gen.add_argument("network", choices=["comb", "fig1", "cycle"])
    common(p_gen, trials=False)
    p_gen.set_defaults(func=cmd_gen)

    p_trace = sub.add_parser("trace", help="scripted single-trial trace")
    common(p_trace, trials=False)
    p_trace.set_defaults(func=cmd_trace)

    for name, mode in (("run", "arcnc"), ("compare", "both")):
        p_run = sub.add_parser(name, help="Monte Carlo campaign"
                               + (" (ARCNC vs RLNC)" if name == "compare" else ""))
        common(p_run)
        p_run.add_argument("--mode", choices=["arcnc", "rlnc", "both"])
        p_run.add_argument("--no-verify", dest="verify", action="store_false",
                           help="skip per-trial decode/header verification")
        p_run.set_defaults(func=cmd_run, default_mode=mode)

    p_bounds = sub.add_parser("bounds", help="closed-form bound table")
    common(p_bounds, trials=False)
    p_bounds.add_argument("--t-max", type=int, default=4)
    p_bounds.set_defaults(func=cmd_bounds)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args, parser)
        return args.func(args)
    except IOFailure as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except (TopologyError, OverrideError, FieldError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
