"""Command-line experiment driver.

Every run is fully determined by its flags and seed: reports embed the
parameters and package version (never wall-clock time), so identical
invocations produce byte-identical output files. Exit status is 0 only if
all in-run statistical checks pass.

Precedence: built-in defaults, then command-line flags, then values from
`--config FILE` (JSON), which override flags.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, analytic, anonymity_opt, network_model, relay_core
from ._util import batch_stderr, fmt
from .point_process import GenSpec, gen_poisson

__all__ = ["main"]


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _report(out_dir: Path, name: str, command: str, params: dict, body: dict) -> None:
    doc = {
        "command": command,
        "version": __version__,
        "params": params,
        **body,
    }
    _write(out_dir / name, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _check_row(name, predicted, measured, stderr):
    if math.isfinite(predicted) and math.isfinite(stderr):
        ok = abs(measured - predicted) <= 3.0 * stderr
    else:
        ok = math.isfinite(measured)
    return {
        "check": name,
        "predicted": predicted,
        "measured": measured,
        "stderr": stderr,
        "pass": bool(ok),
    }


def _rows_csv(rows) -> str:
    lines = ["check,predicted,measured,stderr,pass"]
    for r in rows:
        lines.append(
            f"{r['check']},{fmt(r['predicted'])},{fmt(r['measured'])},"
            f"{fmt(r['stderr'])},{int(r['pass'])}"
        )
    return "\n".join(lines) + "\n"


def _drop_flags(result: relay_core.MatchResult) -> np.ndarray:
    arr = np.sort(np.concatenate([result.pairs[:, 0], result.dropped_arrivals]))
    dropped = result.dropped_arrivals
    if dropped.size == 0:
        return np.zeros(arr.size, dtype=bool)
    idx = np.minimum(np.searchsorted(dropped, arr), dropped.size - 1)
    return dropped[idx] == arr


def _relay_strict(args, rows):
    horizon = args.packets / args.cs
    arrivals = gen_poisson(GenSpec(args.cs, horizon, args.seed), node_id="in")
    departures = gen_poisson(GenSpec(args.cb, horizon, args.seed), node_id="out")
    res = relay_core.bounded_greedy_match(arrivals, departures, args.delta)
    flags = _drop_flags(res)
    rows.append(
        _check_row(
            "strict-loss-fraction",
            analytic.loss_fraction(args.cs, args.cb, args.delta),
            res.drop_fraction,
            batch_stderr(flags, 100),
        )
    )
    if args.dump_match:
        _write(Path(args.dump_match), relay_core.match_result_to_text(res))


def _relay_priority(args, rows):
    horizon = args.packets / (args.cs + args.cs2)
    s1 = gen_poisson(GenSpec(args.cs, horizon, args.seed), node_id="src1")
    s2 = gen_poisson(GenSpec(args.cs2, horizon, args.seed), node_id="src2")
    out = gen_poisson(GenSpec(args.cb, horizon, args.seed), node_id="out")
    order = relay_core.PriorityOrder.single((s1.node_id, s2.node_id))
    top, low = relay_core.priority_relay([s1, s2], out, order, args.delta)
    rows.append(
        _check_row(
            "priority-top-loss",
            analytic.loss_fraction(args.cs, args.cb, args.delta),
            top.drop_fraction,
            batch_stderr(_drop_flags(top), 100),
        )
    )
    rows.append(_check_row("priority-low-rate", math.nan, low.n_matched / horizon, math.nan))
    shared = analytic.loss_fraction(args.cs + args.cs2, args.cb, args.delta)
    for sched, res in zip((s1, s2), relay_core.priority_relay([s1, s2], out, None, args.delta)):
        rows.append(
            _check_row(
                f"equal-priority-loss-{sched.node_id}",
                shared,
                res.drop_fraction,
                batch_stderr(_drop_flags(res), 100),
            )
        )


def _relay_avg(args, rows):
    horizon = args.packets / args.cs
    drain = 100.0 * max(args.dbar, 1.0 / args.cb)
    arrivals = gen_poisson(GenSpec(args.cs, horizon, args.seed), node_id="in")
    departures = gen_poisson(GenSpec(args.cb, horizon + drain, args.seed), node_id="out")
    res = relay_core.avg_delay_relay(arrivals, departures, args.dbar)
    if math.isinf(res.delay_bound):
        rows.append(_check_row("avg-mode-zero-drops", 0.0, float(res.n_dropped), 0.0))
    else:
        rows.append(
            _check_row(
                "avg-mode-mean-delay",
                args.dbar,
                res.mean_delay,
                batch_stderr(res.delays, 100),
            )
        )
        from .point_process import empirical_rate

        cs_hat = empirical_rate(arrivals)
        cb_hat = empirical_rate(departures)
        window = analytic.solve_strict_delay(args.dbar, cs_hat, cb_hat)
        rows.append(
            _check_row(
                "avg-mode-loss-fraction",
                analytic.loss_fraction(cs_hat, cb_hat, window),
                res.drop_fraction,
                batch_stderr(_drop_flags(res), 100),
            )
        )


def cmd_relay(args) -> int:
    if args.stats_from:
        res = relay_core.match_result_from_text(Path(args.stats_from).read_text())
        print(f"matched={res.n_matched} dropped={res.n_dropped} "
              f"dummies={res.dummy_departures.size} "
              f"drop_fraction={res.drop_fraction:.6g} mean_delay={res.mean_delay:.6g}")
        return 0
    rows: list[dict] = []
    if args.mode == "strict":
        _relay_strict(args, rows)
    elif args.mode == "priority":
        _relay_priority(args, rows)
    else:
        _relay_avg(args, rows)
    out = Path(args.out_dir)
    params = {
        "cs": args.cs, "cs2": args.cs2, "cb": args.cb, "delta": args.delta,
        "dbar": args.dbar, "mode": args.mode, "packets": args.packets, "seed": args.seed,
    }
    ok = all(r["pass"] for r in rows)
    _write(out / "relay_runs.csv", _rows_csv(rows))
    _report(out, "relay_report.json", "relay", params, {"checks": rows, "pass": ok})
    for r in rows:
        status = "PASS" if r["pass"] else "FAIL"
        print(f"[{status}] {r['check']}: predicted={r['predicted']:.6g} "
              f"measured={r['measured']:.6g} stderr={r['stderr']:.3g}")
    return 0 if ok else 1


def cmd_region(args) -> int:
    region = analytic.two_source_region(
        args.cs1, args.cs2, args.cb, args.delta,
        corner_events=args.corner_events, seed=args.seed,
    )
    contained = region.contains_inner_in_outer()
    gap = region.sum_cap - sum(region.max_sum_vertex)
    out = Path(args.out_dir)
    params = {
        "cs1": args.cs1, "cs2": args.cs2, "cb": args.cb, "delta": args.delta,
        "corner_events": args.corner_events, "seed": args.seed,
    }
    _write(out / "region.csv", region.to_csv())
    _report(out, "region_report.json", "region", params, {
        "cap1": region.cap1,
        "cap2": region.cap2,
        "sum_cap": region.sum_cap,
        "corner1": list(region.corner1),
        "corner2": list(region.corner2),
        "max_sum_vertex": list(region.max_sum_vertex),
        "max_sum_gap": gap,
        "inner_in_outer": contained,
        "pass": contained,
    })
    print(f"[{'PASS' if contained else 'FAIL'}] inner region inside outer bound; "
          f"max-sum gap {gap:.3g}")
    return 0 if contained else 1


_SWITCHING_SUBSETS = (
    (),
    ("M1", "M3"),
    ("M2", "M4"),
    ("M1", "M2", "M3", "M4"),
)


def cmd_switching(args) -> int:
    topo, prior = network_model.switching_topology(args.capacity)
    h_bits = anonymity_opt.entropy_bits(prior)
    rate_zero = sum(
        p * network_model.max_sum_rate_visible(s, topo)[0] for s, p in prior.entries
    )
    table = []
    for subset in _SWITCHING_SUBSETS:
        b = frozenset(subset)
        alpha = anonymity_opt.anonymity_level(b, prior)
        rate = anonymity_opt.expected_covert_rate(
            prior, b, topo, args.delta, args.sim_packets, args.seed, True
        )
        table.append({
            "covert": "+".join(sorted(b)) if b else "-",
            "alpha": alpha,
            "expected_sum_rate": rate,
        })
    checks = [
        ("alpha-all-visible", table[0]["alpha"], math.log(4) / math.log(24)),
        ("alpha-first-stage", table[1]["alpha"],
         (math.log(4) / 3 + 2 * math.log(16) / 3) / math.log(24)),
        ("alpha-second-stage", table[2]["alpha"], 1.0),
        ("entropy-bits", h_bits, math.log2(24)),
        ("rate-all-visible", table[0]["expected_sum_rate"], 2.0 * args.capacity),
    ]
    ok = all(abs(got - want) <= 1e-9 for _, got, want in checks)
    out = Path(args.out_dir)
    params = {"capacity": args.capacity, "delta": args.delta,
              "sim_packets": args.sim_packets, "seed": args.seed}
    lines = ["covert,alpha,expected_sum_rate"]
    for row in table:
        lines.append(f"{row['covert']},{fmt(row['alpha'])},{fmt(row['expected_sum_rate'])}")
    _write(out / "switching.csv", "\n".join(lines) + "\n")
    _report(out, "switching_report.json", "switching", params, {
        "entropy_bits": h_bits,
        "rate_zero": rate_zero,
        "table": table,
        "checks": [
            {"check": n, "value": got, "expected": want, "pass": abs(got - want) <= 1e-9}
            for n, got, want in checks
        ],
        "pass": ok,
    })
    for n, got, want in checks:
        status = "PASS" if abs(got - want) <= 1e-9 else "FAIL"
        print(f"[{status}] {n}: {got:.9f} (expected {want:.9f})")
    for row in table:
        print(f"  covert {row['covert']:<12} alpha={row['alpha']:.6f} "
              f"rate={row['expected_sum_rate']:.6f}")
    return 0 if ok else 1


def cmd_tradeoff(args) -> int:
    if args.topology:
        topo, prior = network_model.parse_network_config(Path(args.topology).read_text())
    else:
        topo, prior = network_model.switching_topology(args.capacity)
    model = anonymity_opt.build_distortion_model(
        prior, topo, args.delta, sim_packets=args.sim_packets, seed=args.seed
    )
    grid = np.linspace(0.0, 1.0, args.alpha_points)
    curve = anonymity_opt.tradeoff_curve(
        prior, topo, args.delta, grid.tolist(), model=model
    )
    det = anonymity_opt.deterministic_points(
        prior, topo, args.delta, sim_packets=args.sim_packets, seed=args.seed
    )
    det_pairs = [(p.sum_rate, p.alpha) for p in det]
    hull = anonymity_opt.deterministic_hull(det_pairs)
    dominance = all(
        pt.rate >= anonymity_opt.deterministic_hull_value(det_pairs, pt.alpha) - 1e-9
        for pt in curve.points
    )
    out = Path(args.out_dir)
    params = {"capacity": args.capacity, "delta": args.delta,
              "alpha_points": args.alpha_points, "sim_packets": args.sim_packets,
              "seed": args.seed, "topology": args.topology}
    _write(out / "tradeoff_curve.csv", curve.to_csv())
    _write(out / "tradeoff_policies.txt", curve.policies_text())
    det_lines = ["covert,alpha,sum_rate"]
    for p in det:
        name = "+".join(sorted(p.covert)) if p.covert else "-"
        det_lines.append(f"{name},{fmt(p.alpha)},{fmt(p.sum_rate)}")
    _write(out / "deterministic_points.csv", "\n".join(det_lines) + "\n")
    hull_lines = ["alpha,sum_rate"]
    for r, a in hull:
        hull_lines.append(f"{fmt(a)},{fmt(r)}")
    _write(out / "deterministic_hull.csv", "\n".join(hull_lines) + "\n")
    first, last = curve.points[0], curve.points[-1]
    _report(out, "tradeoff_report.json", "tradeoff", params, {
        "rate_zero": curve.rate_zero,
        "rate_at_alpha0": first.rate,
        "rate_at_alpha1": last.rate,
        "randomized_dominates_hull": dominance,
        "pass": dominance,
    })
    print(f"[{'PASS' if dominance else 'FAIL'}] randomized curve dominates the "
          f"deterministic hull; R(0)={first.rate:.4f} R(1)={last.rate:.4f}")
    return 0 if dominance else 1


def cmd_gen_topology(args) -> int:
    topo, prior = network_model.switching_topology(args.capacity)
    text = network_model.format_network_config(topo, prior)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        _write(Path(args.out), text)
        print(f"wrote {args.out}")
    return 0


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    if getattr(args, "config", None):
        overrides = json.loads(Path(args.config).read_text())
        for key, value in overrides.items():
            dest = key.replace("-", "_")
            if not hasattr(args, dest):
                raise SystemExit(f"config key {key!r} is not a parameter of this command")
            setattr(args, dest, value)
    return args


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="anonrelay",
        description="Reproducible experiments on anonymity-constrained relaying.",
    )
    top.add_argument("--version", action="version", version=f"anonrelay {__version__}")
    sub = top.add_subparsers(dest="cmd", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="master random seed")
        p.add_argument("--out-dir", default=".", help="directory for report files")
        p.add_argument("--config", default=None,
                       help="JSON file whose values override the flags")

    p = sub.add_parser("relay", help="single-relay matching against predictions")
    p.add_argument("--cs", type=float, default=1.0, help="input rate, packets/s")
    p.add_argument("--cs2", type=float, default=1.0, help="second input rate (priority mode)")
    p.add_argument("--cb", type=float, default=1.0, help="relay output rate, packets/s")
    p.add_argument("--delta", type=float, default=1.0, help="strict delay bound, s")
    p.add_argument("--dbar", type=float, default=1.0, help="mean delay bound, s (avg mode)")
    p.add_argument("--mode", choices=("strict", "priority", "avg"), default="strict")
    p.add_argument("--packets", type=int, default=200_000, help="input packets to simulate")
    p.add_argument("--dump-match", default=None,
                   help="also write the strict-mode match outcome in text form")
    p.add_argument("--stats-from", default=None,
                   help="print the statistics of a previously dumped match file and exit")
    common(p)
    p.set_defaults(fn=cmd_relay)

    p = sub.add_parser("region", help="two-source achievable rate region")
    p.add_argument("--cs1", type=float, default=1.0)
    p.add_argument("--cs2", type=float, default=1.0)
    p.add_argument("--cb", type=float, default=2.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--corner-events", type=int, default=50_000)
    common(p)
    p.set_defaults(fn=cmd_region)

    p = sub.add_parser("switching", help="anonymity table for the built-in switching network")
    p.add_argument("--capacity", type=float, default=2.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--sim-packets", type=int, default=200_000)
    common(p)
    p.set_defaults(fn=cmd_switching)

    p = sub.add_parser("tradeoff", help="sum-rate versus anonymity frontier")
    p.add_argument("--capacity", type=float, default=2.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--alpha-points", type=int, default=17)
    p.add_argument("--sim-packets", type=int, default=200_000)
    p.add_argument("--topology", default=None,
                   help="network config file (default: built-in switching network)")
    common(p)
    p.set_defaults(fn=cmd_tradeoff)

    p = sub.add_parser("gen-topology", help="emit the built-in switching network config")
    p.add_argument("--capacity", type=float, default=2.0)
    p.add_argument("--out", default="-", help="output file, or - for stdout")
    p.set_defaults(fn=cmd_gen_topology)
    return top


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if hasattr(args, "config"):
        args = _apply_config(args)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
