"""Command line entry point: ``loopsoup <subcommand> [options]``.

Every run writes manifest.json and its CSV outputs into --out.  Exit code 0
means every check of the scenario passed, 2 that a statistical check failed,
1 a usage or runtime error.  ``loopsoup --manifest PATH`` replays a run.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from collections import OrderedDict

import numpy as np

from ..arms import ArmQuery, separation_experiment
from ..clusters import ClusterSet
from ..greens import green_log_fit, nondisconnection_estimate
from ..gff import isomorphism_check, occupation_field, sample_gff
from ..lattice import box
from ..oracle import enumerate_loops, exact_total_mass, trace_mass
from ..sampler import SoupSpec, random_order, sample_loop_soup
from ..theory import alpha_of_kappa, as_dict, exponents, reference_exponent
from . import campaign
from .campaign import RunManifest, fmt, to_csv
from .stats import clopper_pearson, fit_exponent
from .svg import loglog_plot

FIT_BANDS = {"four": (1.3, 2.7), "two": (0.3, 0.8)}
DEFAULT_TRIALS = {"sample": 1, "arms": 2000, "fit": 20000, "separation": 2000, "locality": 10000,
                  "quasimult": 2000, "gff-check": 10000, "nondisc": 100000}
NOT_REPLAYED = ("out", "threads", "manifest", "command")


class Result:
    def __init__(self, domain="", queries=None):
        self.files = OrderedDict()
        self.checks = []
        self.domain = domain
        self.queries = queries or []
        self.status = []

    def csv(self, name, header, rows):
        self.files[name] = to_csv(header, rows)

    def check(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))


def sub_seed(master, *tags):
    h = hashlib.sha256("|".join(str(t) for t in (master,) + tags).encode()).digest()
    return int.from_bytes(h[:4], "little")


def int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def pair_list(text):
    return [tuple(int(x) for x in p.split(":")) for p in str(text).split(",") if p.strip()]


def trials_of(args):
    return args.trials if args.trials is not None else DEFAULT_TRIALS.get(args.command, 1000)


def parse_z(text):
    x, y = (int(v) for v in str(text).split(","))
    return (x, y)


# ---------------------------------------------------------------- commands


def cmd_sample(args):
    D = box((0, 0), args.box)
    order = random_order(D, sub_seed(args.seed, "order")) if args.order == "random" else None
    spec = SoupSpec(D, args.alpha, vertex_order=order, rng_seed=args.seed)
    res = Result(f"box:{args.box}", [f"sample|{args.order}|{args.truncate}"])
    summary = []
    for t in range(trials_of(args)):
        cfg = sample_loop_soup(spec, t, method=args.method, truncate=args.truncate)
        C = ClusterSet(cfg)
        res.files[f"soup_{t:04d}.jsonl"] = cfg.to_jsonl()
        res.files[f"clusters_{t:04d}.csv"] = C.to_csv()
        lengths = np.diff(cfg.packed()[1])
        summary.append(OrderedDict(trial=t, n_loops=len(cfg), total_length=int(lengths.sum()), n_clusters=C.n,
                                   max_diameter=max((C.diameter(c) for c in range(C.n)), default=0.0)))
    res.csv("sample.csv", list(summary[0]) if summary else ["trial"], summary)
    return res


def _arm_queries(args):
    z = parse_z(args.z)
    return [ArmQuery(args.kind, z, l, args.d, args.variant) for l in int_list(args.l)]


def _arm_domain(args):
    if args.variant == "local":
        return None
    return box(parse_z(args.z), args.box if args.box else 2 * args.d)


def _scan(args):
    qs = _arm_queries(args)
    D = _arm_domain(args)
    res = Result("local" if D is None else f"box:{args.box or 2 * args.d}", [q.encode() for q in qs])
    rows, _ = campaign.arm_scan(qs, args.alpha, trials_of(args), args.seed, D, args.threads, res.status)
    res.csv("arms.csv", campaign.ARM_FIELDS, rows)
    bad = campaign.monotone_violations(rows) if args.variant in ("local", "plain") else []
    res.check("monotone scan", not bad, f"{len(bad)} violations")
    return res, rows


def cmd_arms(args):
    return _scan(args)[0]


def cmd_fit(args):
    res, rows = _scan(args)
    try:
        rep = campaign.fit_rows(rows, args.alpha)
    except ValueError as e:
        res.check("fit", False, str(e))
        return res
    band = tuple(float_list(args.band)) if args.band else FIT_BANDS.get(args.kind)
    ok = band is None or band[0] <= rep.slope <= band[1]
    res.csv("fit.csv", ["kind", "variant", "alpha", "slope", "stderr", "intercept", "reference", "points_used",
                        "band_lo", "band_hi"],
            [[args.kind, args.variant, args.alpha, rep.slope, rep.stderr, rep.intercept, rep.reference, rep.used,
              band[0] if band else "", band[1] if band else ""]])
    pts = [(math.log(r["l"] / r["d"]), math.log(r["p_hat"]) if r["p_hat"] > 0 else -math.inf,
            math.log(r["ci_lo"]) if r["ci_lo"] > 0 else -math.inf, math.log(r["ci_hi"])) for r in rows]
    pts = [p for p in pts if math.isfinite(p[1])]
    res.files["plot.svg"] = loglog_plot(pts, fit=(rep.slope, rep.intercept), reference=(rep.reference, rep.intercept),
                                        title=f"{args.kind} ({args.variant}), alpha={args.alpha}")
    res.check("slope in band", ok, f"slope {rep.slope:.4f} +- {rep.stderr:.4f}, reference {rep.reference:.4f}, "
                                   f"band {band}")
    return res


def cmd_separation(args):
    pairs = pair_list(args.pairs)
    alphas = float_list(args.alphas)
    res = Result("box:2R", [f"separation|{r}|{R}|{a}" for a in alphas for r, R in pairs])
    rows = []
    for a in alphas:
        for r, R in pairs:
            t0 = time.perf_counter()
            out = separation_experiment(r, R, a, trials_of(args), sub_seed(args.seed, "separation", r, R, a),
                                        frontier=not args.raw, threshold=args.threshold)
            res.status.append({"query": f"separation|{r}|{R}|{a}", "seconds": time.perf_counter() - t0,
                               "status": "done"})
            rows.append(OrderedDict(alpha=a, r=r, R=R, trials=out["trials"], conditioned=out["conditioned"],
                                    successes=out["successes"], p_hat=out["p_hat"], ci_lo=out["ci_lo"],
                                    ci_hi=out["ci_hi"], flag=out["flag"]))
    res.csv("separation.csv", list(rows[0]), rows)
    for a in alphas:
        ps = [r["p_hat"] for r in rows if r["alpha"] == a]
        ok = all(p >= 0.05 for p in ps) and max(ps) <= 2 * min(ps)
        res.check(f"separation alpha={a}", ok, "p_hat " + ", ".join(f"{p:.4f}" for p in ps))
    return res


def cmd_locality(args):
    sizes = int_list(args.boxes)
    res = Result(",".join(f"box:{n}" for n in sizes), [f"locality|{args.kind}|{args.l}|{args.d}|B{n}" for n in sizes])
    rows = campaign.locality_report(args.l, args.d, sizes, args.alpha, trials_of(args), args.seed, args.kind,
                                    threads=args.threads, status=res.status)
    res.csv("locality.csv", list(rows[0]), rows)
    ratios = [r["ratio"] for r in rows]
    res.check("ratios bounded", all(math.isfinite(r["ratio_hi"]) and r["ratio"] <= 10 for r in rows),
              "ratios " + ", ".join(f"{x:.3f}" for x in ratios))
    res.check("ratios stable", min(ratios) > 0 and max(ratios) <= 2 * min(ratios), "")
    res.check("inclusion", all(r["p_domain"] >= r["p_truncated"] for r in rows), "")
    return res


def cmd_quasimult(args):
    triples = pair_list(args.triples)
    for t in triples:
        campaign.check_triple(*t)
    alphas = float_list(args.alphas)
    res = Result("box:2d3", [f"quasimult|{args.kind}|{a}|{t}" for a in alphas for t in triples])
    rows = []
    for a in alphas:
        for d1, d2, d3 in triples:
            rows.append(campaign.quasi_mult_report(d1, d2, d3, a, trials_of(args), args.seed, args.kind,
                                                   threads=args.threads, status=res.status))
    res.csv("quasimult.csv", list(rows[0]), rows)
    for a in alphas:
        rs = [r["ratio"] for r in rows if r["alpha"] == a]
        finite = all(0 < x < math.inf for x in rs)
        res.check(f"quasimult alpha={a}", finite and max(rs) <= 3 * min(rs),
                  "ratios " + ", ".join(f"{x:.4g}" for x in rs))
    return res


def cmd_gff_check(args):
    D = box((0, 0), args.box)
    res = Result(f"box:{args.box}", [f"gff-check|{args.vertices}"])
    out = isomorphism_check(D, trials_of(args), args.seed, n_vertices=args.vertices, alpha=args.alpha)
    keys = ["vertex", "G", "mean_theory", "var_theory", "occ_mean", "occ_var", "occ_z_mean", "occ_z_var",
            "gff_mean", "gff_var", "gff_z_mean", "gff_z_var", "ks_p", "ks_p_gamma", "pass"]
    rows = []
    for r in out["vertices"]:
        row = OrderedDict((k, r[k]) for k in keys)
        row["vertex"] = f"{r['vertex'][0]},{r['vertex'][1]}"
        rows.append(row)
    res.csv("gff_check.csv", keys, rows)
    rng = np.random.default_rng(sub_seed(args.seed, "field"))
    phi = sample_gff(D, rng)
    res.files["gff_field.csv"] = phi.to_csv()
    res.files["gff_field.pgm"] = phi.to_pgm()
    occ = occupation_field(sample_loop_soup(SoupSpec(D, args.alpha, rng_seed=args.seed), 0), args.alpha,
                           sub_seed(args.seed, "holding"), D)
    res.files["occupation_field.csv"] = occ.to_csv()
    res.files["occupation_field.pgm"] = occ.to_pgm()
    res.check("isomorphism marginals", out["pass"], "")
    return res


def cmd_oracle(args):
    D = box((0, 0), args.box)
    res = Result(f"box:{args.box}", [f"oracle|{args.max_len}"])
    cat = enumerate_loops(D, args.max_len)
    res.files["catalog.jsonl"] = cat.to_jsonl()
    em = float(cat.enumerated_mass)
    tm = trace_mass(D, args.max_len)
    total = exact_total_mass(D)
    res.csv("oracle.csv", ["box", "max_len", "n_loops", "enumerated_mass", "trace_mass", "tail_bound", "total_mass"],
            [[args.box, args.max_len, len(cat.loops), em, tm, cat.tail_bound, total]])
    res.check("catalog mass", abs(em - tm) <= 1e-9 * max(1.0, tm), f"{em} vs {tm}")
    res.check("tail sandwich", em <= total + 1e-12 and total <= em + cat.tail_bound + 1e-12, "")
    return res


def cmd_theory(args):
    e = exponents(args.alpha)
    d = as_dict(e)
    res = Result("", [f"theory|{args.alpha}"])
    res.csv("theory.csv", list(d), [d])
    res.check("round trip", abs(alpha_of_kappa(e.kappa) - args.alpha) <= 1e-12, "")
    print(json.dumps(d))
    return res


def cmd_green_fit(args):
    sizes = int_list(args.sizes)
    res = Result(",".join(f"box:{n}" for n in sizes), [f"green-fit|{args.sizes}"])
    fit = green_log_fit(sizes)
    res.csv("green_values.csv", ["n", "G"], [[n, v] for n, v in zip(sizes, fit.values)])
    res.csv("green_fit.csv", ["slope", "slope_stderr", "intercept", "intercept_extrapolated", "reference"],
            [[fit.slope, fit.slope_stderr, fit.intercept, fit.intercept_extrapolated, 2 / math.pi]])
    res.check("slope within 2%", abs(fit.slope - 2 / math.pi) <= 0.02 * 2 / math.pi, f"slope {fit.slope:.6f}")
    return res


def cmd_nondisc(args):
    R = args.R
    rs = [R // k for k in int_list(args.ratios)]
    res = Result(f"walk:{R}", [f"nondisc|{r}|{R}" for r in rs])
    n = trials_of(args)
    rows = []
    for r in rs:
        t0 = time.perf_counter()
        seed = sub_seed(args.seed, "nondisc", r, R)
        p, (lo, hi) = nondisconnection_estimate(r, R, n, seed)
        res.status.append({"query": f"nondisc|{r}|{R}", "seconds": time.perf_counter() - t0, "status": "done"})
        rows.append(OrderedDict(r=r, R=R, trials=n, successes=round(p * n), p_hat=p, ci_lo=lo, ci_hi=hi, seed=seed))
    res.csv("nondisc.csv", list(rows[0]), rows)
    try:
        rep = fit_exponent([(x["r"], R, x["p_hat"], x["ci_lo"], x["ci_hi"], x["successes"]) for x in rows],
                           reference=0.25, kind="nondisc")
    except ValueError as e:
        res.check("exponent in [0.20, 0.30]", False, str(e))
        return res
    res.csv("nondisc_fit.csv", ["slope", "stderr", "intercept", "reference"],
            [[rep.slope, rep.stderr, rep.intercept, 0.25]])
    pts = [(math.log(x["r"] / R), math.log(x["p_hat"]), math.log(x["ci_lo"]), math.log(x["ci_hi"])) for x in rows
           if x["p_hat"] > 0 and x["ci_lo"] > 0]
    res.files["plot.svg"] = loglog_plot(pts, fit=(rep.slope, rep.intercept), reference=(0.25, rep.intercept),
                                        title="non-disconnection", xlabel="log(r/R)")
    res.check("exponent in [0.20, 0.30]", 0.20 <= rep.slope <= 0.30, f"slope {rep.slope:.4f} +- {rep.stderr:.4f}")
    return res


COMMANDS = {"sample": cmd_sample, "arms": cmd_arms, "fit": cmd_fit, "separation": cmd_separation,
            "locality": cmd_locality, "quasimult": cmd_quasimult, "gff-check": cmd_gff_check, "oracle": cmd_oracle,
            "theory": cmd_theory, "green-fit": cmd_green_fit, "nondisc": cmd_nondisc}


# ---------------------------------------------------------------- parser


def _globals(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="master seed")
    p.add_argument("--alpha", type=float, default=d(0.5), help="soup intensity")
    p.add_argument("--trials", type=int, default=d(None), help="trials per query (command-specific default)")
    p.add_argument("--out", default=d("out"), help="output directory")
    p.add_argument("--threads", type=int, default=d(1), help="worker processes")
    p.add_argument("--manifest", default=d(None), help="replay a manifest.json")


def _arm_options(p, fit=False):
    p.add_argument("--kind", default="four", choices=["four", "two", "boundary_two", "boundary_four"])
    p.add_argument("--variant", default="local", choices=["plain", "truncated_out", "truncated_in", "local"])
    p.add_argument("--z", default="0,0", help="annulus center x,y")
    p.add_argument("--l", default="2,4,8", help="inner radii, comma separated")
    p.add_argument("--d", type=int, default=32, help="outer radius")
    p.add_argument("--box", type=int, default=None, help="domain B_n(z) for non-local variants (default 2d)")
    if fit:
        p.add_argument("--band", default=None, help="acceptance band lo,hi for the slope")


def build_parser():
    ap = argparse.ArgumentParser(prog="loopsoup", description="Random walk loop soup experiments")
    _globals(ap, False)
    sub = ap.add_subparsers(dest="command")
    ps = {name: sub.add_parser(name) for name in COMMANDS}
    for p in ps.values():
        _globals(p, True)
    p = ps["sample"]
    p.add_argument("--box", type=int, default=8)
    p.add_argument("--order", choices=["scan", "random"], default="scan")
    p.add_argument("--truncate", type=int, default=None, help="drop loops longer than this")
    p.add_argument("--method", choices=["fast", "exact"], default="fast")
    _arm_options(ps["arms"])
    _arm_options(ps["fit"], fit=True)
    p = ps["separation"]
    p.add_argument("--pairs", default="4:8,8:16")
    p.add_argument("--alphas", default="0.1,0.5")
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--raw", action="store_true", help="use raw outer loops instead of their frontiers")
    p = ps["locality"]
    p.add_argument("--kind", default="four", choices=["four", "two"])
    p.add_argument("--l", type=int, default=2)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--boxes", default="16,24,32")
    p = ps["quasimult"]
    p.add_argument("--kind", default="four", choices=["four", "two"])
    p.add_argument("--triples", default="1:2:32,1:4:64")
    p.add_argument("--alphas", default="0.25,0.5")
    p = ps["gff-check"]
    p.add_argument("--box", type=int, default=4)
    p.add_argument("--vertices", type=int, default=5)
    p = ps["oracle"]
    p.add_argument("--box", type=int, default=1)
    p.add_argument("--max-len", type=int, default=8)
    ps["green-fit"].add_argument("--sizes", default="8,16,32,64")
    p = ps["nondisc"]
    p.add_argument("--R", type=int, default=128)
    p.add_argument("--ratios", default="4,8,16,32", help="values of R/r")
    return ap


def replayable(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in NOT_REPLAYED}


def run(args):
    res = COMMANDS[args.command](args)
    os.makedirs(args.out, exist_ok=True)
    for name, data in res.files.items():
        mode = "wb" if isinstance(data, bytes) else "w"
        with open(os.path.join(args.out, name), mode, **({} if mode == "wb" else {"newline": ""})) as f:
            f.write(data)
    man = RunManifest(args.command, replayable(args), args.seed, args.alpha, res.domain, res.queries,
                      trials_of(args), status=res.status)
    with open(os.path.join(args.out, "manifest.json"), "w") as f:
        f.write(man.to_json())
    for name, ok, detail in res.checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else ""))
    return 0 if all(ok for _, ok, _ in res.checks) else 2


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code else 0
    try:
        if args.manifest:
            with open(args.manifest) as f:
                man = RunManifest.from_json(f.read())
            out = args.out if "--out" in (argv if argv is not None else sys.argv[1:]) else \
                os.path.dirname(os.path.abspath(args.manifest))
            ns = argparse.Namespace(**man.args)
            ns.command, ns.out, ns.threads, ns.manifest = man.command, out, args.threads, None
            return run(ns)
        if not args.command:
            ap.print_usage(sys.stderr)
            print("loopsoup: error: a subcommand or --manifest is required", file=sys.stderr)
            return 1
        return run(args)
    except (ValueError, KeyError, OSError, MemoryError) as e:
        print(f"loopsoup: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
