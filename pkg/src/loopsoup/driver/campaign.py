"""Monte Carlo campaigns: arm-event estimates, scans, ratio reports and manifests.

Queries sharing a sampling domain and intensity form a sampling group: every
configuration of the group is drawn once and all of the group's queries are
evaluated on it.  The group seed is a hash of (master seed, domain, alpha),
trial seeds follow from the trial index, and trials are processed in fixed
chunks whose integer counts are summed, so results do not depend on the
number of worker processes.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from ..arms import ArmDetector, ArmQuery
from ..greens import domain_hash
from ..lattice import box
from ..sampler import SoupSpec, sample_batch
from ..theory import reference_exponent
from .stats import clopper_pearson, fit_exponent, ratio_ci

SAMPLER_CAP = 70_000  # vertices; B_128 has 66049
CHUNK = 256
ARM_FIELDS = ["kind", "variant", "alpha", "z", "l", "d", "trials", "successes", "p_hat", "ci_lo", "ci_hi", "seed"]


def fmt(x):
    """Stable text form of a number for CSV output."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) or isinstance(x, np.floating):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


def to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(r[h]) for h in header] if isinstance(r, dict) else [fmt(v) for v in r])
    return buf.getvalue()


def group_seed(master, D, alpha):
    h = hashlib.sha256(f"{int(master)}|{domain_hash(D)}|{float(alpha)!r}".encode()).digest()
    return int.from_bytes(h[:8], "little") >> 1


def check_cap(D):
    if len(D) > SAMPLER_CAP:
        raise ValueError(f"domain of {len(D)} vertices exceeds the sampler cap {SAMPLER_CAP}; "
                         "use a smaller box or the truncated sampler (sample --truncate)")


class ArmCounter:
    """Evaluates a list of (query, subdomain) items on one configuration.

    With a subdomain the query is evaluated on the configuration restricted
    to it (the soup on the subdomain, coupled to the soup on the full domain).
    """

    def __init__(self, items):
        self.items = [(q, sub) for q, sub in items]

    def __call__(self, cfg):
        dets = {}
        out = np.zeros(len(self.items), dtype=np.int64)
        for j, (q, sub) in enumerate(self.items):
            key = None if sub is None else sub.key()
            if key not in dets:
                dets[key] = ArmDetector(cfg if sub is None else cfg.restrict(sub))
            out[j] = dets[key].detect(q)
        return out


def _chunk_counts(args):
    D, alpha, seed, counter, start, m = args
    spec = SoupSpec(D, alpha, rng_seed=seed)
    acc = None
    for cfg in sample_batch(spec, m, start=start, chunk=m):
        v = np.asarray(counter(cfg), dtype=np.int64)
        acc = v if acc is None else acc + v
    return acc


def run_counts(D, alpha, seed, trials, counter, threads=1, chunk=CHUNK):
    """Summed integer outputs of counter over trials configurations of the soup on D."""
    if trials < 1:
        raise ValueError("trials must be positive")
    check_cap(D)
    jobs = [(D, alpha, seed, counter, t, min(chunk, trials - t)) for t in range(0, trials, chunk)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(_chunk_counts, jobs))
    else:
        parts = [_chunk_counts(j) for j in jobs]
    return np.sum(parts, axis=0)


@dataclass
class Estimate:
    successes: int
    trials: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    seed: int

    @property
    def triple(self):
        return (self.p_hat, self.ci_lo, self.ci_hi)


def make_estimate(k, n, seed):
    lo, hi = clopper_pearson(int(k), n)
    return Estimate(int(k), n, int(k) / n, lo, hi, seed)


def estimate(query, alpha, trials, seed, D=None, threads=1):
    """(p_hat, (lo, hi)) for one arm query, deterministic in (seed, query domain, alpha)."""
    if trials < 1:
        raise ValueError("trials must be positive")
    dom = query.domain(D)
    gs = group_seed(seed, dom, alpha)
    k = run_counts(dom, alpha, gs, trials, ArmCounter([(query, None)]), threads)[0]
    e = make_estimate(k, trials, gs)
    return e.p_hat, (e.ci_lo, e.ci_hi)


def arm_row(q, alpha, e):
    return OrderedDict(kind=q.kind, variant=q.variant, alpha=float(alpha), z=f"{q.z[0]},{q.z[1]}", l=q.l, d=q.d,
                       trials=e.trials, successes=e.successes, p_hat=e.p_hat, ci_lo=e.ci_lo, ci_hi=e.ci_hi,
                       seed=e.seed)


def arm_scan(queries, alpha, trials, seed, D=None, threads=1, status=None):
    """Estimates for a list of queries, grouped by sampling domain; rows in query order."""
    groups = OrderedDict()
    for i, q in enumerate(queries):
        dom = q.domain(D)
        groups.setdefault(dom.key(), (dom, []))[1].append(i)
    ests = [None] * len(queries)
    for dom, idx in groups.values():
        t0 = time.perf_counter()
        gs = group_seed(seed, dom, alpha)
        ks = run_counts(dom, alpha, gs, trials, ArmCounter([(queries[i], None) for i in idx]), threads)
        dt = time.perf_counter() - t0
        for i, k in zip(idx, ks):
            ests[i] = make_estimate(k, trials, gs)
            if status is not None:
                status.append({"query": queries[i].encode(), "seconds": dt, "status": "done"})
    return [arm_row(q, alpha, e) for q, e in zip(queries, ests)], ests


def monotone_violations(rows):
    """Pairs (l1 < l2, same kind/variant/z/d) where p_hat drops by more than combined 3 sigma."""
    bad = []
    by = {}
    for r in rows:
        by.setdefault((r["kind"], r["variant"], r["z"], r["d"]), []).append(r)
    for key, rs in by.items():
        rs = sorted(rs, key=lambda r: r["l"])
        for a, b in zip(rs, rs[1:]):
            sa = a["p_hat"] * (1 - a["p_hat"]) / a["trials"]
            sb = b["p_hat"] * (1 - b["p_hat"]) / b["trials"]
            if a["p_hat"] - b["p_hat"] > 3 * math.sqrt(sa + sb):
                bad.append((key, a["l"], b["l"]))
    return bad


def fit_rows(rows, alpha):
    kind, variant = rows[0]["kind"], rows[0]["variant"]
    pts = [(r["l"], r["d"], r["p_hat"], r["ci_lo"], r["ci_hi"], r["successes"]) for r in rows]
    return fit_exponent(pts, reference_exponent(kind, alpha), kind, variant)


def locality_report(l, d, sizes, alpha, trials, seed, kind="four", z=(0, 0), threads=1, status=None):
    """P(A_D(l,d)) / P(A_loc(l,d)) for D = B_n(z), n in sizes.

    A_loc is evaluated on the restriction of the same soup to B_2d(z), so for
    n = 2d the ratio is exactly one.  The truncated event is estimated on the
    same samples to confirm the inclusion P(A_D) >= P(truncated A_D).
    """
    rows = []
    loc = ArmQuery(kind, z, l, d, "local")
    plain = ArmQuery(kind, z, l, d, "plain")
    trunc = ArmQuery(kind, z, l, d, "truncated_out")
    sub = box(z, 2 * d)
    for n in sizes:
        if n < 2 * d:
            raise ValueError(f"domain B_{n} does not contain B_{2 * d}")
        D = box(z, n)
        t0 = time.perf_counter()
        gs = group_seed(seed, D, alpha)
        k = run_counts(D, alpha, gs, trials, ArmCounter([(plain, None), (trunc, None), (loc, sub)]), threads)
        eD, eT, eL = (make_estimate(x, trials, gs) for x in k)
        ratio, rlo, rhi = ratio_ci(eD.triple, eL.triple) if n != 2 * d else (1.0, 1.0, 1.0)
        rows.append(OrderedDict(kind=kind, alpha=float(alpha), l=l, d=d, box=n, trials=trials, seed=gs,
                                k_domain=eD.successes, p_domain=eD.p_hat, k_truncated=eT.successes,
                                p_truncated=eT.p_hat, k_local=eL.successes, p_local=eL.p_hat,
                                ratio=ratio, ratio_lo=rlo, ratio_hi=rhi))
        if status is not None:
            status.append({"query": f"locality|{kind}|{l}|{d}|B{n}", "seconds": time.perf_counter() - t0,
                           "status": "done"})
    return rows


def check_triple(d1, d2, d3):
    if not (d1 <= d2 / 2 <= d3 / 16):
        raise ValueError(f"scale constraint violated: need d1 <= d2/2 <= d3/16, got ({d1}, {d2}, {d3})")


def quasi_mult_report(d1, d2, d3, alpha, trials, seed, kind="four", z=(0, 0), threads=1, status=None):
    """R = P(A_D(d1,d3)) / (P(A_loc(d1,d2)) P(A_D(4 d2,d3))) with D = B_{2 d3}(z).

    All three events are read from the same soups on D; the local event uses
    the restriction to B_{2 d2}(z).  The interval propagates the three
    binomial intervals as if independent.
    """
    check_triple(d1, d2, d3)
    D = box(z, 2 * d3)
    qa = ArmQuery(kind, z, d1, d3, "plain")
    qb = ArmQuery(kind, z, d1, d2, "local")
    qc = ArmQuery(kind, z, 4 * d2, d3, "plain")
    t0 = time.perf_counter()
    gs = group_seed(seed, D, alpha)
    k = run_counts(D, alpha, gs, trials, ArmCounter([(qa, None), (qb, box(z, 2 * d2)), (qc, None)]), threads)
    ea, eb, ec = (make_estimate(x, trials, gs) for x in k)
    R, lo, hi = ratio_ci(ea.triple, [eb.triple, ec.triple])
    if ea.successes == 0:
        R, lo, hi = 0.0, 0.0, math.inf
    if status is not None:
        status.append({"query": f"quasimult|{kind}|{d1}|{d2}|{d3}", "seconds": time.perf_counter() - t0,
                       "status": "done"})
    return OrderedDict(kind=kind, alpha=float(alpha), d1=d1, d2=d2, d3=d3, trials=trials, seed=gs,
                       k_full=ea.successes, p_full=ea.p_hat, k_local=eb.successes, p_local=eb.p_hat,
                       k_outer=ec.successes, p_outer=ec.p_hat, ratio=R, ratio_lo=lo, ratio_hi=hi)


@dataclass
class RunManifest:
    command: str
    args: dict
    master_seed: int
    alpha: float
    domain: str
    queries: list
    trials: int
    version: str = __version__
    status: list = field(default_factory=list)

    def to_json(self):
        d = {"version": self.version, "command": self.command, "args": self.args, "master_seed": self.master_seed,
             "alpha": self.alpha, "domain": self.domain, "queries": self.queries, "trials": self.trials,
             "status": self.status}
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["command"], d["args"], d["master_seed"], d["alpha"], d["domain"], d["queries"], d["trials"],
                   d.get("version", __version__), d.get("status", []))
