"""Dirichlet Gaussian free field and the occupation field of the loop soup."""
from __future__ import annotations

import io
import zlib

import numpy as np
from scipy import linalg, stats

from .greens import build_green
from .lattice import VertexSet


class Field:
    """Real values on the vertices of a domain (zero off the domain)."""

    def __init__(self, domain, values, tag):
        if tag not in ("gff", "occupation"):
            raise ValueError(f"unknown field tag {tag!r}")
        self.domain = domain
        self.values = np.asarray(values, dtype=float)
        self.tag = tag

    def __getitem__(self, v):
        i = self.domain.index.get(tuple(v))
        return 0.0 if i is None else float(self.values[i])

    def to_csv(self):
        buf = io.StringIO()
        buf.write("x,y,value\n")
        for (x, y), val in zip(self.domain.points.tolist(), self.values.tolist()):
            buf.write(f"{x},{y},{val:.17g}\n")
        return buf.getvalue()

    def to_pgm(self):
        """Binary 8-bit PGM of the field over the domain's bounding box, rows top to bottom."""
        x0, y0, x1, y1 = self.domain.bbox
        W, H = x1 - x0 + 1, y1 - y0 + 1
        img = np.zeros((H, W))
        p = self.domain.points
        img[y1 - p[:, 1], p[:, 0] - x0] = self.values
        lo, hi = img.min(), img.max()
        scaled = np.zeros_like(img) if hi == lo else (img - lo) / (hi - lo)
        data = np.round(255 * scaled).astype(np.uint8)
        return f"P5\n{W} {H}\n255\n".encode() + data.tobytes()


def gff_factor(D, green=None):
    G = green if green is not None else build_green(D)
    return linalg.cholesky(G.values, lower=True)


def sample_gff(D, rng, n=None, factor=None):
    """One field (or an (n, |D|) array of fields) with covariance G_D."""
    Lf = factor if factor is not None else gff_factor(D)
    if n is None:
        return Field(D, Lf @ rng.standard_normal(len(D)), "gff")
    return rng.standard_normal((n, len(D))) @ Lf.T


def _visit_counts(config, D):
    idx = D.index
    coords, offsets = config.packed()
    counts = np.zeros(len(D))
    if len(coords):
        loc = np.array([idx[v] for v in map(tuple, coords.tolist())], dtype=np.int64)
        np.add.at(counts, loc, 1)
    return counts


def occupation_field(config, alpha, seed, D=None):
    """Occupation field with unit-mean exponential holding times.

    Each loop copy draws its holding times from a stream keyed by the loop's
    canonical form and copy number, so adding loops never changes the
    contribution of the loops already present.  The one-vertex part is an
    independent Gamma(alpha, 1) per vertex from the base seed.
    """
    D = D if D is not None else config.domain
    idx = D.index
    vals = np.random.default_rng([seed, 0]).gamma(alpha, 1.0, len(D))
    for g, n in sorted(config.counts.items()):
        key = zlib.crc32(repr(g.cycle).encode())
        cnt = {}
        for v in g.cycle:
            cnt[v] = cnt.get(v, 0) + 1
        verts = sorted(cnt)
        shape = np.array([cnt[v] for v in verts], dtype=float)
        loc = np.array([idx[v] for v in verts])
        for copy in range(n):
            rng = np.random.default_rng([seed, 1, key, copy])
            vals[loc] += rng.gamma(shape, 1.0)
    return Field(D, vals, "occupation")


def occupation_fast(config, alpha, rng, D=None):
    """Same law as occupation_field from a single stream: Gamma(visits) + Gamma(alpha)."""
    D = D if D is not None else config.domain
    k = _visit_counts(config, D)
    out = rng.gamma(alpha, 1.0, len(D))
    pos = k > 0
    out[pos] += rng.gamma(k[pos], 1.0)
    return out


def isomorphism_check(D, trials, seed, vertices=None, n_vertices=5, alpha=0.5, level=1e-3):
    """Compare occupation marginals with half the squared GFF at chosen vertices.

    Reports, per vertex, the sample mean/variance of both fields with
    z-scores against alpha*G and alpha*G^2, and the two-sample KS p-value.
    """
    from .sampler import SoupSpec, sample_batch

    G = build_green(D)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
    if vertices is None:
        pick = rng.choice(len(D), size=min(n_vertices, len(D)), replace=False)
        vertices = [tuple(D.points[i]) for i in sorted(pick)]
    cols = [D.index[tuple(v)] for v in vertices]
    occ = np.empty((trials, len(D)))
    spec = SoupSpec(D, alpha, rng_seed=seed)
    hold = np.random.default_rng(np.random.SeedSequence([seed, 12]))
    for t, cfg in enumerate(sample_batch(spec, trials, stream=5)):
        occ[t] = occupation_fast(cfg, alpha, hold, D)
    phi = sample_gff(D, np.random.default_rng(np.random.SeedSequence([seed, 13])), n=trials, factor=gff_factor(D, G))
    half_sq = 0.5 * phi ** 2
    rows = []
    for v, c in zip(vertices, cols):
        g = G.values[c, c]
        mu, var = alpha * g, alpha * g * g
        k, th = alpha, g
        var_of_var = (2 * k * k + 6 * k) * th ** 4 / trials
        row = {"vertex": v, "G": g, "mean_theory": mu, "var_theory": var}
        for name, x in (("occ", occ[:, c]), ("gff", half_sq[:, c])):
            m, s2 = x.mean(), x.var(ddof=1)
            row[f"{name}_mean"] = m
            row[f"{name}_var"] = s2
            row[f"{name}_z_mean"] = (m - mu) / np.sqrt(var / trials)
            row[f"{name}_z_var"] = (s2 - var) / np.sqrt(var_of_var)
        row["ks_p"] = float(stats.ks_2samp(occ[:, c], half_sq[:, c]).pvalue)
        row["ks_p_gamma"] = float(stats.kstest(occ[:, c], stats.gamma(alpha, scale=g).cdf).pvalue)
        row["pass"] = bool(row["ks_p"] > level and abs(row["occ_z_mean"]) <= 3 and abs(row["occ_z_var"]) <= 3
                           and abs(row["gff_z_mean"]) <= 3 and abs(row["gff_z_var"]) <= 3)
        rows.append(row)
    return {"alpha": alpha, "trials": trials, "vertices": rows, "pass": all(r["pass"] for r in rows),
            "occupation": occ, "half_square": half_sq, "green": G}
