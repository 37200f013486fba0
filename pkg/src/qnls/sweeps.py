"""Randomized sweep drivers for the estimate probes.

Each sweep runs seeded trials over dyadic block ladders, mixing Gaussian
data with structured adversarial families (single modes, angular caps,
same-circle clusters, dense small blocks): random fields rarely approach
extremizers, so the structured families carry most of the stress.  Every
trial is a pure function of (seed, index), so sweeps are deterministic and
parallelize freely; results aggregate into RatioReport objects whose JSON
form embeds the resolved parameters.

Stability of an empirical constant is measured inside one sweep: the
maximum over trials at scale <= nmax/2 against the maximum over all trials
("range doubling").
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .blockfield import (
    BlockField,
    LatticeField,
    block_point_count,
    dense_block_field,
    exact_l4_sq,
    l2_norm,
    sample_block_field,
    _shell_cache,
)
from .classify import CaseTag, EstimateParams, tag_of_code
from .lattice import UNIT_TORUS, DyadicTriple, FreqVec
from .norms import SMOOTH_BUMP, bracket, cutoff_kernel
from .probes import (
    Ball,
    PROBE_KERNEL_TOL,
    ResonantFiberSpec,
    bilinear_strichartz_shell_ratios,
    bilinear_xsb_ratio,
    dual_trilinear_form,
    high_modulation_ratio,
    low_modulation_ratio,
    resonant_fiber_bound,
    resonant_fiber_size,
)

QUANTILES = (0.5, 0.9, 0.99)


@dataclass
class RatioReport:
    """Outcome of a randomized estimate probe."""

    estimate: str
    params: dict
    trials: int
    max_ratio: float
    witness_seed: object = None
    witness_blocks: dict = None
    quantiles: list = field(default_factory=list)
    sweep_range: dict = field(default_factory=dict)
    stability: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        d = {
            "estimate": self.estimate,
            "params": self.params,
            "trials": self.trials,
            "maxRatio": self.max_ratio,
            "witnessSeed": self.witness_seed,
            "witnessBlocks": self.witness_blocks,
            "quantiles": [[q, v] for q, v in self.quantiles],
            "sweepRange": self.sweep_range,
        }
        if self.stability:
            d["stability"] = self.stability
        if self.extras:
            d["extras"] = self.extras
        return d


def run_pool(fn, items, threads: int = 1) -> list:
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _rng(seed, *path):
    return np.random.default_rng(tuple(int(x) for x in (seed,) + path))


def dyadics_upto(n: int) -> list:
    out, v = [], 1
    while v <= n:
        out.append(v)
        v *= 2
    return out


def _aggregate(name, rows, params, sweep_range, half_mask=None) -> RatioReport:
    """rows: list of (ratio, seed_path, blocks_dict)."""
    ratios = np.array([r[0] for r in rows], dtype=float)
    best = int(np.argmax(ratios)) if len(ratios) else 0
    quants = [(q, float(np.quantile(ratios, q))) for q in QUANTILES] if len(ratios) else []
    rep = RatioReport(
        estimate=name,
        params=params,
        trials=len(rows),
        max_ratio=float(ratios.max()) if len(ratios) else 0.0,
        witness_seed=rows[best][1] if rows else None,
        witness_blocks=rows[best][2] if rows else None,
        quantiles=quants,
        sweep_range=sweep_range,
    )
    if half_mask is not None and half_mask.any():
        half = float(ratios[half_mask].max())
        rep.stability = {
            "halfRangeMax": half,
            "fullRangeMax": rep.max_ratio,
            "growth": rep.max_ratio / half if half > 0 else math.inf,
        }
    return rep


# -- structured families -------------------------------------------------------


def _cap_points(N: int, psi: float, width: float):
    xs, ys = _shell_cache(N, 1.0, 1.0)
    ang = np.arctan2(ys, xs)
    d = np.abs((ang - psi + math.pi) % (2 * math.pi) - math.pi)
    keep = d <= width
    return xs[keep], ys[keep]


def _tau_for_lambda(q, lam):
    return np.round(lam - q).astype(np.int64)


def field_cap(N: int, L: int, rng, npts: int) -> LatticeField:
    """Gaussian weights on a thin angular cap of the shell, one modulation."""
    psi = rng.uniform(0, 2 * math.pi)
    width = max(4.0 / N, 0.05)
    xs, ys = _cap_points(N, psi, width)
    while xs.size == 0:
        psi = rng.uniform(0, 2 * math.pi)
        width *= 2
        xs, ys = _cap_points(N, psi, width)
    if xs.size > npts:
        sel = rng.choice(xs.size, npts, replace=False)
        xs, ys = xs[sel], ys[sel]
    q = xs.astype(float) ** 2 + ys.astype(float) ** 2
    lam = (L / 2 + rng.integers(1, max(L // 2, 1) + 1)) * rng.choice([-1.0, 1.0]) if L > 1 else 0.0
    k = _tau_for_lambda(q, lam)
    w = (rng.standard_normal(xs.size) + 1j * rng.standard_normal(xs.size)) / math.sqrt(2)
    return LatticeField(k, xs.astype(np.int64), ys.astype(np.int64), w, 1.0)


def field_circle(N: int, L: int, rng, npts: int) -> LatticeField:
    """Gaussian weights on lattice points sharing one |n|^2, one modulation."""
    xs, ys = _shell_cache(N, 1.0, 1.0)
    pick = rng.integers(0, xs.size)
    m = int(xs[pick]) ** 2 + int(ys[pick]) ** 2
    q = xs.astype(float) ** 2 + ys.astype(float) ** 2
    keep = q == m
    xs, ys = xs[keep], ys[keep]
    if xs.size > npts:
        sel = rng.choice(xs.size, npts, replace=False)
        xs, ys = xs[sel], ys[sel]
    lam = (L / 2 + rng.integers(1, max(L // 2, 1) + 1)) * rng.choice([-1.0, 1.0]) if L > 1 else 0.0
    k = _tau_for_lambda(np.full(xs.size, float(m)), lam)
    w = (rng.standard_normal(xs.size) + 1j * rng.standard_normal(xs.size)) / math.sqrt(2)
    return LatticeField(k, xs.astype(np.int64), ys.astype(np.int64), w, 1.0)


def field_single(N: int, L: int, rng) -> LatticeField:
    return sample_block_field(N, L, rng, 1)


FAMILY_BUILDERS = ("gauss", "cap", "circle", "single", "dense")


def build_family(family: str, N: int, L: int, rng, npts: int) -> LatticeField:
    if family == "gauss":
        return sample_block_field(N, L, rng, npts)
    if family == "cap":
        return field_cap(N, L, rng, npts)
    if family == "circle":
        return field_circle(N, L, rng, npts)
    if family == "single":
        return field_single(N, L, rng)
    if family == "dense":
        return dense_block_field(N, L, rng)
    raise ValueError(f"unknown family {family}")


def _choose_family(rng, N: int, L: int) -> str:
    fams = ["gauss", "cap", "circle", "single"]
    probs = [0.55, 0.2, 0.15, 0.1]
    if block_point_count(N, L) <= 600:
        fams.append("dense")
        probs = [0.45, 0.2, 0.15, 0.1, 0.1]
    return str(rng.choice(fams, p=probs))


# -- bilinear Strichartz sweep ---------------------------------------------------


def sweep_bilinear_strichartz(nmax: int = 64, lmax: int = 256,
                              trials: int = 10000, seed: int = 0,
                              threads: int = 1, npts: int = 96) -> RatioReport:
    dy_n = dyadics_upto(nmax)
    dy_l = dyadics_upto(lmax)

    def one(i):
        rng = _rng(seed, 101, i)
        scale = int(rng.choice(dy_n))
        other = int(rng.choice([d for d in dy_n if d <= scale]))
        N1, N2 = (scale, other) if rng.integers(2) else (other, scale)
        L1, L2 = int(rng.choice(dy_l)), int(rng.choice(dy_l))
        fam1 = _choose_family(rng, N1, L1)
        fam2 = _choose_family(rng, N2, L2)
        u1 = build_family(fam1, N1, L1, rng, npts)
        u2 = build_family(fam2, N2, L2, rng, npts)
        blocks = DyadicTriple(1, N1, N2, 1, L1, L2)
        shells = bilinear_strichartz_shell_ratios(u1, u2, blocks)
        if not shells:
            return (0.0, scale, {})
        N0, ratio = max(shells.items(), key=lambda kv: kv[1])
        return (
            ratio,
            scale,
            {"N0": N0, "N1": N1, "N2": N2, "L1": L1, "L2": L2,
             "families": [fam1, fam2], "trial": i},
        )

    rows = run_pool(one, range(trials), threads)
    ratios = [(r, {"seed": seed, "trial": b.get("trial")} if b else seed, b)
              for r, _, b in rows]
    half_mask = np.array([sc <= nmax // 2 for _, sc, _ in rows])
    rep = _aggregate(
        "bilinear-strichartz",
        [(r, w, b) for (r, w, b) in ratios],
        {"npts": npts, "seed": seed},
        {"Nmax": nmax, "Lmax": lmax},
        half_mask,
    )
    rep.extras["constantLabel"] = "C_bs"
    return rep


# -- bilinear X^{s,b} sweep ------------------------------------------------------


def xsb_pair_ladder(nmax: int) -> list:
    """Diagonal blocks plus strongly unbalanced pairs in both orders."""
    dy = dyadics_upto(nmax)
    pairs = {(N, N) for N in dy}
    for k in (16, nmax):
        if k <= nmax:
            pairs.add((1, k))
            pairs.add((k, 1))
    if 4 * 16 <= nmax:
        pairs.add((4, 64))
        pairs.add((64, 4))
    return sorted(pairs)


def sweep_bilinear_xsb(nmax: int = 64, lmax: int = 256,
                       trials_per_pair: int = 1000, seed: int = 0,
                       threads: int = 1, npts: int = 48,
                       params: EstimateParams = None,
                       patterns=("uvbar", "uv"),
                       kernel_tol: float = 1e-6) -> dict:
    from .blockfield import lattice_convolve, smeared_xsb_norm

    p = params or EstimateParams()
    pairs = xsb_pair_ladder(nmax)
    dy_l = dyadics_upto(lmax)
    offs, taps = cutoff_kernel(SMOOTH_BUMP, 1.0, 2 * math.pi, tol=kernel_tol)
    jobs = [(pi, t) for pi in range(len(pairs)) for t in range(trials_per_pair)]

    def one(job):
        pi, t = job
        N1, N2 = pairs[pi]
        rng = _rng(seed, 202, pi, t)
        L1, L2 = int(rng.choice(dy_l)), int(rng.choice(dy_l))
        fam1 = _choose_family(rng, N1, L1)
        fam2 = _choose_family(rng, N2, L2)
        u = build_family(fam1, N1, L1, rng, npts)
        v = build_family(fam2, N2, L2, rng, npts)
        den = (smeared_xsb_norm(u, offs, taps, p.s, p.b_plus)
               * smeared_xsb_norm(v, offs, taps, p.s, p.b_plus))
        out = {}
        for pat in patterns:
            w = lattice_convolve(u, v, pat)
            out[pat] = smeared_xsb_norm(w, offs, taps, p.s, p.b_minus) / den
        blocks = {"N1": N1, "N2": N2, "L1": L1, "L2": L2,
                  "families": [fam1, fam2], "pair": pi, "trial": t}
        return out, max(N1, N2), blocks

    results = run_pool(one, jobs, threads)
    reports = {}
    for pat in patterns:
        rows = [(res[pat], {"seed": seed, "pair": b["pair"], "trial": b["trial"]}, b)
                for res, _, b in results]
        half = np.array([sc <= nmax // 2 for _, sc, _ in results])
        rep = _aggregate(
            f"bilinear-xsb-{pat}",
            rows,
            {"eps": p.eps, "delta1": p.delta1, "delta2": p.delta2, "s": p.s,
             "npts": npts, "seed": seed, "pairs": len(pairs)},
            {"Nmax": nmax, "Lmax": lmax},
            half,
        )
        rep.extras["constantLabel"] = "C_bi"
        reports[pat] = rep
    return reports


def sweep_case_decomposition(nmax: int = 64, lmax: int = 64,
                             trials: int = 400, seed: int = 0,
                             threads: int = 1, npts: int = 48,
                             params: EstimateParams = None) -> dict:
    """Per-case contributions of the dual trilinear form, normalized by the
    product of L^2 norms; returns {tag: {"max": .., "trials": ..}}."""
    p = params or EstimateParams()
    dy_n = dyadics_upto(nmax)
    dy_l = dyadics_upto(lmax)

    # block geometries steering the sweep into each case family
    def geometry(rng):
        mode = rng.integers(4)
        if mode == 0:     # comparable sizes
            N1 = int(rng.choice(dy_n))
            N2 = N1
        elif mode == 1:   # N2 >> N1^2 (case 2)
            N1 = int(rng.choice([d for d in dy_n if d * d * 8 <= nmax] or [1]))
            N2 = int(rng.choice([d for d in dy_n if d >= 8 * N1 * N1] or [nmax]))
        elif mode == 2:   # N2 << sqrt(N1) (case 3 flavour)
            N2 = int(rng.choice([d for d in dy_n if d * d * 8 <= nmax] or [1]))
            N1 = int(rng.choice([d for d in dy_n if d >= 8 * N2 * N2] or [nmax]))
        else:
            N1 = int(rng.choice(dy_n))
            N2 = int(rng.choice(dy_n))
        return N1, N2

    def one(i):
        rng = _rng(seed, 303, i)
        N1, N2 = geometry(rng)
        L1, L2, L0 = (int(rng.choice(dy_l)) for _ in range(3))
        u = sample_block_field(N1, L1, rng, npts)
        v = sample_block_field(N2, L2, rng, npts)
        # w spread over an output-compatible region: dyadic block around N1+N2
        N0 = int(rng.choice([d for d in dy_n if d <= 2 * max(N1, N2)]))
        w = sample_block_field(N0, L0, rng, npts)
        _, tags, terms = dual_trilinear_form(u, v, w, p)
        den = l2_norm(u) * l2_norm(v) * l2_norm(w)
        out = {}
        for code in np.unique(tags):
            val = abs(complex(terms[tags == code].sum()))
            out[tag_of_code(int(code)).value] = val / den
        return out

    results = run_pool(one, range(trials), threads)
    summary = {}
    for res in results:
        for tag, ratio in res.items():
            cur = summary.setdefault(tag, {"max": 0.0, "trials": 0})
            cur["max"] = max(cur["max"], ratio)
            cur["trials"] += 1
    return summary


# -- trilinear sweep -------------------------------------------------------------

ALL_CONJ = [(a, b, c) for a in (False, True) for b in (False, True) for c in (False, True)]


def _spatial_field_from_points(xs, ys, w, nmax_grid: int):
    from .fields import SpaceGrid, SpatialField

    M = 4
    while M // 2 - 1 < nmax_grid:
        M *= 2
    grid = SpaceGrid(M, M)
    modes = np.zeros((M, M), dtype=complex)
    modes[xs + M // 2, ys + M // 2] = w
    return SpatialField(grid, modes)


def _embed_spatial(phi, M: int):
    from .fields import SpaceGrid, SpatialField

    if phi.grid.Mx == M:
        return phi
    lo = M // 2 - phi.grid.Mx // 2
    modes = np.zeros((M, M), dtype=complex)
    modes[lo:lo + phi.grid.Mx, lo:lo + phi.grid.My] = phi.modes
    return SpatialField(SpaceGrid(M, M), modes)


def sweep_trilinear(nmax: int = 64, trials: int = 10000, seed: int = 0,
                    threads: int = 1, npts: int = 48) -> RatioReport:
    from .probes import trilinear_form

    dy_n = dyadics_upto(nmax)

    def spatial_family(rng, N):
        kind = rng.choice(["gauss", "circle", "single"], p=[0.6, 0.3, 0.1])
        xs, ys = _shell_cache(N, 1.0, 1.0)
        if kind == "circle":
            pick = rng.integers(0, xs.size)
            m = int(xs[pick]) ** 2 + int(ys[pick]) ** 2
            keep = xs.astype(float) ** 2 + ys.astype(float) ** 2 == m
            xs, ys = xs[keep], ys[keep]
        count = 1 if kind == "single" else min(npts, xs.size)
        sel = rng.choice(xs.size, count, replace=False)
        xs, ys = xs[sel], ys[sel]
        w = (rng.standard_normal(count) + 1j * rng.standard_normal(count)) / math.sqrt(2)
        return _spatial_field_from_points(xs, ys, w, N)

    def one(i):
        rng = _rng(seed, 404, i)
        conj = ALL_CONJ[i % len(ALL_CONJ)]
        scale = int(rng.choice(dy_n))
        Ns = [int(rng.choice([d for d in dy_n if d <= scale])) for _ in range(2)] + [scale]
        rng.shuffle(Ns)
        phis = [spatial_family(rng, N) for N in Ns]
        # all three on the common grid sized by the largest shell
        M = max(phi.grid.Mx for phi in phis)
        phis = [_embed_spatial(phi, M) for phi in phis]
        den = math.prod(phi.l2() for phi in phis)
        if den == 0:
            return (0.0, scale, {})
        val = abs(trilinear_form(*phis, conj=conj))
        return (
            val / den, scale,
            {"Ns": Ns, "conj": list(conj), "trial": i},
        )

    rows = run_pool(one, range(trials), threads)
    half = np.array([sc <= nmax // 2 for _, sc, _ in rows])
    rep = _aggregate(
        "trilinear-l3",
        [(r, {"seed": seed, "trial": b.get("trial")} if b else seed, b)
         for r, _, b in rows],
        {"npts": npts, "seed": seed, "patterns": len(ALL_CONJ)},
        {"Nmax": nmax},
        half,
    )
    rep.extras["constantLabel"] = "C_tri"
    return rep


# -- modulation lemma sweeps ------------------------------------------------------


def sweep_modulation_high(n2max: int = 256, trials: int = 2000, seed: int = 0,
                          threads: int = 1, npts: int = 96) -> RatioReport:
    dy = dyadics_upto(n2max)

    def one(i):
        rng = _rng(seed, 505, i)
        N2 = int(rng.choice([d for d in dy if d >= 8]))
        n0_opts = [d for d in dy if d * d * 8 <= N2]
        N0 = int(rng.choice(n0_opts)) if n0_opts else 1
        N1 = int(rng.choice([d for d in (N2 // 2, N2, 2 * N2) if 1 <= d <= 2 * n2max]))
        lmax_val = int(rng.choice([d for d in dyadics_upto(4 * N2) if d >= N2]))
        which = int(rng.integers(3))
        Ls = [int(rng.choice(dyadics_upto(N2))) for _ in range(3)]
        Ls[which] = lmax_val
        L0, L1, L2 = Ls
        blocks = DyadicTriple(N0, N1, N2, L0, L1, L2)
        f = BlockField(sample_block_field(N1, L1, rng, npts, weights="halfnormal"), N1, L1)
        g = BlockField(sample_block_field(N2, L2, rng, npts, weights="halfnormal"), N2, L2)
        h = BlockField(sample_block_field(N0, L0, rng, npts, weights="halfnormal"), N0, L0)
        ratio = high_modulation_ratio(f, g, h, blocks)
        return (ratio, N2, {"blocks": blocks.__dict__, "trial": i})

    rows = run_pool(one, range(trials), threads)
    half = np.array([sc <= n2max // 2 for _, sc, _ in rows])
    rep = _aggregate(
        "high-modulation",
        [(r, {"seed": seed, "trial": b.get("trial")} if b else seed, b)
         for r, _, b in rows],
        {"npts": npts, "seed": seed, "kappa": 0.01},
        {"N2max": n2max},
        half,
    )
    rep.extras["constantLabel"] = "C_high"
    return rep


def _low_mod_fields(rng, N2, L0, L1, L2, npts):
    """Aligned triple for the low-modulation lemma: h near a direction, g on
    the orthogonal cap of the N2 shell, f = h + g sums that land in block N1."""
    psi = rng.uniform(0, 2 * math.pi)
    hcap = int(math.isqrt(N2 // 8))
    ax = np.arange(-hcap, hcap + 1)
    hx, hy = np.meshgrid(ax, ax, indexing="ij")
    hx, hy = hx.ravel(), hy.ravel()
    qh = hx**2 + hy**2
    keep = (qh >= 1) & (qh * 8 <= N2)
    ang = np.abs((np.arctan2(hy, hx) - psi + math.pi) % (2 * math.pi) - math.pi)
    keep &= ang <= 0.6
    hx, hy, qh = hx[keep], hy[keep], qh[keep]
    if hx.size == 0:
        return None
    if hx.size > npts:
        sel = rng.choice(hx.size, npts, replace=False)
        hx, hy, qh = hx[sel], hy[sel], qh[sel]
    lam0 = 0.0 if L0 == 1 else float(rng.choice([-1, 1])) * (L0 / 2 + 1)
    hk = _tau_for_lambda(qh.astype(float), lam0)
    h = LatticeField(hk, hx.astype(np.int64), hy.astype(np.int64),
                     np.abs(rng.standard_normal(hx.size)), 1.0)
    # g on the cap of the N2 shell orthogonal to psi, modulations inside L2
    xs, ys = _cap_points(N2, psi + math.pi / 2, max(4.0 / N2, 0.05))
    if xs.size == 0:
        return None
    if xs.size > npts:
        sel = rng.choice(xs.size, npts, replace=False)
        xs, ys = xs[sel], ys[sel]
    lam2 = 0.0 if L2 == 1 else float(rng.choice([-1, 1])) * (L2 / 2 + 1)
    gk = _tau_for_lambda((xs**2 + ys**2).astype(float), lam2)
    g = LatticeField(gk, xs.astype(np.int64), ys.astype(np.int64),
                     np.abs(rng.standard_normal(xs.size)), 1.0)
    # f points at sums n1 = n + n2 for sampled (h, g) combos, kept if in block
    take = min(4 * npts, h.size * g.size)
    hi = rng.integers(0, h.size, take)
    gi = rng.integers(0, g.size, take)
    fx = h.n1[hi] + g.n1[gi]
    fy = h.n2[hi] + g.n2[gi]
    fk = h.tau_idx[hi] + g.tau_idx[gi]
    qf = fx.astype(float) ** 2 + fy.astype(float) ** 2
    from .lattice import modulation_block_contains, spatial_block_contains

    N1 = N2
    okf = spatial_block_contains(N1, qf) & modulation_block_contains(L1, fk + qf)
    if not okf.any():
        return None
    from .blockfield import canonicalize

    f = canonicalize(LatticeField(fk[okf], fx[okf], fy[okf],
                                  np.abs(rng.standard_normal(int(okf.sum()))), 1.0))
    return f, g, h, N1


def sweep_modulation_low(n2max: int = 256, trials: int = 2000, seed: int = 0,
                         threads: int = 1, npts: int = 64,
                         eps: float = 0.1) -> RatioReport:
    dy = [d for d in dyadics_upto(n2max) if d >= 16]

    def one(i):
        rng = _rng(seed, 606, i)
        N2 = int(rng.choice(dy))
        lcap = max(1, N2 // 16)
        L0, L1, L2 = (int(rng.choice(dyadics_upto(lcap))) for _ in range(3))
        built = _low_mod_fields(rng, N2, L0, L1, L2, npts)
        if built is None:
            return (0.0, N2, {})
        f, g, h, N1 = built
        blocks = DyadicTriple(1, N1, N2, L0, L1, L2)
        ratio = low_modulation_ratio(
            BlockField(f, N1, L1), BlockField(g, N2, L2), h, blocks,
            theta=None, eps=eps,
        )
        return (ratio, N2, {"blocks": blocks.__dict__, "trial": i})

    rows = run_pool(one, range(trials), threads)
    half = np.array([sc <= n2max // 2 for _, sc, _ in rows])
    rep = _aggregate(
        "low-modulation",
        [(r, {"seed": seed, "trial": b.get("trial")} if b else seed, b)
         for r, _, b in rows],
        {"npts": npts, "seed": seed, "eps": eps, "thetaRule": "per-term"},
        {"N2max": n2max},
        half,
    )
    rep.extras["constantLabel"] = "C_low"
    return rep


def sweep_fiber(trials: int = 1000, seed: int = 0, threads: int = 1,
                n1max: int = 256, eps: float = 0.1) -> RatioReport:
    dy = dyadics_upto(n1max)

    def one(i):
        rng = _rng(seed, 707, i)
        N1 = int(rng.choice([d for d in dy if d >= 32]))
        n0_opts = [d for d in dyadics_upto(int(math.isqrt(N1 // 8)) or 1)]
        N0 = int(rng.choice(n0_opts)) if n0_opts else 1
        # witness-first construction: n nearly orthogonal to a base point
        psi = rng.uniform(0, 2 * math.pi)
        xs, ys = _cap_points(N1, psi, max(8.0 / N1, 0.1))
        if xs.size == 0:
            return (0.0, N1, {})
        pick = rng.integers(0, xs.size)
        base = FreqVec(int(xs[pick]), int(ys[pick]))
        nx, ny = _cap_points(N0, psi + math.pi / 2, 0.9)
        if nx.size == 0:
            return (0.0, N1, {})
        p2 = rng.integers(0, nx.size)
        n = FreqVec(int(nx[p2]), int(ny[p2]))
        Lbig = int(rng.choice([d for d in dy if N0 <= d <= 4 * N1] or [N0]))
        L1 = int(rng.choice(dyadics_upto(Lbig)))
        L2 = int(rng.choice(dyadics_upto(Lbig)))
        blocks = DyadicTriple(N0, N1, N1, Lbig, L1, L2)
        lam1 = 0.0 if L1 == 1 else (L1 / 2 + 1)
        tau1 = lam1 - base.norm_sq()
        second = base - n
        lam2 = 0.0 if L2 == 1 else (L2 / 2 + 1)
        tau2 = lam2 - second.norm_sq()
        theta = (max(n.norm(), 1.0) * max(second.norm(), 1.0)) ** (-(1.0 - eps))
        spec = ResonantFiberSpec(
            tau=tau1 - tau2, tau1=tau1, n=n,
            j1=int(math.floor(base.norm() - 1e-9)),
            j2=int(math.floor(second.norm() - 1e-9)),
            J1=Ball(base, max(2.0, 1.5 * N0)),
            J2=Ball(second, max(2.0, 1.5 * N0)),
            blocks=blocks, theta=max(theta, 0.05),
        )
        size = resonant_fiber_size(spec)
        bound = resonant_fiber_bound(spec)
        return (size / bound, N1, {"blocks": blocks.__dict__, "j1": spec.j1,
                                   "j2": spec.j2, "size": size, "trial": i})

    rows = run_pool(one, range(trials), threads)
    half = np.array([sc <= n1max // 2 for _, sc, _ in rows])
    rep = _aggregate(
        "resonant-fiber",
        [(r, {"seed": seed, "trial": b.get("trial")} if b else seed, b)
         for r, _, b in rows],
        {"seed": seed, "eps": eps},
        {"N1max": n1max},
        half,
    )
    rep.extras["constantLabel"] = "C_fib"
    return rep


# -- L^4 probe ---------------------------------------------------------------------


def _fft_self_convolve(p: np.ndarray) -> np.ndarray:
    n = 2 * len(p) - 1
    size = 1
    while size < n:
        size *= 2
    fp = np.fft.rfft(p, size)
    return np.fft.irfft(fp * fp, size)[:n]


def weyl_square_l4_sq(N: int) -> float:
    """Exact integral over [0,1] x torus of |e^{it Lap} phi|^4 for the square
    data phi = sum of unit modes over [1, N]^2, via the separable structure."""
    # P(t) = sum_s |b_s(t)|^2, b_s = sum_{j+k=s} exp(-it(j^2+k^2))
    width = 2 * N * N + 1
    p = np.zeros(2 * width - 1)
    for s in range(2, 2 * N + 1):
        js = np.arange(max(1, s - N), min(N, s - 1) + 1)
        om = js**2 + (s - js) ** 2
        hist = np.bincount(om, minlength=width)
        nz = np.flatnonzero(hist)
        h = hist[nz].astype(float)
        # autocorrelation of the sparse histogram: differences om_i - om_j
        d = np.subtract.outer(nz, nz).ravel() + (width - 1)
        p += np.bincount(d, weights=np.outer(h, h).ravel(), minlength=2 * width - 1)
    q = _fft_self_convolve(p)
    # q[d] multiplies exp(-i (d - center) t); integrate over [0, 1]
    center = len(q) // 2
    from .blockfield import int01_exp

    deltas = np.arange(len(q)) - center
    val = float(np.real(np.sum(q * int01_exp(-deltas.astype(float)))))
    return val


def free_orbit_lattice(xs, ys, w) -> LatticeField:
    """Lattice field of eta-free data exp(it Lap) phi: tau = -|n|^2 exactly."""
    q = xs.astype(np.int64) ** 2 + ys.astype(np.int64) ** 2
    scale = math.sqrt(2 * math.pi)  # plain coefficient -> density convention
    return LatticeField(-q, xs.astype(np.int64), ys.astype(np.int64),
                        np.asarray(w, dtype=complex) * scale, 1.0)


def _xsb_free_data_denominator(qs: np.ndarray, w: np.ndarray, s: float, b: float,
                               T: float = 1.0) -> float:
    """Closed form: the cutoff spectrum is the same around every mode."""
    offs, taps = cutoff_kernel(SMOOTH_BUMP, T, 2 * math.pi, tol=PROBE_KERNEL_TOL)
    w0 = float((bracket(offs.astype(float)) ** (2 * b) * np.abs(taps) ** 2).sum())
    hs = float((bracket(np.sqrt(qs)) ** (2 * s) * np.abs(w) ** 2).sum())
    return math.sqrt(w0 * hs)


def disc_l4_sq(N: int) -> float:
    """Exact [0,1] x torus integral of |e^{it Lap} phi|^4 for the full disc
    indicator |n| <= N (exact quadruple sum through u^2)."""
    ax = np.arange(-N, N + 1)
    px, py = np.meshgrid(ax, ax, indexing="ij")
    keep = px**2 + py**2 <= N * N
    xs, ys = px[keep], py[keep]
    u = free_orbit_lattice(xs, ys, np.ones(xs.size))
    return exact_l4_sq(u)


def l4_loss_probe(n_list=(8, 16, 32, 64, 128), b: float = 0.6, s: float = 0.0,
                  trials: int = 20, seed: int = 0, threads: int = 1,
                  disc_cap: int = 32, npts: int = 64) -> dict:
    """Max L^4 / X^{s,b} ratio per dyadic N over deterministic structured
    witnesses and random trials; returns the per-N table and log-log slope."""

    def ratio_for(xs, ys, w):
        num = exact_l4_sq(free_orbit_lattice(xs, ys, w)) ** 0.25
        q = xs.astype(float) ** 2 + ys.astype(float) ** 2
        return num / _xsb_free_data_denominator(q, w, s, b)

    def per_n(N):
        rows = {}
        # deterministic square witness via the separable evaluator
        numer = weyl_square_l4_sq(N) ** 0.25
        js = np.arange(1, N + 1)
        qsq = (js[:, None] ** 2 + js[None, :] ** 2).ravel().astype(float)
        den = _xsb_free_data_denominator(qsq, np.ones(qsq.size), s, b)
        rows["weyl-square"] = numer / den
        if N <= disc_cap:
            ax = np.arange(-N, N + 1)
            px, py = np.meshgrid(ax, ax, indexing="ij")
            keep = px**2 + py**2 <= N * N
            rows["disc"] = ratio_for(px[keep], py[keep],
                                     np.ones(int(keep.sum())))
        best_rand = 0.0
        for t in range(trials):
            rng = _rng(seed, 808, N, t)
            xs, ys = _shell_cache(N, 1.0, 1.0)
            if t % 2 == 0:
                pick = rng.integers(0, xs.size)
                m = int(xs[pick]) ** 2 + int(ys[pick]) ** 2
                keep = xs**2 + ys**2 == m
                cx, cy = xs[keep], ys[keep]
            else:
                sel = rng.choice(xs.size, min(npts, xs.size), replace=False)
                cx, cy = xs[sel], ys[sel]
            w = (rng.standard_normal(cx.size) + 1j * rng.standard_normal(cx.size))
            best_rand = max(best_rand, ratio_for(cx, cy, w / math.sqrt(2)))
        rows["random"] = best_rand
        return N, max(rows.values()), rows

    results = run_pool(per_n, list(n_list), threads)
    table = [(int(N), float(mx)) for N, mx, _ in results]
    logs = np.log([m for _, m in table])
    logn = np.log([n for n, _ in table])
    slope = float(np.polyfit(logn, logs, 1)[0])
    return {
        "b": b,
        "s": s,
        "table": table,
        "perFamily": {str(N): fams for N, _, fams in results},
        "slope": slope,
    }
