"""Command-line entry point: seeded experiments, JSON reports, CSV traces.

Commands: simulate, picard, blowup-scan, verify-counting,
verify-bilinear-strichartz, verify-bilinear-xsb, verify-trilinear,
verify-modulation-lemmas, decompose-cases, l4-probe.

Exit codes: 0 success, 2 validation error, 3 invariant violation.  Every
report embeds the fully resolved parameter set (including defaulted eps,
delta1, delta2, c_nr, kappa) so a figure can be reproduced from the report
alone; the seed determines all randomness, so identical invocations give
identical numeric content (a generatedAt stamp is the only varying field).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .classify import C_NONRESONANT, CaseTag, EstimateParams, classify_batch
from .fields import SpaceGrid, SpatialField
from .lattice import (
    CountingInstance,
    counting_bound,
    counting_count,
    dyadic_block_of_sq,
    modulation_block_of_value,
)
from .picard import PicardConfig, duhamel_gain_trend, picard_iterate
from .solver import SolverConfig, blowup_criterion, evolve, mean_ode_blowup_time
from .sweeps import (
    l4_loss_probe,
    run_pool,
    sweep_bilinear_strichartz,
    sweep_bilinear_xsb,
    sweep_case_decomposition,
    sweep_fiber,
    sweep_modulation_high,
    sweep_modulation_low,
    sweep_trilinear,
)

STABILITY_GATE = 1.10


class ValidationError(ValueError):
    pass


class InvariantViolation(AssertionError):
    pass


@dataclass
class ExperimentSpec:
    command: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "reports"
    threads: int = 1


def parse_complex(text: str) -> complex:
    t = text.strip().replace("i", "j")
    if t.endswith("j") and t[:-1] in ("", "+", "-"):
        t = t[:-1] + "1j"
    try:
        return complex(t)
    except ValueError as exc:
        raise ValidationError(f"cannot parse complex constant {text!r}") from exc


def parse_initial_data(expr: str, grid: SpaceGrid) -> SpatialField:
    """Initial-data mini-language:

    const:<re><im>i    spatially constant data
    mode:<n1>,<n2>:<amp>   one plane wave
    gauss:<seed>:<s>   random data, H^s-normalized, band-limited to Mx/3
    """
    kind, _, rest = expr.partition(":")
    if kind == "const":
        c = parse_complex(rest)
        m = np.zeros((grid.Mx, grid.My), dtype=complex)
        m[grid.Mx // 2, grid.My // 2] = c
        return SpatialField(grid, m)
    if kind == "mode":
        loc, _, amp = rest.partition(":")
        try:
            n1, n2 = (int(x) for x in loc.split(","))
        except ValueError as exc:
            raise ValidationError(f"bad mode spec {expr!r}") from exc
        return SpatialField.single_mode(grid, n1, n2, parse_complex(amp or "1"))
    if kind == "gauss":
        seed_s, _, s_s = rest.partition(":")
        try:
            seed = int(seed_s)
            s = float(s_s or "0")
        except ValueError as exc:
            raise ValidationError(f"bad gauss spec {expr!r}") from exc
        rng = np.random.default_rng(seed)
        k = grid.Mx // 3
        m = np.zeros((grid.Mx, grid.My), dtype=complex)
        band = slice(grid.Mx // 2 - k, grid.Mx // 2 + k + 1)
        m[band, band] = rng.standard_normal((2 * k + 1, 2 * k + 1)) + 1j * rng.standard_normal(
            (2 * k + 1, 2 * k + 1)
        )
        f = SpatialField(grid, m)
        hs = f.hs_norm(s)
        return SpatialField(grid, m / hs)
    raise ValidationError(f"unknown initial-data kind {expr!r}")


def resolved_params(extra: dict) -> dict:
    p = EstimateParams()
    base = {
        "eps": p.eps,
        "delta1": p.delta1,
        "delta2": p.delta2,
        "c_nr": C_NONRESONANT,
        "kappa": 0.01,
        "angularCutoffConstant": 1.0,
        "llFactor": 8.0,
    }
    base.update(extra)
    return base


def write_report(spec: ExperimentSpec, payload: dict, suffix: str = "json") -> str:
    os.makedirs(spec.out_dir, exist_ok=True)
    path = os.path.join(spec.out_dir, f"{spec.command}-seed{spec.seed}.{suffix}")
    doc = {"command": spec.command, "seed": spec.seed}
    doc.update(payload)
    doc["generatedAt"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return path


def _gate_stability(report, label: str):
    growth = report.stability.get("growth", 1.0)
    if growth > STABILITY_GATE:
        raise InvariantViolation(
            f"{label}: constant grew by {growth:.3f} under range doubling"
        )


# -- command implementations ----------------------------------------------------


def cmd_simulate(spec: ExperimentSpec) -> dict:
    p = spec.params
    grid = SpaceGrid(p["modes"], p["modes"])
    u0 = parse_initial_data(p["u0"], grid)
    if p["scale"] != 1.0:
        u0 = SpatialField(grid, u0.modes * p["scale"])
    cfg = SolverConfig(grid, dt=p["dt"], Tend=p["tend"], blowup_cap=p["cap"],
                       store_stride=max(1, int(p["tend"] / p["dt"]) // 64))
    traj = evolve(cfg, u0)
    csv_path = os.path.join(spec.out_dir, f"simulate-seed{spec.seed}-trace.csv")
    os.makedirs(spec.out_dir, exist_ok=True)
    traj.to_csv(csv_path)
    out = {
        "params": resolved_params({"u0": p["u0"], "dt": p["dt"], "Tend": p["tend"],
                                   "modes": p["modes"], "cap": p["cap"],
                                   "scale": p["scale"]}),
        "criterionHolds": blowup_criterion(u0),
        "finalTime": float(traj.times[-1]),
        "finalL2": float(traj.l2_trace[-1]),
        "trace": os.path.basename(csv_path),
    }
    if traj.blowup:
        out["blowup"] = {
            "tStar": traj.blowup.t_star,
            "bracket": list(traj.blowup.bracket),
            "reason": traj.blowup.reason,
        }
    return out


def cmd_picard(spec: ExperimentSpec) -> dict:
    p = spec.params
    grid = SpaceGrid(p["modes"], p["modes"])
    u0 = parse_initial_data(p["u0"], grid)
    if p["scale"] != 1.0:
        u0 = SpatialField(grid, u0.modes * p["scale"])
    cfg = PicardConfig(T=p["T"], iterations=p["iterations"], eps=p["eps"])
    _, rep = picard_iterate(u0, cfg)
    trend = duhamel_gain_trend(seed=spec.seed)
    return {
        "params": resolved_params({"u0": p["u0"], "T": p["T"],
                                   "iterations": p["iterations"],
                                   "picardEps": p["eps"], "modes": p["modes"],
                                   "scale": p["scale"]}),
        "diffs": rep.diffs,
        "ratios": rep.ratios,
        "converged": rep.converged,
        "contractionFailure": rep.contraction_failure,
        "duhamelGainTrend": {"slope": trend["slope"],
                             "predictedExponent": trend["predicted_exponent"]},
    }


def cmd_blowup_scan(spec: ExperimentSpec) -> dict:
    p = spec.params
    grid = SpaceGrid(p["modes"], p["modes"])
    res = p["resolution"]
    res_im = p["resolution"]
    re_vals = np.linspace(p["re_min"], p["re_max"], res)
    im_vals = np.linspace(p["im_min"], p["im_max"], res_im)

    def one(idx):
        i, j = divmod(idx, len(im_vals))
        c = complex(re_vals[i], im_vals[j])
        m = np.zeros((grid.Mx, grid.My), dtype=complex)
        m[grid.Mx // 2, grid.My // 2] = c
        u0 = SpatialField(grid, m)
        traj = evolve(SolverConfig(grid, dt=p["dt"], Tend=p["tend"],
                                   store_stride=10**9), u0)
        tstar = traj.blowup.t_star if traj.blowup else math.inf
        exact = mean_ode_blowup_time(c)
        return (c.real, c.imag, blowup_criterion(u0), tstar, exact)

    rows = run_pool(one, range(len(re_vals) * len(im_vals)), spec.threads)
    os.makedirs(spec.out_dir, exist_ok=True)
    csv_path = os.path.join(spec.out_dir, f"blowup-scan-seed{spec.seed}.csv")
    with open(csv_path, "w") as fh:
        fh.write("re,im,criterion,t_star_detected,t_star_exact\n")
        for r in rows:
            fh.write(f"{r[0]:.6g},{r[1]:.6g},{int(r[2])},{r[3]:.6g},{r[4]:.6g}\n")
    # detector consistency on constant data: within 2% where finite
    worst = 0.0
    for _, _, _, det, exact in rows:
        if math.isfinite(exact) and exact < p["tend"]:
            worst = max(worst, abs(det - exact) / exact)
    if worst > 0.02:
        raise InvariantViolation(f"blow-up detector off by {worst:.3%} from closed form")
    return {
        "params": resolved_params({"dt": p["dt"], "Tend": p["tend"],
                                   "modes": p["modes"], "resolution": res}),
        "points": len(rows),
        "worstRelativeTstarError": worst,
        "trace": os.path.basename(csv_path),
    }


def cmd_verify_counting(spec: ExperimentSpec) -> dict:
    p = spec.params
    n_values = [n for n in (16, 32, 64, 128, 256, 512) if n <= p["nmax"]]
    rotations = [2 * math.pi * k / p["rotations"] for k in range(p["rotations"])]
    mus = (0.5, 1.0, 2.0)
    alphas = (math.pi / 16, math.pi / 8, math.pi / 4)
    jobs = [
        (N, mu, nu, alpha, rot)
        for N in n_values for mu in mus for nu in mus
        for alpha in alphas for rot in rotations
    ]

    def one(job):
        N, mu, nu, alpha, rot = job
        inst = CountingInstance(N=N, mu=mu, nu=nu, M=0.0, alpha_angle=alpha,
                                rotation=rot)
        c = counting_count(inst)
        return (N, c / counting_bound(inst), inst.hypothesis_ok())

    rows = run_pool(one, jobs, spec.threads)
    ratios = np.array([r[1] for r in rows])
    ns = np.array([r[0] for r in rows])
    full = float(ratios.max())
    half = float(ratios[ns <= p["nmax"] // 2].max())
    growth = full / half if half > 0 else math.inf
    rep = {
        "params": resolved_params({"Nmax": p["nmax"], "rotations": p["rotations"],
                                   "mu_nu": list(mus),
                                   "alphas": [round(a, 6) for a in alphas]}),
        "instances": len(rows),
        "C_count": full,
        "C_count_half_range": half,
        "growth": growth,
        "inHypothesisShare": float(np.mean([r[2] for r in rows])),
    }
    if growth > STABILITY_GATE:
        raise InvariantViolation(f"C_count grew by {growth:.3f} under range doubling")
    return rep


def cmd_verify_bilinear_strichartz(spec: ExperimentSpec) -> dict:
    p = spec.params
    rep = sweep_bilinear_strichartz(nmax=p["nmax"], lmax=p["lmax"],
                                    trials=p["trials"], seed=spec.seed,
                                    threads=spec.threads)
    _gate_stability(rep, "C_bs")
    return {"params": resolved_params({"Nmax": p["nmax"], "Lmax": p["lmax"],
                                       "trials": p["trials"]}),
            "report": rep.to_json_dict()}


def cmd_verify_bilinear_xsb(spec: ExperimentSpec) -> dict:
    p = spec.params
    params = EstimateParams(eps=p["eps"], delta1=p["delta1"], delta2=p["delta2"])
    reps = sweep_bilinear_xsb(nmax=p["nmax"], lmax=p["lmax"],
                              trials_per_pair=p["trials_per_pair"],
                              seed=spec.seed, threads=spec.threads, params=params)
    for rep in reps.values():
        _gate_stability(rep, rep.estimate)
    cases = sweep_case_decomposition(nmax=min(p["nmax"], 64), lmax=64,
                                     trials=p["case_trials"], seed=spec.seed,
                                     threads=spec.threads, params=params)
    return {
        "params": resolved_params({"Nmax": p["nmax"], "Lmax": p["lmax"],
                                   "trialsPerPair": p["trials_per_pair"],
                                   "eps": p["eps"], "delta1": p["delta1"],
                                   "delta2": p["delta2"]}),
        "reports": {pat: rep.to_json_dict() for pat, rep in reps.items()},
        "caseDecomposition": cases,
    }


def cmd_verify_trilinear(spec: ExperimentSpec) -> dict:
    p = spec.params
    from .probes import trilinear_form

    grid = SpaceGrid(8, 8)
    witness = abs(
        trilinear_form(
            SpatialField.single_mode(grid, 1, 0),
            SpatialField.single_mode(grid, 0, 1),
            SpatialField.single_mode(grid, 1, -1),
            conj=(False, True, True),
        )
    )
    if abs(witness - math.sin(1.0)) > 1e-8:
        raise InvariantViolation("single-mode trilinear witness missed |sin 1|")
    rep = sweep_trilinear(nmax=p["nmax"], trials=p["trials"], seed=spec.seed,
                          threads=spec.threads)
    _gate_stability(rep, "C_tri")
    return {"params": resolved_params({"Nmax": p["nmax"], "trials": p["trials"]}),
            "witnessAbsValue": witness,
            "report": rep.to_json_dict()}


def cmd_verify_modulation(spec: ExperimentSpec) -> dict:
    p = spec.params
    high = sweep_modulation_high(n2max=p["n2max"], trials=p["trials"],
                                 seed=spec.seed, threads=spec.threads)
    low = sweep_modulation_low(n2max=p["n2max"], trials=p["trials"],
                               seed=spec.seed, threads=spec.threads)
    fib = sweep_fiber(trials=p["fiber_trials"], seed=spec.seed,
                      threads=spec.threads, n1max=p["n2max"])
    for rep, label in ((high, "C_high"), (low, "C_low"), (fib, "C_fib")):
        _gate_stability(rep, label)
    return {
        "params": resolved_params({"N2max": p["n2max"], "trials": p["trials"],
                                   "fiberTrials": p["fiber_trials"]}),
        "high": high.to_json_dict(),
        "low": low.to_json_dict(),
        "fiber": fib.to_json_dict(),
    }


def cmd_decompose_cases(spec: ExperimentSpec) -> dict:
    p = spec.params
    s = p["scan"]
    ax = np.arange(-s, s + 1)
    g = np.meshgrid(ax, ax, ax, ax, indexing="ij")
    n1x, n1y, n2x, n2y = (a.ravel() for a in g)
    rng = np.random.default_rng(spec.seed)
    k = p["tau_scan"]
    tau1 = rng.integers(-k, k + 1, n1x.size).astype(float)
    tau2 = rng.integers(-k, k + 1, n1x.size).astype(float)
    q0 = (n1x - n2x).astype(float) ** 2 + (n1y - n2y).astype(float) ** 2
    q1 = n1x.astype(float) ** 2 + n1y.astype(float) ** 2
    q2 = n2x.astype(float) ** 2 + n2y.astype(float) ** 2
    codes = classify_batch(
        n1x, n1y, n2x, n2y, tau1, tau2,
        modulation_block_of_value(np.abs(tau1 - tau2 + q0)),
        modulation_block_of_value(np.abs(tau1 + q1)),
        modulation_block_of_value(np.abs(tau2 + q2)),
        dyadic_block_of_sq(q0), dyadic_block_of_sq(q2),
        eps=p["eps"],
    )
    counts = {tag.value: int((codes == i).sum()) for i, tag in enumerate(CaseTag)}
    total = int(codes.size)
    if sum(counts.values()) != total:
        raise InvariantViolation("case counts do not sum to the scan size")
    return {
        "params": resolved_params({"scan": s, "tauScan": k, "eps": p["eps"]}),
        "total": total,
        "counts": counts,
    }


def cmd_l4_probe(spec: ExperimentSpec) -> dict:
    p = spec.params
    n_list = tuple(int(x) for x in p["Ns"].split(","))
    loss = l4_loss_probe(n_list=n_list, b=p["b"], s=0.0, trials=p["trials"],
                         seed=spec.seed, threads=spec.threads)
    control = l4_loss_probe(n_list=n_list, b=p["b"], s=0.2, trials=p["trials"],
                            seed=spec.seed, threads=spec.threads)
    table = loss["table"]
    nondecreasing = all(table[i + 1][1] >= table[i][1] for i in range(len(table) - 1))
    ctrl = [v for _, v in control["table"]]
    ctrl_bounded = max(ctrl) <= 1.25 * min(ctrl) + 1e-12
    return {
        "params": resolved_params({"Ns": list(n_list), "b": p["b"],
                                   "trials": p["trials"]}),
        "sZeroTable": table,
        "sZeroSlope": loss["slope"],
        "sZeroNondecreasing": nondecreasing,
        "controlTable": control["table"],
        "controlSlope": control["slope"],
        "controlBounded": ctrl_bounded,
    }


COMMANDS = {
    "simulate": cmd_simulate,
    "picard": cmd_picard,
    "blowup-scan": cmd_blowup_scan,
    "verify-counting": cmd_verify_counting,
    "verify-bilinear-strichartz": cmd_verify_bilinear_strichartz,
    "verify-bilinear-xsb": cmd_verify_bilinear_xsb,
    "verify-trilinear": cmd_verify_trilinear,
    "verify-modulation-lemmas": cmd_verify_modulation,
    "decompose-cases": cmd_decompose_cases,
    "l4-probe": cmd_l4_probe,
}


def run(spec: ExperimentSpec) -> int:
    """Execute one experiment: 0 ok, 2 validation error, 3 invariant violated."""
    try:
        payload = COMMANDS[spec.command](spec)
    except InvariantViolation as exc:
        print(f"INVARIANT VIOLATION: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    path = write_report(spec, payload)
    print(f"{spec.command}: report written to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qnls",
        description="Quadratic Schrodinger solver and estimate laboratory on the 2-torus",
    )
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="reports", help="report directory")
    ap.add_argument("--threads", type=int,
                    default=int(os.environ.get("QNLS_THREADS", "1")))
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="split-step evolution with traces")
    s.add_argument("--u0", required=True)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--Tend", dest="tend", type=float, default=1.0)
    s.add_argument("--modes", type=int, default=16)
    s.add_argument("--cap", type=float, default=1e6)
    s.add_argument("--scale", type=float, default=1.0)

    s = sub.add_parser("picard", help="Duhamel fixed-point iteration")
    s.add_argument("--u0", required=True)
    s.add_argument("--T", type=float, default=0.1)
    s.add_argument("--iterations", type=int, default=10)
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--modes", type=int, default=16)
    s.add_argument("--scale", type=float, default=1.0)

    s = sub.add_parser("blowup-scan", help="T* map over constant data")
    s.add_argument("--re-min", type=float, default=-1.0)
    s.add_argument("--re-max", type=float, default=1.0)
    s.add_argument("--im-min", type=float, default=-1.0)
    s.add_argument("--im-max", type=float, default=1.0)
    s.add_argument("--resolution", type=int, default=7)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--Tend", dest="tend", type=float, default=6.0)
    s.add_argument("--modes", type=int, default=8)

    s = sub.add_parser("verify-counting", help="rotated sector counting bound")
    s.add_argument("--Nmax", dest="nmax", type=int, default=256)
    s.add_argument("--rotations", type=int, default=64)

    s = sub.add_parser("verify-bilinear-strichartz")
    s.add_argument("--Nmax", dest="nmax", type=int, default=64)
    s.add_argument("--Lmax", dest="lmax", type=int, default=256)
    s.add_argument("--trials", type=int, default=10000)

    s = sub.add_parser("verify-bilinear-xsb")
    s.add_argument("--Nmax", dest="nmax", type=int, default=64)
    s.add_argument("--Lmax", dest="lmax", type=int, default=256)
    s.add_argument("--trials-per-pair", dest="trials_per_pair", type=int, default=1000)
    s.add_argument("--case-trials", dest="case_trials", type=int, default=400)
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--delta1", type=float, default=0.08)
    s.add_argument("--delta2", type=float, default=0.05)

    s = sub.add_parser("verify-trilinear")
    s.add_argument("--Nmax", dest="nmax", type=int, default=64)
    s.add_argument("--trials", type=int, default=10000)

    s = sub.add_parser("verify-modulation-lemmas")
    s.add_argument("--N2max", dest="n2max", type=int, default=256)
    s.add_argument("--trials", type=int, default=2000)
    s.add_argument("--fiber-trials", dest="fiber_trials", type=int, default=1000)

    s = sub.add_parser("decompose-cases")
    s.add_argument("--scan", type=int, default=16)
    s.add_argument("--tau-scan", dest="tau_scan", type=int, default=20)
    s.add_argument("--eps", type=float, default=0.1)

    s = sub.add_parser("l4-probe")
    s.add_argument("--Ns", default="8,16,32,64,128")
    s.add_argument("--b", type=float, default=0.6)
    s.add_argument("--trials", type=int, default=20)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    params = {k: v for k, v in vars(ns).items()
              if k not in ("command", "seed", "out", "threads")}
    spec = ExperimentSpec(command=ns.command, params=params, seed=ns.seed,
                          out_dir=ns.out, threads=ns.threads)
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
