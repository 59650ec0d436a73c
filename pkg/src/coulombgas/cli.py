"""Command line entry point.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 a numerical
tolerance was not met, 4 the acceptance suite failed.
"""

import argparse
import logging
import os
import sys
import traceback

import numpy as np

from . import energy, fluctstats, jellium, thermo
from ._pool import run_tasks
from .config import ExperimentConfig
from .equilibrium import PotentialSpec, equilibrium_measure
from .errors import CapabilityError, ConfigError, DomainError, NumericToleranceError
from .kernel import LOG1, LOG2
from .manifest import ResultManifest, emit_report
from .sampler import (GibbsParams, chain_rng, gap_values, ks_compare, line_cdf_distance, load_checkpoint,
                      mcmc_run, one_point_values, oracle_samples, radial_cdf_distance, radial_cdf_two_sample)

log = logging.getLogger("coulombgas")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 2, 3, 4

# disjoint stream ranges per task family under the run seed
STREAM_ORACLE = 1 << 20
STREAM_CONFIGS = 2 << 20
STREAM_STATS = 3 << 20
STREAM_FLUCT = 4 << 20


def _chain_task(params_dict, sweeps, seed, chain, thinning, burn_in, target, ckpt, ckpt_every):
    params = GibbsParams.from_dict(params_dict)
    r = mcmc_run(params, sweeps, seed=seed, chain=chain, thinning=thinning, burn_in=burn_in, target=target,
                 checkpoint=ckpt, checkpoint_every=ckpt_every or None)
    return np.asarray(r.samples), np.asarray(r.sweeps), r.acceptance


def _run_chains(cfg, man, params, base_stream=0):
    s = cfg["sampler"]
    tasks = []
    for c in range(s["chains"]):
        chain = base_stream + c
        ckpt = None
        if s["checkpoint_every"] > 0:
            ckpt = os.path.join(man.out_dir, man.stem(f"chain{chain}") + ".ckpt.json")
        tasks.append((params.to_dict(), s["sweeps"], man.seed, chain, s["thinning"], s["burn_in"],
                      s["target_acceptance"], ckpt, s["checkpoint_every"]))
        man.record_stream(f"mcmc beta={params.beta} N={params.N}", chain)
    return run_tasks(_chain_task, tasks, cfg["run"]["workers"])


def _sample_rows(chain, samples, sweeps):
    rows = []
    for cfg_pts, sw in zip(samples, sweeps):
        for i, p in enumerate(cfg_pts):
            row = {"chain": chain, "sweep": int(sw), "particle": i}
            row.update({f"x{k}": float(v) for k, v in enumerate(p)})
            rows.append(row)
    return rows


def cmd_sample(cfg, man, args):
    params = cfg.gibbs_params()
    d = params.d
    cols = ["chain", "sweep", "particle"] + [f"x{k}" for k in range(d)]
    if args.resume:
        params, state, seed, chain, sched = load_checkpoint(args.resume)
        if seed != man.seed:
            raise ConfigError(f"checkpoint was written with seed {seed}", key_path="run.seed")
        r = mcmc_run(params, sched["sweeps"], seed=seed, chain=chain, thinning=sched["thinning"],
                     burn_in=sched["burn_in"], state=state)
        man.record_stream("mcmc resume", chain)
        man.write_table(f"samples_resume{chain}", _sample_rows(chain, r.samples, r.sweeps), cols)
        man.summary["acceptance"] = [{"chain": chain, "acceptance": r.acceptance}]
        return
    out = _run_chains(cfg, man, params)
    rows = []
    for c, (samples, sweeps, _) in enumerate(out):
        rows.extend(_sample_rows(c, samples, sweeps))
    man.write_table("samples", rows, cols)
    man.write_table("acceptance", [{"chain": c, "acceptance": acc, "samples": len(s)}
                                   for c, (s, _, acc) in enumerate(out)], ["chain", "acceptance", "samples"])
    man.summary["acceptance"] = [acc for _, _, acc in out]


def cmd_oracle(cfg, man, args):
    params = cfg.gibbs_params()
    n = cfg["oracle"]["samples"]
    orc = oracle_samples_streamed(params, n, man)
    out = _run_chains(cfg, man, params)
    mc = [x for s, _, _ in out for x in s]
    rng = chain_rng(man.seed, STREAM_STATS)
    man.record_stream("statistic subsampling", STREAM_STATS)
    rows = []
    for name, f in (("one_point", one_point_values), ("bulk_gap", gap_values)):
        D, p = ks_compare(f(mc, rng), f(orc, rng))
        rows.append({"statistic": name, "ks": D, "p_value": p, "n_mcmc": len(mc), "n_oracle": len(orc)})
    eqm = equilibrium_measure(params.potential, params.kernel)
    if params.kernel.case == LOG2:
        limits = [("mcmc_vs_law", radial_cdf_distance(mc, eqm.radius)),
                  ("oracle_vs_law", radial_cdf_distance(orc, eqm.radius)),
                  ("mcmc_vs_oracle", radial_cdf_two_sample(mc, orc))]
    else:
        limits = [("mcmc_vs_law", line_cdf_distance(mc, eqm)), ("oracle_vs_law", line_cdf_distance(orc, eqm))]
    man.write_table("ks", rows, ["statistic", "ks", "p_value", "n_mcmc", "n_oracle"])
    man.write_table("cdf_distance", [{"comparison": k, "sup_distance": v, "n_configs": len(mc)} for k, v in limits],
                    ["comparison", "sup_distance", "n_configs"])
    man.summary["ks"] = rows
    man.summary["cdf_distance"] = dict(limits)


def oracle_samples_streamed(params, n, man):
    """Exact samples drawn from streams disjoint from the MCMC chains."""
    orc = oracle_samples(params, n, man.seed, first_stream=STREAM_ORACLE)
    man.rng.append({"task": "oracle", "seed": man.seed, "stream": f"{STREAM_ORACLE}..{STREAM_ORACLE + n - 1}"})
    return orc


def cmd_energy_audit(cfg, man, args):
    g = cfg["gibbs"]
    e = cfg["energy"]
    kernel = cfg.kernel()
    pot = PotentialSpec(g["a"])
    eqm = equilibrium_measure(pot, kernel)
    rng = chain_rng(man.seed, STREAM_CONFIGS)
    man.record_stream("random configurations", STREAM_CONFIGS)
    rows = []
    for k in range(e["configs"]):
        x = eqm.sample(e["N"], rng) if np.isfinite(eqm.radius) else rng.standard_normal((e["N"], kernel.d))
        t = energy.splitting_terms(x, pot, eqm, kernel)
        t["rel_residual"] = abs(t["residual"]) / max(1.0, abs(t["H_N"]))
        t["tolerance"] = 1e-8
        rows.append({"config": k, **t})
    cols = ["config", "H_N", "I_V_term", "zeta_term", "F_N", "residual", "rel_residual", "tolerance"]
    man.write_table("splitting", rows, cols)
    worst = max(r["rel_residual"] for r in rows)
    man.summary["max_rel_residual"] = worst
    if worst > 1e-8:
        raise NumericToleranceError(f"splitting residual {worst:.3g} above 1e-8", achieved=worst)


def cmd_fluct(cfg, man, args):
    f = cfg["fluct"]
    base = cfg.gibbs_params()
    eqm = equilibrium_measure(base.potential, base.kernel)
    xi = fluctstats.RadialBump(f["center"][: base.d] + [0.0] * max(0, base.d - len(f["center"])),
                               f["r_in"], f["r_out"])
    rows = []
    for k, beta in enumerate(f["betas"]):
        params = GibbsParams(beta, base.N, base.kernel, base.potential)
        out = _run_chains(cfg, man, params, base_stream=STREAM_FLUCT + 1000 * k)
        vals = np.concatenate([fluctstats.fluct_values(s, eqm, xi) for s, _, _ in out])
        try:
            pred = fluctstats.variance_prediction(xi, beta, eqm)[0]
        except CapabilityError:
            pred = float("nan")
        row = fluctstats.clt_report(vals, pred, beta, base.N).to_row()
        row["se"] = row["var_se"]
        rows.append(row)
    cols = ["beta", "N", "mean", "var", "var_pred", "p_normal", "se", "mean_se", "ess", "n"]
    man.write_table("clt", rows, cols)
    man.summary["clt"] = rows


def _jellium_config(name, delta):
    if name == "square":
        return jellium.PeriodicConfig(jellium.LatticeSpec.square(), [[0.0, 0.0]])
    if name == "triangular":
        return jellium.PeriodicConfig(jellium.LatticeSpec.triangular(), [[0.0, 0.0]])
    if name == "cubic":
        return jellium.PeriodicConfig(jellium.LatticeSpec.cubic(), [[0.0, 0.0, 0.0]])
    if name == "integers":
        return jellium.PeriodicConfig(jellium.LatticeSpec.integers(1.0), [[0.0]])
    return jellium.PeriodicConfig(jellium.LatticeSpec.integers(2.0), [[0.0], [1.0 + delta]])


def cmd_jellium(cfg, man, args):
    j = cfg["jellium"]
    tol = cfg["tolerances"]["jellium"]
    rows = []
    for name in j["lattices"]:
        pc = _jellium_config(name, j["dimer_delta"])
        res = jellium.renorm_energy_periodic(pc, tol=tol)
        rows.append({"lattice": name, "d": pc.d, "n_per_cell": pc.n, "m": pc.m, "W": res.value,
                     "error": res.error})
    man.write_table("energies", rows, ["lattice", "d", "n_per_cell", "m", "W", "error"])
    man.summary["W"] = {r["lattice"]: r["W"] for r in rows}
    if j["scan"]:
        taus, W, best = jellium.lattice_scan_2d(jellium.tau_grid(j["scan_re"], j["scan_im"]))
        grid = [{"tau_re": float(t.real), "tau_im": float(t.imag), "W": float(w), "error": 1e-10}
                for t, w in zip(taus.ravel(), W.ravel())]
        man.write_table("scan", grid, ["tau_re", "tau_im", "W", "error"])
        man.summary["scan_argmin"] = [best.real, best.imag]


def cmd_logz(cfg, man, args):
    lz = cfg["logz"]
    base = cfg.gibbs_params()
    kernel, beta = base.kernel, base.beta
    eqm = equilibrium_measure(base.potential, kernel)
    anchors = []
    for n in lz["Ns"]:
        if not thermo.has_closed_form(n, beta, kernel):
            raise CapabilityError(f"no closed form at N={n}, beta={beta}; use TI through logz.beta_target")
        anchors.append(thermo.logz_closed_form(n, beta, kernel, base.potential.a))
    rep = thermo.expansion_fit(lz["Ns"], anchors, beta, kernel, eqm.I_V, entropy=thermo.density_entropy(eqm))
    man.write_table("logz", rep.to_rows(), ["N", "beta", "logz", "se", "exact", "residual", "bound_C"],
                    provenance="closed form")
    names = ["leading"] + (["nlogn"] if kernel.is_log else []) + ["order_N"]
    coef_rows = [{"term": nm, "fitted": float(c), "se": float(s), "predicted": rep.predicted.get(nm, float("nan"))}
                 for nm, c, s in zip(names, rep.coef, rep.coef_se)]
    coef_rows.append({"term": "C_order_N", "fitted": rep.C_fit, "se": rep.C_fit_se, "predicted": float("nan")})
    man.write_table("fit", coef_rows, ["term", "fitted", "se", "predicted"])
    man.summary["fit"] = coef_rows
    if lz["beta_target"] > 0:
        params = GibbsParams(beta, lz["ti_N"], kernel, base.potential)
        tol = cfg["tolerances"]["ti"] or None
        res = thermo.logz_estimate_ti(params, beta, lz["beta_target"], grid=lz["ti_grid"], sweeps=lz["ti_sweeps"],
                                      seed=man.seed, tol=tol, workers=cfg["run"]["workers"])
        row = {"N": lz["ti_N"], "beta_anchor": beta, "beta_target": lz["beta_target"], "anchor": res.anchor,
               "logz": res.value, "error": res.error, "quad_error": res.quad_error, "stat_error": res.stat_error}
        try:
            row["exact"] = thermo.logz_closed_form(lz["ti_N"], lz["beta_target"], kernel, base.potential.a)
        except CapabilityError:
            row["exact"] = float("nan")
        man.write_table("ti", [row], list(row), provenance="thermodynamic integration")
        nodes = [{"beta": b, "mean_energy": e, "se": s} for b, e, s in zip(res.betas, res.energies, res.energy_se)]
        man.write_table("ti_nodes", nodes, ["beta", "mean_energy", "se"], provenance="mcmc")
        man.summary["ti"] = row
    print(_structured(rep, man.summary.get("ti")))


def _structured(rep, ti):
    lines = [f"beta = {rep.beta}"]
    for r in rep.to_rows():
        lines.append(f"anchor N={r['N']}: log Z = {r['logz']:.12g} (exact), residual {r['residual']:.3g}")
    lines.append("fit: " + ", ".join(f"{c:.6g} +- {s:.2g}" for c, s in zip(rep.coef, rep.coef_se)))
    lines.append("predicted: " + ", ".join(f"{k} {v:.6g}" for k, v in rep.predicted.items()))
    lines.append(f"order-N constant: {rep.C_fit:.6g} +- {rep.C_fit_se:.2g}")
    if ti:
        lines.append(f"TI N={ti['N']} beta {ti['beta_anchor']} -> {ti['beta_target']}: "
                     f"{ti['logz']:.10g} +- {ti['error']:.3g} (exact {ti['exact']:.10g})")
    return "\n".join(lines)


def cmd_verify(cfg, man, args):
    from .verification import acceptance
    only = [int(t) for t in args.only.split(",")] if args.only else None
    results = acceptance.run_all(only=only, seed=man.seed, workers=cfg["run"]["workers"])
    rows = []
    for r in results:
        print(r.line(), flush=True)
        rows.extend(r.rows())
    man.write_table("acceptance", rows, ["criterion", "check", "value", "tolerance", "passed"])
    man.summary["acceptance"] = {r.number: r.passed for r in results}
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


COMMANDS = {
    "sample": cmd_sample,
    "oracle": cmd_oracle,
    "energy-audit": cmd_energy_audit,
    "fluct": cmd_fluct,
    "jellium": cmd_jellium,
    "logz": cmd_logz,
    "verify": cmd_verify,
}


def build_parser():
    p = argparse.ArgumentParser(prog="coulombgas", description="Log and Coulomb gas experiments.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="INI configuration, or a manifest JSON to re-run")
    p.add_argument("--seed", type=int, help="64-bit seed (overrides run.seed)")
    p.add_argument("--workers", type=int, help="worker processes (overrides run.workers)")
    p.add_argument("--out", help="output directory (overrides run.out)")
    p.add_argument("--resume", help="checkpoint file to continue (sample only)")
    p.add_argument("--only", help="comma-separated acceptance criteria (verify only)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _load_config(args):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.from_mapping({})
    overrides = {"seed": args.seed, "workers": args.workers, "out": args.out}
    raw = cfg.snapshot()
    for k, v in overrides.items():
        if v is not None:
            raw["run"][k] = str(v)
    return ExperimentConfig.from_mapping(raw)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args)
        if args.resume and args.command != "sample":
            raise ConfigError("--resume applies to the sample command only")
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer", key_path="run.seed")
    except (ConfigError, DomainError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run = cfg["run"]
    man = ResultManifest(args.command, cfg.snapshot(), cfg.digest(), run["seed"], run["out"])
    code = EXIT_OK
    try:
        os.makedirs(man.out_dir, exist_ok=True)
        code = COMMANDS[args.command](cfg, man, args) or EXIT_OK
        man.finish("complete")
    except (ConfigError, DomainError, CapabilityError) as exc:
        man.finish("failed", {"type": type(exc).__name__, "message": str(exc)})
        print(f"validation error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except NumericToleranceError as exc:
        man.finish("failed", {"type": type(exc).__name__, "message": str(exc), "achieved": exc.achieved})
        print(f"tolerance not met: {exc}", file=sys.stderr)
        code = EXIT_NUMERIC
    except Exception as exc:  # record the failure before propagating
        man.finish("failed", {"type": type(exc).__name__, "message": str(exc),
                              "traceback": traceback.format_exc()})
        man.save()
        emit_report(man)
        raise
    man.save()
    emit_report(man)
    log.info("manifest written to %s", man.path)
    return code


if __name__ == "__main__":
    sys.exit(main())
