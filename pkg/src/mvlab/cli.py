"""Command-line entry point: ``mvlab run <config.json>``, ``mvlab check <suite>``, ``mvlab schema``.

A config is a JSON object ``{"experiment", "output_dir", "seed", "parameters"}``.
Every run writes its artifacts atomically plus ``manifest.json`` recording the
effective config, its SHA-256, the seed, library versions and wall time.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import platform
import sys
import time
from importlib import metadata
from pathlib import Path
from typing import Any, Callable, Optional

import jsonschema
import numpy as np
import scipy
from scipy import special, stats

from . import __version__
from .acceptance import SUITES, run_suite
from .coupling import (
    build_distance_profile,
    fit_decay_rate,
    high_temperature_threshold,
    simulate_coupling,
)
from .density import DensityError, DensityField
from .homogenize import NoTransitionError, analytic_effective_diffusion, corrector_1d, non_commutativity_report
from .io import atomic_write_text, dumps_json, write_binary, write_json
from .particles import (
    ParticleEnsemble,
    SamplerError,
    StepSizeError,
    fluctuation_modes,
    gibbs_sample,
    interaction_fluctuation_energy,
    msd_diffusivity,
    order_parameter,
    partition_ratio,
    sample_density,
    simulate_sde,
)
from .pde import EvolutionTrace, InstabilityError, convergence_audit, evolve_mv
from .potentials import CosineSeries, semiconvexity_kappa
from .stationary import (
    NonConvergenceError,
    amplitude_function,
    amplitude_roots,
    bifurcation_csv,
    bifurcation_scan,
    critical_beta,
    solve_stationary,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_STATISTICAL = 4
EXIT_IO = 5

EXPERIMENTS = ("bifurcation", "evolve", "homogenize", "noncommute", "fluctuations", "msd", "gibbs", "couple", "audit")


class ValidationError(ValueError):
    pass


# -- schema -----------------------------------------------------------------

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int1 = {"type": "integer", "minimum": 1}
_grid = {"type": "integer", "enum": [2**k for k in range(6, 17)]}
_eta = {"type": "number", "minimum": 0, "exclusiveMaximum": 1}
_potential = {
    "type": "object",
    "properties": {"cos": {"type": "array", "items": _num}, "sin": {"type": "array", "items": _num}},
    "additionalProperties": False,
}
_init = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["uniform", "perturbed", "von_mises", "stationary"]},
        "epsilon": _num,
        "mode": _int1,
        "a": _num,
        "center": _num,
    },
    "required": ["kind"],
    "additionalProperties": False,
}
_model = {"V": _potential, "W": _potential, "eta": _eta}


def _params(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


PARAMETER_SCHEMAS = {
    "bifurcation": _params(
        {"eta": _eta, "beta_grid": {"type": "array", "items": _pos, "minItems": 1},
         "beta_min": _pos, "beta_max": _pos, "beta_points": {"type": "integer", "minimum": 2}}
    ),
    "evolve": _params(
        {**_model, "beta": _pos, "dt": _pos, "T": {"type": "number", "minimum": 0}, "grid": _grid,
         "init": _init, "target": {"enum": ["none", "uniform", "stationary"]}, "record_every": _int1,
         "distance_every": _int1, "method": {"enum": ["etdrk4", "ifrk4"]}},
        ["beta", "dt", "T"],
    ),
    "homogenize": _params({"beta": _pos, "a": _num, "eta": _eta, "grid": _grid}, ["beta"]),
    "noncommute": _params(
        {"eta": _eta, "beta": _pos, "beta_offset": _num, "grid": _grid, "t": _pos}, ["eta"]
    ),
    "fluctuations": _params(
        {**_model, "N": {"type": "integer", "minimum": 2}, "beta": _pos, "n_samples": _int1, "n_chains": _int1,
         "thinning": _int1, "warmup": {"type": "integer", "minimum": 0}, "modes": {"type": "array", "items": {"type": "integer"}},
         "min_ess": _num},
        ["N", "beta", "n_samples"],
    ),
    "msd": _params(
        {"beta": _pos, "a": _num, "paths": _int1, "dt": _pos, "T": _pos, "record_dt": _pos, "dump": {"type": "boolean"}},
        ["beta", "paths", "dt", "T"],
    ),
    "gibbs": _params(
        {**_model, "N": _int1, "beta": _pos, "n_samples": _int1, "n_chains": _int1, "thinning": _int1,
         "warmup": {"type": "integer", "minimum": 0}, "quadrature_points": {"type": "integer", "minimum": 16}},
        ["N", "beta", "n_samples"],
    ),
    "couple": _params(
        {**_model, "beta": _pos, "delta": _pos, "dt": _pos, "T": _pos, "replicas": {"type": "integer", "minimum": 2},
         "frozen": {"type": "boolean"}, "init": _init, "record_every": _int1, "grid": _grid},
        ["beta"],
    ),
    "audit": _params({"trace": {"type": "string"}, "beta": _pos}, ["trace", "beta"]),
}


def config_schema() -> dict:
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "mvlab experiment config",
        "type": "object",
        "properties": {
            "experiment": {"enum": list(EXPERIMENTS)},
            "output_dir": {"type": "string", "minLength": 1},
            "seed": {"type": "integer", "minimum": 0},
            "parameters": {"type": "object"},
        },
        "required": ["experiment", "parameters"],
        "additionalProperties": False,
        "allOf": [
            {"if": {"properties": {"experiment": {"const": e}}, "required": ["experiment"]},
             "then": {"properties": {"parameters": PARAMETER_SCHEMAS[e]}}}
            for e in EXPERIMENTS
        ],
    }


def validate_config(config: Any) -> None:
    validator = jsonschema.Draft202012Validator(config_schema())
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = "; ".join(f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors)
        raise ValidationError(msgs)


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def apply_overrides(config: dict, overrides: list[str]) -> dict:
    """Apply ``key=value`` overrides; bare keys go into ``parameters``, values parse as JSON when possible."""
    out = copy.deepcopy(config)
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        path = key.split(".")
        if path[0] not in ("experiment", "output_dir", "seed", "parameters"):
            path = ["parameters", *path]
        node = out
        for p in path[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ValidationError(f"cannot set {key}: {p} is not an object")
        node[path[-1]] = value
    return out


# -- helpers ----------------------------------------------------------------

def _model_from(p: dict) -> tuple[CosineSeries, CosineSeries]:
    W = CosineSeries.from_dict(p["W"]) if "W" in p else CosineSeries.kuramoto()
    if "V" in p:
        V = CosineSeries.from_dict(p["V"])
    else:
        V = CosineSeries.cosine(-p.get("eta", 0.0)) if p.get("eta", 0.0) else CosineSeries.zero()
    return V, W


def _initial_density(init: Optional[dict], grid: int, V, W, beta) -> DensityField:
    init = init or {"kind": "uniform"}
    kind = init["kind"]
    if kind == "uniform":
        return DensityField.uniform(grid)
    if kind == "perturbed":
        eps, k = init.get("epsilon", 0.1), init.get("mode", 1)
        return DensityField.from_function(lambda x: 1.0 + eps * np.cos(2 * np.pi * k * x), grid)
    if kind == "von_mises":
        return DensityField.von_mises(init.get("a", 1.0), grid, init.get("center", 0.0))
    return solve_stationary(V, W, beta, init=DensityField.uniform(grid) if "a" not in init
                            else DensityField.von_mises(init["a"], grid)).density


class Run:
    """Output bookkeeping for one experiment."""

    def __init__(self, out: Path):
        self.out = out
        self.files: list[str] = []
        self.checks: dict[str, dict] = {}

    def text(self, name: str, text: str) -> None:
        atomic_write_text(self.out / name, text)
        self.files.append(name)

    def json(self, name: str, obj) -> None:
        write_json(self.out / name, obj)
        self.files.append(name)

    def binary(self, name: str, array, **meta) -> None:
        write_binary(self.out / name, array, **meta)
        self.files += [name, name + ".json"]

    def check(self, name: str, passed: bool, **values) -> None:
        self.checks[name] = {"passed": bool(passed), **values}


# -- experiments ------------------------------------------------------------

def exp_bifurcation(p: dict, seed: int, run: Run) -> None:
    eta = p.get("eta", 0.0)
    if "beta_grid" in p:
        grid = sorted(p["beta_grid"])
    else:
        grid = np.linspace(p.get("beta_min", 0.5), p.get("beta_max", 4.0), p.get("beta_points", 36)).tolist()
    rows = bifurcation_scan(grid, eta)
    run.text("bifurcation.csv", bifurcation_csv(rows))
    bc = critical_beta(eta)
    resid = max(abs(amplitude_function(r.a_min, r.beta, eta)) for r in rows)
    run.json("summary.json", {"eta": eta, "beta_c": bc, "max_residual": resid, "rows": len(rows)})
    if eta == 0.0:
        ok = all((r.a_min == 0.0) == (r.beta <= 2.0) for r in rows)
    else:
        ok = all(r.a_min > 0 and ((r.a_star is not None) == (r.beta > bc + 1e-6)) for r in rows
                 if abs(r.beta - bc) > 1e-5)
    run.check("branch_structure", ok, beta_c=bc)
    run.check("amplitude_residual", resid <= 1e-10, max_residual=resid)


def exp_evolve(p: dict, seed: int, run: Run) -> None:
    V, W = _model_from(p)
    beta, grid = p["beta"], p.get("grid", 64)
    nu0 = _initial_density(p.get("init"), grid, V, W, beta)
    target_kind = p.get("target", "none")
    target = None
    if target_kind == "uniform":
        target = DensityField.uniform(grid)
    elif target_kind == "stationary":
        target = solve_stationary(V, W, beta, init=nu0 if nu0.values.min() > 0 else None).density.resampled(grid)
    final, trace = evolve_mv(nu0, V, W, beta, p["dt"], p["T"], target=target, record_every=p.get("record_every", 1),
                             distance_every=p.get("distance_every", 100), method=p.get("method", "etdrk4"))
    run.text("trace.csv", trace.to_csv())
    run.json("final_density.json", final.to_dict())
    rep = convergence_audit(trace)
    summary = {
        "monotone": rep.monotone,
        "energy_identity_error": rep.energy_identity_error,
        "fitted_rate": rep.fitted_rate,
        "algebraic_exponent": rep.algebraic_exponent,
        "final_l1_to_target": trace.L1_to_target[-1] if target is not None else None,
        "max_mass_error": max(trace.mass_error),
        "sup_change": float(np.max(np.abs(final.values - nu0.values))),
    }
    run.json("audit.json", summary)
    run.check("monotone", rep.monotone, worst_increase=rep.worst_energy_increase)
    run.check("energy_identity", rep.energy_identity_ok, error=rep.energy_identity_error)


def exp_homogenize(p: dict, seed: int, run: Run) -> None:
    beta, grid = p["beta"], p.get("grid", 256)
    eta = p.get("eta", 0.0)
    a = p["a"] if "a" in p else amplitude_roots(beta, eta).a_min
    nu = DensityField.von_mises(a, grid)
    prof, A = corrector_1d(nu, beta)
    ref = analytic_effective_diffusion(a, beta)
    rel = abs(A.value - ref.value) / ref.value
    run.json("effective_diffusion.json", {
        "a": a, "beta": beta, "A": A.value, "A_analytic": ref.value, "rel_error": rel,
        "lower_bound": A.lower_bound, "upper_bound": A.upper_bound, "weak_residual": prof.weak_residual(nu),
    })
    lines = ["x,psi_prime,psi"] + [f"{x!r},{dp!r},{ps!r}" for x, dp, ps in
                                    zip(prof.x.tolist(), prof.psi_prime.tolist(), prof.psi.tolist())]
    run.text("corrector.csv", "\n".join(lines) + "\n")
    run.check("analytic_match", rel <= 1e-10, rel_error=rel)
    run.check("sandwich", A.within_bounds(), value=A.value)


def exp_noncommute(p: dict, seed: int, run: Run) -> None:
    eta = p["eta"]
    beta = p["beta"] if "beta" in p else critical_beta(eta) + p.get("beta_offset", 1.0)
    rep = non_commutativity_report(eta, beta, p.get("grid", 256), p.get("t", 1.0))
    run.json("report.json", rep.to_dict())
    ok = rep.regime == "noncommuting" and rep.a_min > 0 > rep.a_star and abs(rep.a_star + rep.a_min) > 0.01 \
        and rep.relative_gap > 0.01
    run.check("noncommuting", ok, relative_gap=rep.relative_gap)


def exp_fluctuations(p: dict, seed: int, run: Run) -> None:
    V, W = _model_from(p)
    N, beta = p["N"], p["beta"]
    s = gibbs_sample(N, V, W, beta, p["n_samples"], p.get("thinning", 1), seed=seed,
                     n_chains=p.get("n_chains", 32), warmup=p.get("warmup", 2000))
    ref = solve_stationary(V, W, beta, init=DensityField.uniform(64)).density
    ks = p.get("modes", [1, -1, 2, -2])
    modes = fluctuation_modes(s, ks, ref)
    energy, energy_se = interaction_fluctuation_energy(s, W, ref)
    out = {
        "N": N, "beta": beta, "acceptance": s.acceptance, "step": s.step, "samples": len(s),
        "interaction_fluctuation_energy": energy, "energy_stderr": energy_se,
        "modes": {str(k): {"variance": m.variance, "stderr": m.stderr, "ess": m.ess} for k, m in modes.items()},
    }
    run.json("fluctuations.json", out)
    kuramoto = V.is_constant() and W == CosineSeries.kuramoto() and beta < 2.0
    if kuramoto:
        min_ess = p.get("min_ess", 1e4)
        for k, m in modes.items():
            target = 2.0 / (2.0 - beta) if abs(k) == 1 else 1.0
            run.check(f"variance_{k}", abs(m.variance - target) <= 0.15 * target and m.ess >= min_ess,
                      variance=m.variance, target=target, ess=m.ess)
        e_target = -2.0 / (2.0 - beta)  # -(Var_1 + Var_-1) / 2
        run.check("interaction_energy", abs(energy - e_target) <= 0.15 * abs(e_target), value=energy, target=e_target)


def exp_msd(p: dict, seed: int, run: Run) -> None:
    beta = p["beta"]
    a = p["a"] if "a" in p else amplitude_roots(beta).a_min
    nu = DensityField.von_mises(a, 256)
    dt, T = p["dt"], p["T"]
    rng = np.random.default_rng([seed, 0x45D])
    x0 = sample_density(nu, (p["paths"], 1), rng)
    every = max(1, int(round(p.get("record_dt", 1.0) / dt)))
    tr = simulate_sde(ParticleEnsemble(x0, beta, seed), CosineSeries.zero(), CosineSeries.kuramoto(), dt, T,
                      mean_field=nu, record_every=every)
    paths = tr.positions[:, :, 0]
    res = msd_diffusivity(paths, tr.times)
    ref = 1.0 / (beta * special.i0(a) ** 2)
    rel = (res.A_hat - ref) / ref
    run.text("msd.csv", "time,msd\n" + "".join(f"{t!r},{m!r}\n" for t, m in zip(res.times.tolist(), res.msd.tolist())))
    run.json("msd.json", {"a": a, "beta": beta, "A_hat": res.A_hat, "stderr": res.stderr, "fit_r2": res.fit_r2,
                          "A_analytic": ref, "rel_error": rel})
    if p.get("dump", False):
        run.binary("paths.f64", paths, seed=seed, dt=dt, record_every=every)
    run.check("diffusivity", abs(rel) <= 0.05, rel_error=rel)
    run.check("diffusive_fit", res.fit_r2 >= 0.99, r2=res.fit_r2)


def exp_gibbs(p: dict, seed: int, run: Run) -> None:
    V, W = _model_from(p)
    N, beta = p["N"], p["beta"]
    s = gibbs_sample(N, V, W, beta, p["n_samples"], p.get("thinning", 1), seed=seed,
                     n_chains=p.get("n_chains", 16), warmup=p.get("warmup", 2000))
    run.binary("samples.f64", s.chains, seed=seed, N=N, beta=beta)
    r = order_parameter(s)
    summary = {"N": N, "beta": beta, "acceptance": s.acceptance, "step": s.step,
               "order_parameter_mean": float(r.mean()), "order_parameter_sd": float(r.std(ddof=1))}
    if N <= 3:
        nu_min = solve_stationary(V, W, beta, init=DensityField.uniform(64)).density
        pr = partition_ratio(N, V, W, beta, nu_min, p.get("quadrature_points", 256))
        summary["partition"] = {"Z_N": pr.Z_N, "Z_min": pr.Z_min, "literal_ratio": pr.literal_ratio,
                                "energetic_ratio": pr.energetic_ratio}
        if V.is_constant() and W == CosineSeries.kuramoto() and beta < 2.0:
            lo = math.exp(-(beta / (2 * (2 - beta)) + 0.1) / N)
            run.check("partition_bounds", lo < pr.energetic_ratio <= 1.0, ratio=pr.energetic_ratio, lower=lo)
    if V.is_constant():
        counts = np.histogram(s.configs[:, 0], bins=20, range=(0.0, 1.0))[0]
        pval = float(stats.chisquare(counts).pvalue)
        summary["marginal_chi2_p"] = pval
        run.check("uniform_marginal", pval >= 0.01, p_value=pval)
    run.json("summary.json", summary)


def exp_couple(p: dict, seed: int, run: Run) -> None:
    V, W = _model_from(p)
    beta, grid = p["beta"], p.get("grid", 64)
    state = solve_stationary(V, W, beta, init=DensityField.uniform(grid))
    nu0 = _initial_density(p.get("init"), grid, V, W, beta)
    kappa = semiconvexity_kappa(V, W)
    prof = build_distance_profile(kappa, beta)
    frozen = p.get("frozen", False)
    tr = simulate_coupling(V, W, state, nu0, beta, p.get("delta", 1e-3), p.get("dt", 1e-4), p.get("T", 0.1),
                           p.get("replicas", 1000), seed, frozen=frozen, profile=prof,
                           record_every=p.get("record_every", 10))
    run.text("coupling.csv", tr.to_csv())
    try:
        rate = fit_decay_rate(tr)
    except ValueError:
        rate = math.nan
    predicted = prof.contraction_rate()
    run.json("coupling.json", {"kappa": kappa, "c": prof.c, "predicted_rate": predicted, "fitted_rate": rate,
                               "beta_0": high_temperature_threshold(V, W), "delta": tr.delta,
                               "replicas": tr.replicas, "frozen": frozen, "invariants": prof.check_invariants()})
    run.check("profile_invariants", all(prof.check_invariants().values()))
    if frozen:
        run.check("contraction_rate", rate >= 0.5 * predicted, fitted=rate, predicted=predicted)
    else:
        run.check("decay", tr.mean_f[-1] < tr.mean_f[0], first=tr.mean_f[0], last=tr.mean_f[-1])


def exp_audit(p: dict, seed: int, run: Run, base: Path = Path(".")) -> None:
    path = Path(p["trace"])
    if not path.is_absolute():
        path = base / path
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read trace {path}: {exc}") from exc
    rep = convergence_audit(EvolutionTrace.from_csv(text, p["beta"]))
    run.json("audit.json", {"monotone": rep.monotone, "fitted_rate": rep.fitted_rate,
                            "algebraic_exponent": rep.algebraic_exponent,
                            "energy_identity_error": rep.energy_identity_error,
                            "worst_energy_increase": rep.worst_energy_increase})
    run.check("monotone", rep.monotone)
    run.check("energy_identity", rep.energy_identity_ok, error=rep.energy_identity_error)


DISPATCH: dict[str, Callable] = {
    "bifurcation": exp_bifurcation,
    "evolve": exp_evolve,
    "homogenize": exp_homogenize,
    "noncommute": exp_noncommute,
    "fluctuations": exp_fluctuations,
    "msd": exp_msd,
    "gibbs": exp_gibbs,
    "couple": exp_couple,
    "audit": exp_audit,
}

NUMERICAL_ERRORS = (DensityError, InstabilityError, NonConvergenceError, StepSizeError, SamplerError,
                    FloatingPointError, NoTransitionError)


def _versions() -> dict:
    return {"mvlab": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "jsonschema": metadata.version("jsonschema")}


def run_experiment(config: dict, check: bool = False, base: Path = Path("."), log=print) -> int:
    """Validate, run and record one experiment; returns the exit status."""
    try:
        validate_config(config)
    except ValidationError as exc:
        log(f"config error: {exc}")
        return EXIT_VALIDATION
    exp = config["experiment"]
    seed = int(config.get("seed", 0))
    out = Path(config.get("output_dir", f"runs/{exp}"))
    manifest_path = out / "manifest.json"
    if manifest_path.exists():
        try:
            prior = json.loads(manifest_path.read_text()).get("config", {}).get("experiment")
        except (OSError, json.JSONDecodeError):
            prior = None
        if prior is not None and prior != exp:
            log(f"config error: {out} holds output of experiment {prior!r}")
            return EXIT_VALIDATION
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        log(f"output error: {exc}")
        return EXIT_IO

    run = Run(out)
    t0 = time.perf_counter()
    status = EXIT_OK
    error = None
    try:
        fn = DISPATCH[exp]
        if exp == "audit":
            fn(config["parameters"], seed, run, base)
        else:
            fn(config["parameters"], seed, run)
    except ValidationError as exc:
        status, error = EXIT_VALIDATION, str(exc)
    except NUMERICAL_ERRORS as exc:
        status, error = EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}"
    except ValueError as exc:
        status, error = EXIT_VALIDATION, str(exc)
    failed = [k for k, v in run.checks.items() if not v["passed"]]
    if status == EXIT_OK and check and failed:
        status = EXIT_STATISTICAL
    manifest = {
        "config": config,
        "config_hash": config_hash(config),
        "seed": seed,
        "versions": _versions(),
        "wall_time_s": time.perf_counter() - t0,
        "outputs": run.files,
        "checks": run.checks,
        "status": status,
        "error": error,
    }
    write_json(manifest_path, manifest)
    if error:
        log(f"{exp}: {error}")
    for name, res in run.checks.items():
        log(f"{'PASS' if res['passed'] else 'FAIL'} {exp}.{name}")
    return status


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mvlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("config", help="path to the config file, or - for stdin")
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry (bare keys refer to parameters)")
    r.add_argument("--check", action="store_true", help="exit with status 4 if any acceptance check fails")
    c = sub.add_parser("check", help="run an acceptance suite")
    c.add_argument("suite", choices=sorted(SUITES))
    c.add_argument("--json", dest="json_out", help="write the detailed results to this file")
    sub.add_parser("schema", help="print the config JSON schema")
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        sys.stdout.write(dumps_json(config_schema()))
        return EXIT_OK
    if args.command == "check":
        results = run_suite(args.suite)
        for res in results:
            print(res.line(), flush=True)
        if args.json_out:
            write_json(args.json_out, [{"criterion": r.criterion, "name": r.name, "passed": r.passed,
                                        "seconds": r.seconds, "details": r.details} for r in results])
        return EXIT_OK if all(r.passed for r in results) else EXIT_STATISTICAL
    try:
        if args.config == "-":
            text, base = sys.stdin.read(), Path(".")
        else:
            path = Path(args.config)
            text, base = path.read_text(), path.parent
        config = apply_overrides(json.loads(text), args.overrides)
    except (OSError, json.JSONDecodeError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return run_experiment(config, check=args.check, base=base)


if __name__ == "__main__":
    sys.exit(main())
