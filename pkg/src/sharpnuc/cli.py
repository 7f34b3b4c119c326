"""Command-line front end: scenario in, JSON/CSV reports out.

Exit codes: 0 all checks pass, 1 scenario or usage error, 2 certificate
failure (h-tilde vanishing on the energy ball), 3 a check failed.  Other
errors raised by the numerical modules (a family that misses the grid, an
empty fit window, a Fock space over its cap) also exit with 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from itertools import combinations
from pathlib import Path

import numpy as np

from . import correlations as corr
from . import fock as fk
from . import nuclearity as nuc
from .gridspace import GridError
from .kernels import BACKEND
from .localization import (CertificateError, LocalizationError, chil_identity_check, component_gram, kosaki_margin,
                           schatten_p)
from .scenario import Context, Scenario, ScenarioError, load_scenario

SCHEMA_VERSION = "1.0"

SETUP_ERRORS = (ScenarioError, GridError, LocalizationError, corr.CorrelationError, fk.FockError,
                nuc.NuclearityError)

EXIT_OK, EXIT_USAGE, EXIT_CERTIFICATE, EXIT_CHECK = 0, 1, 2, 3


def check(anchor, lhs, rhs, tolerance, slack=0.0, **extra) -> dict:
    return nuc.check_record(anchor, lhs, rhs, tolerance, slack, **extra)


def upper_check(anchor, value, limit, tolerance=0.0, **extra) -> dict:
    """value <= limit, stated as lhs <= rhs."""
    return check(anchor, value, limit, tolerance, **extra)


def clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    if isinstance(obj, complex):
        return {"re": clean(obj.real), "im": clean(obj.imag)}
    return obj


def dumps(report: dict) -> str:
    return json.dumps(clean(report), sort_keys=True, indent=2) + "\n"


def _report(command: str, scenario: Scenario, body: dict) -> dict:
    checks = body.get("checks", [])
    return {"schema_version": SCHEMA_VERSION, "command": command, "scenario": scenario.echo(),
            "scenario_digest": scenario.digest(), "kernel_backend": BACKEND,
            "pass": all(c["pass"] for c in checks), **body}


def _pmap(fn, items, threads):
    items = list(items)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# -- spectrum ---------------------------------------------------------------------------


def cmd_spectrum(scenario: Scenario, threads: int = 1) -> dict:
    ctx = Context(scenario)
    T = ctx.spectrum
    ps = scenario["p"]
    checks = []
    comps = {f"{kind}{sign}": sv for (kind, sign), sv in T.components.items()}
    schatten = {}
    for p in ps:
        total = schatten_p(T, p)
        parts = {k: float(np.sum(v[v > 0] ** p)) for k, v in comps.items()}
        schatten[str(p)] = {"T": total, "components": parts}
        checks.append(check("schatten-subadditivity", total, sum(parts.values()), 1e-10, p=p))
    grams = {f"{kind}{sign}": component_gram(T, kind, sign) for kind in ("E", "h") for sign in ("+", "-")}
    for p in ps:
        for a, b in combinations(sorted(grams), 2):
            # ||(A+B)^{p/2}||_1 <= ||A^{p/2}||_1 + ||B^{p/2}||_1 for A, B = |T_*|^2
            margin = kosaki_margin(grams[a], grams[b], p / 2)
            checks.append(check("kosaki-pair", 0.0, margin, 1e-10, p=p, pair=[a, b]))

    def refine(n):
        sub = ctx if n == scenario.grid_spec.n else ctx.refined(n)
        Ts = sub.spectrum
        return {"n": n, "dim_L+": Ts.Lplus.dim, "dim_L-": Ts.Lminus.dim, "t_max": float(Ts.t[0]),
                "trace_p": {str(p): schatten_p(Ts, p) for p in ps}, "h_min_on_ball": sub.h.min_on_ball}

    table = _pmap(refine, scenario["refinement"], threads)
    rows = {row["n"]: row for row in table}
    if 32 in rows and 48 in rows:
        for p in ps:
            a, b = rows[32]["trace_p"][str(p)], rows[48]["trace_p"][str(p)]
            checks.append(upper_check("schatten-grid-stability", abs(b - a) / a, 0.05, p=p, n_pair=[32, 48]))
    chil = {sign: chil_identity_check(T.Lpm(sign), scenario["r"], scenario.eps_pad) for sign in ("+", "-")}
    body = {
        "eigenvalues": [float(t) for t in T.t],
        "dims": {"L+": T.Lplus.dim, "L-": T.Lminus.dim},
        "schatten": schatten,
        "refinement": table,
        "h": {"min_on_ball": ctx.h.min_on_ball, "sup_inv_sq_on_ball": ctx.h.sup_inv_sq_on_ball},
        "cutoff_identity_residual": chil,
        "family_singular_values": [float(v) for v in ctx.family.singular_values(ctx.grid)],
        "checks": checks,
    }
    return _report("spectrum", scenario, body)


# -- correlations --------------------------------------------------------------------------


def _scan_points(grid, k: int) -> np.ndarray:
    half = max(k // 2, 1)
    d = np.ones(grid.s) / math.sqrt(grid.s)
    spatial = corr.ray_points(grid, 0.0, 0.0, grid.wrap_radius, half, d)
    spacelike = corr.ray_points(grid, 0.5, 0.0, grid.wrap_radius, k - half, d)
    return np.concatenate([spatial, spacelike])


def cmd_corr_scan(scenario: Scenario, eigenindex=None, sign=None, config=None, threads: int = 1):
    """Returns (report, scan) for the requested eigenvector and sign, plus the decay checks."""
    ctx = Context(scenario)
    T, grid = ctx.spectrum, ctx.grid
    cs = scenario["correlations"]
    j = cs["eigenindex"] if eigenindex is None else int(eigenindex)
    sign = cs["sign"] if sign is None else sign
    if sign not in ("+", "-"):
        raise ScenarioError("sign must be '+' or '-'")
    if not 0 <= j < len(T):
        raise ScenarioError(f"eigenindex {j} outside 0..{len(T) - 1}")
    r, eps, s = scenario["r"], scenario["epsilon"], grid.s
    pts = _scan_points(grid, cs["scan_points"])
    if config is not None:
        cp = scenario.points(config)
        diffs = np.array([a - b for a in cp for b in cp if np.any(a != b)]).reshape(-1, s + 1)
        pts = np.concatenate([pts, diffs])
    ucon = corr.uniform_bound_constant(T)
    scan = corr.scan(T, j, sign, pts, bound=np.full(len(pts), ucon * T.t[j] ** 2))
    checks = [check("uniform-correlation-bound", float(scan.moduli.max() - ucon * T.t[j] ** 2), 0.0, 1e-10,
                    eigenindex=j, sign=sign)]
    top = min(cs["top"], len(T))
    support = []
    for jj in range(top):
        sc = corr.support_vanishing_check(T, jj, r)
        support.append({"eigenindex": jj, "max_ratio": sc.max_ratio, "shell": list(sc.shell), "npoints": sc.npoints})
        checks.append(upper_check("support-vanishing-beyond-4r", sc.max_ratio, sc.tolerance, eigenindex=jj))
    uniform = []
    for jj in range(top):
        for sg in ("+", "-"):
            sd = corr.spatial_decay_fit(T, jj, r, sg, rng=scenario.rng(f"spatial:{jj}{sg}"), ntest=cs["ntest"])
            uniform.append({"eigenindex": jj, "sign": sg, "margin": sd.uniform_margin})
            checks.append(check("uniform-correlation-bound", 0.0, sd.uniform_margin, 1e-10, eigenindex=jj, sign=sg))
    sd = corr.spatial_decay_fit(T, j, r, "+", rng=scenario.rng("spatial-fit"), ntest=cs["ntest"])
    checks.append(upper_check("spatial-decay-exponent", sd.fit.exponent, -(s - 2) + 0.3, eigenindex=j))
    checks.append(upper_check("spatial-decay-envelope", sd.test_max_ratio, sd.c_hat, 1e-12, eigenindex=j,
                              note="test points off the calibration lattice"))
    sl = corr.spacelike_decay_check(T, j, "+", eps, r, rng=scenario.rng("spacelike"), ntimes=cs["ntimes"],
                                    ntest=cs["ntest"])
    checks.append(upper_check("spacelike-decay-exponent", sl.ray_fit.exponent, -(s - 2 - eps) + 0.3, eigenindex=j))
    checks.append(upper_check("spacelike-decay-envelope", sl.test_ratio_max, sl.c_hat, 1e-12, eigenindex=j,
                              note="test points off the calibration lattice"))
    body = {
        "eigenindex": j, "sign": sign, "t": float(T.t[j]), "norm_sq": scan.norm_sq,
        "uniform_constant": ucon,
        "spatial_fit": sd.fit.as_dict(), "spatial_c_hat": sd.c_hat, "spatial_test_ratio": sd.test_max_ratio,
        "spacelike_fit": sl.ray_fit.as_dict(), "spacelike_c_hat": sl.c_hat,
        "spacelike_test_ratio": sl.test_ratio_max,
        "support": support, "uniform": uniform, "checks": checks,
    }
    return _report("corr-scan", scenario, body), scan


# -- kernel sweep -----------------------------------------------------------------------------


def cmd_kernel_sweep(scenario: Scenario, threads: int = 1):
    ctx = Context(scenario)
    grid = ctx.grid
    kc = scenario["kernel"]
    rho, pad = kc["rho"], scenario.eps_pad
    lo, hi = 3 * (rho + pad), grid.wrap_radius
    if lo >= hi:
        raise ScenarioError(f"kernel sweep zone empty: 3(rho+eps) = {lo:g} >= wrap radius {hi:g}")
    radii = np.linspace(lo, hi, kc["radii"], endpoint=False)
    direction = np.eye(grid.s)[0]

    def one(i):
        return corr.kernel_norm_bound(grid, rho, pad, radii[i] * direction, rng=scenario.rng(f"kernel:{i}"))

    results = _pmap(one, range(len(radii)), threads)
    checks = [check("kernel-norm-bound", res.norm, res.bound, 0.0, radius=float(rad))
              for rad, res in zip(radii, results)]
    norms = np.array([res.norm for res in results])
    worst_rise = float(np.max(norms[1:] / norms[:-1] - 1)) if len(norms) > 1 else 0.0
    checks.append(upper_check("kernel-norm-monotone", worst_rise, 0.05))
    rows = [{"radius": float(rad), "x": res.x, "norm": res.norm, "bound": res.bound, "margin": res.margin,
             "restarts": res.restarts, "iterations": res.iterations} for rad, res in zip(radii, results)]
    body = {"rho": rho, "eps_pad": pad, "c_s": corr.coulomb_constant(grid.s),
            "c_s_rho_eps": corr.kernel_bound_constant(grid.s, rho, pad),
            "symbol_split": corr.kernel_symbol_split(grid), "rows": rows, "checks": checks}
    return _report("kernel-sweep", scenario, body)


# -- Fock verification ---------------------------------------------------------------------------


def _unit(rng, M, norm=1.0, real=False):
    c = rng.normal(size=M) + (0 if real else 1j * rng.normal(size=M))
    return norm * c / np.linalg.norm(c)


def cmd_fock_verify(scenario: Scenario, threads: int = 1) -> dict:
    ctx = Context(scenario)
    T = ctx.spectrum
    fc = scenario["fock"]
    E = scenario["E"]
    active = tuple(range(min(fc["active"], len(T))))
    model = fk.build_model(T, active, nmax=fc["n_max"], cap=fc["dimension_cap"])
    F, M = model.fock, model.modes.M
    rng = scenario.rng("fock")
    checks = []
    # CCR on the block below the occupancy cut, annihilation of the vacuum
    safe = F.safe_block()
    ccr = 0.0
    for i in range(M):
        for j in range(M):
            comm = (F.annihilators[i] @ F.annihilators[j].conj().T - F.annihilators[j].conj().T @ F.annihilators[i])
            block = comm.tocsr()[safe][:, safe].toarray() - (i == j) * np.eye(len(safe))
            ccr = max(ccr, float(np.abs(block).max()))
    checks.append(upper_check("canonical-commutation", ccr, 1e-12))
    checks.append(upper_check("mode-orthonormality", float(np.abs(model.modes.gram() - np.eye(M)).max()), 1e-10))
    cw = _unit(rng, M, fc["weyl_norm"])
    wv = fk.vacuum_weyl_check(F, cw)
    checks.append(upper_check("coherent-vacuum-expectation", wv.lhs, 1e-6, closed_form=wv.extra["closed_form"]))
    low = np.nonzero(F.number <= F.nmax // 2)[0]
    basis = np.zeros((F.dim, len(low)), dtype=complex)
    basis[low, np.arange(len(low))] = 1.0
    back = fk.weyl_apply(F, -cw, fk.weyl_apply(F, cw, basis))
    checks.append(upper_check("weyl-inverse", float(np.abs(back[low] - basis[low]).max()), 1e-6))
    nested = []
    for _ in range(3):
        val, closed = fk.nested_commutator(F, _unit(rng, M), _unit(rng, M), _unit(rng, M, fc["weyl_norm"]))
        nested.append(abs(val - closed))
    checks.append(upper_check("nested-commutator-identity", max(nested), 1e-6))
    energy = {}
    for n in (1, 2):
        margins = []
        for _ in range(fc["trials"]):
            res = fk.energy_bound_check(F, model.proj, [_unit(rng, M, rng.uniform(0.2, 1.5)) for _ in range(n)])
            margins.append(res.margin)
        energy[str(n)] = min(margins)
        checks.append(check("energy-bounds", 0.0, min(margins), 1e-8, n=n, trials=fc["trials"]))
    # normal-ordered expansion on a one-photon functional
    psi = fk.one_photon_state(model)
    cp = _unit(rng, len(active), real=True).real
    cm = _unit(rng, len(active), real=True).real
    scale = fc["weyl_norm"] / np.linalg.norm(fk.split_weyl_argument(model, cp, cm))
    exp = fk.expansion_check(model, psi, psi, cp * scale, cm * scale, K=6)
    checks.append(upper_check("expansion-reproduction", exp.residuals[-1], 1e-4, K=6,
                              photon_energy=float(model.modes.energies[0]), in_energy_window=bool(
                                  model.modes.energies[0] <= E)))
    tail = exp.residuals[2:]
    checks.append(upper_check("expansion-monotone", float(max(np.diff(tail).max(), 0.0)) if len(tail) > 1 else 0.0,
                              1e-8))
    # S-norm estimate and tau evaluations
    s_rows, worst_s, worst_tau = [], math.inf, math.inf
    s_norms = {}
    for pair in fk.multi_indices(len(active), 4, 1):
        _, sn = fk.S_functional(model, pair)
        s_norms[pair] = sn.norm
        worst_s = min(worst_s, sn.margin)
        s_rows.append({"mu+": pair.mu_plus, "mu-": pair.mu_minus, "nu+": pair.nu_plus, "nu-": pair.nu_minus,
                       "norm": sn.norm, "rhs": sn.rhs})
    checks.append(check("S-norm-estimate", 0.0, worst_s, 1e-8, max_order=4))
    for _ in range(8):
        a = rng.normal(size=len(active))
        b = rng.normal(size=len(active))
        fsq = float(np.sum(np.abs(fk.split_weyl_argument(model, a, b)) ** 2))
        for pair in fk.multi_indices(len(active), 4, 0):
            worst_tau = min(worst_tau, fk.tau_bound(pair) - abs(fk.tau_value(pair, a, b, fsq)))
    checks.append(check("tau-norm-estimate", 0.0, worst_tau, 1e-12, note="necessary condition on Weyl generators"))
    series = {}
    for p in scenario["p"]:
        for K in range(1, scenario["K"] + 1):
            lhs = sum(fk.tau_bound(pr) ** p * s_norms[pr] ** p for pr in s_norms if pr.order <= K)
            rhs = fk.series_majorant(E, schatten_p(T, p), p, K)
            series[f"p={p},K={K}"] = {"lhs": lhs, "rhs": rhs}
            checks.append(check("series-majorant", lhs, rhs, 1e-12 * rhs, p=p, K=K))
    # harmonic bound on translated modes
    harmonic = []
    for name in scenario["nuclearity"]["harmonic_configs"]:
        pts = scenario.points(name)
        hm = fk.build_model(T, (0,), points=pts, nmax=fc["n_max"], cap=fc["dimension_cap"])
        for sign in ("+", "-"):
            res = fk.harmonic_bound_check(hm, sign, 0, range(len(pts)))
            harmonic.append({"config": name, "sign": sign, **res.as_dict()})
            checks.append(check("harmonic-additivity-bound", res.lhs, res.rhs, 1e-6, slack=res.slack,
                                config=name, sign=sign, N=len(pts)))
    # translation covariance of single-point S norms under the compressed P_E
    tm = fk.build_model(T, (0,), points=scenario.points("pair5") if "pair5" in scenario["translations"]
                        else np.zeros((1, T.grid.s + 1)), nmax=fc["n_max"], cap=fc["dimension_cap"])
    drift = 0.0
    for pair in fk.multi_indices(1, 2, 1):
        base = fk.S_functional(tm, pair)[1].norm
        # absolute comparison when P_E leaves no room for the pair
        denom = base if base > 1e-12 else 1.0
        for k in range(len(tm.points)):
            drift = max(drift, abs(fk.S_functional(tm, pair, k)[1].norm - base) / denom)
    checks.append(upper_check("S-norm-translation-drift", drift, 0.05))
    body = {"modes": M, "dimension": F.dim, "P_E_rank": model.proj.rank,
            "mode_energies": model.modes.energies, "occupancy_saturated": model.proj.occupancy_saturated,
            "weyl_vacuum": wv.extra, "nested_commutator_errors": nested, "energy_bound_margins": energy,
            "expansion": {"direct": exp.direct, "residuals": exp.residuals}, "S_norms": s_rows,
            "series": series, "harmonic": harmonic, "checks": checks}
    return _report("fock-verify", scenario, body)


# -- nuclearity ---------------------------------------------------------------------------------


def calibrated_constant(scenario: Scenario, T, active) -> float:
    """max of |corr| (|x|-|x0|+1)^{s-2-eps} / t^2 over lattice sweeps, active eigenvectors, both signs."""
    grid = T.grid
    power = grid.s - 2 - scenario["epsilon"]
    times = np.linspace(0, grid.wrap_radius, scenario["correlations"]["ntimes"], endpoint=False)
    best = 0.0
    for j in active:
        for sign in ("+", "-"):
            g = corr.probe_vector(T, T.e[j], sign)
            best = max(best, corr.calibrate_spacelike(grid, g, float(T.t[j]), power, times))
    return best


def cmd_nuclearity(scenario: Scenario, threads: int = 1) -> dict:
    scenario.validate(nuclearity=True)
    ctx = Context(scenario)
    T = ctx.spectrum
    nc = scenario["nuclearity"]
    s, eps, E = T.grid.s, scenario["epsilon"], scenario["E"]
    active = tuple(range(min(nc["active"], len(T))))
    c_hat = calibrated_constant(scenario, T, active)
    sup_sq = ctx.h.sup_inv_sq_on_ball
    checks, multi = [], []
    pairs = [pr for pr in fk.multi_indices(len(active), nc["max_order"], 1) if pr.nu_order > 0]

    def run_config(name):
        pts = scenario.points(name)
        model = fk.build_model(T, active, points=pts, nmax=nc["n_max"], cap=scenario["fock"]["dimension_cap"])
        cfg = nuc.TranslationConfig(pts, name)
        delta = max(cfg.delta, 0.0) if cfg.N > 1 else 0.0
        rows = []
        rng = scenario.rng(f"multinorm:{name}")
        for pr in pairs:
            res = nuc.multi_norm_bruteforce(model, pr, range(cfg.N), rng=rng, restarts=nc["restarts"])
            rhs = nuc.semibound_rhs(pr, cfg.N, delta, E, model.t(), sup_sq, eps, c_hat, s)
            row = {"config": name, "N": cfg.N, "delta": cfg.delta if cfg.N > 1 else None,
                   "mu+": pr.mu_plus, "mu-": pr.mu_minus, "nu+": pr.nu_plus, "nu-": pr.nu_minus,
                   "multi_norm_sq": res.value ** 2, "rhs": rhs, "spread": res.spread}
            if cfg.N == 1:
                row["single_point_norm"] = fk.S_functional(model, pr)[1].norm
            rows.append(row)
        # identical summands: all points at the first location
        same = fk.build_model(T, active, points=np.repeat(pts[:1], 2, axis=0), nmax=nc["n_max"],
                              cap=scenario["fock"]["dimension_cap"])
        pr = pairs[0]
        one = nuc.multi_norm_bruteforce(same, pr, [0], rng=rng, restarts=nc["restarts"]).value
        two = nuc.multi_norm_bruteforce(same, pr, [0, 1], rng=rng, restarts=nc["restarts"]).value
        return rows, (one, two)

    outputs = _pmap(run_config, nc["multinorm_configs"], threads)
    for name, (rows, (one, two)) in zip(nc["multinorm_configs"], outputs):
        for row in rows:
            multi.append(row)
            checks.append(check("multipoint-S-bound", row["multi_norm_sq"], row["rhs"], 0.0, config=name,
                                N=row["N"], order=sum(row["mu+"]) + sum(row["mu-"]) + sum(row["nu+"]) + sum(row["nu-"])))
            if "single_point_norm" in row and sum(row["mu+"]) + sum(row["mu-"]) != sum(row["nu+"]) + sum(row["nu-"]):
                ref = row["single_point_norm"]
                gap = abs(math.sqrt(row["multi_norm_sq"]) - ref)
                # a functional that vanishes on P_E is compared absolutely
                checks.append(upper_check("multipoint-single-consistency", gap / ref if ref > 1e-12 else gap,
                                          0.02 if ref > 1e-12 else 1e-10, config=name))
        spread = max(r["spread"] for r in rows)
        checks.append(upper_check("optimizer-restart-spread", spread, 0.05, config=name))
        checks.append(upper_check("coincident-points-sqrtN", abs(two / (math.sqrt(2) * one) - 1), 0.02, config=name))
    # bounds on Pi_E
    bounds = []
    trace = {p: schatten_p(T, p) for p in scenario["p"]}
    single = {}
    for p in scenario["p"]:
        single[p] = nuc.pi_norm_bound(E, p, trace[p], c_hat, ctx.h.sup_inv_on_ball, 1, 0.0, s, eps, scenario["K"])
        for N in nc["n_sweep"]:
            prev = None
            for delta in nc["delta_sweep"]:
                b = nuc.pi_norm_bound(E, p, trace[p], c_hat, ctx.h.sup_inv_on_ball, N, delta, s, eps, scenario["K"])
                rel = nuc.relative_to_single(b, single[p])
                bounds.append({"p": p, "N": N, "delta": delta, "log10_bound": b.log10_value, "braces": b.braces,
                               "relative_to_single": rel})
                if prev is not None:
                    checks.append(check("pi-bound-monotone-in-delta", b.log_value, prev.log_value, 1e-9,
                                        p=p, N=N, delta=delta))
                prev = b
                if N > 1 and delta == nc["limit_delta"]:
                    checks.append(upper_check("N-independence-at-large-separation", rel, nc["limit_tolerance"],
                                              p=p, N=N, delta=delta))
    ser = {str(p): vars(nuc.log_series(E, trace[p], p, scenario["K"])) for p in scenario["p"]}
    static_model = fk.build_model(T, active, nmax=nc["n_max"], cap=scenario["fock"]["dimension_cap"])
    static = {f"p={p},K={K}": nuc.p_nuclear_static(static_model, p, K).partial
              for p in scenario["p"] for K in range(1, nc["max_order"] + 1)}
    body = {"c_hat": c_hat, "sup_inv_sq_on_ball": sup_sq, "active": list(active), "multi_norms": multi,
            "bounds": bounds, "series": ser, "static_estimates": static, "checks": checks}
    return _report("nuclearity", scenario, body)


# -- output ---------------------------------------------------------------------------------------


def write_json(path: Path, report: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(dumps(report))


def write_kernel_csv(path: Path, report: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(["radius", "norm", "bound", "margin"])
        for row in report["rows"]:
            w.writerow([repr(row["radius"]), repr(row["norm"]), repr(row["bound"]), repr(row["margin"])])


COMMANDS = ("spectrum", "corr-scan", "kernel-sweep", "fock-verify", "nuclearity")


def run_command(name: str, scenario: Scenario, out: Path, threads: int = 1, **opts) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    stem = name.replace("-", "_")
    if name == "spectrum":
        report = cmd_spectrum(scenario, threads)
    elif name == "corr-scan":
        report, scan = cmd_corr_scan(scenario, opts.get("eigenindex"), opts.get("sign"), opts.get("config"), threads)
        corr.write_scan_csv(out / "corr_scan.csv", scan, scenario["s"])
    elif name == "kernel-sweep":
        report = cmd_kernel_sweep(scenario, threads)
        write_kernel_csv(out / "kernel_sweep.csv", report)
    elif name == "fock-verify":
        report = cmd_fock_verify(scenario, threads)
    elif name == "nuclearity":
        report = cmd_nuclearity(scenario, threads)
    else:
        raise ScenarioError(f"unknown command {name}")
    write_json(out / f"{stem}.json", report)
    return report


def cmd_full(scenario: Scenario, out: Path, threads: int = 1) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "scenario.json", {"schema_version": SCHEMA_VERSION, "scenario": scenario.echo(),
                                       "scenario_digest": scenario.digest()})
    index = {}
    for name in COMMANDS:
        rep = run_command(name, scenario, out / name.replace("-", "_"), threads)
        failed = [c["paper_anchor"] for c in rep["checks"] if not c["pass"]]
        index[name] = {"pass": rep["pass"], "checks": len(rep["checks"]), "failed": sorted(set(failed)),
                       "report": f"{name.replace('-', '_')}/{name.replace('-', '_')}.json"}
    summary = {"schema_version": SCHEMA_VERSION, "scenario_digest": scenario.digest(), "commands": index,
               "pass": all(v["pass"] for v in index.values())}
    write_json(out / "summary.json", summary)
    return summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sharpnuc", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default="default", help="YAML path or shipped scenario name")
    common.add_argument("--out", default="runs/latest", help="output directory")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS + ("full",):
        sp = sub.add_parser(name, parents=[common])
        if name == "corr-scan":
            sp.add_argument("--eigenindex", type=int, default=None)
            sp.add_argument("--sign", choices=["+", "-"], default=None)
            sp.add_argument("--config", default=None, help="translation config whose differences are scanned")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario).with_seed(args.seed)
        out = Path(args.out)
        if args.command == "full":
            summary = cmd_full(scenario, out, args.threads)
            ok = summary["pass"]
        else:
            opts = {k: getattr(args, k, None) for k in ("eigenindex", "sign", "config")}
            ok = run_command(args.command, scenario, out, args.threads, **opts)["pass"]
    except CertificateError as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE
    except SETUP_ERRORS as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"{args.command}: {'pass' if ok else 'FAIL'} ({out})")
    return EXIT_OK if ok else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
