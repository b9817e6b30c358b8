"""Figure-reproduction runs: sweeps, maps, fits and their CSV/JSON tables.

Every run is a pure function of (resolved config, seed); sweep points fan out
over a thread pool, per-point RNG seeds are spawned from the top seed by
point index, and rows are always written in axis order.  Sweeps checkpoint
each completed point to a JSONL file keyed by the config hash so an
interrupted run resumes to an identical table.
"""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .config import config_hash, system_params
from .errors import ConfigError
from .optimize import golden_maximize, simplex_maximize
from .qubit import (SystemParams, compensate_mismatch, critical_drive,
                    reflection_coefficient, steady_state_analytic,
                    weak_probe_reflection)
from .spectrum import emission_spectrum, fit_rabi_from_psd
from .temporal import (SimOptions, coherent_amplitude, make_boxcar,
                       make_custom, make_gaussian, simulate_capture)
from .tomography import (displace_moments, displace_state, fidelity,
                         mle_reconstruct, moments_from_records,
                         moments_from_state, synthesize_records)
from .wigner import wigner_grid, wln

TWOPI = 2.0 * np.pi


@dataclass
class SweepTable:
    """Ordered rows plus provenance for the CSV/JSON writers."""

    name: str
    columns: list
    rows: list
    meta: dict


def _resolved_seed(cfg: dict, seed: int | None) -> int:
    return int(seed) if seed is not None else int(cfg["tomography"]["seed"])


def _point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(index,))
               .generate_state(1)[0])


def _wln_value(grid, log_base: str) -> float:
    v = wln(grid)
    return v / np.log(2.0) if log_base == "two" else v


def _capture_state(p: SystemParams, axis_name: str, value: float, cfg: dict):
    sim = cfg["simulation"]
    opts = SimOptions(fock_cutoff=sim["fock_cutoff"], mode_dim=sim["mode_dim"],
                      norm_floor=sim["norm_floor"],
                      step_scale=sim["step_scale"])
    if axis_name == "tau":
        filt = make_boxcar(value, 0.0, p.gamma_2)
    elif axis_name == "xi":
        filt = make_gaussian(value, 6.0 * value / p.gamma_2, p.gamma_2)
    else:
        raise ConfigError(f"unsupported filter axis {axis_name!r}")
    return simulate_capture(p, filt, opts), filt, opts


def _state_metrics(rho: np.ndarray, cfg: dict) -> dict:
    wg = cfg["wigner"]
    center = complex(np.trace(_destroy_cached(rho.shape[0]) @ rho))
    grid = wigner_grid(rho, wg["extent"], wg["step"], center=center)
    pops = np.diag(rho).real
    out = {
        "wln": _wln_value(grid, wg["log_base"]),
        "purity": float(np.trace(rho @ rho).real),
        "nbar": float(np.trace(np.diag(np.arange(rho.shape[0])) @ rho).real),
        "norm_defect": abs(grid.normalization - 1.0),
    }
    for k in range(4):
        out[f"p{k}"] = float(pops[k]) if k < len(pops) else 0.0
    return out


_DESTROY_CACHE: dict = {}


def _destroy_cached(dim: int) -> np.ndarray:
    if dim not in _DESTROY_CACHE:
        _DESTROY_CACHE[dim] = np.diag(np.sqrt(np.arange(1.0, dim)), 1).astype(complex)
    return _DESTROY_CACHE[dim]


def _pipeline_reconstruction(res, filt, p: SystemParams, cfg: dict,
                             point_seed: int):
    """Moments of the total output -> MLE -> digital displacement back."""
    tomo = cfg["tomography"]
    mode = tomo["mode"]
    beta = coherent_amplitude(p, filt)
    order = tomo["order_cap"]
    mode_dim = cfg["simulation"]["mode_dim"]
    if mode == "records":
        total = displace_state(res.rho_mode_full, beta,
                               out_dim=res.rho_mode_full.shape[0] + 8,
                               leak_tol=1e-5)
        batch = synthesize_records(total, tomo["noise_photons"], tomo["shots"],
                                   seed=point_seed)
        moments = moments_from_records(batch, order_cap=order,
                                       n_bootstrap=tomo["bootstrap"],
                                       seed=point_seed + 1)
    else:
        moments = displace_moments(
            moments_from_state(res.rho_mode_full, order_cap=order), beta)
    recon = mle_reconstruct(moments, mode_dim)
    rho_emission = displace_state(recon.rho, -beta, out_dim=mode_dim,
                                  leak_tol=2e-2)
    return rho_emission, recon


def run_wln_sweep(cfg: dict, seed: int | None = None, threads: int = 1,
                  out_dir: str | None = None) -> SweepTable:
    """Capture -> (tomography pipeline) -> Wigner metrics along tau or xi."""
    if "sweep" not in cfg:
        raise ConfigError("wln-sweep requires a sweep block")
    sweep = cfg["sweep"]
    if sweep["name"] not in ("tau", "xi"):
        raise ConfigError("wln-sweep sweeps tau or xi")
    if cfg["filter"]["kind"] not in ("boxcar", "gaussian"):
        raise ConfigError("wln-sweep supports boxcar or gaussian filters")
    axis = np.linspace(sweep["start"], sweep["stop"], sweep["points"])
    p = system_params(cfg)
    top_seed = _resolved_seed(cfg, seed)
    mode = cfg["tomography"]["mode"]

    columns = [sweep["name"], "wln", "purity", "p0", "p1", "p2", "p3", "nbar",
               "converged"]
    if mode != "ideal":
        columns += ["wln_pipeline", "purity_pipeline", "fidelity",
                    "mle_cost", "mle_iterations"]

    def point(i: int) -> dict:
        value = float(axis[i])
        res, filt, _ = _capture_state(p, sweep["name"], value, cfg)
        ideal = _state_metrics(res.rho_mode_full, cfg)
        row = {sweep["name"]: value, "wln": ideal["wln"],
               "purity": ideal["purity"], "nbar": ideal["nbar"],
               "converged": int(ideal["norm_defect"] < 1e-3)}
        for k in range(4):
            row[f"p{k}"] = ideal[f"p{k}"]
        if mode != "ideal":
            rho_pipe, recon = _pipeline_reconstruction(
                res, filt, p, cfg, _point_seed(top_seed, i))
            pipe = _state_metrics(rho_pipe, cfg)
            row["wln_pipeline"] = pipe["wln"]
            row["purity_pipeline"] = pipe["purity"]
            row["fidelity"] = fidelity(rho_pipe, res.rho_mode)
            row["mle_cost"] = recon.cost
            row["mle_iterations"] = recon.iterations
        return row

    rows = _run_points(point, len(axis), threads, cfg, top_seed, out_dir,
                       "wln_sweep")
    return SweepTable(name="wln_sweep", columns=columns, rows=rows,
                      meta={"config_sha256": config_hash(cfg),
                            "seed": top_seed})


def run_dephasing_map(cfg: dict, seed: int | None = None, threads: int = 1,
                      out_dir: str | None = None) -> tuple[SweepTable, SweepTable]:
    """Max-WLN heatmap over (gamma_p, gamma_n) with xi optimized per point.

    Axes are the *total* pure-dephasing and nonradiative rates of an
    otherwise ideal line: gamma_1 = gamma_r + gamma_n, gamma_2 = gamma_1/2 +
    gamma_p, driven at each point's critical power.
    """
    dm = cfg["dephasing_map"]
    base = system_params(cfg)
    gr = base.gamma_r
    gps = [TWOPI * 1e3 * v for v in dm["gamma_p_khz"]]
    gns = [gr * v for v in dm["gamma_n_over_gamma_r"]]
    lo, hi = dm["xi_bounds"]
    top_seed = _resolved_seed(cfg, seed)
    points = [(gp, gn) for gp in gps for gn in gns]

    def point(i: int) -> dict:
        gp, gn = points[i]
        g1 = gr + gn
        g2 = 0.5 * g1 + gp
        p = SystemParams(gamma_r=gr, gamma_1=g1, gamma_2=g2, phi=base.phi,
                         omega01=base.omega01)
        d_star, om_star = critical_drive(p)
        p = p.with_drive(d_star, om_star)

        def objective(xi):
            res, _, _ = _capture_state(p, "xi", float(xi), cfg)
            return _state_metrics(res.rho_mode_full, cfg)["wln"]

        xi_opt, wln_max, evals = golden_maximize(objective, lo, hi)
        return {"gamma_p_khz": gp / (TWOPI * 1e3),
                "gamma_n_over_gamma_r": gn / gr,
                "wln_max": wln_max, "xi_opt": xi_opt, "evaluations": evals}

    rows = _run_points(point, len(points), threads, cfg, top_seed, out_dir,
                       "dephasing_map")
    heat = SweepTable(name="dephasing_map",
                      columns=["gamma_p_khz", "gamma_n_over_gamma_r",
                               "wln_max", "xi_opt", "evaluations"],
                      rows=rows,
                      meta={"config_sha256": config_hash(cfg),
                            "seed": top_seed})
    cuts_rows = [r for r in rows
                 if r["gamma_n_over_gamma_r"] == 0.0 or r["gamma_p_khz"] == 0.0]
    cuts = SweepTable(name="dephasing_cuts", columns=heat.columns,
                      rows=cuts_rows, meta=heat.meta)
    return heat, cuts


def optimize_filter(cfg: dict, seed: int | None = None) -> dict:
    """Derivative-free search for the WLN-optimal filter in a family."""
    opt = cfg["optimizer"]
    p = system_params(cfg)
    top_seed = _resolved_seed(cfg, seed)
    family = opt["family"]
    lo, hi = opt["bounds"]

    def wln_of_filter(filt) -> float:
        sim = cfg["simulation"]
        res = simulate_capture(p, filt, SimOptions(
            fock_cutoff=sim["fock_cutoff"], mode_dim=sim["mode_dim"],
            norm_floor=sim["norm_floor"], step_scale=sim["step_scale"]))
        return _state_metrics(res.rho_mode_full, cfg)["wln"]

    if family in ("gaussian", "boxcar"):
        def objective(x):
            x = float(np.clip(x, lo, hi))
            if family == "gaussian":
                filt = make_gaussian(x, 6.0 * x / p.gamma_2, p.gamma_2)
            else:
                filt = make_boxcar(x, 0.0, p.gamma_2)
            return wln_of_filter(filt)

        result = simplex_maximize(objective, x0=[0.5 * (lo + hi)],
                                  bounds=[(lo, hi)], budget=opt["budget"],
                                  restarts=opt["restarts"], seed=top_seed)
        best = {"family": family, "parameter": float(result.x[0]),
                "wln": result.value, "evaluations": result.evaluations}
    elif family == "spline":
        from scipy.interpolate import CubicSpline

        n_nodes = opt["nodes"]
        window = opt["window"] / p.gamma_2
        node_t = np.linspace(0.0, window, n_nodes)
        dense_t = np.linspace(0.0, window, 1201)

        def objective(x):
            spline = CubicSpline(node_t, np.asarray(x))
            vals = spline(dense_t)
            if np.max(np.abs(vals)) <= 0:
                return -1.0
            filt = make_custom(dense_t, vals.astype(complex))
            return wln_of_filter(filt)

        # start from a gaussian-shaped bump over the window
        x0 = np.exp(-0.5 * ((node_t - window / 2) / (window / 6)) ** 2)
        result = simplex_maximize(objective, x0=x0, budget=opt["budget"],
                                  restarts=opt["restarts"], seed=top_seed,
                                  xatol=1e-3, fatol=1e-6)
        best = {"family": family, "parameter": [float(v) for v in result.x],
                "wln": result.value, "evaluations": result.evaluations}
    else:
        raise ConfigError(f"unknown family {family!r}")
    best["config_sha256"] = config_hash(cfg)
    best["seed"] = top_seed
    return best


def run_reflection_circle(cfg: dict) -> SweepTable:
    """Detuning sweep of the reflection at weak and critical drive."""
    p = system_params(cfg)
    sweep = cfg.get("sweep") or {"name": "delta_mhz", "start": -3.0,
                                 "stop": 3.0, "points": 241}
    if sweep["name"] != "delta_mhz":
        raise ConfigError("reflection sweeps delta_mhz")
    deltas = TWOPI * 1e6 * np.linspace(sweep["start"], sweep["stop"],
                                       sweep["points"])
    try:
        _, om_crit = critical_drive(p)
    except Exception:
        om_crit = p.gamma_r / np.sqrt(2.0)
    om_weak = 1e-4 * p.gamma_2
    scale = 1.07 if p.phi != 0.0 else 1.0
    rows = []
    for d in deltas:
        r_weak = reflection_coefficient(p.with_drive(d, om_weak))
        r_crit = reflection_coefficient(p.with_drive(d, om_crit))
        c_weak = compensate_mismatch(r_weak, p.phi, scale)
        c_crit = compensate_mismatch(r_crit, p.phi, scale)
        rows.append({"delta_hz": d / TWOPI,
                     "re_r_weak": r_weak.real, "im_r_weak": r_weak.imag,
                     "re_r_crit": r_crit.real, "im_r_crit": r_crit.imag,
                     "re_r_weak_comp": c_weak.real,
                     "im_r_weak_comp": c_weak.imag,
                     "re_r_crit_comp": c_crit.real,
                     "im_r_crit_comp": c_crit.imag})
    return SweepTable(name="reflection",
                      columns=list(rows[0].keys()), rows=rows,
                      meta={"config_sha256": config_hash(cfg),
                            "omega_critical": om_crit,
                            "omega_weak": om_weak})


def run_qubit_state_curves(cfg: dict) -> SweepTable:
    """Steady-state coherence, excited population, purity vs Rabi frequency."""
    p = system_params(cfg)
    sweep = cfg.get("sweep") or {"name": "omega_over_gamma_1", "start": 0.02,
                                 "stop": 4.0, "points": 200}
    if sweep["name"] != "omega_over_gamma_1":
        raise ConfigError("qubit-curves sweeps omega_over_gamma_1")
    rows = []
    for x in np.linspace(sweep["start"], sweep["stop"], sweep["points"]):
        st = steady_state_analytic(p.with_drive(0.0, x * p.gamma_1))
        rows.append({"omega_over_gamma_1": float(x),
                     "coherence": st.coherence,
                     "population_excited": st.population_excited,
                     "purity": st.purity})
    return SweepTable(name="qubit_curves", columns=list(rows[0].keys()),
                      rows=rows, meta={"config_sha256": config_hash(cfg)})


def run_mollow(cfg: dict, seed: int | None = None) -> tuple[SweepTable, SweepTable]:
    """Critical-power emission PSD, on- and off-resonance, with Rabi fits."""
    p = system_params(cfg)
    top_seed = _resolved_seed(cfg, seed)
    rng = np.random.default_rng(top_seed)
    d_star, om_star = critical_drive(p)
    cases = {"onres": p.with_drive(0.0, om_star),
             "offres": p.with_drive(d_star, om_star)}
    n_freqs = cfg["mollow"]["n_freqs"]
    noise = cfg["mollow"]["noise_relative"]
    span = 4.0 * max(om_star, 5.0 * p.gamma_2)
    freqs = np.linspace(-span, span, n_freqs)
    spec_rows = [{"f_hz_offset": f / TWOPI} for f in freqs]
    fit_rows = []
    for label, pc in cases.items():
        spec = emission_spectrum(pc, freqs=freqs)
        data = spec.psd.copy()
        if noise > 0:
            data = data * (1.0 + noise * rng.normal(size=data.shape))
        for i, v in enumerate(data):
            spec_rows[i][f"psd_{label}"] = float(v)
        noisy_spec = type(spec)(freqs=freqs, psd=np.maximum(data, 0.0),
                                coherent_flux=spec.coherent_flux)
        fit = fit_rabi_from_psd(noisy_spec, pc)
        fit_rows.append({"case": label,
                         "omega_fit_over_gamma_1": fit.omega / p.gamma_1,
                         "omega_sigma_over_gamma_1": fit.omega_sigma / p.gamma_1,
                         "omega_true_over_gamma_1": pc.omega / p.gamma_1,
                         "coherent_flux": spec.coherent_flux})
    meta = {"config_sha256": config_hash(cfg), "seed": top_seed}
    return (SweepTable("mollow_psd", list(spec_rows[0].keys()), spec_rows, meta),
            SweepTable("mollow_fit", list(fit_rows[0].keys()), fit_rows, meta))


def run_capture(cfg: dict) -> dict:
    """Single capture: mode state, summaries and moments."""
    p = system_params(cfg)
    fb = cfg["filter"]
    if fb["kind"] == "boxcar":
        value, axis = fb["tau"], "tau"
    elif fb["kind"] == "gaussian":
        value, axis = fb["xi"], "xi"
    else:
        raise ConfigError("capture supports boxcar or gaussian filters")
    res, filt, _ = _capture_state(p, axis, value, cfg)
    metrics = _state_metrics(res.rho_mode_full, cfg)
    moments = moments_from_state(res.rho_mode_full,
                                 cfg["tomography"]["order_cap"])
    beta = coherent_amplitude(p, filt)
    return {"result": res, "metrics": metrics, "moments": moments,
            "beta": beta, "params": p,
            "meta": {"config_sha256": config_hash(cfg)}}


# ---------- fan-out, checkpointing, writers ----------

def _checkpoint_path(out_dir: str, name: str) -> str:
    return os.path.join(out_dir, f"{name}_checkpoint.jsonl")


def _load_checkpoint(path: str, tag: str) -> dict:
    done = {}
    if os.path.exists(path):
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if rec.get("tag") == tag:
                    done[rec["index"]] = rec["row"]
    return done


def _run_points(point_fn, n_points: int, threads: int, cfg: dict, seed: int,
                out_dir: str | None, name: str) -> list:
    tag = f"{config_hash(cfg)}:{seed}"
    ck_path = _checkpoint_path(out_dir, name) if out_dir else None
    done = _load_checkpoint(ck_path, tag) if ck_path else {}
    pending = [i for i in range(n_points) if i not in done]
    results = dict(done)
    if pending:
        ck_fh = open(ck_path, "a") if ck_path else None
        try:
            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    for i, row in zip(pending, pool.map(point_fn, pending)):
                        results[i] = row
                        if ck_fh:
                            ck_fh.write(json.dumps(
                                {"tag": tag, "index": i, "row": row}) + "\n")
                            ck_fh.flush()
            else:
                for i in pending:
                    row = point_fn(i)
                    results[i] = row
                    if ck_fh:
                        ck_fh.write(json.dumps(
                            {"tag": tag, "index": i, "row": row}) + "\n")
                        ck_fh.flush()
        finally:
            if ck_fh:
                ck_fh.close()
    return [results[i] for i in range(n_points)]


def write_table(table: SweepTable, out_dir: str, formats=("csv",),
                stamp: bool = True) -> list:
    """Write a table with a provenance header; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if "csv" in formats:
        path = os.path.join(out_dir, f"{table.name}.csv")
        with open(path, "w", newline="") as fh:
            fh.write(f"# mirrormode {table.name}\n")
            for k in sorted(table.meta):
                fh.write(f"# {k}: {table.meta[k]}\n")
            if stamp:
                fh.write(f"# generated: "
                         f"{datetime.now(timezone.utc).isoformat()}\n")
            w = csv.writer(fh)
            w.writerow(table.columns)
            for row in table.rows:
                w.writerow([_fmt(row.get(c)) for c in table.columns])
        paths.append(path)
    if "json" in formats:
        path = os.path.join(out_dir, f"{table.name}.json")
        with open(path, "w") as fh:
            json.dump({"meta": table.meta, "columns": table.columns,
                       "rows": table.rows}, fh, indent=1)
        paths.append(path)
    return paths


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return v
