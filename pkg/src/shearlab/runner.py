"""Experiment drivers, manifests and re-verification for the command line."""

from __future__ import annotations

import copy
import json
import math
import os
import shutil
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import BACKEND, __version__, cell, field2d, hypo, modes, sde
from .errors import ArtifactIOError, ConfigError
from .flow import Profile1D, build_model, parse_profile
from .io import atomic_write_bytes, atomic_write_text, sha256_file, write_csv, write_json

EXPERIMENTS = ("cell", "homogenize", "mc-diffusivity", "mode-decay", "hypo-check", "snapshots", "conjecture")
KOLMOGOROV = {"const": 0.0, "modes": [[3, -3.0, 0.0]]}
ZERO = {"const": 0.0, "modes": []}

DEFAULTS = {
    "cell": {"u": KOLMOGOROV, "v": ZERO, "grid_size": 1024},
    "homogenize": {"u": KOLMOGOROV, "v": ZERO, "kind": "shear_degenerate", "nu": 0.1, "beta": 1.0,
                   "horizon": 1.0, "kappa": 1.0, "n_paths": 10000, "dt": None, "save_paths": False},
    "mc-diffusivity": {"eps": 0.0, "kappa": 1.0, "nu": [0.5, 0.2, 0.1], "n_paths": 5000, "T": 50.0,
                       "dt": None},
    "mode-decay": {"u": KOLMOGOROV, "v": ZERO, "v_off": None, "k": 1,
                   "nu": [1e-2, 3e-3, 1e-3, 3e-4, 1e-4], "grid_size": 256, "efolds": 12.0},
    "hypo-check": {"u": KOLMOGOROV, "v": ZERO, "k": 1, "nu": 1e-3, "grid_size": 256, "C0": "calibrate",
                   "mode": "feasible", "dt": 0.01, "efolds": 12.0, "c0": 10.0},
    "snapshots": {"eps": 0.5, "nu": 1e-2, "grid": [128, 128], "T": 1.0, "dt": None, "times": None,
                  "initial": "sin_x", "transport": True, "potential": True, "alias_check": "raise"},
    "conjecture": {"eps": [0.0, 0.5, 1.0], "nu": [0.5, 0.2, 0.1], "kappa": 1.0, "n_paths": 2000,
                   "T": 50.0, "dt": None},
}

INITIAL_FIELDS = {
    "sin_x": lambda X, Y: np.sin(X),
    "sin_x_cos_y": lambda X, Y: np.sin(X) * np.cos(Y),
}


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return cfg


def resolve_config(experiment: str, cfg: dict) -> dict:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
    cfg = dict(cfg)
    named = cfg.pop("experiment", experiment)
    if named != experiment:
        raise ConfigError(f"experiment: config names {named!r} but {experiment!r} was requested")
    out = copy.deepcopy(DEFAULTS[experiment])
    for key, val in cfg.items():
        if key not in out:
            raise ConfigError(f"{key}: unknown key for experiment {experiment!r}")
        out[key] = val
    return out


def _profile(cfg: dict, key: str, grid: int = 256) -> Profile1D:
    return parse_profile(cfg[key], grid, name=key)


def _num(cfg: dict, key: str, kind=float):
    try:
        return kind(cfg[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {cfg[key]!r}") from None


def _nums(cfg: dict, key: str) -> list[float]:
    val = cfg[key]
    if isinstance(val, (int, float)):
        val = [val]
    try:
        return [float(x) for x in val]
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a list of numbers, got {val!r}") from None


class Run:
    """Collects artifacts written into one output directory."""

    def __init__(self, out: Path):
        self.out = out
        self.artifacts: list[tuple[str, str]] = []

    def csv(self, name, header, rows, kind):
        write_csv(self.out / name, header, rows)
        self.artifacts.append((name, kind))

    def text(self, name, text, kind):
        atomic_write_text(self.out / name, text)
        self.artifacts.append((name, kind))

    def json(self, name, obj, kind):
        write_json(self.out / name, obj)
        self.artifacts.append((name, kind))

    def raw(self, name, data: bytes, kind):
        atomic_write_bytes(self.out / name, data)
        self.artifacts.append((name, kind))


# experiments ---------------------------------------------------------------


def run_cell(cfg, seed, threads, run: Run) -> dict:
    n = _num(cfg, "grid_size", int)
    model = build_model(_profile(cfg, "u"), _profile(cfg, "v"), 256)
    sol_v, d_v = cell.diffusivity_v(model, n)
    res = {"D_v": d_v, "lifson_jackson": cell.lifson_jackson(model, n), "Z1": model.Z1,
           "admissible": model.admissible, "centering": model.centering, "seed": seed}
    if model.admissible:
        sol_u, d_u = cell.diffusivity_u(model, n)
        res.update(D_u=d_u, A_u=sol_u.A, B_u=sol_u.B, residual_u=sol_u.residual)
        run.text("chi_u.csv", sol_u.to_csv(), "deterministic")
    res.update(A_v=sol_v.A, B_v=sol_v.B, residual_v=sol_v.residual)
    run.text("chi_v.csv", sol_v.to_csv(), "deterministic")
    run.text("model.json", model.to_json() + "\n", "deterministic")
    run.json("cell.json", res, "deterministic")
    return res


def _dt_for(spec: sde.SdeSpec, dt) -> float:
    step = spec.max_dt() if dt is None else float(dt)
    return spec.T / math.ceil(spec.T / step - 1e-9)


def run_homogenize(cfg, seed, threads, run: Run) -> dict:
    nu, beta, horizon = _num(cfg, "nu"), _num(cfg, "beta"), _num(cfg, "horizon")
    u, v = _profile(cfg, "u"), _profile(cfg, "v")
    T_base = horizon / nu ** (2 * beta)
    spec = sde.SdeSpec(cfg["kind"], nu, _num(cfg, "kappa"), sde.DT_CAP, T_base, _num(cfg, "n_paths", int),
                       seed, u=u, v=v)
    spec = replace(spec, dt=_dt_for(spec, cfg["dt"]))
    ens = sde.simulate(spec, threads)
    resc = sde.rescale(ens, beta, horizon)
    xy = resc.at(horizon)
    var_x = float(np.var(xy[:, 0]))
    var_y = float(np.var(xy[:, 1]))
    batches = np.array_split(xy[:, 0], sde.N_BATCHES)
    se_x = float(np.std([np.var(b) / 2 for b in batches], ddof=1) / math.sqrt(sde.N_BATCHES))
    batches_y = np.array_split(xy[:, 1], sde.N_BATCHES)
    se_y = float(np.std([np.var(b) / 2 for b in batches_y], ddof=1) / math.sqrt(sde.N_BATCHES))
    model = build_model(u, v, 256)
    res = {"var_x_half": var_x / 2, "se_x": se_x, "var_y_half": var_y / 2, "se_y": se_y,
           "D_v": cell.diffusivity_v(model)[1], "dt": spec.dt, "T_base": T_base, "seed": seed,
           "spec": spec.to_dict(), "beta": beta, "horizon": horizon}
    if model.admissible:
        d_u = cell.diffusivity_u(model)[1]
        res["D_u"] = d_u
        if spec.kappa == 1.0:
            # the cell problem assumes unit noise; X noise adds kappa nu^2 for any beta
            res["D_x_oracle"] = d_u + (nu**2 if spec.kind == "shear_full" else 0.0)
    res["estimates"] = [{"name": "var_x_half", "value": var_x / 2, "se": se_x},
                        {"name": "var_y_half", "value": var_y / 2, "se": se_y}]
    run.text("summary.csv", resc.summary_csv(), "stochastic")
    if cfg["save_paths"]:
        run.raw("paths.bin", ens.to_bytes(), "stochastic")
    run.json("homogenize.json", res, "stochastic")
    return res


def run_mc(cfg, seed, threads, run: Run) -> dict:
    nus = _nums(cfg, "nu")
    sw = sde.diffusivity_sweep(nus, _num(cfg, "eps"), _num(cfg, "kappa"), _num(cfg, "n_paths", int),
                               _num(cfg, "T"), cfg["dt"], seed, threads)
    lj = cell.lifson_jackson(build_model(Profile1D.zero(), Profile1D.cos(3, -3.0), 256))
    res = sw.to_dict()
    res.update(seed=seed, lifson_jackson=lj,
               nu2_D_xx=[n * n * e.D_xx for n, e in zip(sw.nu, sw.estimates)],
               estimates=[{"name": f"D_xx[nu={n}]", "value": e.D_xx, "se": e.se_xx}
                          for n, e in zip(sw.nu, sw.estimates)])
    run.text("diffusivity.csv", sw.csv(), "stochastic")
    run.json("fit.json", res, "stochastic")
    return res


def run_mode_decay(cfg, seed, threads, run: Run) -> dict:
    n = _num(cfg, "grid_size", int)
    u, v = _profile(cfg, "u", n), _profile(cfg, "v", n)
    v_off = None if cfg["v_off"] is None else _profile(cfg, "v_off", n)
    k, nus = _num(cfg, "k", int), _nums(cfg, "nu")
    model = build_model(u, v, n)
    rows = []
    for i, nu in enumerate(nus):
        fit, tr = modes.decay_rate(model, k, nu, _num(cfg, "efolds"))
        rows.append((nu, fit.lam, fit.r2, fit.window[0], fit.window[1]))
        run.text(f"trace_{i}.csv", tr.to_csv(), "deterministic")
    res = {"k": k, "nu": nus, "lam": [r[1] for r in rows], "seed": seed}
    if len(nus) > 1:
        res["slope"] = modes.loglog_fit(nus, res["lam"]).slope
    if v_off is not None:
        rep = modes.potential_invariance_experiment(u, v, v_off, k, tuple(nus), n, _num(cfg, "efolds"))
        res["invariance"] = rep.to_dict()
        run.text("invariance.csv", rep.csv(), "deterministic")
    run.csv("rates.csv", ["nu", "lambda", "r2", "t_start", "t_end"], rows, "deterministic")
    run.json("decay.json", res, "deterministic")
    return res


def run_hypo(cfg, seed, threads, run: Run) -> dict:
    n = _num(cfg, "grid_size", int)
    model = build_model(_profile(cfg, "u", n), _profile(cfg, "v", n), n)
    k, nu = _num(cfg, "k", int), _num(cfg, "nu")
    mode = cfg["mode"]
    if cfg["C0"] == "calibrate":
        C0, co = hypo.calibrate_C0(model, nu, k, mode)
    else:
        co = hypo.coefficients(_num(cfg, "C0"), mode)
        C0 = co.C0
    hypo.scale_coefficients(co, nu, k)  # regime gate
    st = modes.ModeState(k, nu, np.ones(n))
    tr, _ = modes.evolve_until(st, model, _num(cfg, "efolds"), _num(cfg, "dt"), coeffs=co)
    cert = hypo.decay_certificate(tr, co)
    env = modes.semigroup_envelope_check(tr, cert.certified_eps / math.sqrt(nu * k), _num(cfg, "c0"))
    res = {
        "coefficients": co.to_dict(),
        "C0": C0,
        "constraints": co.constraint_report(),
        "as_stated_constraints": hypo.coefficients(max(C0, 2.0), "as_stated").constraint_report(),
        "certificate": cert.to_dict(),
        "envelope": env.to_dict(),
        "seed": seed,
    }
    run.text("trace.csv", tr.to_csv(), "deterministic")
    run.json("certificate.json", res, "deterministic")
    return res


def run_snapshots(cfg, seed, threads, run: Run) -> dict:
    grid = cfg["grid"]
    ny, nx = (int(grid), int(grid)) if isinstance(grid, (int, float)) else (int(grid[0]), int(grid[1]))
    init = cfg["initial"]
    if init not in INITIAL_FIELDS:
        raise ConfigError(f"initial: expected one of {sorted(INITIAL_FIELDS)}, got {init!r}")
    f0 = field2d.Field2D.from_function(INITIAL_FIELDS[init], ny, nx, eps=_num(cfg, "eps"), nu=_num(cfg, "nu"),
                                       transport=bool(cfg["transport"]), potential=bool(cfg["potential"]))
    ev = field2d.evolve_2d(f0, _num(cfg, "T"), cfg["dt"], cfg["times"], alias_check=cfg["alias_check"])
    shots = []
    for i, snap in enumerate(ev.snapshots):
        name = f"snap_{i:03d}.pgm"
        img, meta = field2d.render_field(snap, run.out / name)
        run.artifacts += [(name, "deterministic"), (meta.name, "deterministic")]
        shots.append({"file": name, "time": snap.time})
    run.text("norms.csv", ev.trace_csv(), "deterministic")
    run.text("final_field.csv", ev.final.to_csv(), "deterministic")
    res = {"snapshots": shots, "dt": ev.dt, "alias_fraction": ev.alias_fraction, "seed": seed,
           "weighted_mean_drift": float(np.max(np.abs(ev.weighted_mean - ev.weighted_mean[0])))}
    run.json("snapshots.json", res, "deterministic")
    return res


def run_conjecture(cfg, seed, threads, run: Run) -> dict:
    results = sde.conjecture_probe(_nums(cfg, "eps"), _nums(cfg, "nu"), _num(cfg, "kappa"),
                                   n_paths=_num(cfg, "n_paths", int), T=_num(cfg, "T"), dt=cfg["dt"],
                                   seed=seed, threads=threads)
    for r in results:
        run.text(f"diffusivity_eps{r.eps:g}.csv", r.csv(), "stochastic")
    run.text("conjecture.csv", sde.conjecture_csv(results), "stochastic")
    res = {"rows": [r.to_dict() for r in results], "seed": seed,
           "estimates": [{"name": f"D_xx[eps={r.eps},nu={n}]", "value": e.D_xx, "se": e.se_xx}
                         for r in results for n, e in zip(r.nu, r.estimates)]}
    run.json("conjecture.json", res, "stochastic")
    return res


DRIVERS = {
    "cell": run_cell,
    "homogenize": run_homogenize,
    "mc-diffusivity": run_mc,
    "mode-decay": run_mode_decay,
    "hypo-check": run_hypo,
    "snapshots": run_snapshots,
    "conjecture": run_conjecture,
}

MANIFEST = "manifest.json"


def output_dir(out: str | None, experiment: str, seed: int) -> Path:
    root = Path(os.environ.get("SHEARLAB_OUT") or ".")
    p = Path(out) if out else Path(f"{experiment}_{seed}")
    return p if p.is_absolute() else root / p


def run(experiment: str, cfg: dict, out: Path, seed: int = 0, threads: int = 1) -> dict:
    """Execute one experiment into ``out`` and write its manifest."""
    resolved = resolve_config(experiment, cfg)
    try:
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError
    except (TypeError, ValueError):
        raise ConfigError(f"seed: expected an unsigned 64-bit integer, got {seed!r}") from None
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ArtifactIOError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ArtifactIOError(f"output directory {out} is not writable")
    r = Run(out)
    t0 = time.perf_counter()
    results = DRIVERS[experiment](resolved, seed, threads, r)
    wall = time.perf_counter() - t0
    manifest = {
        "experiment": experiment,
        "config": resolved,
        "seed": seed,
        "threads": threads,
        "version": __version__,
        "backend": BACKEND,
        "wall_time_s": wall,
        "results": results,
        "artifacts": [
            {"path": name, "kind": kind, "sha256": sha256_file(out / name)} for name, kind in r.artifacts
        ],
    }
    write_json(out / MANIFEST, manifest)
    return manifest


# verification --------------------------------------------------------------

RTOL = 1e-9


def _close_text(a: str, b: str, rtol: float = RTOL) -> bool:
    """Token-wise comparison: numbers to rtol, everything else exactly."""
    ta, tb = a.replace(",", " ").split(), b.replace(",", " ").split()
    if len(ta) != len(tb):
        return False
    for x, y in zip(ta, tb):
        if x == y:
            continue
        try:
            fx, fy = float(x.strip('"[]{}:')), float(y.strip('"[]{}:'))
        except ValueError:
            return False
        if not math.isclose(fx, fy, rel_tol=rtol, abs_tol=1e-12):
            return False
    return True


def verify(manifest_path, seed: int | None = None, threads: int | None = None) -> dict:
    """Re-run a manifest and compare artifacts.

    Same seed: stochastic artifacts must be byte-identical, deterministic
    ones equal to a relative tolerance.  Different seed: the recorded
    estimates must agree within three combined standard errors.
    """
    manifest_path = Path(manifest_path)
    try:
        man = json.loads(manifest_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ArtifactIOError(f"cannot read manifest {manifest_path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{manifest_path}: line {exc.lineno}: {exc.msg}") from None
    base = manifest_path.parent
    exp = man["experiment"]
    new_seed = man["seed"] if seed is None else int(seed)
    tmp = Path(tempfile.mkdtemp(prefix="shearlab-verify-"))
    try:
        again = run(exp, man["config"], tmp, new_seed, threads or man.get("threads", 1))
        report = {"experiment": exp, "seed": new_seed, "mismatches": [], "checked": []}
        if new_seed == man["seed"]:
            for art in man["artifacts"]:
                name = art["path"]
                new = tmp / name
                if not new.exists():
                    report["mismatches"].append({"artifact": name, "reason": "missing on re-run"})
                    continue
                stored = base / name
                if stored.exists() and sha256_file(stored) != art["sha256"]:
                    report["mismatches"].append({"artifact": name, "reason": "stored file differs from manifest"})
                ok = sha256_file(new) == art["sha256"]
                if not ok and art["kind"] == "deterministic" and not name.endswith(".pgm"):
                    old = base / name
                    if old.exists():
                        ok = _close_text(old.read_text(encoding="utf-8"), new.read_text(encoding="utf-8"))
                report["checked"].append(name)
                if not ok:
                    report["mismatches"].append({"artifact": name, "reason": "content differs"})
        else:
            old = {e["name"]: e for e in man["results"].get("estimates", [])}
            for e in again["results"].get("estimates", []):
                o = old.get(e["name"])
                if o is None:
                    continue
                tol = 3.0 * math.hypot(o["se"], e["se"])
                report["checked"].append(e["name"])
                if abs(o["value"] - e["value"]) > tol:
                    report["mismatches"].append(
                        {"artifact": e["name"], "reason": f"{o['value']:.6g} vs {e['value']:.6g} (tol {tol:.3g})"}
                    )
        report["ok"] = not report["mismatches"]
        return report
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
