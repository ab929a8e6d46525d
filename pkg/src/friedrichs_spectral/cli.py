"""Command line entry point: ``run`` and ``verify`` on a JSON scenario.

Exit codes: 0 success, 2 configuration error, 3 numerical check failed,
4 analyticity refusal in the complex decomposition.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .evolution import Evolver, final_state, irreversibility_suite
from .functionals import (DEFAULT_PROBES, AnalyticObservable, AnalyticWavefunction, ObservableKernel,
                          StateFunctional, from_wavefunction, make_state_preset, observable_presets, pair)
from .grid import build_grid
from .model import FORM_FACTORS, ScatteringModel
from .oracle import DiscretizedSystem, longtime_diagonal, mean_oracle_at
from .scattering import to_plus_representation
from .spectral import (AnalyticityError, ComplexConfig, ComplexDecomposition, NoResonanceError,
                       biorthogonality_defects, fit_decay_rate, gamov_vectors, interior_nodes, phi_energy_trace,
                       real_family, resolution_defect)
from .superoperators import (diagonal_commutator_defect, partition_suite, random_hermitian,
                             relative_diagonal_norm)

logger = logging.getLogger("friedrichs_spectral")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ANALYTIC = 0, 2, 3, 4
RUNS = ("evolve", "final", "irreversibility", "real-spectral", "complex-spectral", "verify")
THREAD_ENV = "FRIEDRICHS_SPECTRAL_THREADS"

DEFAULTS = {
    "model": {"coupling": 0.25, "form_factor": "default", "omega_max": 20.0, "n": 200},
    "state": {"preset": "lorentzian_packet", "params": {}},
    "observables": list(DEFAULT_PROBES),
    "times": [0.0, 1.0, 2.0, 5.0, 10.0],
    "runs": ["evolve", "final", "irreversibility"],
    "seed": 0,
    "complex": {"theta": 3 * np.pi / 4, "n_ray": 120, "n_arc": 80, "times": [0.1, 1.0, 2.0, 4.0, 6.0]},
    "tolerances": {"trace": 1e-8, "energy": 1e-6},
}


class ConfigError(ValueError):
    pass


@dataclass
class Scenario:
    config: dict
    model: ScatteringModel
    wavefunction: AnalyticWavefunction | None
    state: StateFunctional
    observables: dict
    analytic_observables: dict


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return resolve_config(raw)


def resolve_config(raw: dict) -> dict:
    cfg = _merge(DEFAULTS, raw)
    m = cfg["model"]
    try:
        m["coupling"] = float(m["coupling"])
        m["omega_max"] = float(m["omega_max"])
        m["n"] = int(m["n"])
        cfg["times"] = [float(t) for t in cfg["times"]]
        cfg["complex"]["times"] = [float(t) for t in cfg["complex"]["times"]]
        cfg["complex"]["theta"] = float(cfg["complex"]["theta"])
        cfg["seed"] = int(cfg["seed"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed numeric field: {exc}") from exc
    if not np.isfinite(m["coupling"]) or m["coupling"] < 0:
        raise ConfigError("model.coupling must be >= 0")
    if m["n"] < 2:
        raise ConfigError("model.n must be >= 2")
    if not m["omega_max"] > 0:
        raise ConfigError("model.omega_max must be > 0")
    if m["form_factor"] not in FORM_FACTORS:
        raise ConfigError(f"unknown form factor {m['form_factor']!r}")
    bad_runs = [r for r in cfg["runs"] if r not in RUNS]
    if bad_runs:
        raise ConfigError(f"unknown runs {bad_runs}; allowed: {list(RUNS)}")
    t_max = np.pi * m["n"] / (2.0 * m["omega_max"])
    checked = [("times", cfg["times"])]
    if "complex-spectral" in cfg["runs"]:
        checked.append(("complex.times", cfg["complex"]["times"]))
    for key, times in checked:
        if list(times) != sorted(times):
            raise ConfigError(f"{key} must be sorted")
        if times and (times[0] < 0 or times[-1] > t_max):
            raise ConfigError(f"{key} must lie in [0, T_max]; T_max = {t_max:.6g} for n={m['n']}, "
                              f"omega_max={m['omega_max']}")
    return cfg


def _inline_state(grid, entry) -> StateFunctional:
    s = entry["samples"]
    phi = np.asarray(s["re"], dtype=float) + 1j * np.asarray(s.get("im", np.zeros(len(s["re"]))), dtype=float)
    if phi.shape != (grid.n,):
        raise ConfigError(f"inline state needs {grid.n} samples, got {phi.shape}")
    return from_wavefunction(grid, phi)


def _inline_observable(grid, entry) -> ObservableKernel:
    diag = np.asarray(entry.get("diag", np.zeros(grid.n)), dtype=float)
    reg = np.asarray(entry.get("reg_re", np.zeros((grid.n, grid.n))), dtype=float)
    if "reg_im" in entry:
        reg = reg + 1j * np.asarray(entry["reg_im"], dtype=float)
    try:
        return ObservableKernel(grid, diag, reg.astype(complex), entry.get("name", "inline"))
    except ValueError as exc:
        raise ConfigError(f"inline observable: {exc}") from exc


def build_scenario(cfg: dict) -> Scenario:
    m = cfg["model"]
    try:
        grid = build_grid(m["n"], m["omega_max"])
        model = ScatteringModel(grid, m["coupling"], m["form_factor"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    st = cfg["state"]
    wf = None
    try:
        if "samples" in st:
            state = _inline_state(grid, st)
        else:
            wf = make_state_preset(st["preset"], **st.get("params", {})).normalized(grid)
            state = wf.state(grid)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad state: {exc}") from exc
    presets = observable_presets(model)
    observables, analytic = {}, {}
    for item in cfg["observables"]:
        if isinstance(item, str):
            if item not in presets:
                raise ConfigError(f"unknown observable preset {item!r}; known: {sorted(presets)}")
            analytic[item] = presets[item]
            observables[item] = presets[item].kernel(grid)
        elif isinstance(item, dict):
            O = _inline_observable(grid, item)
            observables[O.name] = O
        else:
            raise ConfigError(f"observable entries must be names or objects, got {item!r}")
    return Scenario(cfg, model, wf, state, observables, analytic)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v) -> str:
    return repr(float(v))


class NumericalViolation(RuntimeError):
    pass


def run_evolve(sc: Scenario, out: Path):
    presets = observable_presets(sc.model)
    I = presets["identity"].kernel(sc.model.grid)
    H = presets["hamiltonian"].kernel(sc.model.grid)
    probe = presets["projector"].kernel(sc.model.grid)
    ev = Evolver(sc.model, to_plus_representation(sc.model, sc.state))
    tol = sc.config["tolerances"]
    e0 = float(np.real(pair(sc.state, H)))
    rows, problems = [], []
    for t in sc.config["times"]:
        trace = float(np.real(ev.mean(I, t)))
        energy = float(np.real(ev.mean(H, t)))
        offd = abs(ev.offdiag_mean(probe, t))
        if abs(trace - 1.0) > tol["trace"]:
            problems.append(f"trace {trace!r} at t={t}")
        if abs(energy - e0) > tol["energy"] * abs(e0):
            problems.append(f"energy drift {abs(energy - e0):.3e} at t={t}")
        for name, O in sc.observables.items():
            v = ev.mean(O, t)
            rows.append([_fmt(t), name, _fmt(v.real), _fmt(v.imag), _fmt(trace), _fmt(energy), _fmt(offd)])
    _write_csv(out / "evolve.csv", ["t", "observable", "re_mean", "im_mean", "trace", "energy", "offdiag_mag"], rows)
    if problems:
        raise NumericalViolation("; ".join(problems))


def run_final(sc: Scenario, out: Path):
    rho_inf = final_state(sc.model, sc.state)
    g = sc.model.grid
    rows = [[_fmt(x), _fmt(w), _fmt(d)] for x, w, d in zip(g.nodes, g.weights, rho_inf.d)]
    _write_csv(out / "final.csv", ["omega", "weight", "d_final"], rows)
    trace = float(np.sum(g.weights * rho_inf.d))
    if abs(trace - 1.0) > sc.config["tolerances"]["trace"]:
        raise NumericalViolation(f"final state trace {trace!r}")


def run_irreversibility(sc: Scenario, out: Path):
    presets = observable_presets(sc.model)
    probes = {k: presets[k].kernel(sc.model.grid) for k in DEFAULT_PROBES}
    rep = irreversibility_suite(sc.model, sc.state, probes)
    rows = [["stationarity", _fmt(rep.stationarity), _fmt(1e-8), rep.stationarity <= 1e-8],
            ["inverted_stationarity", _fmt(rep.inverted_stationarity), _fmt(1e-8),
             rep.inverted_stationarity <= 1e-8],
            ["recovery_margin", _fmt(rep.recovery_margin), _fmt(0.0), True],
            ["purity_violation", _fmt(rep.purity_violation), _fmt(0.0), True]]
    _write_csv(out / "irreversibility.csv", ["check_name", "value", "tolerance", "pass"], rows)
    if not rep.passed():
        raise NumericalViolation("final state is not stationary")


def run_real_spectral(sc: Scenario, out: Path):
    table = phi_energy_trace(sc.model)
    _write_csv(out / "real_spectral.csv", ["check_name", "residual", "tolerance", "pass"],
               [[n, _fmt(r), _fmt(t), p] for n, r, t, p in table.rows])
    if not table.passed:
        raise NumericalViolation("real family energy/trace identities failed")


def run_complex_spectral(sc: Scenario, out: Path):
    if sc.wavefunction is None:
        raise AnalyticityError("state given as samples has no analytic continuation")
    cc = sc.config["complex"]
    config = ComplexConfig(cc["theta"], int(cc["n_ray"]), int(cc["n_arc"]))
    dec = ComplexDecomposition(sc.model, sc.wavefunction, config,
                               to_plus_representation(sc.model, sc.state))
    terms = ("invariant", "gamov_gamov", "gamov_background", "background_gamov", "background_background", "total")
    rows = []
    for name, obs in sc.analytic_observables.items():
        for t in cc["times"]:
            res = dec.terms(obs, t)
            rows += [[_fmt(t), name, term, _fmt(res[term].real), _fmt(res[term].imag)] for term in terms]
    _write_csv(out / "complex_spectral.csv", ["t", "observable", "term", "re", "im"], rows)


def verify_checks(sc: Scenario):
    """Named residual checks; ``tolerance`` None marks an informational row."""
    model, grid = sc.model, sc.model.grid
    checks = []
    for i, rec in enumerate(partition_suite(20, seed=sc.config["seed"])):
        checks.append((f"partition_{i:02d}_n{rec['n']}", rec["residual"], 1e-9))
        checks.append((f"partition_dual_{i:02d}_n{rec['n']}", rec["dual_residual"], 1e-9))
    rng = np.random.default_rng(sc.config["seed"])
    H = random_hermitian(8, rng)
    checks.append(("diag_commutator_exact", diagonal_commutator_defect(H, rng.normal(size=8)), 0.0))

    presets = observable_presets(model)
    I = presets["identity"].kernel(grid)
    Hk = presets["hamiltonian"].kernel(grid)
    ev = Evolver(model, to_plus_representation(model, sc.state))
    times = [t for t in sc.config["times"]]
    checks.append(("trace_conservation", max(abs(ev.mean(I, t) - 1.0) for t in times), 1e-8))
    e0 = abs(pair(sc.state, Hk))
    checks.append(("energy_conservation", max(abs(ev.mean(Hk, t) - pair(sc.state, Hk)) for t in times) / e0, 1e-6))

    system = DiscretizedSystem(model)
    rho_or = system.map_state(sc.state)
    for name in DEFAULT_PROBES:
        O = presets[name].kernel(grid)
        ref = mean_oracle_at(system, rho_or, O, times)
        got = np.array([ev.mean(O, t) for t in times])
        checks.append((f"oracle_{name}", float(np.max(np.abs(got - ref)) / np.max(np.abs(ref))), 1e-3))

    rho_inf = final_state(model, sc.state)
    ld = longtime_diagonal(system, rho_or)
    m = interior_nodes(model)
    checks.append(("final_state_vs_oracle", float(np.max(np.abs(rho_inf.d - ld)[m]) / np.max(np.abs(ld[m]))), 5e-3))

    if model.coupling > 0:
        unit = float(np.max(np.abs(np.abs(model.s_matrix(grid.nodes)) - 1.0)))
        checks.append(("s_matrix_unimodular", unit, 1e-10))
        try:
            z0 = model.find_pole()
            checks.append(("pole_residual", float(abs(model.eta_second_sheet(z0))), 1e-10))
        except Exception as exc:  # noqa: BLE001
            checks.append((f"no_resonance: {exc}", float("nan"), None))
    else:
        checks.append(("no_resonance", float("nan"), None))
    return checks


def run_verify(sc: Scenario, out: Path) -> bool:
    checks = verify_checks(sc)
    rows, ok = [], True
    for name, residual, tol in checks:
        if tol is None:
            rows.append([name, _fmt(residual), "", "info"])
            continue
        passed = bool(np.isfinite(residual) and residual <= tol)
        ok &= passed
        rows.append([name, _fmt(residual), _fmt(tol), passed])
    _write_csv(out / "verify.csv", ["check_name", "residual", "tolerance", "pass"], rows)
    return ok


RUNNERS = {
    "evolve": run_evolve,
    "final": run_final,
    "irreversibility": run_irreversibility,
    "real-spectral": run_real_spectral,
    "complex-spectral": run_complex_spectral,
}


def _apply_thread_hint():
    hint = os.environ.get(THREAD_ENV)
    if not hint:
        return
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        logger.info("%s=%s ignored (threadpoolctl not available)", THREAD_ENV, hint)
        return
    threadpool_limits(int(hint))


def _prepare(config_path, out_dir):
    cfg = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "resolved_config.json", "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
    return build_scenario(cfg), out


def cmd_run(config_path, out_dir) -> int:
    try:
        sc, out = _prepare(config_path, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code = EXIT_OK
    for run in sc.config["runs"]:
        try:
            if run == "verify":
                if not run_verify(sc, out):
                    print("verify: some checks failed (see verify.csv)", file=sys.stderr)
                    code = max(code, EXIT_NUMERIC)
            else:
                RUNNERS[run](sc, out)
        except NumericalViolation as exc:
            print(f"{run}: numerical check failed: {exc}", file=sys.stderr)
            code = max(code, EXIT_NUMERIC)
        except (AnalyticityError, NoResonanceError) as exc:
            print(f"{run}: analyticity refusal: {exc}", file=sys.stderr)
            code = max(code, EXIT_ANALYTIC)
    return code


def cmd_verify(config_path, out_dir) -> int:
    try:
        sc, out = _prepare(config_path, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if run_verify(sc, out):
        return EXIT_OK
    print("verify: some checks failed (see verify.csv)", file=sys.stderr)
    return EXIT_NUMERIC


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="friedrichs-spectral", description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default=".", help="directory for CSV and resolved config output")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "verify"):
        p = sub.add_parser(name)
        p.add_argument("config")
        p.add_argument("--out-dir", dest="sub_out_dir", default=None)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    _apply_thread_hint()
    out_dir = args.sub_out_dir or args.out_dir
    if args.command == "run":
        return cmd_run(args.config, out_dir)
    return cmd_verify(args.config, out_dir)


if __name__ == "__main__":
    sys.exit(main())
