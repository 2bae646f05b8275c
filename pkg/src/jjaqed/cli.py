"""Command-line entry point: experiment orchestration and CSV emission.

``jjaqed run <config>`` executes one task; ``jjaqed sweep <config>`` runs a
grid task with a worker pool.  Outputs are CSV files whose ``#`` header
embeds the resolved configuration; bodies are deterministic (byte-identical
across repeated runs and worker counts; only the ``# generated:`` line
varies).  Complex quantities are emitted as paired re/im columns.

Exit codes: 0 success, 2 schema/config violation, 3 numeric failure,
4 tracking ambiguity.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from . import impedance as imp
from .circuit import CircuitParams, build_reduced_system
from .config import RunConfig, dump_resolved, load_config
from .constants import TWO_PI
from .coupling import build_coupling_set, free_spectral_range
from .errors import ConfigError, JJAQEDError, TrackingAmbiguityError
from .nonlinear import NonlinearConfig, first_order_correction, integrate_nonlinear_classical
from .spectral import closed_jja_of, solve_quadratic_modes
from .tracking import sweep_chi, track_atomic_mode

GRID_TASKS = ("sweep-chi", "sweep-omega", "impedance")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, cfg: RunConfig, columns, rows, scalars=None):
    lines = [f"# jjaqed task={cfg.task}", "# config-begin"]
    lines += ["# " + ln for ln in dump_resolved(cfg).splitlines()]
    lines += ["# config-end"]
    for key, val in (scalars or {}).items():
        lines.append(f"# {key}: {_fmt(val)}")
    lines.append(f"# generated: {datetime.now(timezone.utc).isoformat()}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def _time_grid(cfg: RunConfig, default_stop=500.0, default_points=2001):
    if "time" in cfg.grids:
        return cfg.grids["time"]
    return np.linspace(0.0, default_stop, default_points)


def _task_modes(cfg: RunConfig):
    sys_ = build_reduced_system(cfg.circuit)
    ms = solve_quadratic_modes(sys_)
    rows = [
        (
            s.real,
            s.imag,
            abs(s.imag) * cfg.circuit.Omega0,
            s.real * cfg.circuit.Omega0,
            ms.residual_norms[i],
            ms.multiplicity[i],
            bool(ms.defective[i]),
        )
        for i, s in enumerate(ms.poles)
    ]
    return [
        (
            "modes.csv",
            ("pole_re", "pole_im", "omega_re_rad_s", "omega_im_rad_s", "residual",
             "multiplicity", "defective"),
            rows,
            {"n_poles": ms.n_poles, "z_ratio": ms.z_ratio},
        )
    ]


def _task_jja(cfg: RunConfig):
    jja = closed_jja_of(cfg.circuit)
    rows = [
        (k, jja.frequencies[k], jja.frequencies[k] / TWO_PI, jja.modes[0, k])
        for k in range(len(jja.frequencies))
    ]
    return [
        (
            "jja.csv",
            ("k", "omega_rad_s", "freq_hz", "phi_atom_end"),
            rows,
            {"band_edge_rad_s": cfg.circuit.omega_c, "plasma_rad_s": cfg.circuit.Omega0},
        )
    ]


def _task_track(cfg: RunConfig):
    tr = track_atomic_mode(
        cfg.circuit,
        cfg.track["chi_target"],
        initial_steps=cfg.track["initial_steps"],
        overlap_threshold=cfg.track["overlap_threshold"],
    )
    rows = [
        (tr.chi_grid[i], tr.frequencies[i].real, tr.frequencies[i].imag, tr.overlaps[i])
        for i in range(len(tr.chi_grid))
    ]
    scalars = {
        "lamb_shift_rad_s": tr.lamb_shift,
        "decay_rad_s": tr.decay,
        "ipr": tr.ipr,
        "steps_used": tr.steps_used,
    }
    return [("track.csv", ("chi", "omega_re_rad_s", "omega_im_rad_s", "overlap"), rows, scalars)]


def _task_couplings(cfg: RunConfig):
    cs = build_coupling_set(cfg.circuit, closed_jja_of(cfg.circuit))
    fsr = free_spectral_range(cs)
    rows = [
        (k, cs.omega_k[k], cs.omega_k_prime[k], cs.Z_k[k], cs.g_k_phi[k], cs.g_k_q[k],
         fsr[k], cs.regimes[k])
        for k in range(cs.K)
    ]
    scalars = {
        "omega_A_prime_rad_s": cs.omega_A_prime,
        "omega_A_dprime_rad_s": cs.omega_A_dprime,
        "C_A_dprime_f": cs.C_A_dprime,
        "Z_A_ohm": cs.Z_A,
        "mode_weight": cs.mode_weight,
    }
    xi_rows = [
        (k, kk, cs.xi[k, kk]) for k in range(cs.K) for kk in range(k + 1, cs.K)
    ]
    return [
        ("couplings.csv",
         ("k", "omega_k_rad_s", "omega_k_prime_rad_s", "Z_k_ohm", "g_phi_rad_s",
          "g_q_rad_s", "fsr_rad_s", "regime"),
         rows, scalars),
        ("couplings_xi.csv", ("k", "k_prime", "xi_rad_s"), xi_rows, None),
    ]


def _task_perturbation(cfg: RunConfig):
    cs = build_coupling_set(cfg.circuit, closed_jja_of(cfg.circuit))
    d2 = imp.lamb_shift_pt2(cs)
    g_eff = imp.purcell_pt(cfg.circuit)
    g_inf = imp.purcell_pt(cfg.circuit, use_infinite=True)
    rows = [(cs.omega_A_dprime, d2, cs.omega_A_dprime + d2, g_eff, g_inf)]
    return [
        (
            "perturbation.csv",
            ("omega_A_dprime_rad_s", "lamb_shift_pt2_rad_s", "corrected_rad_s",
             "gamma_eff_rad_s", "gamma_inf_rad_s"),
            rows,
            None,
        )
    ]


def _task_dynamics(cfg: RunConfig):
    t = _time_grid(cfg)
    T = cfg.dynamics["temperature"]
    if cfg.dynamics["method"] == "modal":
        tr = dyn.atom_occupation_modal(cfg.circuit, t, T=T)
    else:
        tr = dyn.covariance_ode_oracle(cfg.circuit, t, T=T)
    rows = list(
        zip(tr.t_grid, tr.n_A, tr.part_initial, tr.part_vacuum, tr.part_thermal)
    )
    scalars = {
        "n_A_inf": tr.n_A_inf,
        "method": tr.method,
        "delta_noise_ratio": tr.delta_noise_ratio,
    }
    return [
        ("dynamics.csv",
         ("t_tilde", "n_A", "part_initial", "part_vacuum", "part_thermal"),
         rows, scalars)
    ]


def _task_spectrum(cfg: RunConfig):
    t = _time_grid(cfg, default_stop=3000.0, default_points=12001)
    sys_ = build_reduced_system(cfg.circuit)
    ms = solve_quadratic_modes(sys_)
    tr = dyn.atom_occupation_modal(cfg.circuit, t, T=cfg.dynamics["temperature"], modes=ms)
    peaks = dyn.beat_spectrum(tr, ms)
    rows = [
        (
            pk.frequency,
            pk.magnitude,
            "" if pk.matched_pair is None else f"{pk.matched_pair[0]}:{pk.matched_pair[1]}",
        )
        for pk in peaks
    ]
    return [
        ("spectrum.csv", ("freq_dimensionless", "magnitude", "matched_pole_pair"), rows, None)
    ]


def _task_sweep_chi(cfg: RunConfig):
    if "chi" not in cfg.grids:
        raise ConfigError("sweep-chi needs grids.chi")
    grid = cfg.grids["chi"]
    threshold = cfg.track["overlap_threshold"]
    try:
        rows = sweep_chi(cfg.circuit, grid, overlap_threshold=threshold)
        rows_out = [(r[0], r[1], r[2], "") for r in rows]
    except TrackingAmbiguityError as exc:
        # the ramp is sequential: a lost branch poisons every later point,
        # but the prefix below the failing coupling is still well defined
        bad = exc.chi if exc.chi is not None else float(grid[0])
        prefix = grid[grid < bad]
        if len(prefix) == 0:
            raise
        rows = sweep_chi(cfg.circuit, prefix, overlap_threshold=threshold)
        rows_out = [(r[0], r[1], r[2], "") for r in rows] + [
            (float(c), "", "", f"TrackingAmbiguityError: {exc}") for c in grid[grid >= bad]
        ]
    return [("sweep_chi.csv", ("chi", "omega_re_rad_s", "omega_im_rad_s", "error"), rows_out, None)]


def _omega_point(args):
    params_kw, wa, track_kw = args
    try:
        p = CircuitParams(**{**params_kw, "omega_A": wa})
        tr = track_atomic_mode(
            p, p.chi, initial_steps=track_kw["initial_steps"],
            overlap_threshold=track_kw["overlap_threshold"],
        )
        sys_ = build_reduced_system(p)
        from .spectral import pencil_candidates

        poles, _ = pencil_candidates(sys_)
        keep = poles.imag >= -1e-12
        omegas = (np.abs(poles[keep].imag) + 1j * poles[keep].real) * p.Omega0
        target = tr.frequencies[-1]
        ai = int(np.argmin(np.abs(omegas - target)))
        rows = []
        for j, idx in enumerate(np.argsort(omegas.real)):
            w = omegas[idx]
            is_atomic = idx == ai
            rows.append((wa, j, w.real, w.imag, bool(is_atomic),
                         tr.ipr if is_atomic else "", ""))
        return rows
    except JJAQEDError as exc:
        return [(wa, "", "", "", "", "", f"{type(exc).__name__}: {exc}")]


def _params_kwargs(p: CircuitParams) -> dict:
    return {
        "N": p.N, "L": p.L, "C": p.C, "C_g": p.C_g, "C_c": p.C_c, "chi": p.chi,
        "E_C_A": p.E_C_A, "omega_A": p.omega_A, "Z_W": p.Z_W, "T": p.T,
    }


def _pool_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _task_sweep_omega(cfg: RunConfig):
    if "omega_A" not in cfg.grids:
        raise ConfigError("sweep-omega needs grids.omega_A")
    items = [
        (_params_kwargs(cfg.circuit), float(wa), cfg.track)
        for wa in cfg.grids["omega_A"]
    ]
    results = _pool_map(_omega_point, items, cfg.parallelism)
    rows = [row for point in results for row in point]
    failed = sum(1 for point in results if point and point[0][-1] != "")
    if failed == len(results):
        raise JJAQEDError("all sweep points failed")
    return [
        ("sweep_omega.csv",
         ("omega_A_rad_s", "pole_index", "omega_re_rad_s", "omega_im_rad_s",
          "is_atomic", "ipr", "error"),
         rows, None)
    ]


def _impedance_point(args):
    params_kw, w = args
    try:
        p = CircuitParams(**params_kw)
        ze = imp.z_eff(p, w)
        zi = imp.z_infinity(p, w)
        return (w / TWO_PI, (1.0 / ze).real, (1.0 / zi).real, "")
    except JJAQEDError as exc:
        return (w / TWO_PI, "", "", f"{type(exc).__name__}: {exc}")


def _task_impedance(cfg: RunConfig):
    if "omega" in cfg.grids:
        grid = cfg.grids["omega"]
    else:
        grid = np.geomspace(0.2e9 * TWO_PI, 25e9 * TWO_PI, 600)
    items = [(_params_kwargs(cfg.circuit), float(w)) for w in grid]
    rows = _pool_map(_impedance_point, items, cfg.parallelism)
    if all(r[-1] != "" for r in rows):
        raise JJAQEDError("all impedance points failed")
    return [
        ("impedance.csv", ("omega_hz", "re_inv_zeff", "re_inv_zinf", "error"), rows, None)
    ]


def _task_nonlinear(cfg: RunConfig):
    from .constants import HBAR

    p = cfg.circuit
    t = _time_grid(cfg, default_stop=40.0, default_points=20001)
    if "Lambda" in cfg.nonlinear:
        lam = cfg.nonlinear["Lambda"]
    else:
        strength = cfg.nonlinear.get("strength", 1e-4)
        lam = strength * HBAR * p.omega_A / np.sqrt(HBAR * p.Z0) ** 3
    nl = NonlinearConfig(Lambda=lam)
    lin = integrate_nonlinear_classical(p, NonlinearConfig(Lambda=0.0), t)
    direct = integrate_nonlinear_classical(p, nl, t)
    corr = first_order_correction(p, nl, lin)
    nodes = cfg.nonlinear.get("nodes", [0, 1, p.N + 1])
    rows = []
    for node in nodes:
        for i, ti in enumerate(t):
            rows.append(
                (ti, node, direct.phi[node, i], direct.q[node, i],
                 corr.phi1[node, i], corr.q1[node, i])
            )
    return [
        ("nonlinear.csv", ("t_tilde", "node", "phi", "q", "phi1", "q1"), rows,
         {"Lambda": lam, "nl_strength": direct.nl_strength})
    ]


_TASKS = {
    "modes": _task_modes,
    "jja": _task_jja,
    "track": _task_track,
    "couplings": _task_couplings,
    "perturbation": _task_perturbation,
    "dynamics": _task_dynamics,
    "spectrum": _task_spectrum,
    "sweep-chi": _task_sweep_chi,
    "sweep-omega": _task_sweep_omega,
    "impedance": _task_impedance,
    "nonlinear": _task_nonlinear,
}


def execute(cfg: RunConfig) -> list[Path]:
    outputs = []
    for name, columns, rows, scalars in _TASKS[cfg.task](cfg):
        outputs.append(_write_csv(cfg.output / name, cfg, columns, rows, scalars))
    return outputs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="jjaqed",
        description="Radiative properties of an artificial atom coupled to a "
        "junction-array waveguide: mode solvers, tracking, dynamics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in ("run", "sweep"):
        sp = sub.add_parser(cmd)
        sp.add_argument("config", help="YAML run configuration")
        sp.add_argument("--workers", type=int, default=None, help="worker pool size")
        sp.add_argument("--output", default=None, help="output directory override")
        sp.add_argument("--validate", action="store_true", help="schema check only")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            cfg.parallelism = args.workers
        if args.output is not None:
            cfg.output = Path(args.output)
        if args.command == "sweep" and cfg.task not in GRID_TASKS:
            raise ConfigError(
                f"'sweep' runs grid tasks {GRID_TASKS}; task={cfg.task!r} belongs to 'run'"
            )
        if args.validate:
            print(f"config OK: task={cfg.task}, N={cfg.circuit.N}")
            return 0
        outputs = execute(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrackingAmbiguityError as exc:
        print(f"error: TrackingAmbiguityError: {exc}", file=sys.stderr)
        return 4
    except (JJAQEDError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    for path in outputs:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
