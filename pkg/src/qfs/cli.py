"""Scenario runner.

Scenarios are flat INI files (one nesting level of sections) describing a
system, an optional waveguide array and mode grid, and the requested
outputs.  ``qfs run file.cfg`` writes ``<name>_timeseries.csv`` (15
significant digits), an optional ``<name>.svg`` line chart, and a
``<name>_report`` key-value text file into the output directory
(``--out-dir``, else $QFS_OUT_DIR, else the working directory).

Exit codes: 0 success, 2 schema error, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .dde import DivergenceError, integrate_delay
from .fullsim import (DEFAULT_AMPLITUDE_BUDGET, ModeGrid,
                      simulate_single_waveguide, simulate_waveguide_array)
from .model import (SystemConfig, WaveguideArrayConfig,
                    build_cavity_delay_system, build_real_embedding,
                    build_gw_matrix, zero_delay_variant)
from .parallel import characteristic_poles, propagate_single_excitation
from .spectral import (QuasiPolynomial, analytic_three_level,
                       detuned_dark_state_check, final_values,
                       rightmost_roots)
from .stability import search_certificate, verify_envelope

MODES = ("full_sim", "reduced_delay", "analytic", "stability",
         "parallel_single")

_KNOWN_KEYS = {
    "scenario": {"name", "mode", "t_end", "t_end_tau", "h", "steps_per_delay",
                 "sample_every", "runtime_budget", "regime", "root_count",
                 "zero_delay_term", "description"},
    "system": {"n_levels", "gamma", "delta", "g0", "delta0", "tau",
               "delta0_tau_pi", "field_speed"},
    "array": {"couplings", "propagation_constants"},
    "grid": {"half_width", "half_width_pi_over_tau", "n_modes",
             "recurrence_margin"},
    "outputs": {"observables", "svg"},
}


class SchemaError(ValueError):
    """Scenario file violates the documented schema."""


@dataclass
class Scenario:
    name: str
    mode: str
    system: SystemConfig
    array: Optional[WaveguideArrayConfig]
    grid_spec: dict
    t_end: float
    h: Optional[float]
    steps_per_delay: int
    sample_every: Optional[float]
    observables: list
    svg: bool
    regime: str
    root_count: int
    zero_delay_term: bool
    runtime_budget: Optional[float]


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _line_of(text: str, section: str, key: str) -> int:
    current = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and (s.startswith(key + " ")
                                     or s.startswith(key + "=")):
            return i
    return 0


def _floats(raw: str) -> tuple:
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(float(x) for x in raw.replace(",", " ").split())


def parse_scenario(path) -> Scenario:
    path = Path(path)
    text = path.read_text()
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise SchemaError(f"{path}: {exc}") from exc

    def fail(section, key, msg):
        line = _line_of(text, section, key)
        raise SchemaError(f"{path}:{line}: [{section}] {key}: {msg}")

    for section in cp.sections():
        if section not in _KNOWN_KEYS:
            raise SchemaError(f"{path}: unknown section [{section}]")
        for key in cp[section]:
            if key not in _KNOWN_KEYS[section]:
                fail(section, key, "unknown key")

    def get(section, key, conv, default=None, required=False):
        if not cp.has_option(section, key):
            if required:
                fail(section, key, "missing required key")
            return default
        try:
            return conv(cp.get(section, key))
        except (ValueError, TypeError) as exc:
            fail(section, key, f"invalid value ({exc})")

    name = get("scenario", "name", str, required=True)
    mode = get("scenario", "mode", str, required=True)
    if mode not in MODES:
        fail("scenario", "mode", f"must be one of {MODES}")

    n_levels = get("system", "n_levels", int, required=True)
    gamma = get("system", "gamma", _floats, required=True)
    delta = get("system", "delta", _floats,
                default=(0.0,) * max(0, n_levels - 1))
    g0 = get("system", "g0", float, default=0.0)
    delta0 = get("system", "delta0", float, required=True)
    tau = get("system", "tau", float)
    tau_pi = get("system", "delta0_tau_pi", float)
    if (tau is None) == (tau_pi is None):
        fail("system", "tau", "exactly one of tau / delta0_tau_pi is required")
    if tau is None:
        tau = tau_pi * math.pi / delta0
    speed = get("system", "field_speed", float, default=1.0)
    try:
        system = SystemConfig(n_levels=n_levels, gamma=gamma, delta=delta,
                              g0=g0, delta0=delta0, tau=tau,
                              field_speed=speed)
    except ValueError as exc:
        raise SchemaError(f"{path}: [system] {exc}") from exc

    array = None
    if cp.has_section("array"):
        couplings = get("array", "couplings", _floats, default=())
        betas = get("array", "propagation_constants", _floats, required=True)
        try:
            array = WaveguideArrayConfig(len(betas), couplings, betas)
        except ValueError as exc:
            raise SchemaError(f"{path}: [array] {exc}") from exc
    if mode == "parallel_single" and array is None:
        raise SchemaError(f"{path}: parallel_single requires an [array] "
                          "section")

    t_end = get("scenario", "t_end", float)
    t_end_tau = get("scenario", "t_end_tau", float)
    if (t_end is None) == (t_end_tau is None):
        fail("scenario", "t_end", "exactly one of t_end / t_end_tau "
             "is required")
    if t_end is None:
        t_end = t_end_tau * tau

    grid_spec = {}
    if cp.has_section("grid"):
        for key in ("half_width", "half_width_pi_over_tau", "n_modes",
                    "recurrence_margin"):
            conv = int if key == "n_modes" else float
            val = get("grid", key, conv)
            if val is not None:
                grid_spec[key] = val

    observables = get("outputs", "observables", str, default="")
    observables = [w.strip() for w in observables.split(",") if w.strip()]
    svg = get("outputs", "svg", lambda s: s.lower() in ("1", "true", "yes"),
              default=False)

    return Scenario(
        name=name, mode=mode, system=system, array=array,
        grid_spec=grid_spec, t_end=t_end,
        h=get("scenario", "h", float),
        steps_per_delay=get("scenario", "steps_per_delay", int, default=64),
        sample_every=get("scenario", "sample_every", float),
        observables=observables, svg=svg,
        regime=get("scenario", "regime", str, default="short_delay_resonant"),
        root_count=get("scenario", "root_count", int, default=6),
        zero_delay_term=get("scenario", "zero_delay_term",
                            lambda s: s.lower() in ("1", "true", "yes"),
                            default=False),
        runtime_budget=get("scenario", "runtime_budget", float),
    )


def _resolve_grid(sc: Scenario) -> ModeGrid:
    spec = sc.grid_spec
    cfg = sc.system
    if "half_width" in spec:
        hw = spec["half_width"]
    elif "half_width_pi_over_tau" in spec:
        hw = spec["half_width_pi_over_tau"] * math.pi / cfg.tau
    else:
        return ModeGrid.defaults(cfg, sc.t_end)
    if "n_modes" in spec:
        n = spec["n_modes"]
    else:
        margin = spec.get("recurrence_margin", 1.1)
        spacing = 2.0 * math.pi / (margin * sc.t_end)
        n = int(math.ceil(2.0 * hw / spacing)) + 1
    return ModeGrid(center=cfg.delta0, half_width=hw, n_modes=n)


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

def _columns_full_sim(sc, res):
    cols = {}
    n = sc.system.n_levels
    w = res.guide_one_photon.shape[1]
    available = {
        "cavity_populations": lambda: {
            f"cav_pop_{j}": np.abs(res.cavity_amplitudes[:, j]) ** 2
            for j in range(n)},
        "cavity_abs": lambda: {
            f"cav_abs_{j}": np.abs(res.cavity_amplitudes[:, j])
            for j in range(n)},
        "photon_populations": lambda: {
            f"wg_photons_{k}": res.photon_populations[:, k]
            for k in range(3)},
        "guide_populations": lambda: dict(
            {f"guide{u + 1}_one_photon": res.guide_one_photon[:, u]
             for u in range(w)},
            **{f"guide{u + 1}_two_photon": res.guide_two_photon[:, u]
               for u in range(w)}),
        "norm": lambda: {"norm": res.norm},
    }
    for name in sc.observables:
        if name not in available:
            raise SchemaError(f"unknown observable {name!r} for mode "
                              f"{sc.mode}")
        cols.update(available[name]())
    return res.times, cols


def _columns_reduced(sc, traj):
    cols = {}
    n = sc.system.n_levels
    available = {
        "cavity_populations": lambda: {
            f"cav_pop_{j}": np.abs(traj.states[:, j]) ** 2 for j in range(n)},
        "cavity_abs": lambda: {
            f"cav_abs_{j}": np.abs(traj.states[:, j]) for j in range(n)},
        "norm": lambda: {"norm": traj.norms()},
    }
    for name in sc.observables:
        if name not in available:
            raise SchemaError(f"unknown observable {name!r} for mode "
                              f"{sc.mode}")
        cols.update(available[name]())
    return traj.times, cols


# ---------------------------------------------------------------------------
# output writers
# ---------------------------------------------------------------------------

def _write_csv(path: Path, times, cols: dict):
    headers = ["t"] + list(cols)
    arrays = [np.asarray(times)] + [np.asarray(v) for v in cols.values()]
    with open(path, "w") as fh:
        fh.write(",".join(headers) + "\n")
        for i in range(len(arrays[0])):
            fh.write(",".join(f"{a[i]:.15g}" for a in arrays) + "\n")


def _write_svg(path: Path, times, cols: dict, title: str):
    width, height, pad = 640, 400, 45
    times = np.asarray(times)
    series = {k: np.asarray(v, dtype=float) for k, v in cols.items()}
    if not series or len(times) < 2:
        ymin, ymax = 0.0, 1.0
    else:
        ymin = min(float(np.min(v)) for v in series.values())
        ymax = max(float(np.max(v)) for v in series.values())
    if ymax - ymin < 1e-300:
        ymax = ymin + 1.0
    x0, x1 = float(times[0]), float(times[-1]) if len(times) else 1.0
    if x1 - x0 < 1e-300:
        x1 = x0 + 1.0

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - ymin) / (ymax - ymin) * (height - 2 * pad)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width // 2}" y="18" text-anchor="middle" '
             f'font-size="13">{title}</text>']
    parts.append(f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
                 f'y2="{height - pad}" stroke="black"/>')
    parts.append(f'<line x1="{pad}" y1="{pad}" x2="{pad}" '
                 f'y2="{height - pad}" stroke="black"/>')
    for label, val, anchor in ((f"{x0:.4g}", (sx(x0), height - pad + 16),
                                "middle"),
                               (f"{x1:.4g}", (sx(x1), height - pad + 16),
                                "middle"),
                               (f"{ymin:.4g}", (pad - 4, sy(ymin)), "end"),
                               (f"{ymax:.4g}", (pad - 4, sy(ymax)), "end")):
        parts.append(f'<text x="{val[0]:.1f}" y="{val[1]:.1f}" '
                     f'text-anchor="{anchor}" font-size="11">{label}</text>')
    for k, (name, vals) in enumerate(series.items()):
        color = palette[k % len(palette)]
        pts = " ".join(f"{sx(t):.2f},{sy(v):.2f}"
                       for t, v in zip(times, vals))
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.2"/>')
        parts.append(f'<text x="{width - pad + 4}" '
                     f'y="{pad + 14 * k}" font-size="10" '
                     f'fill="{color}">{name}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts))


def _format_value(v):
    if isinstance(v, float):
        return f"{v:.15g}"
    if isinstance(v, complex):
        return f"{v.real:.15g}{v.imag:+.15g}j"
    if isinstance(v, np.ndarray):
        return json.dumps(np.round(v, 15).tolist())
    return str(v)


def _write_report(path: Path, entries: dict):
    with open(path, "w") as fh:
        for k, v in entries.items():
            fh.write(f"{k} = {_format_value(v)}\n")


# ---------------------------------------------------------------------------
# mode runners
# ---------------------------------------------------------------------------

def _run_full_sim(sc: Scenario, budget: int):
    grid = _resolve_grid(sc)
    if sc.array is not None and sc.array.n_waveguides > 1:
        res = simulate_waveguide_array(sc.system, sc.array, grid, sc.t_end,
                                       h=sc.h, sample_every=sc.sample_every,
                                       budget=budget)
    else:
        res = simulate_single_waveguide(sc.system, grid, sc.t_end, h=sc.h,
                                        sample_every=sc.sample_every,
                                        budget=budget)
    times, cols = _columns_full_sim(sc, res)
    report = {
        "mode": sc.mode,
        "grid_n_modes": grid.n_modes,
        "grid_half_width": grid.half_width,
        "grid_recurrence_horizon": grid.recurrence_horizon,
        "final_norm": float(res.norm[-1]),
    }
    for name, vals in cols.items():
        report[f"final_{name}"] = float(np.asarray(vals)[-1])
    return times, cols, report


def _run_reduced(sc: Scenario):
    sys_c = build_cavity_delay_system(sc.system)
    if sc.zero_delay_term:
        sys_c = zero_delay_variant(sys_c)
    traj = integrate_delay(sys_c, None, sc.t_end, sc.steps_per_delay)
    stride = 1
    if sc.sample_every:
        stride = max(1, int(round(sc.sample_every
                                  / (sc.system.tau / sc.steps_per_delay))))
    traj.times = traj.times[::stride]
    traj.states = traj.states[::stride]
    times, cols = _columns_reduced(sc, traj)
    report = {"mode": sc.mode, "steps_per_delay": sc.steps_per_delay}
    for name, vals in cols.items():
        report[f"final_{name}"] = float(np.asarray(vals)[-1])
    return times, cols, report


def _run_analytic(sc: Scenario):
    n = max(2, int(round(sc.t_end / (sc.sample_every or sc.t_end / 400))))
    times = np.linspace(0.0, sc.t_end, n + 1)
    c0, c11, c22 = analytic_three_level(sc.system, sc.regime, times)
    cols = {"cav_pop_0": np.abs(c0) ** 2, "cav_pop_1": np.abs(c11) ** 2,
            "cav_pop_2": np.abs(c22) ** 2}
    fv = final_values(sc.system)
    dark = detuned_dark_state_check(sc.system)
    report = {
        "mode": sc.mode, "regime": sc.regime,
        "oscillatory": fv.oscillatory,
        "waveguide_photons_final": fv.waveguide_photons,
        "dark_state": dark.dark,
    }
    if fv.limits is not None:
        report["amplitude_limits"] = np.asarray(fv.limits)
    if dark.mean is not None:
        report["dark_state_mean"] = dark.mean
    return times, cols, report


def _run_stability(sc: Scenario):
    sys_c = build_cavity_delay_system(sc.system)
    if sc.zero_delay_term:
        sys_c = zero_delay_variant(sys_c)
    sys_r = build_real_embedding(sys_c)
    detuned = not sc.system.resonant
    cert = search_certificate(sys_r, detuned=detuned)
    report = {"mode": sc.mode, "detuned": detuned,
              "certificate_found": cert is not None}
    if cert is not None:
        report.update({
            "beta": cert.beta, "alpha1": cert.alpha1, "alpha2": cert.alpha2,
            "envelope_factor": cert.envelope_factor,
            "p_matrix": cert.p, "q_matrix": cert.q,
        })
    if sc.system.resonant and not sc.zero_delay_term:
        qp = QuasiPolynomial.from_config(sc.system)
        rr = rightmost_roots(qp, count=sc.root_count)
        for i, root in enumerate(rr.roots):
            report[f"root_{i}"] = root
        report["max_root_residual"] = max(rr.residuals) if rr.residuals \
            else float("nan")
    traj = integrate_delay(sys_r, None, sc.t_end, sc.steps_per_delay)
    cols = {"norm": traj.norms()}
    if cert is not None:
        bound = cert.envelope_factor * np.exp(-cert.beta * traj.times)
        cols["envelope_bound"] = bound
        report["envelope_max_ratio"] = verify_envelope(traj, cert).max_ratio
    stride = max(1, len(traj.times) // 2000)
    times = traj.times[::stride]
    cols = {k: v[::stride] for k, v in cols.items()}
    for name, vals in cols.items():
        report[f"final_{name}"] = float(np.asarray(vals)[-1])
    return times, cols, report


def _run_parallel_single(sc: Scenario):
    wcfg = sc.array
    c0 = np.zeros(wcfg.n_waveguides, dtype=complex)
    c0[0] = 1.0
    n = max(2, int(round(sc.t_end / (sc.sample_every or sc.t_end / 400))))
    times = np.linspace(0.0, sc.t_end, n + 1)
    states = np.array([propagate_single_excitation(wcfg, c0, t)
                       for t in times])
    cols = {f"guide{w + 1}_pop": np.abs(states[:, w]) ** 2
            for w in range(wcfg.n_waveguides)}
    report = {"mode": sc.mode}
    for i, pole in enumerate(characteristic_poles(wcfg)):
        report[f"pole_{i}"] = complex(pole)
    report["gw_matrix"] = build_gw_matrix(wcfg)
    return times, cols, report


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def bundled_scenario_dir() -> Path:
    return Path(resources.files("qfs") / "scenarios")


def run_scenario(path, out_dir: Path, budget: int, quiet: bool) -> int:
    t_start = time.perf_counter()
    try:
        sc = parse_scenario(path)
        if sc.mode == "full_sim":
            times, cols, report = _run_full_sim(sc, budget)
        elif sc.mode == "reduced_delay":
            times, cols, report = _run_reduced(sc)
        elif sc.mode == "analytic":
            times, cols, report = _run_analytic(sc)
        elif sc.mode == "stability":
            times, cols, report = _run_stability(sc)
        else:
            times, cols, report = _run_parallel_single(sc)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return 3

    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{sc.name}_timeseries.csv"
    _write_csv(csv_path, times, cols)
    report["csv_columns"] = ", ".join(["t"] + list(cols))
    report["elapsed_seconds"] = round(time.perf_counter() - t_start, 3)
    if sc.runtime_budget is not None:
        report["runtime_budget_seconds"] = sc.runtime_budget
    _write_report(out_dir / f"{sc.name}_report", report)
    if sc.svg:
        _write_svg(out_dir / f"{sc.name}.svg", times, cols, sc.name)
    if not quiet:
        print(f"{sc.name}: wrote {csv_path.name} "
              f"({report['elapsed_seconds']} s)")
    return 0


def list_scenarios(extra_dir: Optional[Path]) -> str:
    dirs = [bundled_scenario_dir()]
    if extra_dir is not None:
        dirs.append(Path(extra_dir))
    lines = []
    for d in dirs:
        if not d.is_dir():
            continue
        for f in sorted(d.glob("*.cfg")):
            try:
                sc = parse_scenario(f)
                lines.append(f"{sc.name:<16} mode={sc.mode:<15} "
                             f"t_end={sc.t_end:.6g}  ({f.name})")
            except (SchemaError, ValueError) as exc:
                lines.append(f"{f.stem:<16} PARSE ERROR: {exc}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qfs",
        description="Simulate and analyze the delayed-feedback cavity "
                    "network described by a scenario file.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("scenario", help="scenario .cfg path or the name of "
                                        "a bundled scenario")
    p_run.add_argument("--out-dir", default=None,
                       help="output directory (default $QFS_OUT_DIR or .)")
    p_run.add_argument("--budget", type=int,
                       default=DEFAULT_AMPLITUDE_BUDGET,
                       help="amplitude-count budget for mode-resolved runs")
    p_run.add_argument("--quiet", action="store_true")

    p_list = sub.add_parser("list", help="list available scenarios")
    p_list.add_argument("--scenario-dir", default=None,
                        help="additional directory to scan for scenarios")

    args = parser.parse_args(argv)
    if args.command == "list":
        print(list_scenarios(args.scenario_dir))
        return 0

    path = Path(args.scenario)
    if not path.exists():
        candidate = bundled_scenario_dir() / f"{args.scenario}.cfg"
        if candidate.exists():
            path = candidate
        else:
            print(f"schema error: no such scenario {args.scenario!r}",
                  file=sys.stderr)
            return 2
    out_dir = Path(args.out_dir or os.environ.get("QFS_OUT_DIR", "."))
    return run_scenario(path, out_dir, args.budget, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
