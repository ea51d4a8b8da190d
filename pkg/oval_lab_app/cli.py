"""
Command-line interface for Oval Lab.

Every command computes one object of the laboratory (the bowl, a shrinker
leaf, the foliation atlas, a flow run) or post-processes a stored flow run
(spectral split, Huisken functional, region-by-region verification), writes
its CSV series and a JSON summary into the output directory, and prints a
short report.

Global flags go before the command. With `--json` the summary document is
printed to stdout; errors are printed as `Error: <msg>` or, with `--json`,
as {"error": ..., "code": ...}. Usage problems exit with 3, numerical
failures with 2.

Usage:
    python -m oval_lab_app.cli [--n N] [--out DIR] [--config FILE] <command> [options]

Example:
    python -m oval_lab_app.cli --out runs/bowl bowl --rho-max 40
    python -m oval_lab_app.cli --out runs/cap shrinker cap --a 40
    python -m oval_lab_app.cli --out runs/oval evolve --tau0 -50 --tau1 -40 --nodes 400
    python -m oval_lab_app.cli --out runs/oval verify --from runs/oval
"""

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from oval_lab_app import run_store as store
from oval_lab_app.asymptotics import (
    AnsatzSpec,
    RegionReport,
    acceptance,
    build_ansatz,
    tip_window,
    verify_alpha,
    verify_global,
    verify_inner_outer,
    verify_intermediate,
    verify_monotonicity,
    verify_parabolic,
    verify_tip,
)
from oval_lab_app.config import LabConfig, load_config, override
from oval_lab_app.errors import DomainError, HypothesisViolation, OvalLabError, UsageError
from oval_lab_app.flow_evolver import (
    FlowRun,
    FlowState,
    capped_cylinder_curve,
    evolve,
    graph_samples,
    mean_curvature,
    rescale_state,
    sphere_curve,
    unrescale_state,
)
from oval_lab_app.foliation import (
    build,
    calibration_divergence,
    default_a_grid,
    default_b_grid,
    normal_variation,
    refinement_study,
    squeeze_check,
    squeeze_field,
    supersolution_margin,
)
from oval_lab_app.huisken import (
    cylinder_huisken,
    dissipation,
    huisken_curve,
    inner_outer_check,
    monotonicity_series,
)
from oval_lab_app.numerics_core import ArcCurve, Grid, cylinder_radius, sphere_radius
from oval_lab_app.shrinker_ode import (
    bowl_error_estimate,
    cap_lower_bound_margin,
    fit_expansions,
    shoot_leaf,
    solve_bowl,
    solve_trumpet,
    tail_slope,
    w_diagnostic,
)
from oval_lab_app.spectral import (
    ErrorTerms,
    SpectralSplit,
    classify_modes,
    spectral_series,
    track_alpha,
)

logger = logging.getLogger(__name__)

EVOLVE_COLUMNS = [
    "tau", "dbar", "Hmax", "Htip", "area", "Rmax", "huisken", "alpha", "alpha_wide",
    "Vplus", "Vzero", "Vminus", "E1", "E2", "E3", "minPy", "minQy", "u0",
]
SPECTRAL_COLUMNS = [
    "tau", "Vplus", "Vzero", "Vminus", "alpha", "alpha_wide", "E1", "E2", "E3",
]
HUISKEN_COLUMNS = ["tau", "H", "dHdtau", "ratio_grad", "ratio_mass"]
LEAF_COLUMNS = ["y", "u", "u_y", "w", "residual"]
FIELD_COLUMNS = ["y", "r", "phi", "div"]
CHART_REGIONS = ("parabolic", "intermediate", "tip", "global")


class _Parser(argparse.ArgumentParser):
    """argparse with bad flags reported on stdout and mapped to exit code 3."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"Error: {message}")
        sys.exit(3)


def _fail(msg: str, code: int, json_output: bool) -> None:
    if json_output:
        print(json.dumps({"error": msg, "code": code}))
    else:
        print(f"Error: {msg}")
    sys.exit(code)


def _finish(
    out_dir: str,
    summary: Dict[str, Any],
    lines: List[str],
    json_output: bool = False,
    quiet: bool = False,
) -> None:
    """Stores the summary and prints it (JSON) or the report lines."""
    path = store.save_summary(out_dir, summary)
    if json_output:
        print(json.dumps(store.to_jsonable(summary)))
    elif not quiet:
        for line in lines:
            print(line)
        print(f"Summary written to {path}")


def _fmt(value: Optional[float], spec: str = ".6g") -> str:
    if value is None or not math.isfinite(value):
        return "n/a"
    return format(value, spec)


def _grid(config: LabConfig) -> Grid:
    return Grid(config.grids.half_length, config.grids.count)


def _load_run_curves(run_dir: str) -> Tuple[List[float], List[ArcCurve], int]:
    data = store.load_snapshots(run_dir)
    n = int(data["n"])
    curves = [ArcCurve.from_points(y, r, n) for y, r in data["curves"]]
    return [float(t) for t in data["tau"]], curves, n


def _run_source(run_dir: str, records: int) -> Dict[str, Any]:
    """What the stored run says about itself; empty when its summary is gone."""
    meta = store.load_summary(run_dir)
    if meta.get("records") not in (None, records):
        logger.warning(
            "summary of %s lists %s records, snapshots hold %d", run_dir, meta["records"], records
        )
    return {key: meta.get(key) for key in ("command", "ansatz", "unrescaled", "records")}


def _spectral_of(
    times: Sequence[float], curves: Sequence[ArcCurve], n: int, grid: Grid
) -> Tuple[List[SpectralSplit], List[ErrorTerms]]:
    profiles = [graph_samples(curve, grid, symmetric=True) for curve in curves]
    dbar = [0.5 * float(curve.y[-1] - curve.y[0]) for curve in curves]
    return spectral_series(times, profiles, dbar, grid, n)


def _alpha_law(times: Sequence[float], splits: Sequence[SpectralSplit]) -> Dict[str, Any]:
    """
    α law on the untruncated neutral coefficient, the median truncation
    bias α/α_wide and mode dominance; a part is None when it does not apply.
    """
    out: Dict[str, Any] = {"alpha_law": None, "truncation_bias": None, "modes": None}
    try:
        out["alpha_law"] = asdict(track_alpha(times, [s.alpha_wide for s in splits]))
        bias = [s.alpha / s.alpha_wide for s in splits if s.alpha_wide != 0.0]
        out["truncation_bias"] = float(np.median(bias)) if bias else None
    except OvalLabError as exc:
        logger.warning("α law not fitted: %s", exc)
    try:
        modes = classify_modes(times, splits)
        out["modes"] = {"dominant": modes.dominant, **modes.fits}
    except OvalLabError as exc:
        logger.warning("modes not classified: %s", exc)
    return out


# ---------------------------------------------------------------------------
# Command handlers
# ---------------------------------------------------------------------------


def handle_bowl(
    config: LabConfig,
    out_dir: str,
    rho_max: Optional[float] = None,
    step: Optional[float] = None,
    json_output: bool = False,
    quiet: bool = False,
) -> None:
    """
    Solves the bowl soliton and reports Ψ″(0), C0 and the tail decay.

    Args:
        config: Merged configuration.
        out_dir: Output directory.
        rho_max: Extent of the solution (defaults to config.rho_max).
        step: RK4 step (defaults to config.bowl_step).
    """
    rho_max = config.rho_max if rho_max is None else rho_max
    step = config.bowl_step if step is None else step
    bowl = solve_bowl(config.n, rho_max, step)
    slope = tail_slope(bowl, 15.0, min(40.0, bowl.rho_max)) if bowl.rho_max >= 20 else None
    summary = {
        "command": "bowl",
        "config": config.to_dict(),
        "n": config.n,
        "rho_max": bowl.rho_max,
        "step": step,
        "psi_rr_0": float(bowl.curvature[0]),
        "C0": bowl.C0,
        "tail_slope": slope,
        "error_estimate": bowl_error_estimate(config.n),
    }
    store.write_series_csv(
        os.path.join(out_dir, "bowl.csv"),
        {"rho": bowl.rho, "psi": bowl.psi, "psi_rho": bowl.slope},
        order=["rho", "psi", "psi_rho"],
    )
    lines = [
        f"Bowl n={config.n} on [0, {bowl.rho_max:g}]:",
        f"  Ψ''(0) = {bowl.curvature[0]:.8f}",
        f"  C0 = {bowl.C0:.6f}",
        f"  tail slope = {_fmt(slope, '.3f')}",
    ]
    _finish(out_dir, summary, lines, json_output, quiet)


def handle_shrinker(
    config: LabConfig,
    out_dir: str,
    kind: str,
    a: Optional[float] = None,
    b: Optional[float] = None,
    y_min: float = 0.0,
    Y: Optional[float] = None,
    json_output: bool = False,
    quiet: bool = False,
) -> None:
    """
    Solves one cap (by tip height a) or trumpet (by cone slope b) and
    writes its samples with w and the equation residual.
    """
    n = config.n
    summary: Dict[str, Any] = {"command": "shrinker", "kind": kind, "config": config.to_dict()}
    if kind == "cap":
        if a is None:
            raise UsageError("shrinker cap needs --a")
        leaf = shoot_leaf(a, n, y_min=y_min, M=config.cap_extent_M, h=config.ode_step)
        wd = w_diagnostic(leaf)
        summary.update(
            {
                "a": a,
                "y_star": leaf.y_star,
                "y_Ma": leaf.y_Ma,
                "turned": leaf.turned,
                "tip_limit": wd.tip_limit,
                "sup_residual": leaf.sup_residual,
                "w_ode_residual": wd.ode_residual,
                "w_min": float(np.min(wd.w)) if wd.w.size else None,
                "w_clipped_at": wd.clipped_at,
                "lower_bound_margin": cap_lower_bound_margin(leaf),
            }
        )
        if a >= 20 and leaf.y[0] <= 0:
            summary["expansions"] = asdict(fit_expansions(leaf))
        lines = [
            f"Cap a={a:g} (n={n}): y* = {leaf.y_star:.6g}, turned = {leaf.turned}",
            f"  w tip limit = {_fmt(wd.tip_limit)}, "
            f"sup residual = {_fmt(leaf.sup_residual, '.3e')}",
        ]
    else:
        if b is None:
            raise UsageError("shrinker trumpet needs --b")
        top = config.trumpet_Y if Y is None else Y
        leaf = solve_trumpet(b, n, (y_min, top))
        wd = w_diagnostic(leaf)
        far = wd.y >= 2.0 * math.sqrt(2.0)
        summary.update(
            {
                "b": b,
                "Y": top,
                "y_star": leaf.y_star,
                "sup_residual": leaf.sup_residual,
                "w_ode_residual": wd.ode_residual,
                "w_min": float(np.min(wd.w[far])) if np.any(far) else None,
                "w_scaled_excess": (
                    float(np.max((wd.w[far] - 2.0) * wd.y[far] ** 2)) if np.any(far) else None
                ),
            }
        )
        lines = [
            f"Trumpet b={b:g} (n={n}) on [{y_min:g}, {top:g}]",
            f"  u({leaf.y[0]:g}) = {leaf.u[0]:.6g}, "
            f"sup residual = {_fmt(leaf.sup_residual, '.3e')}",
        ]
    store.write_series_csv(os.path.join(out_dir, "leaf.csv"), leaf.to_columns(), LEAF_COLUMNS)
    _finish(out_dir, summary, lines, json_output, quiet)


def handle_foliate(
    config: LabConfig,
    out_dir: str,
    refine: bool = False,
    json_output: bool = False,
    quiet: bool = False,
) -> None:
    """
    Builds the atlas and runs the calibration, Jacobi and squeeze checks.
    With `refine` the inner calibration is repeated on a refined atlas.
    """
    n = config.n
    y0 = config.entry_height
    a_grid = default_a_grid(y0, config.a_max, config.a_ratio)
    b_grid = default_b_grid(config.b_min, config.b_max, config.b_count)
    foliation = build(
        n,
        a_grid,
        b_grid,
        y0,
        h=config.ode_step,
        cap_extent=config.cap_extent_M,
        trumpet_Y=config.trumpet_Y,
    )
    c = foliation.cylinder_radius
    band = (y0 + 0.5, y0 + 2.5)
    inside = calibration_divergence(foliation, band, (0.3 * c, 0.8 * c))
    calibration: Dict[str, Any] = {
        "inside": {"max_divergence": inside.max_divergence, "max_scaled": inside.max_scaled}
    }
    try:
        outside = calibration_divergence(foliation, band, (1.2 * c, 1.6 * c))
        calibration["outside"] = {
            "max_divergence": outside.max_divergence,
            "max_scaled": outside.max_scaled,
        }
    except DomainError as exc:
        logger.warning("outer calibration region skipped: %s", exc)
        calibration["outside"] = None

    refinement: Optional[Dict[str, Any]] = None
    if refine:
        study = refinement_study(
            foliation,
            band,
            (0.3 * c, 0.8 * c),
            h=config.ode_step,
            cap_extent=config.cap_extent_M,
            trumpet_Y=config.trumpet_Y,
        )
        refinement = asdict(study)

    try:
        field_squeeze: Optional[Dict[str, Any]] = asdict(
            squeeze_field(foliation, (max(10.0, y0), 50.0))
        )
    except DomainError as exc:
        logger.warning("field squeeze skipped: %s", exc)
        field_squeeze = None

    a_mid = float(a_grid[a_grid.size // 2])
    variation = normal_variation(foliation, a_mid, a_mid / 200.0, h=config.ode_step)
    squeeze = squeeze_check(foliation, config.delta0)
    summary = {
        "command": "foliate",
        "config": config.to_dict(),
        "atlas": foliation.manifest(),
        "calibration": calibration,
        "refinement": refinement,
        "normal_variation": {
            "a": variation.a,
            "tip_value": variation.tip_value,
            "min_V": float(np.min(variation.V)),
            "jacobi_residual": variation.jacobi_residual,
        },
        "squeeze": asdict(squeeze),
        "squeeze_field": field_squeeze,
        "supersolution_margin": supersolution_margin(foliation),
    }
    store.write_series_csv(os.path.join(out_dir, "field.csv"), inside.samples(), FIELD_COLUMNS)
    store.write_sampled_csv(
        os.path.join(out_dir, "normal_variation.csv"), variation.y, variation.V
    )
    lines = [
        f"Foliation n={n}, y0={y0:g}: {len(foliation.caps)} caps, "
        f"{len(foliation.trumpets)} trumpets, no crossings",
        f"  max |div| inside = {inside.max_divergence:.3e}",
        f"  V(tip) at a={a_mid:.4g}: {variation.tip_value:.4f}",
        f"  squeeze violations: {squeeze.violations} of {squeeze.samples}",
    ]
    if refinement is not None:
        lines.append(f"  refinement ratio: {refinement['ratio']:.2f}")
    _finish(out_dir, summary, lines, json_output, quiet)


def _initial_state(config: LabConfig, ansatz: str) -> FlowState:
    n = config.n
    if ansatz == "oval":
        return build_ansatz(AnsatzSpec.from_config(config))
    if ansatz == "sphere":
        curve = sphere_curve(sphere_radius(n), n, config.nodes)
    elif ansatz == "cylinder":
        half = math.sqrt(2.0 * abs(config.tau0))
        curve = capped_cylinder_curve(cylinder_radius(n), half, n, config.nodes)
    else:
        raise UsageError(f"unknown ansatz '{ansatz}'")
    return FlowState(config.tau0, curve, rescaled=True, symmetric=True)


def _run_flow(config: LabConfig, state: FlowState, unrescaled: bool) -> FlowRun:
    """Evolves to tau1 and returns the run in rescaled variables."""
    if not unrescaled:
        _, run = evolve(
            state, config.tau1, cfl=config.cfl, record_every=config.record_every,
            max_steps=config.steps,
        )
        return run
    # one segment per record, so the records are evenly spaced in τ
    current = unrescale_state(state)
    records = max(1, int(math.ceil((config.tau1 - config.tau0) / config.record_every)))
    targets = np.linspace(config.tau0, config.tau1, records + 1)[1:]
    kept = [state]
    steps = rejected = 0
    for tau in targets:
        left = None if config.steps is None else config.steps - steps
        if left is not None and left <= 0:
            logger.warning("step cap reached at τ=%.5g", kept[-1].time)
            break
        t_end = -math.exp(-tau)
        current, segment = evolve(
            current, t_end, cfl=config.cfl, record_every=t_end - current.time, max_steps=left
        )
        steps += segment.steps
        rejected += segment.rejected
        kept.append(rescale_state(current))
    run = FlowRun.from_curves([s.time for s in kept], [s.curve for s in kept])
    run.steps, run.rejected = steps, rejected
    return run


def handle_evolve(
    config: LabConfig,
    out_dir: str,
    ansatz: str = "oval",
    unrescaled: bool = False,
    svg: bool = False,
    json_output: bool = False,
    quiet: bool = False,
) -> None:
    """
    Evolves an initial surface from tau0 to tau1 and stores the run.

    Unrescaled runs step t from −e^{−τ0} to −e^{−τ1}; their records are
    converted to rescaled variables before anything is stored.
    """
    n = config.n
    state = _initial_state(config, ansatz)
    run = _run_flow(config, state, unrescaled)
    count = len(run.times)

    nan = [float("nan")] * count
    spectral: Dict[str, List[float]] = {
        key: list(nan)
        for key in ("alpha", "alpha_wide", "Vplus", "Vzero", "Vminus", "E1", "E2", "E3")
    }
    law: Dict[str, Any] = {"alpha_law": None, "truncation_bias": None, "modes": None}
    try:
        splits, errors = _spectral_of(run.times, run.curves, n, _grid(config))
        spectral["alpha"] = [s.alpha for s in splits]
        spectral["alpha_wide"] = [s.alpha_wide for s in splits]
        spectral["Vplus"] = [s.V_plus for s in splits]
        spectral["Vzero"] = [s.V_zero for s in splits]
        spectral["Vminus"] = [s.V_minus for s in splits]
        spectral["E1"] = [e.E1 for e in errors]
        spectral["E2"] = [e.E2 for e in errors]
        spectral["E3"] = [e.E3 for e in errors]
        law = _alpha_law(run.times, splits)
    except OvalLabError as exc:
        logger.warning("spectral columns left empty: %s", exc)

    diag = run.diagnostics
    columns = {
        "tau": run.times,
        "dbar": [d.dbar for d in diag],
        "Hmax": [d.Hmax for d in diag],
        "Htip": [d.Htip for d in diag],
        "area": [d.area for d in diag],
        "Rmax": [d.Rmax for d in diag],
        "huisken": [d.huisken for d in diag],
        "minPy": [d.min_Py for d in diag],
        "minQy": [d.min_Qy for d in diag],
        "u0": [d.u0 for d in diag],
        **spectral,
    }
    store.write_series_csv(os.path.join(out_dir, "evolve.csv"), columns, EVOLVE_COLUMNS)
    store.save_snapshots(out_dir, run.times, [(c.y, c.r) for c in run.curves], n)
    if svg:
        from oval_lab_app import plotting

        plotting.plot_profiles(out_dir, run.times, [(c.y, c.r) for c in run.curves])
        if np.all(np.isfinite(spectral["alpha"])):
            plotting.plot_alpha(out_dir, run.times, spectral["alpha"])

    summary = {
        "command": "evolve",
        "config": config.to_dict(),
        "ansatz": ansatz,
        "unrescaled": unrescaled,
        "steps": run.steps,
        "rejected": run.rejected,
        "records": count,
        "initial": diag[0].to_dict(),
        "final": diag[-1].to_dict(),
        "argmax_at_tip": all(d.argmax_at_tip for d in diag),
        **law,
    }
    lines = [
        f"Evolved {ansatz} (n={n}) from τ={run.times[0]:g} to τ={run.times[-1]:g}: "
        f"{run.steps} steps, {run.rejected} rejected, {count} records",
        f"  d̄ {diag[0].dbar:.5g} -> {diag[-1].dbar:.5g}, "
        f"H̄max {diag[0].Hmax:.5g} -> {diag[-1].Hmax:.5g}",
    ]
    _finish(out_dir, summary, lines, json_output, quiet)


def handle_spectral(
    config: LabConfig, out_dir: str, run_dir: str, json_output: bool = False, quiet: bool = False
) -> None:
    """Spectral split, error terms and the α law of a stored run."""
    times, curves, n = _load_run_curves(run_dir)
    splits, errors = _spectral_of(times, curves, n, _grid(config))
    columns = {
        "tau": times,
        "Vplus": [s.V_plus for s in splits],
        "Vzero": [s.V_zero for s in splits],
        "Vminus": [s.V_minus for s in splits],
        "alpha": [s.alpha for s in splits],
        "alpha_wide": [s.alpha_wide for s in splits],
        "E1": [e.E1 for e in errors],
        "E2": [e.E2 for e in errors],
        "E3": [e.E3 for e in errors],
    }
    store.write_series_csv(os.path.join(out_dir, "spectral.csv"), columns, SPECTRAL_COLUMNS)
    law = _alpha_law(times, splits)
    summary = {
        "command": "spectral",
        "config": config.to_dict(),
        "from": run_dir,
        "source": _run_source(run_dir, len(times)),
        "records": len(times),
        "grid": _grid(config).to_json(),
        "last": {**splits[-1].to_dict(), **errors[-1].to_dict()},
        **law,
    }
    fit = law["alpha_law"]
    lines = [
        f"Spectral split of {len(times)} records from {run_dir}",
        f"  α(τ={times[-1]:g}) = {splits[-1].alpha:.6g}",
        f"  −4τ|α| = {_fmt(fit['alpha_fit'] if fit else None, '.4f')}, "
        f"|α|'/α² = {_fmt(fit['slope_check'] if fit else None, '.4f')}",
        f"  truncation bias α/α_wide = {_fmt(law['truncation_bias'], '.4f')}",
    ]
    _finish(out_dir, summary, lines, json_output, quiet)


def _stored_huisken_drift(run_dir: str, values: Sequence[float]) -> Optional[float]:
    """max |ℋ − the huisken column of evolve.csv|, None without a matching column."""
    path = os.path.join(run_dir, "evolve.csv")
    if not os.path.exists(path):
        return None
    stored = store.read_series_csv(path).get("huisken")
    if stored is None or stored.size != len(values):
        logger.warning("%s does not match the stored snapshots", path)
        return None
    return float(np.max(np.abs(stored - np.asarray(values))))


def handle_huisken(
    config: LabConfig,
    out_dir: str,
    run_dir: str,
    inner_outer: Optional[float] = None,
    json_output: bool = False,
    quiet: bool = False,
) -> None:
    """ℋ along a stored run, its monotonicity and the optional inner-outer ratios."""
    times, curves, n = _load_run_curves(run_dir)
    values = [huisken_curve(c.y, c.r, n) for c in curves]
    losses = [dissipation(c, mean_curvature(c)) for c in curves]
    report = monotonicity_series(times, values, losses)
    ratio_grad = [float("nan")] * len(times)
    ratio_mass = [float("nan")] * len(times)
    checks: List[Dict[str, Any]] = []
    if inner_outer is not None:
        grid = _grid(config)
        for k, (curve, value) in enumerate(zip(curves, values)):
            u = graph_samples(curve, grid, symmetric=True)
            try:
                check = inner_outer_check(u, grid, n, inner_outer, config.delta0, value)
            except HypothesisViolation as exc:
                logger.warning("τ=%.5g skipped: %s", times[k], exc)
                continue
            ratio_grad[k], ratio_mass[k] = check.ratio_grad, check.ratio_mass
            checks.append(check.to_dict())
    columns = {
        "tau": times,
        "H": values,
        "dHdtau": report.rate,
        "ratio_grad": ratio_grad,
        "ratio_mass": ratio_mass,
    }
    store.write_series_csv(os.path.join(out_dir, "huisken.csv"), columns, HUISKEN_COLUMNS)
    summary = {
        "command": "huisken",
        "config": config.to_dict(),
        "from": run_dir,
        "source": _run_source(run_dir, len(times)),
        "stored_drift": _stored_huisken_drift(run_dir, values),
        "cylinder": cylinder_huisken(n),
        "max_value": float(np.max(values)),
        "max_rate": report.max_rate,
        "max_mismatch": report.max_mismatch,
        "monotone": report.is_monotone(),
        "inner_outer": checks or None,
    }
    lines = [
        f"Huisken functional over {len(times)} records (cylinder {cylinder_huisken(n):.6f})",
        f"  ℋ {values[0]:.6f} -> {values[-1]:.6f}, max dℋ/dτ = {report.max_rate:.3e}",
    ]
    if checks:
        lines.append(
            f"  inner-outer L={inner_outer:g}: max ratios "
            f"{np.nanmax(ratio_grad):.4g} (gradient), {np.nanmax(ratio_mass):.4g} (mass)"
        )
    _finish(out_dir, summary, lines, json_output, quiet)


def handle_verify(
    config: LabConfig,
    out_dir: str,
    run_dir: str,
    barrier: bool = True,
    strict: bool = False,
    json_output: bool = False,
    quiet: bool = False,
) -> None:
    """
    Region reports, global laws, the monotonicity suite, the α law and the
    inner-outer ratios of a stored run, with pass/fail per criterion. A
    check that cannot be evaluated (for instance an under-resolved tip)
    fails instead of aborting the others. Only the four charts are held to
    their initial errors.
    """
    times, curves, n = _load_run_curves(run_dir)
    run = FlowRun.from_curves(times, curves)
    grid = _grid(config)
    bowl = solve_bowl(n, config.rho_max, config.bowl_step)
    checks = [
        ("parabolic", lambda: verify_parabolic(run)),
        ("intermediate", lambda: verify_intermediate(run, L=config.L0, barrier=barrier)),
        ("tip", lambda: verify_tip(run, bowl, tip_window(times[0], config.tip_rho))),
        ("global", lambda: verify_global(run)),
        ("monotonicity", lambda: verify_monotonicity(run)),
        ("alpha", lambda: verify_alpha(run, grid)),
        ("inner_outer", lambda: verify_inner_outer(run, grid, delta0=config.delta0)),
    ]
    reports: List[RegionReport] = []
    failed_regions: Dict[str, str] = {}
    for region, compute in checks:
        try:
            reports.append(compute())
        except OvalLabError as exc:
            logger.warning("%s region not evaluated: %s", region, exc)
            failed_regions[region] = str(exc)
    baseline = [
        RegionReport(rep.region, float(rep.errors[0]), rep.tau[:1], rep.errors[:1])
        for rep in reports
        if rep.region in CHART_REGIONS
    ]
    verdict = acceptance(reports, n, baseline)
    for region in failed_regions:
        verdict[region] = False
    passed = all(verdict.values())
    summary = {
        "command": "verify",
        "config": config.to_dict(),
        "from": run_dir,
        "source": _run_source(run_dir, len(times)),
        "regions": [rep.to_dict() for rep in reports],
        "not_evaluated": failed_regions,
        "acceptance": verdict,
        "passed": passed,
    }
    lines = [f"Verification of {len(times)} records from {run_dir}"]
    for rep in reports:
        lines.append(
            f"  {rep.region:<12} sup error {rep.sup_error:.4g} (growth {rep.growth():.3g})"
        )
    for region, msg in failed_regions.items():
        lines.append(f"  {region:<12} not evaluated: {msg}")
    lines.append("  " + ", ".join(f"{k}={'pass' if v else 'FAIL'}" for k, v in verdict.items()))
    _finish(out_dir, summary, lines, json_output, quiet)
    if strict and not passed:
        sys.exit(2)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _configure_logging(quiet: bool, verbose: bool) -> None:
    level = logging.ERROR if quiet else logging.INFO if verbose else logging.WARNING
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def main(argv: Optional[Sequence[str]] = None) -> None:
    """
    The main entry point for the command-line interface.

    Sets up the argument parser, merges the configuration file with the
    flags, and dispatches to the handler of the chosen command.
    """
    parser = _Parser(
        description="A numerical laboratory for ancient ovals in mean curvature flow.",
        formatter_class=argparse.RawTextHelpFormatter,
    )
    parser.add_argument("--n", type=int, help="Surface dimension (overrides the configuration).")
    parser.add_argument(
        "--out",
        default="oval_lab_out",
        metavar="DIR",
        help="Output directory (created if missing).",
    )
    parser.add_argument("--config", metavar="FILE", help="JSON configuration file.")
    parser.add_argument("--json", action="store_true", help="Print the summary as JSON.")
    parser.add_argument("--quiet", action="store_true", help="Reduce non-essential output.")
    parser.add_argument("--verbose", action="store_true", help="Log progress to stderr.")

    subparsers = parser.add_subparsers(
        dest="command",
        required=True,
        help="The computation to run. Available commands are:",
    )

    # --- Bowl Command ---
    bowl_parser = subparsers.add_parser("bowl", help="Solve the translating bowl soliton.")
    bowl_parser.add_argument("--rho-max", type=float, help="Extent of the solution in ρ.")
    bowl_parser.add_argument("--step", type=float, help="RK4 step in ρ.")

    # --- Shrinker Command ---
    shrinker_parser = subparsers.add_parser("shrinker", help="Solve one self-shrinker leaf.")
    shrinker_sub = shrinker_parser.add_subparsers(dest="kind", required=True, help="Leaf family")
    cap_parser = shrinker_sub.add_parser("cap", help="Cap Σ_a through the axis point (a, 0).")
    cap_parser.add_argument("--a", type=float, required=True, help="Tip height.")
    cap_parser.add_argument("--y-min", type=float, default=0.0, help="Lowest height (default 0).")
    trumpet_parser = shrinker_sub.add_parser("trumpet", help="Trumpet Σ̃_b asymptotic to r = b·y.")
    trumpet_parser.add_argument("--b", type=float, required=True, help="Cone slope.")
    trumpet_parser.add_argument(
        "--y-min", type=float, default=0.0, help="Lowest height (default 0)."
    )
    trumpet_parser.add_argument("--Y", type=float, help="Seed height (at least 100).")

    # --- Foliate Command ---
    foliate_parser = subparsers.add_parser("foliate", help="Build and check the leaf atlas.")
    foliate_parser.add_argument("--y0", type=float, help="Entry height.")
    foliate_parser.add_argument("--a-max", type=float, help="Largest cap height.")
    foliate_parser.add_argument("--a-ratio", type=float, help="Ratio between cap heights.")
    foliate_parser.add_argument("--b-count", type=int, help="Number of trumpets.")
    foliate_parser.add_argument(
        "--refine", action="store_true", help="Repeat the calibration on a refined atlas."
    )

    # --- Evolve Command ---
    evolve_parser = subparsers.add_parser("evolve", help="Run the rescaled flow and store it.")
    evolve_parser.add_argument("--tau0", type=float, help="Initial rescaled time.")
    evolve_parser.add_argument("--tau1", type=float, help="Final rescaled time.")
    evolve_parser.add_argument("--nodes", type=int, help="Curve nodes.")
    evolve_parser.add_argument("--steps", type=int, help="Cap on accepted time steps.")
    evolve_parser.add_argument("--record-every", type=float, help="τ between recorded states.")
    evolve_parser.add_argument(
        "--ansatz",
        choices=["oval", "sphere", "cylinder"],
        default="oval",
        help="Initial surface (default: oval).",
    )
    evolve_parser.add_argument(
        "--unrescaled", action="store_true", help="Step the unrescaled flow in t instead."
    )
    evolve_parser.add_argument("--svg", action="store_true", help="Write SVG figures.")

    # --- Post-processing Commands ---
    for name, text in (
        ("spectral", "Spectral split and α law of a stored run."),
        ("huisken", "Huisken functional along a stored run."),
        ("verify", "Region-by-region verification of a stored run."),
    ):
        sub = subparsers.add_parser(name, help=text)
        sub.add_argument(
            "--from", dest="run_dir", required=True, metavar="RUN_DIR", help="Output of `evolve`."
        )
        if name == "huisken":
            sub.add_argument(
                "--inner-outer",
                type=float,
                metavar="L",
                help="Also check the inner-outer estimate.",
            )
        if name == "verify":
            sub.add_argument(
                "--no-barrier", action="store_true", help="Skip the cap lower-barrier fit."
            )
            sub.add_argument(
                "--strict", action="store_true", help="Exit with 2 when a criterion fails."
            )

    args = parser.parse_args(argv)
    _configure_logging(args.quiet, args.verbose)

    try:
        if args.config and not os.path.exists(args.config):
            raise UsageError(f"configuration file '{args.config}' not found")
        config = override(load_config(args.config), n=args.n)
        if args.command == "foliate":
            config = override(
                config, y0=args.y0, a_max=args.a_max, a_ratio=args.a_ratio, b_count=args.b_count
            )
        elif args.command == "evolve":
            config = override(
                config,
                tau0=args.tau0,
                tau1=args.tau1,
                nodes=args.nodes,
                steps=args.steps,
                record_every=args.record_every,
            )

        # Dispatch the command to its corresponding handler function.
        if args.command == "bowl":
            handle_bowl(
                config, args.out, rho_max=args.rho_max, step=args.step,
                json_output=args.json, quiet=args.quiet,
            )
        elif args.command == "shrinker":
            handle_shrinker(
                config,
                args.out,
                args.kind,
                a=getattr(args, "a", None),
                b=getattr(args, "b", None),
                y_min=args.y_min,
                Y=getattr(args, "Y", None),
                json_output=args.json,
                quiet=args.quiet,
            )
        elif args.command == "foliate":
            handle_foliate(
                config, args.out, refine=args.refine, json_output=args.json, quiet=args.quiet
            )
        elif args.command == "evolve":
            handle_evolve(
                config,
                args.out,
                ansatz=args.ansatz,
                unrescaled=args.unrescaled,
                svg=args.svg,
                json_output=args.json,
                quiet=args.quiet,
            )
        elif args.command == "spectral":
            handle_spectral(config, args.out, args.run_dir, json_output=args.json, quiet=args.quiet)
        elif args.command == "huisken":
            handle_huisken(
                config, args.out, args.run_dir, inner_outer=args.inner_outer,
                json_output=args.json, quiet=args.quiet,
            )
        elif args.command == "verify":
            handle_verify(
                config, args.out, args.run_dir, barrier=not args.no_barrier,
                strict=args.strict, json_output=args.json, quiet=args.quiet,
            )
    except OvalLabError as exc:
        _fail(str(exc), exc.exit_code, args.json)
    except FileNotFoundError as exc:
        _fail(str(exc), 2, args.json)


if __name__ == "__main__":
    main()
