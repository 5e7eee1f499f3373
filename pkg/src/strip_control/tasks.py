"""Task runners: each turns a Scenario into table rows, plot series and a summary."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import control, heat, necessity, spectral
from .domain import full_lattice
from .geometry import estimate_thickness, tensor_measures
from .scenario import ConfigError, Scenario


@dataclass
class TaskResult:
    columns: list
    rows: list
    plot_rows: list = field(default_factory=list)     # (series, x, y)
    xlabel: str = "x"
    ylabel: str = "y"
    summary: dict = field(default_factory=dict)


def _floats(value, name) -> list:
    vals = value if isinstance(value, list) else [value]
    try:
        return [float(v) for v in vals]
    except (TypeError, ValueError):
        raise ConfigError(f"field 'params.{name}' must be numeric") from None


def _side_vector(scen: Scenario, default_d: float = 2.0) -> tuple:
    dom = scen.domain
    a = scen.param("a", [dom.width] * (dom.d - 1) + [default_d])
    a = _floats(a, "a")
    if len(a) != dom.d:
        raise ConfigError(f"field 'params.a' must have {dom.d} entries")
    return tuple(a)


def _unit_random_state(scen: Scenario) -> heat.HeatState:
    rng = np.random.default_rng(scen.seed)
    g = heat.HeatState.random(scen.domain, rng, decay=float(scen.param("decay", 0.0)))
    return heat.HeatState(g.lattice, g.coefficients / g.norm())


def _bound_constants(scen: Scenario, T: float):
    if "gamma" not in scen.params:
        return None
    return control.cost_constants(float(scen.params["gamma"]), _side_vector(scen), scen.domain.d,
                                  float(scen.param("K", math.e)), T)


def run_thickness(scen: Scenario) -> TaskResult:
    dom = scen.domain
    S = scen.control_set()
    a = _side_vector(scen)
    step = float(scen.param("step", 0.25))
    cert = estimate_thickness(S, a, dom, step, region=str(scen.param("region", "strip")))
    cols = ["gamma_est", "certifying", "exhaustive", "step"] + \
        [f"a_{j + 1}" for j in range(dom.d)] + [f"center_{j + 1}" for j in range(dom.d)]
    row = (cert.gamma_est, cert.certifying, cert.exhaustive, cert.step) + cert.a + cert.worst_P.center
    # ratio profile along the strip through the worst parallelepiped
    ys = np.linspace(-dom.X + a[-1] / 2, dom.X - a[-1] / 2, 401)
    centers = [np.array([c]) for c in cert.worst_P.center[:-1]] + [ys]
    prof = tensor_measures(S, a, centers).reshape(-1) / float(np.prod(a))
    plot = [("ratio", float(x), float(y)) for x, y in zip(ys, prof)]
    return TaskResult(cols, [row], plot, "center x_d", "|S cap P| / |P|",
                      {"gamma_est": cert.gamma_est, "certifying": cert.certifying})


def run_spectral_check(scen: Scenario) -> TaskResult:
    dom = scen.domain
    S = scen.control_set()
    energies = _floats(scen.param("E", required=True), "E")
    trials = int(scen.param("trials", 1))
    gamma = scen.param("gamma")
    rows, plot = [], []
    for E in energies:
        lat_size = len(spectral.lattice_below_energy(dom, E))
        C = spectral.empirical_spectral_constant(dom, S, E, trials=trials, seed=scen.seed)
        theo = None
        if gamma is not None:
            theo = spectral.theoretical_spectral_constant(spectral.SpectralConstants(
                float(gamma), _side_vector(scen), dom.d, float(scen.param("K", math.e)), E=E))
        rows.append((E, math.sqrt(E), lat_size, C, math.log(C), theo))
        plot.append(("empirical", math.sqrt(E), math.log(C)))
    cols = ["E", "sqrt_E", "modes", "constant", "log_constant", "log_theoretical"]
    return TaskResult(cols, rows, plot, "sqrt(E)", "log constant")


def run_dissipation(scen: Scenario) -> TaskResult:
    dom = scen.domain
    E = float(scen.param("E", 4.0))
    times = _floats(scen.param("t", [0.1, 0.5, 1.0, 2.0]), "t")
    samples = int(scen.param("samples", 100))
    rng = np.random.default_rng(scen.seed)
    lat = full_lattice(dom)
    rows, worst = [], {}
    for s in range(samples):
        g = heat.HeatState(lat, rng.standard_normal(len(lat)))
        for t in times:
            lhs, rhs, ok = heat.dissipation_check(g, E, t)
            rows.append((s, t, lhs, rhs, ok))
            worst[t] = max(worst.get(t, 0.0), lhs / rhs)
    plot = [("max lhs/rhs", t, worst[t]) for t in times]
    return TaskResult(["sample", "t", "lhs", "rhs", "holds"], rows, plot, "t", "max lhs / rhs",
                      {"all_hold": all(r[-1] for r in rows)})


def run_cost_bound(scen: Scenario) -> TaskResult:
    gamma = float(scen.param("gamma", required=True))
    a = _side_vector(scen)
    K = float(scen.param("K", math.e))
    rows, plot = [], []
    for T in _floats(scen.param("T", 1.0), "T"):
        rep = control.cost_constants(gamma, a, scen.domain.d, K, T)
        h1, h2, ok = control.h_conditions_check(rep.c1, rep.tau0)
        rows.append(tuple(rep.as_row()[k] for k in control.CostReport.COLUMNS[:6]) + (h1, h2, ok))
        plot.append(("log C_T", 1.0 / T, rep.log_CT))
    cols = list(control.CostReport.COLUMNS[:6]) + ["h1_at_tau0", "h2_at_tau0", "h_conditions_ok"]
    return TaskResult(cols, rows, plot, "1/T", "log C_T bound")


def run_hum(scen: Scenario) -> TaskResult:
    dom = scen.domain
    S = scen.control_set()
    T = float(scen.param("T", 1.0))
    u0 = _unit_random_state(scen)
    model = control.ControlModel(dom, S)
    ctrl, final, rep = control.hum_control(u0, T, S, dom, tol=float(scen.param("tol", 1e-8)), model=model)
    bound = _bound_constants(scen, T)
    if bound is not None:
        rep = rep.merged(bound)
    row = tuple(rep.as_row()[k] for k in control.CostReport.COLUMNS) + (rep.margin,)
    plot = []
    for t in ctrl.times:
        c = ctrl.coefficients_at(t)
        plot.append(("||v(t)||_omega", float(t), math.sqrt(max(c @ model.G @ c, 0.0))))
    return TaskResult(list(control.CostReport.COLUMNS) + ["log_margin"], [row], plot,
                      "t", "control norm on omega")


def run_lr(scen: Scenario) -> TaskResult:
    dom = scen.domain
    S = scen.control_set()
    T = float(scen.param("T", 1.0))
    E0 = scen.param("E0")
    sched = control.LRSchedule(None if E0 is None else float(E0), int(scen.param("k_max", 4)))
    u0 = _unit_random_state(scen)
    ctrl, trace, rep = control.lr_synthesize(u0, T, S, sched, dom)
    rows = [(r.k, r.E, r.start, r.length, r.modes, r.cost, r.norm_after_control, r.norm_end) for r in trace]
    norms = control.stage_norms(u0, trace)
    plot = [("stage norm", float(k), float(math.log10(v)) if v > 0 else None) for k, v in enumerate(norms)]
    cols = ["stage", "E", "start", "length", "modes", "cost", "norm_after_control", "norm_end"]
    return TaskResult(cols, rows, plot, "stage", "log10 state norm",
                      {"total_cost": rep.control_cost, "final_residual": rep.final_residual,
                       "cost_ratio": control.summability_ratio(trace)})


def run_observability(scen: Scenario) -> TaskResult:
    dom = scen.domain
    S = scen.control_set()
    model = control.ControlModel(dom, S)
    rows, plot = [], []
    for T in _floats(scen.param("T", 1.0), "T"):
        C = control.empirical_observability_constant(T, S, dom, seed=scen.seed, model=model)
        rows.append((T, C, math.sqrt(C)))
        plot.append(("C", T, math.log(C) if C > 0 else None))
    return TaskResult(["T", "observability_constant", "sqrt_constant"], rows, plot, "T", "log C")


def run_necessity(scen: Scenario) -> TaskResult:
    dom = scen.domain
    S = scen.control_set()
    T = float(scen.param("T", 1.0))
    probe = necessity.thickness_equivalence_probe(
        S, T, float(scen.param("kappa", 2.0)), int(scen.param("n_max", 20)), dom,
        threshold=float(scen.param("threshold", 10.0)), step=float(scen.param("step", 0.25)))
    rows, plot = [], []
    for rec, ev in zip(probe.records, probe.evaluations):
        rows.append((rec.n, rec.Q.center[-1], rec.ratio, rec.sparse, ev.integral, ev.tail_bound,
                     ev.d_b, ev.value, probe.verdict))
        plot.append(("functional", float(rec.n), ev.value if math.isfinite(ev.value) else None))
    cols = ["n", "center_d", "ratio", "sparse", "integral", "tail_bound", "d_b", "functional", "verdict"]
    return TaskResult(cols, rows, plot, "n", "functional",
                      {"verdict": probe.verdict, "thick_bound": probe.bound})


def run_kernel_check(scen: Scenario) -> TaskResult:
    dom = scen.domain
    rng = np.random.default_rng(scen.seed)
    n = int(scen.param("samples", 1000))
    t_lo, t_hi = _floats(scen.param("t_range", [0.05, 2.0]), "t_range")
    center = np.array([math.pi * dom.L] * (dom.d - 1) + [0.0])
    W = heat.cube_for(center, dom.L)
    params = heat.KernelParams(int(scen.param("image_count", 8)), int(scen.param("series_count", 64)))
    ts = rng.uniform(t_lo, t_hi, n)
    xs = W.lo + rng.random((n, dom.d)) * W.side
    rows, plot = [], []
    for t, x in zip(ts, xs):
        ks = float(heat.kernel_strip(t, x, center, dom, params))
        kc = float(heat.kernel_cube_series(t, x, center, W, params))
        rows.append((t,) + tuple(x) + (ks, kc, ks >= kc))
    for t in np.linspace(t_lo, t_hi, 50):
        plot.append(("strip", float(t), float(heat.kernel_strip(t, center, center, dom, params))))
        plot.append(("cube", float(t), float(heat.kernel_cube_series(t, center, center, W, params))))
    summary = {"dominated": all(r[-1] for r in rows)}
    if dom.bc.value == "dirichlet":
        wit = necessity.dirichlet_lower_witness(center, float(scen.param("T", 1.0)), dom, params)
        summary.update(witness=wit.value, witness_quadrature=wit.quadrature, witness_holds=wit.holds)
    cols = ["t"] + [f"x_{j + 1}" for j in range(dom.d)] + ["kernel_strip", "kernel_cube", "dominated"]
    return TaskResult(cols, rows, plot, "t", "on-diagonal kernel", summary)


RUNNERS: dict[str, Callable[[Scenario], TaskResult]] = {
    "thickness": run_thickness,
    "spectral-check": run_spectral_check,
    "dissipation": run_dissipation,
    "cost-bound": run_cost_bound,
    "hum": run_hum,
    "lr": run_lr,
    "observability": run_observability,
    "necessity": run_necessity,
    "kernel-check": run_kernel_check,
}


def run_task(scen: Scenario) -> TaskResult:
    return RUNNERS[scen.task](scen)
