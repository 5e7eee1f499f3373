"""Acceptance criteria 1 to 11.  Each test appends one PASS/FAIL line to the
terminal summary and fails if any of its checks fails."""

import math

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from strip_control.control import (ControlModel, LRSchedule, cost_constants, empirical_observability_constant,
                                   h_conditions_check, hum_control, lr_synthesize, stage_norms)
from strip_control.domain import StripDomain, full_lattice
from strip_control.geometry import (Box, BoxUnion, Periodic, embed_thick, estimate_thickness, full_space,
                                    sampled_min_ratio, stripes, reflect_extend)
from strip_control.heat import HeatState, KernelParams, cube_for, dissipation_check, kernel_cube_series, kernel_strip
from strip_control.necessity import BOUNDED, DIVERGENT, dirichlet_lower_witness, thick_functional_bound, \
    thickness_equivalence_probe
from strip_control.spectral import calibrate_K, empirical_spectral_constant

DOM = StripDomain(2, 0.5, "dirichlet", 8.0, 6, 32, 1 / 16)


class Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.checks = []

    def check(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))

    def finish(self):
        ok = all(c[1] for c in self.checks)
        parts = "; ".join(f"{n} {'ok' if good else 'FAILED'}{' (' + d + ')' if d else ''}"
                          for n, good, d in self.checks)
        line = f"criterion {self.number:2d} {'PASS' if ok else 'FAIL'}: {self.title}: {parts}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        failed = [n for n, good, _ in self.checks if not good]
        assert not failed, f"criterion {self.number} failed checks: {failed}"


def unit(g):
    return HeatState(g.lattice, g.coefficients / g.norm())


def fit_line(x, y):
    slope, icept = np.polyfit(x, y, 1)
    resid = y - (slope * x + icept)
    r2 = 1 - np.sum(resid ** 2) / np.sum((y - y.mean()) ** 2)
    return float(slope), float(r2)


# ---------------------------------------------------------------------------

def test_criterion_01_constant_pipeline():
    c = Criterion(1, "cost constants reproduce the displayed bound")
    rng = np.random.default_rng(2024)
    worst, c1_min = 0.0, math.inf
    d = 2
    for _ in range(50):
        gamma = rng.uniform(1e-3, 1.0)
        a = rng.uniform(0.1, 10.0, d)
        K = math.e + rng.exponential(3.0)
        T = 10 ** rng.uniform(-2, 2)
        rep = cost_constants(gamma, tuple(a), d, K, T)
        base = math.log((2 * K) ** d / gamma)
        s = a.sum() + d
        oracle = 12 * math.sqrt(2) * K * s * base + (48 * K) ** 2 * s ** 2 * base ** 2 / (2 * T)
        worst = max(worst, abs(rep.log_CT - oracle) / abs(oracle))
        c1_min = min(c1_min, rep.c1)
    c.check("log-space identity", worst <= 1e-12, f"max rel err {worst:.2e}")
    c.check("c1 >= 3e", c1_min >= 3 * math.e, f"min c1 {c1_min:.4g}")
    c.finish()


def test_criterion_02_h_conditions():
    c = Criterion(2, "h conditions at tau0")
    c1s = np.concatenate([[3 * math.e], np.geomspace(3 * math.e, 1e6, 60),
                          [cost_constants(1.0, (1.0, 1.0), 2).c1]])
    cap = 1 / (216 * math.e ** 3)
    all_ok, worst_h1 = True, 0.0
    for c1 in c1s:
        h1, h2, ok = h_conditions_check(c1, 2 ** 2.5 * 3 * c1)
        all_ok &= ok and h2 >= 1
        worst_h1 = max(worst_h1, h1)
    c.check("ok at tau0", all_ok, f"{len(c1s)} values of c1")
    c.check("h1 <= 1/(216 e^3)", worst_h1 <= cap * (1 + 1e-12), f"max h1 {worst_h1:.3e} vs {cap:.3e}")
    c.finish()


def test_criterion_03_dissipation():
    c = Criterion(3, "dissipation estimate")
    lat = full_lattice(DOM)
    mu = lat.energies
    rng = np.random.default_rng(3)
    times = np.geomspace(0.01, 3.0, 10)
    holds, worst = True, 0.0
    for _ in range(1000):
        g = HeatState(lat, rng.standard_normal(len(lat)))
        E = rng.uniform(0.5, mu.max())
        for t in times:
            lhs, rhs, ok = dissipation_check(g, E, t)
            holds &= ok
            terms = [v * math.exp(-t * m) for v, m in zip(g.coefficients, mu) if m > E]
            top = max(map(abs, terms), default=0.0)
            # scaled sum of squares so tiny tails do not go subnormal
            ref = top * math.sqrt(math.fsum((v / top) ** 2 for v in terms)) if top > 0 else 0.0
            worst = max(worst, abs(lhs - ref) / max(ref, 1e-300))
    c.check("holds on 1000 states x 10 times", holds)
    c.check("lhs exact", worst <= 1e-12, f"max rel err {worst:.1e}")
    idx = int(np.argsort(mu)[40])
    coeffs = np.zeros(len(lat))
    coeffs[idx] = 1.0
    delta = 1e-4
    lhs, rhs, _ = dissipation_check(HeatState(lat, coeffs), mu[idx] - delta, 1.0)
    c.check("tight at delta=1e-4", abs(lhs / rhs - 1) <= 1e-3, f"ratio {lhs / rhs:.6f}")
    c.finish()


SPEC_DOM = StripDomain(2, 0.5, "dirichlet", 8.0, 16, 64, 1 / 32)
ENERGIES = np.linspace(1.0, 8.0, 15) ** 2


def spectral_slope(dom):
    S = stripes(dom)
    logs = np.array([math.log(empirical_spectral_constant(dom, S, E)) for E in ENERGIES])
    slope, r2 = fit_line(np.sqrt(ENERGIES), logs)
    return slope, r2, logs


def test_criterion_04_spectral_scaling():
    c = Criterion(4, "spectral inequality scaling on stripes")
    slope, r2, logs = spectral_slope(SPEC_DOM)
    c.check("slope >= 0", slope >= 0, f"slope {slope:.4f}")
    c.check("R^2 >= 0.9", r2 >= 0.9, f"R^2 {r2:.4f}")
    s_h, _, _ = spectral_slope(SPEC_DOM.with_(h=SPEC_DOM.h / 2))
    s_x, _, _ = spectral_slope(SPEC_DOM.with_(X=2 * SPEC_DOM.X, M_max=2 * SPEC_DOM.M_max))
    c.check("stable under h/2", abs(s_h / slope - 1) <= 0.2, f"slope {s_h:.4f}")
    c.check("stable under 2X", abs(s_x / slope - 1) <= 0.2, f"slope {s_x:.4f}")
    K = calibrate_K(list(logs), list(ENERGIES), 0.5, (SPEC_DOM.width, 2.0), 2)
    c.check("calibrated K finite", math.isfinite(K), f"K {K:.6g}")
    c.finish()


def test_criterion_05_hum():
    c = Criterion(5, "HUM correctness")
    T = 1.0
    full = ControlModel(DOM, full_space(2))
    u0 = unit(HeatState.random(DOM, np.random.default_rng(5)))
    ctrl, _, _ = hum_control(u0, T, None, DOM, tol=1e-12, model=full)
    mu = full.mu
    oracle = math.sqrt(np.sum(u0.coefficients ** 2 * np.exp(-2 * T * mu) * 2 * mu / -np.expm1(-2 * T * mu)))
    rel = abs(ctrl.norm - oracle) / oracle
    c.check("full region matches diagonal oracle", rel <= 1e-6, f"rel err {rel:.1e}")

    model = ControlModel(DOM, stripes(DOM))
    ctrl, final, rep = hum_control(u0, T, None, DOM, tol=1e-10, model=model)
    c.check("stripes residual", final.norm() <= 1e-6 * u0.norm(), f"{final.norm():.1e}")
    energies = [4.0, 16.0, 36.0]
    logs = [math.log(empirical_spectral_constant(DOM, stripes(DOM), E)) for E in energies]
    K = calibrate_K(logs, energies, 0.5, (DOM.width, 2.0), 2)
    bound = cost_constants(0.5, (DOM.width, 2.0), 2, K, T)
    margin = bound.log_CT - math.log(ctrl.norm)
    c.check("cost below bound", margin > 0, f"K {K:.4g}, cost {ctrl.norm:.3g}, log margin {margin:.4g}")
    c.finish()


def test_criterion_06_duality():
    c = Criterion(6, "HUM cost below sqrt of observability constant")
    dom = StripDomain(2, 0.5, "dirichlet", 8.0, 4, 16, 1 / 16)
    sets = [stripes(dom), stripes(dom, 0.5, 2.0), stripes(dom, 1.5, 3.0, 0.5), full_space(2)]
    worst, count = 0.0, 0
    for k, S in enumerate(sets):
        model = ControlModel(dom, S)
        for j, T in enumerate([0.25, 0.5, 1.0, 1.5, 2.0]):
            C = empirical_observability_constant(T, None, dom, model=model)
            u0 = unit(HeatState.random(dom, np.random.default_rng(100 * k + j)))
            _, _, rep = hum_control(u0, T, None, dom, tol=1e-10, model=model)
            worst = max(worst, rep.control_cost / math.sqrt(C))
            count += 1
    c.check(f"{count} scenarios", count == 20 and worst <= 1 + 1e-4, f"max cost/sqrt(C) {worst:.6f}")
    c.finish()


def test_criterion_07_lr():
    c = Criterion(7, "staged construction")
    T = 1.0
    model = ControlModel(DOM, stripes(DOM))
    u0 = unit(HeatState.random(DOM, np.random.default_rng(7)))
    _, trace, rep = lr_synthesize(u0, T, None, LRSchedule(), DOM, model=model)
    norms = stage_norms(u0, trace)
    c.check("stage norms strictly decrease", np.all(np.diff(norms) < 0))
    second = np.diff(np.log(norms), 2)
    c.check("stage norms log-convex", np.all(second >= 0), "second differences " +
            " ".join(f"{v:.3g}" for v in second))
    sched = LRSchedule(E0=float(model.mu.max()), k_max=0)
    _, trace1, _ = lr_synthesize(u0, T, None, sched, DOM, model=model)
    tau = sched.lengths(T)[0] / 2
    _, _, hum = hum_control(u0, tau, None, DOM, tol=1e-10, model=model)
    rel = abs(trace1[0].cost - hum.control_cost) / hum.control_cost
    c.check("single stage matches HUM", rel <= 1e-6, f"rel diff {rel:.1e}")
    c.finish()


def test_criterion_08_observability_under_doubling():
    c = Criterion(8, "observability constant under doubling of X")
    T = 1024.0
    box_C, stripe_C = [], []
    for X in (4.0, 8.0, 16.0, 32.0):
        dom = StripDomain(2, 0.5, "neumann", X, 2, 4, 1 / 16)
        box = BoxUnion([Box((0.0, -0.5), (dom.width, 0.5))])
        box_C.append(empirical_observability_constant(T, box, dom))
        stripe_C.append(empirical_observability_constant(T, stripes(dom, 0.5, 1.0), dom))
    box_r = [b / a for a, b in zip(box_C, box_C[1:])]
    stripe_r = [b / a for a, b in zip(stripe_C, stripe_C[1:])]
    c.check("box grows >= 1.5 per doubling", min(box_r) >= 1.5, "ratios " + " ".join(f"{r:.3f}" for r in box_r))
    c.check("stripes change < 5%", max(abs(r - 1) for r in stripe_r) < 0.05,
            "ratios " + " ".join(f"{r:.4f}" for r in stripe_r))
    c.finish()


def test_criterion_09_probe():
    c = Criterion(9, "thickness probe verdicts")
    dom = StripDomain(2, 0.5, "dirichlet", 32.0, 4, 16, 1 / 8)
    T, kappa = 1.0, 2.0
    thick = thickness_equivalence_probe(stripes(dom), T, kappa, 20, dom)
    bound = thick_functional_bound(0.5, (dom.width, 2.0), T)
    c.check("stripes bounded-consistent", thick.verdict == BOUNDED and np.all(thick.values <= bound),
            f"max {thick.values.max():.4g} vs bound {bound:.4g}")
    box = BoxUnion([Box((0.0, 0.0), (dom.width, 1.0))])
    sparse = thickness_equivalence_probe(box, T, kappa, 20, dom)
    tail = sparse.values[len(sparse.values) // 2:]
    c.check("box divergence-consistent", sparse.verdict == DIVERGENT and np.all(np.diff(tail) > 0),
            f"F from {sparse.values[0]:.4g} to {sparse.values[-1]:.4g}")
    c.finish()


def test_criterion_10_kernel_sandwich():
    c = Criterion(10, "kernel domination and witness")
    dom = StripDomain(2, 1.0, "dirichlet", 4.0, 4, 8, 1 / 8)
    xn = np.array([math.pi, 0.0])
    W = cube_for(xn, dom.L)
    rng = np.random.default_rng(10)
    n = 1000
    t = rng.uniform(0.01, 3.0, n)
    x = W.lo + rng.random((n, 2)) * W.side
    y = W.lo + rng.random((n, 2)) * W.side
    ks = np.array([kernel_strip(ti, xi, yi, dom) for ti, xi, yi in zip(t, x, y)])
    kc = np.array([kernel_cube_series(ti, xi, yi, W) for ti, xi, yi in zip(t, x, y)])
    c.check("strip kernel dominates cube kernel", np.all(ks >= kc - 1e-12), f"min gap {np.min(ks - kc):.2e}")
    wit = dirichlet_lower_witness(xn, 1.0, dom, KernelParams())
    c.check("witness below quadrature", wit.holds, f"{wit.value:.6e} <= {wit.quadrature:.6e}")
    exact = (2 / math.pi) ** 2 * math.exp(-8)
    c.check("witness value", abs(wit.value - exact) <= 1e-12 * exact, f"{wit.value:.10e}")
    c.finish()


def test_criterion_11_geometry():
    c = Criterion(11, "reflection extension and stripes thickness")
    W = DOM.width
    S = stripes(DOM, 0.75, 2.0) | Periodic(BoxUnion([Box((0.2, 0.0), (1.4, 1.0))]), (None, 3.0))
    a = (W, 2.0)
    cert = estimate_thickness(S, a, DOM, 0.25)
    ext = reflect_extend(S, DOM)
    rng = np.random.default_rng(11)
    centers = rng.uniform([-3 * W, -6.0], [3 * W, 6.0], (700, 2))
    # straddlers: the doubled box crosses a transverse boundary plane
    planes = rng.integers(-2, 3, 300) * W
    straddle = np.column_stack([planes + rng.uniform(-W, W, 300), rng.uniform(-6, 6, 300)])
    centers = np.vstack([centers, straddle])
    low, _ = sampled_min_ratio(ext, 2 * np.asarray(a), centers)
    target = cert.gamma_est / 4
    c.check("reflected set thick on 1000 boxes", low >= target * (1 - 1e-12),
            f"min ratio {low:.4f} vs gamma/4 {target:.4f}")
    _, found, ok = embed_thick(S, DOM, cert)
    emb_low, _ = sampled_min_ratio(_, found.a, centers)
    c.check("embedded set meets gamma/2^d", ok and emb_low >= target * (1 - 1e-12),
            f"certificate {found.gamma_est:.4f}, sampled {emb_low:.4f}")
    g = estimate_thickness(stripes(DOM), a, DOM, 0.25).gamma_est
    c.check("stripes gamma 1/2", g == 0.5, f"{g!r}")
    c.finish()
