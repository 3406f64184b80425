"""Scenario configuration, check registry, report emission.

A run is driven by a JSON config (or the built-in "default-suite").  Every
scenario names a chart, optionally a symbol, a list of named checks and its
tolerances; a check produces one record comparing a route-A value against a
route-B value.  A record passes when

    |A - B| <= atol + rtol * (1 + |B|).

All randomness is derived from explicit seeds through counter-based streams,
so reports are byte-identical across runs (with timings suppressed) and
independent of scenario order.
"""

from __future__ import annotations

import fnmatch
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._version import __version__
from .charts import (
    CRModelChart,
    christoffel_at,
    heisenberg_chart,
    kohn_laplacian_at0,
    perturbed_chart,
    random_perturbation,
    tw_scalar_curvature,
)
from .errors import ConfigError
from .jets import Jet, random_jet
from .pipeline import (
    compose_amplitudes_closed,
    compose_amplitudes_sp,
    phase_rescale,
    qe_amplitude,
    random_amplitude,
    singularity_representation,
    szego_amplitude,
    toeplitz_b1_closed_form,
    toeplitz_b1_pipeline,
)
from .rng import spawn_rng
from .stationary import (
    apply_L,
    build_phase_data,
    expansion_coeffs,
    inverse_hessian_operator,
    mu2_vanishing_values,
    numeric_expansion_oracle,
)
from .symbols import (
    ClassicalSymbol,
    euler_check,
    identity_symbol,
    make_multiplication_symbol,
    p_operator_canonical,
    p_operator_geometric,
    random_classical_symbol,
    subprincipal_symbol,
    transform_density,
    transform_symbol_under_diffeo,
    xi_base,
)

# -- scenario model -------------------------------------------------------------------


@dataclass(frozen=True)
class ChartSpec:
    model: str = "heisenberg"
    n: int = 1
    jet_order: Optional[int] = None
    r_synth: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class SymbolSpec:
    kind: str = "identity"
    order_m: float = 0.0
    num_components: int = 2
    seed: int = 0


@dataclass(frozen=True)
class Scenario:
    name: str
    chart: ChartSpec
    symbol: Optional[SymbolSpec]
    checks: Tuple[str, ...]
    atol: float
    rtol: float
    params: Dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class CheckRecord:
    check_id: str
    route_a: complex
    route_b: complex
    abs_deviation: float
    rel_deviation: float
    tolerance: float
    passed: bool
    wall_time_s: float


@dataclass(frozen=True)
class ExpansionReport:
    scenario: str
    records: Tuple[CheckRecord, ...]
    environment: Dict[str, str]

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.records)


# -- config parsing --------------------------------------------------------------------

_TOP_KEYS = {"seed", "jet_order", "oracle", "scenarios"}
_SCEN_KEYS = {"name", "chart", "symbol", "checks", "tolerances", "params"}
_CHART_KEYS = {"model", "n", "jet_order", "r_synth", "seed"}
_SYM_KEYS = {"kind", "order_m", "num_components", "seed"}
_TOL_KEYS = {"absolute", "relative"}
_ORACLE_KEYS = {"t_samples", "cutoff_radius", "nodes_per_axis"}

#: checks whose evaluation applies the L_1 operator or the symbol composition
_L1_CHECKS = {
    "b0_leading",
    "b1_two_routes",
    "b1_reference",
    "composition_two_routes",
    "projector_idempotence",
    "quadrature_leading",
    "quadrature_subleading",
    "rescale_uniqueness",
}


def _require_keys(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def parse_config(doc: dict) -> dict:
    """Validate a parsed config document; returns a normalized copy."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    _require_keys(doc, _TOP_KEYS, "config")
    seed = doc.get("seed", 0)
    jet_order = doc.get("jet_order", 6)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("config.seed: must be a non-negative integer")
    if not isinstance(jet_order, int) or jet_order < 2:
        raise ConfigError("config.jet_order: must be an integer >= 2")
    oracle = doc.get("oracle", {})
    if not isinstance(oracle, dict):
        raise ConfigError("config.oracle: must be an object")
    _require_keys(oracle, _ORACLE_KEYS, "config.oracle")

    raw_scenarios = doc.get("scenarios", [])
    if not isinstance(raw_scenarios, list):
        raise ConfigError("config.scenarios: must be a list")
    scenarios: List[Scenario] = []
    names = set()
    for i, raw in enumerate(raw_scenarios):
        where = f"config.scenarios[{i}]"
        if not isinstance(raw, dict):
            raise ConfigError(f"{where}: must be an object")
        _require_keys(raw, _SCEN_KEYS, where)
        name = raw.get("name")
        if not isinstance(name, str) or not name:
            raise ConfigError(f"{where}.name: must be a non-empty string")
        if any(ch in name for ch in ",\n\r"):
            raise ConfigError(f"{where}.name: commas and newlines are not allowed")
        if name in names:
            raise ConfigError(f"{where}.name: duplicate scenario name {name!r}")
        names.add(name)

        chart_raw = raw.get("chart", {})
        _require_keys(chart_raw, _CHART_KEYS, f"{where}.chart")
        model = chart_raw.get("model", "heisenberg")
        if model not in ("heisenberg", "perturbed"):
            raise ConfigError(f"{where}.chart.model: unknown model {model!r}")
        n = chart_raw.get("n", 1)
        if not isinstance(n, int) or n < 1:
            raise ConfigError(f"{where}.chart.n: must be an integer >= 1")
        chart = ChartSpec(
            model=model,
            n=n,
            jet_order=chart_raw.get("jet_order"),
            r_synth=float(chart_raw.get("r_synth", 0.0)),
            seed=int(chart_raw.get("seed", 0)),
        )

        symbol = None
        if "symbol" in raw:
            sym_raw = raw["symbol"]
            _require_keys(sym_raw, _SYM_KEYS, f"{where}.symbol")
            kind = sym_raw.get("kind", "identity")
            if kind not in ("identity", "multiplication", "random-homogeneous"):
                raise ConfigError(f"{where}.symbol.kind: unknown kind {kind!r}")
            symbol = SymbolSpec(
                kind=kind,
                order_m=float(sym_raw.get("order_m", 0.0)),
                num_components=int(sym_raw.get("num_components", 2)),
                seed=int(sym_raw.get("seed", 0)),
            )

        checks = raw.get("checks", [])
        if not isinstance(checks, list) or not checks:
            raise ConfigError(f"{where}.checks: must be a non-empty list")
        for c in checks:
            if c not in CHECKS:
                raise ConfigError(f"{where}.checks: unknown check {c!r}")
        if len(set(checks)) != len(checks):
            raise ConfigError(f"{where}.checks: duplicate check ids")

        tol_raw = raw.get("tolerances", {})
        _require_keys(tol_raw, _TOL_KEYS, f"{where}.tolerances")
        atol = float(tol_raw.get("absolute", 0.0))
        rtol = float(tol_raw.get("relative", 1e-9))
        if atol < 0 or rtol < 0 or (atol == 0 and rtol == 0):
            raise ConfigError(f"{where}.tolerances: need positive tolerances")

        params = raw.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError(f"{where}.params: must be an object")
        for k, v in params.items():
            if not isinstance(v, int):
                raise ConfigError(f"{where}.params.{k}: must be an integer")

        eff_order = chart.jet_order if chart.jet_order is not None else jet_order
        if any(c in _L1_CHECKS for c in checks) and eff_order < 4:
            raise ConfigError(f"{where}: jet_order must be >= 4 for expansion checks")
        if model == "perturbed" and eff_order < 6:
            raise ConfigError(f"{where}: jet_order must be >= 6 for perturbed charts")

        scenarios.append(
            Scenario(
                name=name,
                chart=chart,
                symbol=symbol,
                checks=tuple(checks),
                atol=atol,
                rtol=rtol,
                params=dict(params),
            )
        )
    return {"seed": seed, "jet_order": jet_order, "oracle": dict(oracle), "scenarios": scenarios}


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r}: line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    return parse_config(doc)


# -- check context -----------------------------------------------------------------------


#: memo for the expensive quadrature fits (idempotent; shared across scenarios)
_QUADRATURE_MEMO: Dict[tuple, list] = {}


class CheckContext:
    """Resolved chart, symbol and seeds for one scenario run."""

    def __init__(self, scenario: Scenario, seed: int, jet_order: int, oracle_opts: dict):
        self.scenario = scenario
        self.seed = seed
        self.jet_order = scenario.chart.jet_order or jet_order
        self.oracle_opts = oracle_opts
        self.n = scenario.chart.n
        self._chart: Optional[CRModelChart] = None
        self._symbol: Optional[ClassicalSymbol] = None
        self._phase_data = None
        self._quadrature = None

    @property
    def chart(self) -> CRModelChart:
        if self._chart is None:
            spec = self.scenario.chart
            base = heisenberg_chart(spec.n, self.jet_order)
            if spec.model == "heisenberg":
                self._chart = base
            else:
                q, table = random_perturbation(spec.n, spec.r_synth, seed=spec.seed)
                self._chart = perturbed_chart(base, spec.r_synth, q, table, seed=spec.seed)
        return self._chart

    @property
    def symbol(self) -> ClassicalSymbol:
        if self._symbol is None:
            spec = self.scenario.symbol
            if spec is None:
                raise ConfigError(f"scenario {self.scenario.name!r}: check needs a symbol spec")
            d = 2 * self.n + 1
            if spec.kind == "identity":
                self._symbol = identity_symbol(self.n, self.jet_order)
            elif spec.kind == "multiplication":
                rng = spawn_rng(self.seed, "mult-f", self.scenario.name, spec.seed)
                f = random_jet(rng, d, self.jet_order, (0.0,) * d, decay=0.5)
                self._symbol = make_multiplication_symbol(f)
            else:
                self._symbol = random_classical_symbol(
                    self.n,
                    spec.order_m,
                    spec.num_components,
                    seed=spec.seed,
                    homogeneous=True,
                    jet_order=self.jet_order,
                )
        return self._symbol

    @property
    def phase_data(self):
        if self._phase_data is None:
            self._phase_data = build_phase_data(self.chart)
        return self._phase_data

    def rng(self, *labels) -> np.random.Generator:
        return spawn_rng(self.seed, self.scenario.name, *labels)

    def param(self, key: str, default: int) -> int:
        return int(self.scenario.params.get(key, default))

    def quadrature_fit(self):
        """Oracle fits for seeded amplitudes.

        Draws are keyed by the master seed only (not the scenario name), and
        results are memoized per process, so scenarios checking the leading
        and subleading coefficients share one set of integrals.
        """
        if self._quadrature is None:
            opts = self.oracle_opts
            count = self.param("num_amplitudes", 5)
            key = (
                self.seed,
                count,
                self.n,
                self.jet_order,
                tuple(opts.get("t_samples") or ()),
                float(opts.get("cutoff_radius", 1.4)),
                tuple(opts.get("nodes_per_axis") or ()),
            )
            cached = _QUADRATURE_MEMO.get(key)
            if cached is None:
                results = []
                for k in range(count):
                    rng = spawn_rng(self.seed, "quadrature-amplitude", k)
                    amp = random_jet(rng, 2 * self.n + 2, 2, (0.0,) * (2 * self.n + 2), decay=0.6)
                    fit = numeric_expansion_oracle(
                        self.phase_data,
                        amp,
                        t_samples=opts.get("t_samples"),
                        cutoff_radius=float(opts.get("cutoff_radius", 1.4)),
                        nodes_per_axis=opts.get("nodes_per_axis"),
                    )
                    ref = expansion_coeffs(self.phase_data, amp)
                    results.append((fit, ref))
                cached = _QUADRATURE_MEMO[key] = results
            self._quadrature = cached
        return self._quadrature


def _record(check_id: str, a: complex, b: complex, atol: float, rtol: float, dt: float) -> CheckRecord:
    a, b = complex(a), complex(b)
    dev = abs(a - b)
    tol = atol + rtol * (1.0 + abs(b))
    return CheckRecord(
        check_id=check_id,
        route_a=a,
        route_b=b,
        abs_deviation=dev,
        rel_deviation=dev / (1.0 + abs(b)),
        tolerance=tol,
        passed=dev <= tol,
        wall_time_s=dt,
    )


def _worst(pairs: Sequence[Tuple[complex, complex]]) -> Tuple[complex, complex]:
    """The (A, B) pair with the largest normalized deviation."""
    return max(pairs, key=lambda ab: abs(ab[0] - ab[1]) / (1.0 + abs(ab[1])))


# -- individual checks ----------------------------------------------------------------------


def check_b0_leading(ctx: CheckContext):
    b0, _ = toeplitz_b1_pipeline(ctx.symbol, ctx.chart, phase_data=ctx.phase_data)
    want = ctx.symbol.components[0].constant_term() / (2.0 * math.pi ** (ctx.n + 1))
    return b0, want


def check_b1_two_routes(ctx: CheckContext):
    _, b1 = toeplitz_b1_pipeline(ctx.symbol, ctx.chart, phase_data=ctx.phase_data)
    _, c1 = toeplitz_b1_closed_form(ctx.symbol, ctx.chart)
    return b1, c1


def check_b1_reference(ctx: CheckContext):
    """Pipeline b1 against the multiplication-operator corollary value."""
    sym = ctx.symbol
    _, b1 = toeplitz_b1_pipeline(sym, ctx.chart, phase_data=ctx.phase_data)
    d = 2 * ctx.n + 1
    e0 = sym.components[0]
    if any(idx[d:] != (0,) * d for idx in e0.coeffs):
        raise ConfigError("b1_reference applies to multiplication symbols only")
    # rebuild f(x) by pinning the xi slots at the base covector
    inner = [Jet.coordinate(i, d, e0.order, (0.0,) * d) for i in range(d)]
    inner += [
        Jet.constant(d, e0.order, (0.0,) * d, e0.base_point[d + j]) for j in range(d)
    ]
    f = e0.compose(inner)
    want = (
        tw_scalar_curvature(ctx.chart) * f.constant_term() - kohn_laplacian_at0(ctx.chart, f)
    ) / (4.0 * math.pi ** (ctx.n + 1))
    return b1, want


def check_composition_two_routes(ctx: CheckContext):
    pairs = []
    count = ctx.param("num_pairs", 5)
    for k in range(count):
        rng = ctx.rng("composition", k)
        la = float(rng.uniform(-1.0, 2.0))
        lc = float(rng.uniform(-1.0, 2.0))
        A = random_amplitude(ctx.n, la, seed=int(rng.integers(1 << 30)))
        C = random_amplitude(ctx.n, lc, seed=int(rng.integers(1 << 30)))
        sp = compose_amplitudes_sp(A, C, ctx.chart, phase_data=ctx.phase_data)
        c0, c1 = compose_amplitudes_closed(A, C, ctx.chart)
        pairs.append((sp.c0, c0))
        pairs.append((sp.c1, c1))
    return _worst(pairs)


def check_projector_idempotence(ctx: CheckContext):
    A = szego_amplitude(ctx.chart)
    sp = compose_amplitudes_sp(A, A, ctx.chart, phase_data=ctx.phase_data)
    pairs = [
        (sp.c0, A.coeffs[0].constant_term()),
        (sp.c1, A.coeff(1).constant_term()),
    ]
    return _worst(pairs)


def check_subprincipal_invariance(ctx: CheckContext):
    pairs = []
    d = 2 * ctx.n + 1
    order = max(ctx.jet_order, 4)  # transforms need two derivative levels in hand
    for k in range(ctx.param("num_diffeos", 20)):
        rng = ctx.rng("diffeo", k)
        sym = random_classical_symbol(
            ctx.n, float(rng.uniform(-1, 1)), 2,
            seed=int(rng.integers(1 << 30)), homogeneous=False, jet_order=order,
        )
        lam = random_jet(rng, d, order, (0.0,) * d, real=True, decay=0.4, min_degree=1).scale(0.5).exp()
        s_val = float(rng.uniform(0.5, 2.0))
        kappa = []
        for c in range(d):
            bump = random_jet(rng, d, order, (0.0,) * d, real=True, decay=0.3, min_degree=2)
            kappa.append(Jet.displacement(c, d, order, (0.0,) * d) + bump.truncated(3).with_order(order).scale(0.3))
        tsym = transform_symbol_under_diffeo(sym, kappa)
        tlam = transform_density(lam, kappa, s_val)
        direct, _ = subprincipal_symbol(sym, lam, s_val)
        transported, _ = subprincipal_symbol(tsym, tlam, s_val)
        pairs.append((transported, direct))
    return _worst(pairs)


def check_p_operator_routes(ctx: CheckContext):
    pairs = []
    base = xi_base(ctx.n)
    nv = 2 * (2 * ctx.n + 1)
    for k in range(ctx.param("num_fields", 20)):
        rng = ctx.rng("hamiltonian", k)
        F = random_jet(rng, nv, 4, base, decay=0.5)
        pairs.append((p_operator_geometric(ctx.chart, F), p_operator_canonical(F)))
    return _worst(pairs)


def check_christoffel_table(ctx: CheckContext):
    n = ctx.n
    d = 2 * n + 1
    gammas = christoffel_at(ctx.chart)
    pairs = []
    for j in range(d):
        for k in range(d):
            for l in range(d):
                want = 0.0
                if k == 2 * n and j % 2 == 1 and l == j - 1:
                    want = -1.0
                elif k == 2 * n and j % 2 == 0 and j + 1 < d and l == j + 1:
                    want = 1.0
                pairs.append((gammas[(j, k, l)].constant_term(), want))
    return _worst(pairs)


def check_kohn_point_formula(ctx: CheckContext):
    """Kohn values against an independent evaluation-based derivative oracle."""
    d = 2 * ctx.n + 1
    pairs = []
    for k in range(ctx.param("num_samples", 10)):
        rng = ctx.rng("kohn", k)
        f = random_jet(rng, d, 4, (0.0,) * d, decay=0.5)
        got = kohn_laplacian_at0(ctx.chart, f)
        # oracle: univariate restrictions fitted from point values
        want = 0.0 + 0.0j
        for j in range(2 * ctx.n):
            want += -0.5 * _second_derivative_by_values(f, j)
        want += -1j * ctx.n * _first_derivative_by_values(f, d - 1)
        pairs.append((got, want))
    return _worst(pairs)


def _axis_values(f: Jet, axis: int, ts: np.ndarray) -> np.ndarray:
    pts = np.zeros((len(ts), f.num_vars), dtype=complex)
    pts[:, axis] = ts
    return f.eval_many(pts)


def _first_derivative_by_values(f: Jet, axis: int) -> complex:
    ts = np.linspace(-0.5, 0.5, f.order + 1)
    vals = _axis_values(f, axis, ts)
    coeffs = np.polynomial.polynomial.polyfit(ts, vals, f.order)
    return complex(coeffs[1])


def _second_derivative_by_values(f: Jet, axis: int) -> complex:
    ts = np.linspace(-0.5, 0.5, f.order + 1)
    vals = _axis_values(f, axis, ts)
    coeffs = np.polynomial.polynomial.polyfit(ts, vals, f.order)
    return complex(2.0 * coeffs[2])


def check_euler_homogeneity(ctx: CheckContext):
    pairs = []
    for k in range(ctx.param("num_symbols", 10)):
        rng = ctx.rng("euler", k)
        m = float(rng.choice([-1.0, 0.0, 0.5, 1.0]))
        sym = random_classical_symbol(
            ctx.n, m, 2, seed=int(rng.integers(1 << 30)), homogeneous=True, jet_order=ctx.jet_order
        )
        for j, comp in enumerate(sym.components):
            pairs.append((euler_check(comp, m - j), 0.0))
    return _worst(pairs)


def check_princ_symb_id(ctx: CheckContext):
    """m T e_0 = d^2_{x_{2n} xi_{2n}} e_0 at the base covector, homogeneous e_0."""
    d = 2 * ctx.n + 1
    nv = 2 * d
    pairs = []
    for k in range(ctx.param("num_symbols", 10)):
        rng = ctx.rng("princ-symb", k)
        m = float(rng.choice([-1.0, 0.5, 1.0, 2.0]))
        sym = random_classical_symbol(
            ctx.n, m, 1, seed=int(rng.integers(1 << 30)), homogeneous=True, jet_order=ctx.jet_order
        )
        e0 = sym.components[0]
        idx_t = tuple(1 if i == d - 1 else 0 for i in range(nv))
        lhs = m * (-e0.derivative_value(idx_t))
        idx2 = tuple(1 if i in (d - 1, nv - 1) else 0 for i in range(nv))
        rhs = e0.derivative_value(idx2)
        pairs.append((lhs, rhs))
    return _worst(pairs)


def check_hessian_display(ctx: CheckContext):
    n = ctx.n
    data = ctx.phase_data
    nv = 2 * n + 2
    pairs = []
    for a in range(nv):
        for b in range(nv):
            want = 0.0 + 0.0j
            if a == b and a < 2 * n:
                want = 2.0j
            elif {a, b} == {nv - 2, nv - 1}:
                want = 1.0
            pairs.append((data.hessian[a, b], want))
    det_want = 1.0 / (4.0 * math.pi ** (2 * n + 2))
    pairs.append((data.det_normalized, det_want))
    table = inverse_hessian_operator(data)
    for j in range(2 * n):
        pairs.append((table.get((j, j), 0.0), 0.5j))
    pairs.append((table.get((nv - 2, nv - 1), 0.0), -2.0))
    pairs.append((table.get((0, 1), 0.0), 0.0))
    return _worst(pairs)


def check_quadrature_leading(ctx: CheckContext):
    pairs = [(fit[0], ref[0]) for fit, ref in ctx.quadrature_fit()]
    return _worst(pairs)


def check_quadrature_subleading(ctx: CheckContext):
    pairs = [(fit[1], ref[1]) for fit, ref in ctx.quadrature_fit()]
    return _worst(pairs)


def check_mu2_vanishing(ctx: CheckContext):
    nv = 2 * ctx.n + 2
    rng = ctx.rng("mu2")
    gamma0 = random_jet(rng, nv, 2, (0.0,) * nv, decay=0.6)
    vals = mu2_vanishing_values(ctx.phase_data, gamma0)
    pairs = [(v, 0.0) for v in vals.values()]
    return _worst(pairs)


def check_l_linearity(ctx: CheckContext):
    nv = 2 * ctx.n + 2
    pairs = []
    for k in range(ctx.param("num_samples", 5)):
        rng = ctx.rng("l-linear", k)
        v = random_jet(rng, nv, 2, (0.0,) * nv)
        w = random_jet(rng, nv, 2, (0.0,) * nv)
        a = complex(rng.standard_normal(), rng.standard_normal())
        b = complex(rng.standard_normal(), rng.standard_normal())
        lhs = apply_L(ctx.phase_data, 1, v.scale(a) + w.scale(b))
        rhs = a * apply_L(ctx.phase_data, 1, v) + b * apply_L(ctx.phase_data, 1, w)
        pairs.append((lhs, rhs))
    return _worst(pairs)


def _admissible_rescale(ctx: CheckContext, k: int) -> Jet:
    """f(x,y) = 1 + quadratic in the differences (vanishing on the diagonal,
    zero Reeb-direction derivative at the base point)."""
    d = 2 * ctx.n + 1
    nv = 2 * d
    order = 2
    base = (0.0,) * nv
    rng = ctx.rng("rescale", k)
    f = Jet.constant(nv, order, base, 1.0)
    for _ in range(3):
        a = int(rng.integers(0, d))
        b = int(rng.integers(0, 2 * ctx.n))
        c = complex(rng.standard_normal(), rng.standard_normal()) * 0.3
        da = Jet.displacement(d + a, nv, order, base) - Jet.displacement(a, nv, order, base)
        db = Jet.displacement(d + b, nv, order, base) - Jet.displacement(b, nv, order, base)
        f = f + (da * db).scale(c)
    return f


def check_rescale_uniqueness(ctx: CheckContext):
    A = szego_amplitude(ctx.chart)
    C = qe_amplitude(ctx.symbol, A, ctx.chart) if ctx.scenario.symbol else random_amplitude(ctx.n, 1.0, seed=1)
    ref = C.coeff(1).constant_term()
    pairs = []
    for k in range(ctx.param("num_rescales", 10)):
        f = _admissible_rescale(ctx, k)
        rescaled = phase_rescale(C, f)
        pairs.append((rescaled.coeff(1).constant_term(), ref))
    return _worst(pairs)


def check_singularity_branches(ctx: CheckContext):
    n = ctx.n
    phase = ctx.chart.phase.prepared_phi
    pairs = []
    rng = ctx.rng("singularity")
    amp = random_amplitude(n, float(n) + 0.5, seed=int(rng.integers(1 << 30)))
    parts = singularity_representation(amp, phase)
    b0 = amp.coeffs[0].constant_term()
    pairs.append((parts.F.constant_term(), math.gamma(n + 0.5 + 1.0) * b0))
    if parts.G is not None:
        raise ConfigError("non-integer order must not produce a log factor")

    amp0 = random_amplitude(n, 0.0, seed=int(rng.integers(1 << 30)))
    parts0 = singularity_representation(amp0, phase)
    pairs.append((parts0.F.constant_term(), amp0.coeffs[0].constant_term()))
    pairs.append((parts0.G.constant_term(), -amp0.coeff(1).constant_term()))

    ampm = random_amplitude(n, -1.0, seed=int(rng.integers(1 << 30)))
    partsm = singularity_representation(ampm, phase)
    if partsm.F is not None:
        raise ConfigError("negative integer order must be pure log")
    pairs.append((partsm.G.constant_term(), -ampm.coeffs[0].constant_term()))
    return _worst(pairs)


CHECKS: Dict[str, Callable[[CheckContext], Tuple[complex, complex]]] = {
    "b0_leading": check_b0_leading,
    "b1_two_routes": check_b1_two_routes,
    "b1_reference": check_b1_reference,
    "composition_two_routes": check_composition_two_routes,
    "projector_idempotence": check_projector_idempotence,
    "subprincipal_invariance": check_subprincipal_invariance,
    "p_operator_routes": check_p_operator_routes,
    "christoffel_table": check_christoffel_table,
    "kohn_point_formula": check_kohn_point_formula,
    "euler_homogeneity": check_euler_homogeneity,
    "princ_symb_id": check_princ_symb_id,
    "hessian_display": check_hessian_display,
    "quadrature_leading": check_quadrature_leading,
    "quadrature_subleading": check_quadrature_subleading,
    "mu2_vanishing": check_mu2_vanishing,
    "l_linearity": check_l_linearity,
    "rescale_uniqueness": check_rescale_uniqueness,
    "singularity_branches": check_singularity_branches,
}


# -- run / emit ------------------------------------------------------------------------------


def run_scenarios(
    config: dict,
    name_filter: Optional[str] = None,
    timings: bool = True,
) -> List[ExpansionReport]:
    """Run every scenario's checks; failures are recorded, never raised."""
    seed = config.get("seed", 0)
    jet_order = config.get("jet_order", 6)
    oracle_opts = config.get("oracle", {})
    env = {
        "version": __version__,
        "seed": str(seed),
        "jet_order": str(jet_order),
    }
    reports: List[ExpansionReport] = []
    for scenario in config["scenarios"]:
        if name_filter and not fnmatch.fnmatch(scenario.name, name_filter):
            continue
        ctx = CheckContext(scenario, seed, jet_order, oracle_opts)
        records = []
        for check_id in scenario.checks:
            t0 = time.perf_counter()
            a, b = CHECKS[check_id](ctx)
            dt = time.perf_counter() - t0 if timings else 0.0
            records.append(_record(check_id, a, b, scenario.atol, scenario.rtol, dt))
        reports.append(
            ExpansionReport(scenario=scenario.name, records=tuple(records), environment=env)
        )
    reports.sort(key=lambda r: r.scenario)
    return reports


def _fmt_float(x: float) -> str:
    return f"{float(x):.17g}"


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}j"


_RECORD_FIELDS = (
    "scenario",
    "check_id",
    "route_a",
    "route_b",
    "abs_deviation",
    "rel_deviation",
    "tolerance",
    "passed",
    "wall_time_s",
)


def _record_row(scenario: str, r: CheckRecord) -> List[str]:
    return [
        scenario,
        r.check_id,
        _fmt_complex(r.route_a),
        _fmt_complex(r.route_b),
        _fmt_float(r.abs_deviation),
        _fmt_float(r.rel_deviation),
        _fmt_float(r.tolerance),
        "true" if r.passed else "false",
        _fmt_float(r.wall_time_s),
    ]


def emit_report(reports: Sequence[ExpansionReport], fmt: str = "structured") -> bytes:
    """Serialize reports byte-stably.

    "structured" is JSON with numeric leaves rendered as 17-significant-digit
    strings (so round-trip parsing reproduces every value bit-exactly);
    "csv" is one header row plus one row per check record.
    """
    if fmt == "structured":
        payload = []
        for rep in reports:
            payload.append(
                {
                    "scenario": rep.scenario,
                    "environment": rep.environment,
                    "records": [
                        {
                            "check_id": r.check_id,
                            "route_a": _fmt_complex(r.route_a),
                            "route_b": _fmt_complex(r.route_b),
                            "abs_deviation": _fmt_float(r.abs_deviation),
                            "rel_deviation": _fmt_float(r.rel_deviation),
                            "tolerance": _fmt_float(r.tolerance),
                            "passed": r.passed,
                            "wall_time_s": _fmt_float(r.wall_time_s),
                        }
                        for r in rep.records
                    ],
                }
            )
        text = json.dumps({"reports": payload}, indent=2, sort_keys=False)
        return (text + "\n").encode("utf-8")
    if fmt == "csv":
        lines = [",".join(_RECORD_FIELDS)]
        for rep in reports:
            for r in rep.records:
                lines.append(",".join(_record_row(rep.scenario, r)))
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ConfigError(f"unknown report format {fmt!r} (expected 'structured' or 'csv')")


def parse_structured_report(blob: bytes) -> List[dict]:
    """Parse the structured format back into plain dicts with complex values."""
    doc = json.loads(blob.decode("utf-8"))
    out = []
    for rep in doc["reports"]:
        records = []
        for r in rep["records"]:
            records.append(
                {
                    "check_id": r["check_id"],
                    "route_a": complex(r["route_a"]),
                    "route_b": complex(r["route_b"]),
                    "abs_deviation": float(r["abs_deviation"]),
                    "rel_deviation": float(r["rel_deviation"]),
                    "tolerance": float(r["tolerance"]),
                    "passed": bool(r["passed"]),
                    "wall_time_s": float(r["wall_time_s"]),
                }
            )
        out.append({"scenario": rep["scenario"], "environment": rep["environment"], "records": records})
    return out


# -- built-in configuration ---------------------------------------------------------------------


def default_config_doc() -> dict:
    """The built-in 'default-suite' configuration document (full check suite)."""
    scenarios = [
        {
            "name": "geometry-tables",
            "chart": {"model": "heisenberg", "n": 1},
            "checks": ["christoffel_table", "kohn_point_formula", "euler_homogeneity", "princ_symb_id"],
            "tolerances": {"absolute": 1e-10, "relative": 0.0},
        },
        {
            "name": "geometry-tables-n2",
            "chart": {"model": "heisenberg", "n": 2},
            "checks": ["christoffel_table", "kohn_point_formula"],
            "tolerances": {"absolute": 1e-10, "relative": 0.0},
        },
        {
            "name": "cotangent-operators",
            "chart": {"model": "heisenberg", "n": 1},
            "checks": ["p_operator_routes"],
            "tolerances": {"absolute": 1e-12, "relative": 0.0},
        },
        {
            "name": "subprincipal-invariance",
            "chart": {"model": "heisenberg", "n": 1},
            "checks": ["subprincipal_invariance"],
            "tolerances": {"absolute": 1e-10, "relative": 0.0},
        },
        {
            "name": "expansion-engine",
            "chart": {"model": "heisenberg", "n": 1},
            "checks": ["hessian_display", "mu2_vanishing", "l_linearity"],
            "tolerances": {"absolute": 1e-12, "relative": 0.0},
        },
        {
            "name": "identity-symbol",
            "chart": {"model": "heisenberg", "n": 1},
            "symbol": {"kind": "identity"},
            "checks": ["b0_leading", "b1_two_routes", "projector_idempotence"],
            "tolerances": {"absolute": 1e-10, "relative": 1e-12},
        },
        {
            "name": "uniqueness-and-branches",
            "chart": {"model": "heisenberg", "n": 1},
            "symbol": {"kind": "random-homogeneous", "order_m": 0.5, "seed": 5},
            "checks": ["rescale_uniqueness", "singularity_branches"],
            "tolerances": {"absolute": 1e-10, "relative": 0.0},
        },
        {
            "name": "composition-cross-route",
            "chart": {"model": "heisenberg", "n": 1},
            "checks": ["composition_two_routes"],
            "tolerances": {"absolute": 0.0, "relative": 1e-10},
            "params": {"num_pairs": 25},
        },
        {
            "name": "composition-cross-route-curved",
            "chart": {"model": "perturbed", "n": 1, "r_synth": 0.7, "seed": 3},
            "checks": ["composition_two_routes", "projector_idempotence"],
            "tolerances": {"absolute": 0.0, "relative": 1e-10},
            "params": {"num_pairs": 25},
        },
        {
            "name": "quadrature-oracle",
            "chart": {"model": "heisenberg", "n": 1},
            "checks": ["quadrature_leading"],
            "tolerances": {"absolute": 0.0, "relative": 1e-2},
            "params": {"num_amplitudes": 5},
        },
        {
            "name": "quadrature-oracle-subleading",
            "chart": {"model": "heisenberg", "n": 1},
            "checks": ["quadrature_subleading"],
            "tolerances": {"absolute": 0.0, "relative": 5e-2},
            "params": {"num_amplitudes": 5},
        },
    ]
    for k in range(10):
        scenarios.append(
            {
                "name": f"multiplication-{k:02d}",
                "chart": {"model": "heisenberg", "n": 1},
                "symbol": {"kind": "multiplication", "seed": 100 + k},
                "checks": ["b0_leading", "b1_two_routes", "b1_reference"],
                "tolerances": {"absolute": 1e-12, "relative": 1e-10},
            }
        )
    charts = [{"model": "heisenberg", "n": 1}]
    for i, r in enumerate((0.3, -0.3, 0.7, -0.7, 1.1)):
        charts.append({"model": "perturbed", "n": 1, "r_synth": r, "seed": 10 + i})
    orders = (-1.0, 0.0, 0.5, 1.0)
    sym_id = 0
    for m in orders:
        for k in range(10):
            chart = charts[sym_id % len(charts)]
            scenarios.append(
                {
                    "name": f"homogeneous-m{m:+.1f}-{k:02d}",
                    "chart": chart,
                    "symbol": {
                        "kind": "random-homogeneous",
                        "order_m": m,
                        "num_components": 2,
                        "seed": 1000 + sym_id,
                    },
                    "checks": ["b0_leading", "b1_two_routes"],
                    "tolerances": {"absolute": 1e-12, "relative": 1e-9},
                }
            )
            sym_id += 1
    return {"seed": 0, "jet_order": 6, "scenarios": scenarios}


def default_config() -> dict:
    return parse_config(default_config_doc())
