"""Canonical-coordinate CR model charts and their pseudohermitian geometry.

The exact Heisenberg chart carries the model contact form, frame, Reeb field,
unit volume density and the explicit prepared phase, all as jets.  Curvature
is exercised synthetically: a perturbed chart injects a quadratic part into
the density and a diagonal-vanishing quartic into the phase, tied to a stored
scalar-curvature value by the consistency identity

    -(1/32) * Lap^2 h1(0) + (i/4) * Lap lambda(0) = -(i/2) * R,

where Lap sums second derivatives over the first 2n coordinates.  That
identity is validated at construction and is what makes the two coefficient
routes downstream agree on perturbed charts.

Index conventions (0-based throughout):
  * x-space jets have 2n+1 variables, base 0; the distinguished coordinate is
    x_{2n} (the contact direction), and z_j = x_{2j} + i x_{2j+1}.
  * (x,y)-space jets have 2(2n+1) variables at (0,0); y_k is variable
    (2n+1) + k.  The prepared phase is linear in the last y variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ChartError, OrderShortfallError
from .jets import Jet, MultiIndex
from .rng import spawn_rng

SQRT2 = math.sqrt(2.0)

#: tolerance for jet-identity invariant checks at construction
INVARIANT_TOL = 1e-12

#: tolerance for the curvature consistency identity
CONSISTENCY_TOL = 1e-10


@dataclass(frozen=True)
class PhasePair:
    """A phase and its prepared form (both jets in (x, y) at (0, 0))."""

    phi: Jet
    prepared_phi: Jet


@dataclass(frozen=True)
class CRModelChart:
    """Canonical-coordinate model of a strictly pseudoconvex CR chart."""

    n: int
    jet_order: int
    contact_form: Tuple[Jet, ...]          # components of omega_0 over dx_b
    frame: Tuple[Tuple[Jet, ...], ...]     # Z_j coefficients over d/dx_b
    reeb: Tuple[Jet, ...]                  # Reeb field coefficients over d/dx_b
    volume_density: Jet                    # lambda(x)
    synthetic_R: float
    phase: PhasePair
    is_exact_heisenberg: bool

    @property
    def dim(self) -> int:
        return 2 * self.n + 1


# -- model data builders -----------------------------------------------------------


def contact_form_jets(n: int, order: int) -> Tuple[Jet, ...]:
    """omega_0 = dx_{2n} + sum_j (x_{2j+1} dx_{2j} - x_{2j} dx_{2j+1}), exactly."""
    d = 2 * n + 1
    comps: List[Jet] = []
    for b in range(d):
        if b == 2 * n:
            comps.append(Jet.constant(d, order, (0,) * d, 1.0))
        elif b % 2 == 0:
            comps.append(Jet.displacement(b + 1, d, order, (0,) * d))
        else:
            comps.append(-1.0 * Jet.displacement(b - 1, d, order, (0,) * d))
    return tuple(comps)


def frame_jets(n: int, order: int) -> Tuple[Tuple[Jet, ...], ...]:
    """Z_j = sqrt2 (d/dz_j - (i/2) zbar_j d/dx_{2n}) as coefficient jets."""
    d = 2 * n + 1
    base = (0,) * d
    rows: List[Tuple[Jet, ...]] = []
    for j in range(n):
        coeffs = [Jet.zero(d, order, base) for _ in range(d)]
        coeffs[2 * j] = Jet.constant(d, order, base, SQRT2 / 2)
        coeffs[2 * j + 1] = Jet.constant(d, order, base, -1j * SQRT2 / 2)
        last = (-1j * SQRT2 / 2) * Jet.displacement(2 * j, d, order, base) + (
            -SQRT2 / 2
        ) * Jet.displacement(2 * j + 1, d, order, base)
        coeffs[2 * n] = last
        rows.append(tuple(coeffs))
    return tuple(rows)


def reeb_jets(n: int, order: int) -> Tuple[Jet, ...]:
    d = 2 * n + 1
    base = (0,) * d
    comps = [Jet.zero(d, order, base) for _ in range(d)]
    comps[2 * n] = Jet.constant(d, order, base, -1.0)
    return tuple(comps)


def heisenberg_phase_jet(n: int, order: int) -> Jet:
    """phi(x,y) = -x_{2n} + y_{2n} + (i/2) sum_j (|z_j|^2 + |w_j|^2 - 2 z_j wbar_j)."""
    d = 2 * n + 1
    nv = 2 * d
    coeffs: Dict[MultiIndex, complex] = {}

    def bump(*pairs):
        idx = [0] * nv
        for pos, e in pairs:
            idx[pos] += e
        return tuple(idx)

    coeffs[bump((2 * n, 1))] = -1.0
    coeffs[bump((d + 2 * n, 1))] = 1.0
    for j in range(n):
        xr, xi = 2 * j, 2 * j + 1
        yr, yi = d + 2 * j, d + 2 * j + 1
        for v in (xr, xi, yr, yi):
            coeffs[bump((v, 2))] = 0.5j
        coeffs[bump((xr, 1), (yr, 1))] = -1.0j
        coeffs[bump((xi, 1), (yi, 1))] = -1.0j
        coeffs[bump((xi, 1), (yr, 1))] = 1.0
        coeffs[bump((xr, 1), (yi, 1))] = -1.0
    return Jet(nv, order, (0,) * nv, coeffs)


# -- invariant checks ----------------------------------------------------------------


def _diagonal_restriction(phi: Jet, n: int) -> Jet:
    """phi(x, x) as a jet in x."""
    d = 2 * n + 1
    coords = [Jet.coordinate(i, d, phi.order, (0,) * d) for i in range(d)]
    return phi.compose(coords + coords)


def _check_phase_pair(pair: PhasePair, n: int, order: int, exact: bool) -> None:
    d = 2 * n + 1
    nv = 2 * d
    for name, phi in (("phi", pair.phi), ("prepared_phi", pair.prepared_phi)):
        if phi.num_vars != nv:
            raise ChartError(f"{name}: expected {nv} variables")
        scale = max(phi.max_abs(), 1.0)
        diag = _diagonal_restriction(phi, n)
        if diag.max_abs() > INVARIANT_TOL * scale:
            raise ChartError(f"{name}: does not vanish on the diagonal")
        # d_x phi(0,0) = -omega_0(0), d_y phi(0,0) = +omega_0(0)
        omega0 = [0.0] * d
        omega0[2 * n] = 1.0
        for b in range(d):
            ex = tuple(1 if k == b else 0 for k in range(nv))
            ey = tuple(1 if k == d + b else 0 for k in range(nv))
            if abs(phi.coefficient(ex) + omega0[b]) > INVARIANT_TOL:
                raise ChartError(f"{name}: d_x phi(0,0) != -omega_0(0) at slot {b}")
            if abs(phi.coefficient(ey) - omega0[b]) > INVARIANT_TOL:
                raise ChartError(f"{name}: d_y phi(0,0) != +omega_0(0) at slot {b}")
    # prepared form: the last y variable appears only as the exact linear term
    last = nv - 1
    for idx, c in pair.prepared_phi.coeffs.items():
        if idx[last] == 0:
            continue
        is_linear = idx[last] == 1 and sum(idx) == 1
        if not is_linear:
            raise ChartError("prepared_phi: not linear in the last y variable")
        if abs(c - 1.0) > INVARIANT_TOL:
            raise ChartError("prepared_phi: linear y_{2n} coefficient is not 1")
    # quartic normal form: deviation from the exact model starts at degree 4
    model = heisenberg_phase_jet(n, order)
    for phi in (pair.phi, pair.prepared_phi):
        delta = phi - model
        low = [idx for idx in delta.coeffs if sum(idx) < 4]
        if low:
            raise ChartError("phase deviates from the normal form below degree 4")
    if exact:
        _check_imaginary_part_sampled(pair.phi, n)


def _check_imaginary_part_sampled(phi: Jet, n: int, num_points: int = 10_000) -> None:
    rng = spawn_rng(0, "phase-positivity", n)
    pts = rng.uniform(-0.25, 0.25, size=(num_points, phi.num_vars))
    vals = phi.eval_many(pts.astype(complex))
    if float(np.min(vals.imag)) < -1e-10:
        raise ChartError("Im(phi) < 0 at a sampled point of the exact phase")


def _check_chart(chart: CRModelChart) -> None:
    d = chart.dim
    order = chart.jet_order
    # omega_0(T) = -1 at order jet_order - 1
    pairing = Jet.zero(d, order, (0,) * d)
    for b in range(d):
        pairing = pairing + chart.contact_form[b] * chart.reeb[b]
    resid = pairing.shift_constant(1.0).truncated(max(order - 1, 0))
    if resid.max_abs() > INVARIANT_TOL:
        raise ChartError("omega_0(T) != -1 as a jet identity")
    lam = chart.volume_density
    if abs(lam.constant_term() - 1.0) > INVARIANT_TOL:
        raise ChartError("lambda(0) != 1")
    for b in range(d):
        e = tuple(1 if k == b else 0 for k in range(d))
        if abs(lam.coefficient(e)) > INVARIANT_TOL:
            raise ChartError("grad lambda(0) != 0")
    # contact form: constant part dx_{2n}, linear part the Heisenberg normal form
    model = contact_form_jets(chart.n, order)
    for b in range(d):
        delta = chart.contact_form[b] - model[b]
        low = [idx for idx in delta.coeffs if sum(idx) <= 1]
        if low:
            raise ChartError("contact form deviates from the Heisenberg normal form")
    # frame at 0: Z_j(0) = sqrt2 * d/dz_j
    for j in range(chart.n):
        for b in range(d):
            got = chart.frame[j][b].constant_term()
            want = 0.0
            if b == 2 * j:
                want = SQRT2 / 2
            elif b == 2 * j + 1:
                want = -1j * SQRT2 / 2
            if abs(got - want) > INVARIANT_TOL:
                raise ChartError(f"frame Z_{j} has wrong value at 0")
    _check_phase_pair(chart.phase, chart.n, order, chart.is_exact_heisenberg)


# -- chart constructors ------------------------------------------------------------------


def heisenberg_chart(n: int, jet_order: int = 6) -> CRModelChart:
    """The exact Heisenberg model chart (all remainders identically zero)."""
    if n < 1:
        raise ChartError("CR dimension parameter n must be >= 1")
    if jet_order < 2:
        raise OrderShortfallError("chart jet_order must be at least 2")
    d = 2 * n + 1
    phi = heisenberg_phase_jet(n, jet_order)
    chart = CRModelChart(
        n=n,
        jet_order=jet_order,
        contact_form=contact_form_jets(n, jet_order),
        frame=frame_jets(n, jet_order),
        reeb=reeb_jets(n, jet_order),
        volume_density=Jet.constant(d, jet_order, (0,) * d, 1.0),
        synthetic_R=0.0,
        phase=PhasePair(phi=phi, prepared_phi=phi),
        is_exact_heisenberg=True,
    )
    _check_chart(chart)
    return chart


def quartic_channel_value(phase_quartic: Dict[MultiIndex, complex], n: int) -> complex:
    """Lap^2 [psi(0,u) + psi(u,0)](0) for a quartic perturbation table."""
    d = 2 * n + 1
    nv = 2 * d
    order = 4
    psi = Jet(nv, order, (0,) * nv, dict(phase_quartic))
    zero = [Jet.zero(d, order, (0,) * d) for _ in range(d)]
    coords = [Jet.coordinate(i, d, order, (0,) * d) for i in range(d)]
    s = psi.compose(zero + coords) + psi.compose(coords + zero)
    total = 0.0 + 0.0j
    for a in range(2 * n):
        for b in range(2 * n):
            idx = [0] * d
            idx[a] += 2
            idx[b] += 2
            total += s.derivative_value(tuple(idx))
    return total


def density_channel_value(lambda_quadratic: np.ndarray, n: int) -> complex:
    """Lap lambda(0) for lambda = 1 + x^T Q x / 2."""
    Q = np.asarray(lambda_quadratic)
    return complex(np.trace(Q[: 2 * n, : 2 * n]))


def perturbed_chart(
    base: CRModelChart,
    R_synth: float,
    lambda_quadratic: Optional[np.ndarray] = None,
    phase_quartic: Optional[Dict[MultiIndex, complex]] = None,
    seed: Optional[int] = None,
) -> CRModelChart:
    """Inject synthetic curvature through the density and phase channels.

    lambda gains the quadratic form x^T Q x / 2, the phase gains the given
    quartic in (x, y'), and the curvature consistency identity tying both
    channels to R_synth is validated; violation raises ChartError.
    """
    if not base.is_exact_heisenberg:
        raise ChartError("perturbed_chart requires the exact Heisenberg base chart")
    n, d, order = base.n, base.dim, base.jet_order
    Q = np.zeros((d, d)) if lambda_quadratic is None else np.asarray(lambda_quadratic, dtype=float)
    if Q.shape != (d, d) or not np.allclose(Q, Q.T, atol=1e-13):
        raise ChartError("lambda_quadratic must be a symmetric (2n+1) x (2n+1) matrix")
    table = dict(phase_quartic or {})
    nv = 2 * d
    for idx in table:
        if len(idx) != nv or sum(idx) != 4:
            raise ChartError(f"phase_quartic key {idx} is not a quartic (x,y) multi-index")
        if idx[nv - 1] != 0:
            raise ChartError("phase_quartic must not involve the last y variable")

    lap2_h1 = quartic_channel_value(table, n)
    lap_lam = density_channel_value(Q, n)
    resid = -lap2_h1 / 32.0 + 0.25j * lap_lam + 0.5j * R_synth
    if abs(resid) > CONSISTENCY_TOL:
        raise ChartError(
            f"curvature consistency identity violated (residual {abs(resid):.3e}): "
            "-(1/32) Lap^2 h1(0) + (i/4) Lap lambda(0) must equal -(i/2) R"
        )

    if not table and not np.any(Q):
        return base  # nothing injected; R_synth validated to be 0 above

    lam_coeffs: Dict[MultiIndex, complex] = {(0,) * d: 1.0}
    for a in range(d):
        for b in range(a, d):
            q = Q[a, b] if a == b else Q[a, b]
            val = Q[a, a] / 2.0 if a == b else q
            if val != 0:
                idx = [0] * d
                idx[a] += 1
                idx[b] += 1
                lam_coeffs[tuple(idx)] = lam_coeffs.get(tuple(idx), 0.0) + val
    lam = Jet(d, order, (0,) * d, lam_coeffs)
    psi = Jet(nv, order, (0,) * nv, table)
    phi = base.phase.phi + psi
    chart = CRModelChart(
        n=n,
        jet_order=order,
        contact_form=base.contact_form,
        frame=base.frame,
        reeb=base.reeb,
        volume_density=lam,
        synthetic_R=float(R_synth),
        phase=PhasePair(phi=phi, prepared_phi=phi),
        is_exact_heisenberg=False,
    )
    _check_chart(chart)
    return chart


def random_perturbation(
    n: int, R_synth: float, seed: int
) -> Tuple[np.ndarray, Dict[MultiIndex, complex]]:
    """Seeded (lambda_quadratic, phase_quartic) pair satisfying the identity.

    Curvature is split randomly between the density channel and the phase
    channel; extra diagonal-vanishing quartic terms are added for variety and
    the last quartic coefficient is calibrated to land the identity exactly.
    """
    rng = spawn_rng(seed, "perturbation", n, repr(R_synth))
    d = 2 * n + 1
    nv = 2 * d
    weight = float(rng.uniform(0.2, 0.8))

    Q = 0.05 * rng.standard_normal((d, d))
    Q = (Q + Q.T) / 2.0
    target_trace = -2.0 * weight * R_synth
    shift = (target_trace - float(np.trace(Q[: 2 * n, : 2 * n]))) / (2 * n)
    for a in range(2 * n):
        Q[a, a] += shift

    def diff_term(a: int) -> Dict[MultiIndex, complex]:
        out: Dict[MultiIndex, complex] = {}
        idx = [0] * nv
        idx[d + a] = 1
        out[tuple(idx)] = 1.0
        idx = [0] * nv
        idx[a] = 1
        out[tuple(idx)] = -1.0
        return out

    def var_term(pos: int) -> Dict[MultiIndex, complex]:
        idx = [0] * nv
        idx[pos] = 1
        return {tuple(idx): 1.0}

    def table_mul(t1, t2):
        out: Dict[MultiIndex, complex] = {}
        for i1, c1 in t1.items():
            for i2, c2 in t2.items():
                key = tuple(a + b for a, b in zip(i1, i2))
                out[key] = out.get(key, 0.0) + c1 * c2
        return out

    table: Dict[MultiIndex, complex] = {}
    for _ in range(4):
        a = int(rng.integers(0, 2 * n))
        factors = [diff_term(a)]
        for _ in range(3):
            kind = rng.integers(0, 3)
            if kind == 0:
                factors.append(diff_term(int(rng.integers(0, 2 * n))))
            elif kind == 1:
                factors.append(var_term(int(rng.integers(0, d))))          # any x
            else:
                factors.append(var_term(d + int(rng.integers(0, 2 * n))))  # y'
        term = factors[0]
        for f in factors[1:]:
            term = table_mul(term, f)
        coeff = 0.2 * (rng.standard_normal() + 1j * rng.standard_normal())
        for idx, c in term.items():
            table[idx] = table.get(idx, 0.0) + coeff * c

    current = quartic_channel_value(table, n)
    target = 16j * (1.0 - weight) * R_synth
    cal = table_mul(table_mul(diff_term(0), diff_term(0)), table_mul(diff_term(0), diff_term(0)))
    # Lap^2 of 2 c u_0^4 at 0 is 48 c
    ccal = (target - current) / 48.0
    for idx, c in cal.items():
        table[idx] = table.get(idx, 0.0) + ccal * c
    table = {idx: c for idx, c in table.items() if c != 0}
    return Q, table


# -- pointwise geometric operators -------------------------------------------------------


def kohn_laplacian_at0(chart: CRModelChart, f: Jet) -> complex:
    """Kohn Laplacian point value in canonical coordinates.

    box_b f(0) = -(1/2) sum_{j<2n} d^2 f / dx_j^2 (0) - i n df/dx_{2n}(0).
    """
    d = chart.dim
    if f.num_vars != d:
        raise OrderShortfallError(f"kohn_laplacian_at0: expected a jet in {d} variables")
    if f.order < 2:
        raise OrderShortfallError("kohn_laplacian_at0: jet order must be >= 2")
    total = 0.0 + 0.0j
    for j in range(2 * chart.n):
        idx = tuple(2 if k == j else 0 for k in range(d))
        total += -0.5 * f.derivative_value(idx)
    last = tuple(1 if k == d - 1 else 0 for k in range(d))
    total += -1j * chart.n * f.derivative_value(last)
    return total


def reeb_derivative_at0(chart: CRModelChart, f: Jet) -> complex:
    """T f(0) with T = -d/dx_{2n} at the base point."""
    d = chart.dim
    if f.num_vars != d:
        raise OrderShortfallError(f"reeb_derivative_at0: expected a jet in {d} variables")
    last = tuple(1 if k == d - 1 else 0 for k in range(d))
    return -f.derivative_value(last)


# -- flat-frame connection machinery ------------------------------------------------------


def _parallel_frame(n: int, order: int):
    """The exactly parallel Heisenberg frame Y and the transition jets.

    Returns (ycoef, ntrans): Y_a = sum_b ycoef[a][b] d/dx_b and
    d/dx_b = sum_a ntrans[b][a] Y_a, both exact.
    """
    d = 2 * n + 1
    base = (0,) * d
    zero = lambda: Jet.zero(d, order, base)
    one = lambda v: Jet.constant(d, order, base, v)
    x = lambda i: Jet.displacement(i, d, order, base)
    ycoef = [[zero() for _ in range(d)] for _ in range(d)]
    ntrans = [[zero() for _ in range(d)] for _ in range(d)]
    for j in range(n):
        ycoef[2 * j][2 * j] = one(1.0)
        ycoef[2 * j][2 * n] = -1.0 * x(2 * j + 1)
        ycoef[2 * j + 1][2 * j + 1] = one(1.0)
        ycoef[2 * j + 1][2 * n] = x(2 * j)
        ntrans[2 * j][2 * j] = one(1.0)
        ntrans[2 * j][2 * n] = x(2 * j + 1)
        ntrans[2 * j + 1][2 * j + 1] = one(1.0)
        ntrans[2 * j + 1][2 * n] = -1.0 * x(2 * j)
    ycoef[2 * n][2 * n] = one(1.0)
    ntrans[2 * n][2 * n] = one(1.0)
    return ycoef, ntrans


def christoffel_at(chart: CRModelChart, jet_order: Optional[int] = None) -> Dict[Tuple[int, int, int], Jet]:
    """Christoffel symbols of the model connection on the coframe.

    Returns {(j, k, l): Gamma^l_{jk}} with nabla_{d/dx_j} dx_k =
    sum_l Gamma^l_{jk} dx_l, as jets in x (0-based indices).
    """
    order = chart.jet_order if jet_order is None else jet_order
    d = chart.dim
    ycoef, ntrans = _parallel_frame(chart.n, order)
    out_order = max(order - 1, 0)
    gamma_t: Dict[Tuple[int, int, int], Jet] = {}
    for j in range(d):
        for k in range(d):
            # nabla_{d/dx_j} d/dx_k = sum_a d_j(ntrans[k][a]) Y_a
            comps = [Jet.zero(d, out_order, (0,) * d) for _ in range(d)]
            for a in range(d):
                der = ntrans[k][a].partial(j)
                if not der.coeffs:
                    continue
                for l in range(d):
                    term = der * ycoef[a][l].truncated(out_order)
                    comps[l] = comps[l] + term
            for l in range(d):
                gamma_t[(j, k, l)] = comps[l]
    return {
        (j, k, l): -1.0 * gamma_t[(j, l, k)]
        for j in range(d)
        for k in range(d)
        for l in range(d)
    }


def _solve_jet_linear(amat: Sequence[Sequence[Jet]], rhs: Sequence[Jet]) -> List[Jet]:
    """Solve A(x) v(x) = rhs(x) at jet level (A(0) invertible)."""
    m = len(rhs)
    order = rhs[0].order
    a0 = np.array([[amat[r][c].constant_term() for c in range(m)] for r in range(m)])
    a0inv = np.linalg.inv(a0)
    nil = [[amat[r][c].shift_constant(-a0[r, c]) for c in range(m)] for r in range(m)]
    sol = [Jet.zero(rhs[0].num_vars, order, rhs[0].base_point) for _ in range(m)]
    for _ in range(order + 1):
        resid = []
        for r in range(m):
            acc = rhs[r]
            for c in range(m):
                acc = acc - nil[r][c] * sol[c]
            resid.append(acc)
        new_sol = []
        for r in range(m):
            acc = Jet.zero(rhs[0].num_vars, order, rhs[0].base_point)
            for c in range(m):
                acc = acc + resid[c].scale(complex(a0inv[r, c]))
            new_sol.append(acc)
        sol = new_sol
    return sol


def tw_scalar_curvature(chart: CRModelChart) -> float:
    """Scalar curvature at the base point.

    Perturbed charts report their stored synthetic value; the exact model is
    computed from the curvature two-forms of the flat parallel-frame
    connection (connection forms of Z_j over the parallel frame, then
    Theta_j^k = d omega_j^k - omega wedge omega, contracted with the Levi
    metric at 0).
    """
    if not chart.is_exact_heisenberg:
        return chart.synthetic_R
    n, d, order = chart.n, chart.dim, chart.jet_order
    base = (0,) * d
    ycoef, ntrans = _parallel_frame(n, order)

    # Z_j over the parallel frame: c[j][a]
    c = [[Jet.zero(d, order, base) for _ in range(d)] for _ in range(n)]
    for j in range(n):
        for a in range(d):
            acc = Jet.zero(d, order, base)
            for b in range(d):
                acc = acc + chart.frame[j][b] * ntrans[b][a]
            c[j][a] = acc

    # complex frame matrix rows: Z_1..Z_n, conj(Z)_1..conj(Z)_n, Y_{2n} over d/dx
    rows: List[List[Jet]] = []
    for j in range(n):
        rows.append([chart.frame[j][b] for b in range(d)])
    for j in range(n):
        rows.append([chart.frame[j][b].conjugate() for b in range(d)])
    rows.append(list(ycoef[2 * n]))

    out_order = max(order - 1, 0)
    omega = [[[Jet.zero(d, out_order, base) for _ in range(d)] for _ in range(n)] for _ in range(n)]
    for j in range(n):
        for b in range(d):
            # nabla_{d/dx_b} Z_j = sum_a d_b(c[j][a]) Y_a, expanded over d/dx
            vec = [Jet.zero(d, out_order, base) for _ in range(d)]
            for a in range(d):
                der = c[j][a].partial(b)
                if not der.coeffs:
                    continue
                for l in range(d):
                    vec[l] = vec[l] + der * ycoef[a][l].truncated(out_order)
            if all(not v.coeffs for v in vec):
                continue
            frame_t = [[rows[r][l].truncated(out_order) for r in range(d)] for l in range(d)]
            comps = _solve_jet_linear(frame_t, vec)
            for k in range(n):
                omega[j][k][b] = omega[j][k][b] + comps[k]

    # Theta_j^k over dx_a ^ dx_b and Levi metric at 0
    z0 = np.array([[chart.frame[j][b].constant_term() for b in range(d)] for j in range(n)])
    domega0 = np.zeros((d, d), dtype=complex)
    for a in range(d):
        for b in range(d):
            domega0[a, b] = chart.contact_form[b].partial(a).constant_term() - chart.contact_form[
                a
            ].partial(b).constant_term()
    g = np.zeros((n, n), dtype=complex)
    for j in range(n):
        for k in range(n):
            g[j, k] = -(z0[j] @ domega0 @ np.conj(z0[k])) / 1j

    ricci = np.zeros((n, n), dtype=complex)
    for j in range(n):
        for m in range(n):
            for k in range(n):
                w = omega[j][k]
                theta0 = np.zeros((d, d), dtype=complex)
                for a in range(d):
                    for b in range(d):
                        theta0[a, b] = w[b].partial(a).constant_term() - w[a].partial(b).constant_term()
                        for l in range(n):
                            theta0[a, b] += (
                                omega[j][l][a].constant_term() * omega[l][k][b].constant_term()
                                - omega[j][l][b].constant_term() * omega[l][k][a].constant_term()
                            ) * (-1.0)
                ricci[j, m] += z0[k] @ theta0 @ np.conj(z0[m])
    r_val = complex(np.trace(np.linalg.inv(g) @ ricci))
    if abs(r_val.imag) > 1e-10:
        raise ChartError("scalar curvature came out non-real")
    return float(r_val.real)


def real_levi_frame(chart: CRModelChart) -> List[List[Jet]]:
    """The real frame X_1..X_{2n}, X_{2n+1} = -T as coefficient jets over d/dx."""
    n, d = chart.n, chart.dim
    rows: List[List[Jet]] = []
    for j in range(n):
        zj = chart.frame[j]
        zbar = [zj[b].conjugate() for b in range(d)]
        rows.append([(zj[b] + zbar[b]).scale(1 / SQRT2) for b in range(d)])
        rows.append([((1j * zj[b]) + (1j * zj[b]).conjugate()).scale(1 / SQRT2) for b in range(d)])
    rows.append([-1.0 * chart.reeb[b] for b in range(d)])
    return rows
