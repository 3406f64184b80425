"""Stationary-phase coefficient engine.

For I(t) = t * int int exp(i t Psi0(u, sigma)) Gamma(u, sigma, t) du dsigma
with a nondegenerate critical point at (u, sigma) = (0, 1), the first two
expansion coefficients come from the inverse-Hessian operator

    <Psi0''(0,1)^{-1} D, D>,   D = -i (d_u, d_sigma),

through the L_j operators

    L_j v = i^{-j} sum_{mu=0}^{2j} <.,.>^{mu+j} (h^mu v)(0,1)
                                   / (mu! (mu+j)! 2^{mu+j}),

where h is the cubic-and-higher remainder of Psi0.  A tensor-grid quadrature
oracle cross-checks the formal coefficients on the exact Heisenberg phase.

Jets here live in the variables (u_1..u_{2n+1}, sigma-1) based at 0, so the
critical point is the jet base point.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .charts import CRModelChart
from .errors import BranchError, ChartError, HessianError, OracleFitError, OrderShortfallError
from .jets import Jet, iter_multi_indices

#: gradient tolerance for accepting (0, 1) as the critical point
CRITICAL_TOL = 1e-12


@dataclass(frozen=True)
class PhaseCriticalData:
    """Everything the L_j operators need about Psi0 at its critical point."""

    n: int
    psi0: Jet
    hessian: np.ndarray
    hessian_inverse: np.ndarray
    h: Jet
    det_normalized: complex   # det(Psi0''(0,1) / (2 pi i))
    sqrt_det: complex         # branch-checked square root of det_normalized
    inv_op: Dict[Tuple[int, int], complex]
    exact_heisenberg: bool

    @property
    def num_vars(self) -> int:
        return 2 * self.n + 2


def build_phase_data(chart: CRModelChart) -> PhaseCriticalData:
    """Assemble Psi0(u, sigma) = sigma Phi(0, u) + Phi(u, 0) and its Hessian data."""
    d = chart.dim
    nv = d + 1
    order = chart.jet_order
    base = (0.0,) * nv
    phi = chart.phase.prepared_phi

    u_coords = [Jet.displacement(i, nv, order, base) for i in range(d)]
    zero = [Jet.zero(nv, order, base) for _ in range(d)]
    phi_0u = phi.compose(zero + u_coords)
    phi_u0 = phi.compose(u_coords + zero)
    sigma = Jet.constant(nv, order, base, 1.0) + Jet.displacement(d, nv, order, base)
    psi0 = sigma * phi_0u + phi_u0

    if abs(psi0.constant_term()) > CRITICAL_TOL:
        raise ChartError("Psi0(0,1) != 0")
    grad_scale = max(psi0.max_abs(), 1.0)
    for a in range(nv):
        idx = tuple(1 if k == a else 0 for k in range(nv))
        if abs(psi0.coefficient(idx)) > CRITICAL_TOL * grad_scale:
            raise ChartError("phase is not critical at (u, sigma) = (0, 1)")

    hess = np.zeros((nv, nv), dtype=complex)
    for a in range(nv):
        for b in range(a, nv):
            idx = [0] * nv
            idx[a] += 1
            idx[b] += 1
            hess[a, b] = hess[b, a] = psi0.derivative_value(tuple(idx))
    try:
        hess_inv = np.linalg.inv(hess)
    except np.linalg.LinAlgError as exc:
        raise HessianError("phase Hessian at the critical point is singular") from exc
    if np.max(np.abs(hess @ hess_inv - np.eye(nv))) > 1e-12:
        raise HessianError("phase Hessian inversion lost precision")

    quad: Dict[Tuple[int, ...], complex] = {}
    for a in range(nv):
        for b in range(a, nv):
            idx = [0] * nv
            idx[a] += 1
            idx[b] += 1
            val = hess[a, b] if a != b else hess[a, a] / 2.0
            if val != 0:
                quad[tuple(idx)] = val
    h = psi0 - Jet(nv, order, base, quad)
    low = {idx: c for idx, c in h.coeffs.items() if sum(idx) <= 2}
    if low and max(abs(c) for c in low.values()) > 1e-11 * grad_scale:
        raise ChartError("cubic remainder h carries terms of degree <= 2")
    h = Jet(nv, order, base, {idx: c for idx, c in h.coeffs.items() if sum(idx) > 2})

    det_norm = complex(np.linalg.det(hess / (2j * math.pi)))
    root = np.sqrt(det_norm)
    if root.real <= 0:
        raise BranchError("determinant square root does not lie in the right half plane")

    table: Dict[Tuple[int, int], complex] = {}
    for a in range(nv):
        for b in range(a, nv):
            val = -hess_inv[a, b] if a == b else -2.0 * hess_inv[a, b]
            if abs(val) > 1e-15:
                table[(a, b)] = complex(val)
    return PhaseCriticalData(
        n=chart.n,
        psi0=psi0,
        hessian=hess,
        hessian_inverse=hess_inv,
        h=h,
        det_normalized=det_norm,
        sqrt_det=complex(root),
        inv_op=table,
        exact_heisenberg=chart.is_exact_heisenberg,
    )


def inverse_hessian_operator(data: PhaseCriticalData) -> Dict[Tuple[int, int], complex]:
    """Coefficient table of <Psi0''^{-1} D, D> over second partials d_a d_b (a <= b)."""
    return dict(data.inv_op)


def _apply_inv_op(data: PhaseCriticalData, v: Jet) -> Jet:
    out = Jet.zero(v.num_vars, max(v.order - 2, 0), v.base_point)
    for (a, b), c in data.inv_op.items():
        out = out + c * v.partial(a).partial(b)
    return out


def apply_L(data: PhaseCriticalData, j: int, v: Jet) -> complex:
    """(L_j v) at the critical point for the stored phase."""
    if j < 1:
        raise ValueError("apply_L needs j >= 1")
    if v.num_vars != data.num_vars:
        raise OrderShortfallError("v must be a jet in (u, sigma-1)")
    if v.order < 2 * j:
        raise OrderShortfallError(f"apply_L: v order {v.order} < {2 * j}")
    if data.h.order < 2 * j + 2:
        raise OrderShortfallError(f"apply_L: phase order {data.h.order} < {2 * j + 2}")
    total = 0.0 + 0.0j
    for mu in range(2 * j + 1):
        depth = 2 * (mu + j)
        g = v.with_order(depth)
        hw = data.h.with_order(depth)
        for _ in range(mu):
            g = g * hw
        for _ in range(mu + j):
            g = _apply_inv_op(data, g)
        total += g.constant_term() / (
            math.factorial(mu) * math.factorial(mu + j) * 2 ** (mu + j)
        )
    return total * (1j) ** (-j)


def expansion_coeffs(
    data: PhaseCriticalData,
    gamma0: Jet,
    gamma1: Optional[Jet] = None,
    num_coeffs: int = 2,
    top_power: Optional[float] = None,
) -> List[complex]:
    """First expansion coefficients of I(t).

    With Gamma ~ gamma0 t^p + gamma1 t^{p-1}, returns the coefficients of
    t^{p-n} and t^{p-n-1}:
        c0 = gamma0(0,1) / sqrt(det(Psi''/2 pi i)),
        c1 = (gamma1(0,1) + L_1 gamma0(0,1)) / sqrt(det(Psi''/2 pi i)).

    top_power (p above) is exponent bookkeeping for the caller; it does not
    enter the coefficient values.
    """
    del top_power
    if not 1 <= num_coeffs <= 2:
        raise ValueError("num_coeffs must be 1 or 2 (two orders are specified)")
    out = [gamma0.constant_term() / data.sqrt_det]
    if num_coeffs == 2:
        g1 = 0.0 + 0.0j if gamma1 is None else gamma1.constant_term()
        out.append((g1 + apply_L(data, 1, gamma0)) / data.sqrt_det)
    return out


def mu2_vanishing_values(data: PhaseCriticalData, gamma0: Jet) -> Dict[str, complex]:
    """The mu = 2 case-analysis terms for H_2 = h^2 gamma0, at the critical point.

    All four must vanish on the exact Heisenberg data.
    """
    nv = data.num_vars
    m = 2 * data.n  # Laplacian runs over the first 2n slots
    depth = 6
    hw = data.h.with_order(depth)
    H2 = hw * hw * gamma0.with_order(depth)
    s_ix = nv - 1
    u_ix = nv - 2

    def deriv(extra: Dict[int, int]) -> complex:
        idx = [0] * nv
        for pos, k in extra.items():
            idx[pos] += k
        return H2.derivative_value(tuple(idx))

    def lap_indices(power: int):
        if power == 0:
            yield {}
            return
        for head in range(m):
            for rest in lap_indices(power - 1):
                out = dict(rest)
                out[head] = out.get(head, 0) + 2
                yield out

    out: Dict[str, complex] = {}
    out["dsdu_cubed"] = deriv({s_ix: 3, u_ix: 3})
    acc = 0.0 + 0.0j
    for lap in lap_indices(1):
        lap = dict(lap)
        lap[s_ix] = lap.get(s_ix, 0) + 2
        lap[u_ix] = lap.get(u_ix, 0) + 2
        acc += deriv(lap)
    out["lap_dsdu_sq"] = acc
    acc = 0.0 + 0.0j
    for lap in lap_indices(2):
        lap = dict(lap)
        lap[s_ix] = lap.get(s_ix, 0) + 1
        lap[u_ix] = lap.get(u_ix, 0) + 1
        acc += deriv(lap)
    out["lap2_dsdu"] = acc
    acc = 0.0 + 0.0j
    for lap in lap_indices(3):
        acc += deriv(lap)
    out["lap3"] = acc
    return out


# -- quadrature oracle ------------------------------------------------------------------


@lru_cache(maxsize=32)
def _gauss_nodes(num: int, radius: float):
    x, w = np.polynomial.legendre.leggauss(num)
    return x * radius, w * radius


#: cutoff profile width as a fraction of the cutoff radius
WIDTH_FRACTION = 0.63

#: half the vanishing order of the cutoff profile at the critical point
CUTOFF_FLATNESS = 4


def _bump(rho_sq: np.ndarray) -> np.ndarray:
    """Smooth radial cutoff, flat to degree 8 at 0 and ~1e-17 at the box edge.

    chi = exp(-(rho / (WIDTH_FRACTION * r))^8) deviates from 1 only at degree
    8 in the integration variables, so it cannot disturb the first four
    expansion coefficients; at rho = r it has decayed below double precision,
    so the finite integration box introduces no boundary oscillation.
    """
    rel = np.maximum(rho_sq, 0.0) / WIDTH_FRACTION**2
    return np.exp(-(rel**CUTOFF_FLATNESS))


#: memo for monomial moments; keyed by phase data and grid parameters
_MOMENT_MEMO: Dict[tuple, Dict[Tuple[int, ...], complex]] = {}


def _poly_on_grid(jet: Jet, d: int, chunk_value: float, shape, grids) -> np.ndarray:
    out = np.zeros(shape, dtype=complex)
    maxp = jet.order
    powers = []
    for ax in range(d - 1):
        tab = np.ones((maxp + 1, len(grids[ax])), dtype=float)
        for p in range(1, maxp + 1):
            tab[p] = tab[p - 1] * grids[ax]
        powers.append(tab)
    spow = np.ones(maxp + 1)
    for p in range(1, maxp + 1):
        spow[p] = spow[p - 1] * chunk_value
    for idx, c in jet.graded_items():
        term = c * spow[idx[-1]]
        mono = np.ones(shape, dtype=float)
        for ax in range(d - 1):
            if idx[ax]:
                view = [1] * (d - 1)
                view[ax] = -1
                mono = mono * powers[ax][idx[ax]].reshape(view)
        out += term * mono
    return out


def oscillatory_monomial_moments(
    phase: Jet,
    amp_order: int,
    t: float,
    cutoff_radius: float,
    nodes_per_axis: Sequence[int],
) -> Dict[Tuple[int, ...], complex]:
    """Moments int v^alpha exp(i t phase(v)) cutoff(|v|/r) dv for |alpha| <= amp_order.

    The oscillatory factor is evaluated once per grid chunk and shared by all
    monomials, so integrals of any amplitude of the given order come from one
    grid sweep; results are memoized per (phase, t, grid) with fixed
    summation order, hence deterministic.
    """
    d = phase.num_vars
    if len(nodes_per_axis) != d:
        raise ValueError("nodes_per_axis must list one count per variable")
    key = (
        phase.graded_items(),
        phase.base_point,
        int(amp_order),
        float(t),
        float(cutoff_radius),
        tuple(int(k) for k in nodes_per_axis),
        WIDTH_FRACTION,
        CUTOFF_FLATNESS,
    )
    hit = _MOMENT_MEMO.get(key)
    if hit is not None:
        return hit
    axes = [_gauss_nodes(int(k), cutoff_radius) for k in nodes_per_axis]
    rad2 = cutoff_radius**2
    inner_nodes = [axes[ax][0] for ax in range(d - 1)]
    wprod = None
    for ax in range(d - 1):
        view = [1] * (d - 1)
        view[ax] = -1
        wv = axes[ax][1].reshape(view)
        wprod = wv if wprod is None else wprod * wv
    shape = tuple(len(inner_nodes[ax]) for ax in range(d - 1))
    rho_inner = None
    power_tabs = []
    for ax in range(d - 1):
        view = [1] * (d - 1)
        view[ax] = -1
        g2 = (inner_nodes[ax] ** 2).reshape(view)
        rho_inner = g2 if rho_inner is None else rho_inner + g2
        tab = np.ones((amp_order + 1, len(inner_nodes[ax])), dtype=float)
        for p in range(1, amp_order + 1):
            tab[p] = tab[p - 1] * inner_nodes[ax]
        power_tabs.append(tab)

    monomials = list(iter_multi_indices(d, amp_order))
    sums = {idx: 0.0 + 0.0j for idx in monomials}
    last_nodes, last_w = axes[d - 1]
    for k, sval in enumerate(last_nodes):
        psi = _poly_on_grid(phase, d, float(sval), shape, inner_nodes)
        chi = _bump((rho_inner + sval**2) / rad2)
        core = wprod * chi * np.exp(1j * t * psi)
        spow = np.ones(amp_order + 1)
        for p in range(1, amp_order + 1):
            spow[p] = spow[p - 1] * float(sval)
        for idx in monomials:
            mono = core
            for ax in range(d - 1):
                if idx[ax]:
                    view = [1] * (d - 1)
                    view[ax] = -1
                    mono = mono * power_tabs[ax][idx[ax]].reshape(view)
            sums[idx] += last_w[k] * spow[idx[-1]] * np.sum(mono)
    if len(_MOMENT_MEMO) > 64:
        _MOMENT_MEMO.clear()
    _MOMENT_MEMO[key] = sums
    return sums


def oscillatory_integral_value(
    phase: Jet,
    amplitude: Jet,
    t: float,
    cutoff_radius: float,
    nodes_per_axis: Sequence[int],
) -> complex:
    """int exp(i t phase(v)) amplitude(v) cutoff(|v|/r) dv on a tensor grid.

    The jets are treated as exact polynomials in their displacement
    variables; integration runs over [-r, r]^d with the last axis chunked to
    bound memory.
    """
    d = phase.num_vars
    if amplitude.num_vars != d:
        raise OrderShortfallError("phase and amplitude must share variables")
    moments = oscillatory_monomial_moments(
        phase, amplitude.order, t, cutoff_radius, nodes_per_axis
    )
    total = 0.0 + 0.0j
    for idx, c in amplitude.graded_items():
        total += c * moments[idx]
    return complex(total)


#: default fit samples; the cutoff contamination decays fast over this window
ORACLE_T_SAMPLES = (40.0, 45.0, 50.0, 55.0, 60.0, 65.0, 70.0, 75.0, 80.0)


def numeric_expansion_oracle(
    data: PhaseCriticalData,
    amplitude: Jet,
    t_samples: Optional[Sequence[float]] = None,
    cutoff_radius: float = 1.4,
    nodes_per_axis: Optional[Sequence[int]] = None,
    residual_tol: float = 1e-3,
) -> Tuple[complex, complex]:
    """Brute-force check of expansion_coeffs by quadrature and power-law fit.

    Evaluates I(t) = t * int exp(i t Psi0) amplitude * cutoff d(u, sigma) on a
    tensor grid over [-r, r]^{2n+2}, subtracts the exactly known third to
    fifth expansion orders (computed with the higher L_j operators, which the
    coefficient pipelines never use), then fits c0 t^{-n} + c1 t^{-n-1} by
    t^2-weighted least squares and returns (c0, c1).  Restricted to the exact
    Heisenberg phase with n = 1 (no cutoff guidance exists for perturbed
    phases; the exact phase is also what makes the jet promotion behind the
    tail subtraction exact).

    The box may extend below sigma = 0 (radius up to 2): the integrand is the
    same polynomial data, Im(Psi0) >= 0 holds for sigma > -1, and the only
    critical point inside is (0, 1), so the expansion coefficients are
    unchanged while the flat cutoff profile gains enough width to keep its
    contamination below the fit tolerances.
    """
    if data.n != 1:
        raise OracleFitError("quadrature oracle supports n = 1 only")
    if not data.exact_heisenberg:
        raise OracleFitError("quadrature oracle supports the exact Heisenberg phase only")
    ts = [float(t) for t in (ORACLE_T_SAMPLES if t_samples is None else t_samples)]
    if len(ts) < 4:
        raise OracleFitError("need at least 4 t samples")
    if min(ts) < 20.0 or max(ts) > 80.0:
        raise OracleFitError("t samples must lie in [20, 80]")
    if not 0 < cutoff_radius < 2.0:
        raise OracleFitError("cutoff radius must lie in (0, 2) to keep Im(phase) >= 0")
    if nodes_per_axis is None:
        nodes_per_axis = (48, 48, 160, 160)
    if min(nodes_per_axis) < 48:
        raise OracleFitError("at least 48 quadrature nodes per axis are required")

    values = np.array(
        [
            t * oscillatory_integral_value(data.psi0, amplitude, t, cutoff_radius, nodes_per_axis)
            for t in ts
        ]
    )
    if float(np.max(np.abs(values))) == 0.0:
        return 0.0 + 0.0j, 0.0 + 0.0j
    tarr = np.array(ts)

    # Subtract the exactly known t^{-3}..t^{-5} tail before fitting: the exact
    # model phase is a cubic polynomial, so promoting its jets is exact and
    # the higher L_j orders of the cutoff-corrected amplitude are available.
    # The first two orders stay untouched (the cutoff is flat to degree 8),
    # so the fit below still measures c0 and c1 independently of them.
    deep = dataclasses.replace(
        data, psi0=data.psi0.with_order(12), h=data.h.with_order(12)
    )
    nv = data.num_vars
    rho2 = Jet(nv, 8, (0.0,) * nv, {
        tuple(2 if k == a else 0 for k in range(nv)): 1.0 for a in range(nv)
    })
    rho8 = rho2 * rho2
    rho8 = rho8 * rho8
    chi_jet = Jet.constant(nv, 8, (0.0,) * nv, 1.0) - rho8.scale(
        1.0 / (WIDTH_FRACTION * cutoff_radius) ** (2 * CUTOFF_FLATNESS)
    )
    amp_eff = amplitude.with_order(8) * chi_jet
    tail = np.zeros_like(values)
    for k in (2, 3, 4):
        ck = apply_L(deep, k, amp_eff) / data.sqrt_det
        tail = tail + ck * tarr ** (-1.0 - k)
    corrected = values - tail

    weight = tarr**2
    basis = np.column_stack([tarr**-1.0, tarr**-2.0]).astype(complex)
    coeffs, *_ = np.linalg.lstsq(basis * weight[:, None], corrected * weight, rcond=None)
    resid = float(
        np.linalg.norm((basis @ coeffs - corrected) * weight)
        / max(np.linalg.norm(values * weight), 1e-300)
    )
    if resid > residual_tol:
        raise OracleFitError(
            f"power-law fit residual {resid:.2e} exceeds {residual_tol:.2e}; "
            "increase the t range or the grid resolution"
        )
    return complex(coeffs[0]), complex(coeffs[1])
