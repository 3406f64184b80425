"""Classical symbols as jets at the distinguished covector, and the geometry
operators acting on them.

A symbol lives as jets in (x, xi) based at (0, -omega_0(0)) = (0,...,0,-1);
the coefficient formulas downstream only ever evaluate there.  Homogeneity is
constructive: components are produced by extending data on the hyperplane
xi_{2n} = -1 with a prescribed degree, which makes the Euler identity hold at
truncation order by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .charts import CRModelChart, christoffel_at, real_levi_frame, _solve_jet_linear
from .errors import ChartError, OrderShortfallError, SymbolError
from .jets import Jet, random_jet
from .rng import spawn_rng


def xi_base(n: int) -> Tuple[complex, ...]:
    """Base point (0, -omega_0(0)) of symbol jets for CR dimension n."""
    d = 2 * n + 1
    return (0.0,) * d + (0.0,) * (d - 1) + (-1.0,)


@dataclass(frozen=True)
class ClassicalSymbol:
    """Ordered homogeneous components e_0, e_1, ... of a classical symbol."""

    order_m: float
    components: Tuple[Jet, ...]
    homogeneous: bool = False
    at_standard_base: bool = True

    def __post_init__(self):
        if not self.components:
            raise SymbolError("symbol needs at least one component")
        first = self.components[0]
        if first.num_vars % 2 or (first.num_vars // 2) % 2 == 0:
            raise SymbolError("symbol jets must have 2*(2n+1) variables")
        for c in self.components[1:]:
            if not first.is_compatible(c):
                raise SymbolError("symbol components must share num_vars/order/base")
        if self.at_standard_base and first.base_point != xi_base(self.n):
            raise SymbolError("symbol base point must be (0, -omega_0(0))")
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def n(self) -> int:
        return (self.components[0].num_vars // 2 - 1) // 2

    @property
    def dim(self) -> int:
        return self.components[0].num_vars // 2

    def component(self, j: int) -> Jet:
        if j < len(self.components):
            return self.components[j]
        first = self.components[0]
        return Jet.zero(first.num_vars, first.order, first.base_point)


def promote_x_jet(f: Jet, base_2d: Sequence[complex], order: Optional[int] = None) -> Jet:
    """Lift a jet in x to the (x, xi) space (constant in xi)."""
    d = f.num_vars
    nv = 2 * d
    order = f.order if order is None else order
    coords = [Jet.coordinate(i, nv, order, tuple(base_2d)) for i in range(d)]
    return f.with_order(order).compose(coords)


def identity_symbol(n: int, jet_order: int = 6) -> ClassicalSymbol:
    d = 2 * n + 1
    e0 = Jet.constant(2 * d, jet_order, xi_base(n), 1.0)
    return ClassicalSymbol(order_m=0.0, components=(e0,), homogeneous=True)


def make_multiplication_symbol(f: Jet, jet_order: Optional[int] = None) -> ClassicalSymbol:
    """Order-zero symbol e_0(x, xi) = f(x) for the multiplication operator."""
    d = f.num_vars
    if d % 2 == 0:
        raise SymbolError("multiplication symbol needs a jet in 2n+1 variables")
    n = (d - 1) // 2
    order = f.order if jet_order is None else jet_order
    e0 = promote_x_jet(f, xi_base(n), order)
    return ClassicalSymbol(order_m=0.0, components=(e0,), homogeneous=True)


def homogeneity_extend(data_on_slice: Jet, degree: float) -> Jet:
    """Extend data on the slice xi_{2n} = -1 homogeneously of the given degree.

    The slice jet has variables (x_0..x_{2n}, xi_0..xi_{2n-1}) at base 0; the
    result is the jet at (0, -omega_0(0)) of
    (-xi_{2n})^degree * data(x, -xi' / xi_{2n}).
    """
    nv_slice = data_on_slice.num_vars
    if (nv_slice - 1) % 4:
        raise SymbolError("slice jet must have (2n+1) + 2n variables")
    n = (nv_slice - 1) // 4
    d = 2 * n + 1
    nv = 2 * d
    order = data_on_slice.order
    base = xi_base(n)
    dlast = Jet.displacement(nv - 1, nv, order, base)
    w = Jet.constant(nv, order, base, 1.0) - dlast          # -xi_{2n} = 1 - dxi_{2n}
    winv = w.invert()
    inner = [Jet.coordinate(i, nv, order, base) for i in range(d)]
    inner += [Jet.displacement(d + j, nv, order, base) * winv for j in range(2 * n)]
    return w.pow_real(degree) * data_on_slice.compose(inner)


def euler_check(component: Jet, degree: float) -> float:
    """Max coefficient magnitude of sum_j xi_j d_{xi_j} e - degree * e."""
    nv = component.num_vars
    d = nv // 2
    k = max(component.order - 1, 0)
    resid = (-degree) * component.truncated(k)
    for j in range(d):
        xi_j = Jet.coordinate(d + j, nv, k, component.base_point)
        resid = resid + xi_j * component.partial(d + j).truncated(k)
    return resid.max_abs()


def random_classical_symbol(
    n: int,
    order_m: float,
    num_components: int,
    seed: int,
    homogeneous: bool = True,
    jet_order: int = 6,
) -> ClassicalSymbol:
    """Reproducible pseudo-random classical symbol."""
    d = 2 * n + 1
    comps: List[Jet] = []
    for j in range(num_components):
        rng = spawn_rng(seed, "symbol", n, j, repr(order_m), homogeneous)
        if homogeneous:
            slice_jet = random_jet(rng, d + 2 * n, jet_order, (0.0,) * (d + 2 * n), decay=0.4)
            comps.append(homogeneity_extend(slice_jet, order_m - j))
        else:
            comps.append(random_jet(rng, 2 * d, jet_order, xi_base(n), decay=0.4))
    return ClassicalSymbol(order_m=order_m, components=tuple(comps), homogeneous=homogeneous)


# -- subprincipal symbol -------------------------------------------------------------


def subprincipal_symbol(sym: ClassicalSymbol, density: Jet, s: float) -> Tuple[complex, Jet]:
    """Subprincipal symbol with respect to a positive s-density.

    e_sub = e_1 + (i/2) sum_j d_{x_j} d_{xi_j} e_0
                + (i/(2s)) sum_j d_{xi_j} e_0 * d_{x_j} log(lambda).

    Returns (value at the base covector, jet of the expression).
    """
    if s == 0:
        raise SymbolError("subprincipal symbol needs s != 0")
    e0 = sym.components[0]
    nv = e0.num_vars
    d = nv // 2
    if density.num_vars != d:
        raise SymbolError("density must be a jet in the x variables")
    if e0.order < 2:
        raise OrderShortfallError("subprincipal symbol needs component order >= 2")
    k = e0.order - 2
    loglam = density.log()
    out = sym.component(1).truncated(k)
    for j in range(d):
        out = out + 0.5j * e0.partial(j).partial(d + j).truncated(k)
        dlog = promote_x_jet(loglam.partial(j), e0.base_point, k)
        out = out + (0.5j / s) * (e0.partial(d + j).truncated(k) * dlog)
    return out.constant_term(), out


# -- coordinate changes -----------------------------------------------------------------


def invert_map(kappa: Sequence[Jet]) -> List[Jet]:
    """Inverse of a jet map fixing 0 with invertible Jacobian."""
    d = len(kappa)
    order = kappa[0].order
    base = kappa[0].base_point
    for comp in kappa:
        if abs(comp.constant_term()) > 1e-12:
            raise SymbolError("invert_map: map must fix the origin")
    jac = np.array(
        [[kappa[c].coefficient(tuple(1 if k == j else 0 for k in range(d))) for j in range(d)] for c in range(d)]
    )
    if abs(np.linalg.det(jac)) < 1e-12:
        raise SymbolError("invert_map: singular Jacobian at 0")
    ainv = np.linalg.inv(jac)

    def lin_solve(vecs: List[Jet]) -> List[Jet]:
        out = []
        for c in range(d):
            acc = Jet.zero(d, order, base)
            for j in range(d):
                acc = acc + vecs[j].scale(complex(ainv[c, j]))
            out.append(acc)
        return out

    coords = [Jet.displacement(i, d, order, base) for i in range(d)]
    nonlin = []
    for c in range(d):
        lin = Jet.zero(d, order, base)
        for j in range(d):
            lin = lin + coords[j].scale(complex(jac[c, j]))
        nonlin.append(kappa[c].shift_constant(-kappa[c].constant_term()) - lin)
    psi = lin_solve(coords)
    for _ in range(order):
        nl_at = [nonlin[j].compose(psi) for j in range(d)]
        psi = lin_solve([coords[j] - nl_at[j] for j in range(d)])
    return psi


def jet_matrix_determinant(mat: Sequence[Sequence[Jet]]) -> Jet:
    """Determinant of a small square matrix of jets (Laplace expansion)."""
    m = len(mat)
    if m == 1:
        return mat[0][0]
    first = mat[0][0]
    acc = Jet.zero(first.num_vars, first.order, first.base_point)
    for c in range(m):
        minor = [[mat[r][cc] for cc in range(m) if cc != c] for r in range(1, m)]
        term = mat[0][c] * jet_matrix_determinant(minor)
        acc = acc + term if c % 2 == 0 else acc - term
    return acc


def transform_density(density: Jet, kappa: Sequence[Jet], s: float) -> Jet:
    """Transported s-density factor: lambda_kappa(kappa(x)) = lambda(x)/|det kappa'|^s."""
    d = len(kappa)
    order = density.order
    psi = invert_map([k.with_order(order) for k in kappa])
    jac = [[kappa[c].with_order(order).partial(j).with_order(order) for j in range(d)] for c in range(d)]
    det = jet_matrix_determinant(jac)
    det0 = det.constant_term()
    if abs(det0.imag) > 1e-12 or det0.real == 0:
        raise SymbolError("transform_density: need a real nonvanishing Jacobian determinant")
    absdet = det if det0.real > 0 else -1.0 * det
    lam_over = density * absdet.pow_real(-s)
    return lam_over.compose(psi)


def transform_symbol_under_diffeo(sym: ClassicalSymbol, kappa: Sequence[Jet]) -> ClassicalSymbol:
    """Total-symbol pushforward through subleading order.

    e_{kappa,0}(kappa(x), eta) = e_0(x, kappa'(x)^T eta) and the subleading
    component picks up the half-Hessian correction
    -(i/2) sum_{j,k} d^2_{xi_j xi_k} e_0 * <d^2_{jk} kappa, eta>.
    """
    e0 = sym.components[0]
    nv = e0.num_vars
    d = nv // 2
    if len(kappa) != d:
        raise SymbolError("kappa must have one component per x variable")
    if e0.order < 2:
        raise OrderShortfallError("transform needs component order >= 2")
    work = e0.order - 2

    jac0 = np.array(
        [[kappa[c].coefficient(tuple(1 if k == j else 0 for k in range(d))) for j in range(d)] for c in range(d)]
    )
    if abs(np.linalg.det(jac0)) < 1e-12:
        raise SymbolError("transform: singular Jacobian at 0")
    old_xi = np.array(e0.base_point[d:])
    eta0 = np.linalg.solve(jac0.T, old_xi)
    new_base = tuple(0.0 for _ in range(d)) + tuple(complex(v) for v in eta0)

    psi = invert_map([k.with_order(work) for k in kappa])  # x(y), jets in y

    def on_new_space(f_x: Jet) -> Jet:
        """f(x(y)) promoted to the (y, eta) space."""
        f_y = f_x.with_order(work).compose(psi)
        return promote_x_jet(f_y, new_base, work)

    eta_coords = [Jet.coordinate(d + c, nv, work, new_base) for c in range(d)]
    inner_x = [on_new_space(Jet.displacement(i, d, work, (0.0,) * d)) for i in range(d)]
    inner_xi = []
    for j in range(d):
        acc = Jet.zero(nv, work, new_base)
        for c in range(d):
            dkc = kappa[c].with_order(work + 1).partial(j).with_order(work)
            acc = acc + on_new_space(dkc) * eta_coords[c]
        inner_xi.append(acc)
    inner = inner_x + inner_xi

    ek0 = e0.truncated(work).with_order(work).compose(inner)
    ek1 = sym.component(1).truncated(work).compose(inner)
    for j in range(d):
        for k in range(d):
            hess = e0.partial(d + j).partial(d + k).truncated(work)
            if not hess.coeffs:
                continue
            pairing = Jet.zero(nv, work, new_base)
            for c in range(d):
                d2k = kappa[c].with_order(work + 2).partial(j).partial(k).with_order(work)
                if not d2k.coeffs:
                    continue
                pairing = pairing + on_new_space(d2k) * eta_coords[c]
            if pairing.coeffs:
                ek1 = ek1 + (-0.5j) * (hess.compose(inner) * pairing)
    standard = new_base == xi_base((d - 1) // 2)
    return ClassicalSymbol(
        order_m=sym.order_m,
        components=(ek0, ek1),
        homogeneous=False,
        at_standard_base=standard,
    )


# -- cotangent geometry -----------------------------------------------------------------


def hamiltonian_vector_field(F: Jet) -> List[Jet]:
    """Components [a_1..a_d, b_1..b_d] of X_F = sum a_j d/dx_j + b_j d/dxi_j."""
    nv = F.num_vars
    d = nv // 2
    k = max(F.order - 1, 0)
    return [(-1.0) * F.partial(d + j).truncated(k) for j in range(d)] + [
        F.partial(j).truncated(k) for j in range(d)
    ]


def divergence(vf: Sequence[Jet]) -> Jet:
    """Divergence with respect to the Liouville volume (coordinate formula)."""
    nv = vf[0].num_vars
    d = nv // 2
    k = max(vf[0].order - 1, 0)
    acc = Jet.zero(nv, k, vf[0].base_point)
    for j in range(d):
        acc = acc + vf[j].partial(j).truncated(k)
        acc = acc + vf[d + j].partial(d + j).truncated(k)
    return acc


def p_operator_canonical(F: Jet) -> complex:
    """P(F)(0,-omega_0(0)) = sum_j [d2_{x_{2j}, xi_{2j-1}} - d2_{x_{2j-1}, xi_{2j}}] F."""
    nv = F.num_vars
    d = nv // 2
    n = (d - 1) // 2
    if F.order < 2:
        raise OrderShortfallError("p_operator_canonical needs order >= 2")
    total = 0.0 + 0.0j
    for j in range(n):
        idx = [0] * nv
        idx[2 * j + 1] += 1
        idx[d + 2 * j] += 1
        total += F.derivative_value(tuple(idx))
        idx = [0] * nv
        idx[2 * j] += 1
        idx[d + 2 * j + 1] += 1
        total -= F.derivative_value(tuple(idx))
    return total


def p_operator_geometric(chart: CRModelChart, F: Jet) -> complex:
    """P(F) = -(1/2) Div(J_{T*X} X_F) evaluated at (0, -omega_0(0)).

    Assembled from the horizontal lifts of the model connection, the lifted
    complex structure and the Hamiltonian field; supported on the exact
    Heisenberg chart, where the lift frames are exact.
    """
    if not chart.is_exact_heisenberg:
        raise ChartError("p_operator_geometric supports only the exact Heisenberg chart")
    n, d = chart.n, chart.dim
    nv = 2 * d
    if F.num_vars != nv:
        raise SymbolError(f"F must be a jet in {nv} variables")
    if F.order < 2:
        raise OrderShortfallError("p_operator_geometric needs order >= 2")
    base = F.base_point
    w = max(F.order - 1, 0)

    comps = hamiltonian_vector_field(F)
    a = comps[:d]
    b = comps[d:]

    gammas = christoffel_at(chart, w + 1)
    gam = {
        key: promote_x_jet(g.truncated(w), base, w) for key, g in gammas.items() if g.coeffs
    }
    xi_jets = [Jet.coordinate(d + k, nv, w, base) for k in range(d)]
    x_jets = [Jet.coordinate(i, nv, w, base) for i in range(d)]

    # vertical remainder after subtracting the horizontal lift of the pushdown
    bhat = list(b)
    for (j, k, l), g in gam.items():
        bhat[l] = bhat[l] + a[j] * (xi_jets[k] * g)

    # pushdown split over the real frame: solve sum_a alpha_a X_a = sum a_l d/dx_l
    xframe = real_levi_frame(chart)
    frame_p = [[promote_x_jet(xframe[r][l].truncated(w), base, w) for l in range(d)] for r in range(d)]
    amat = [[frame_p[r][l] for r in range(d)] for l in range(d)]
    alpha = _solve_jet_linear(amat, a)

    # dual coframe rows (omega^a over dx_b): solve sum_b W[a][b] xframe[r][b] = delta_{a r}
    coframe: List[List[Jet]] = []
    for arow in range(d):
        rhs = [
            Jet.constant(nv, w, base, 1.0 if r == arow else 0.0) for r in range(d)
        ]
        wmat = [[frame_p[r][bb] for bb in range(d)] for r in range(d)]
        coframe.append(_solve_jet_linear(wmat, rhs))
    beta = _solve_jet_linear([[coframe[arow][bb] for arow in range(d)] for bb in range(d)], bhat)

    # horizontal lift coefficients: X_r^Hor = sum_l xframe[r][l] d/dx_l^Hor
    def hor_field(r: int) -> Tuple[List[Jet], List[Jet]]:
        xs = [frame_p[r][l] for l in range(d)]
        vs = [Jet.zero(nv, w, base) for _ in range(d)]
        for (j, k, l), g in gam.items():
            vs[l] = vs[l] - frame_p[r][j] * (xi_jets[k] * g)
        return xs, vs

    out_x = [Jet.zero(nv, w, base) for _ in range(d)]
    out_xi = [Jet.zero(nv, w, base) for _ in range(d)]

    # J on the horizontal Levi part: X_{2j} -> X_{2j+1}, X_{2j+1} -> -X_{2j}
    for j in range(n):
        for coeff, target in ((alpha[2 * j], 2 * j + 1), (-1.0 * alpha[2 * j + 1], 2 * j)):
            xs, vs = hor_field(target)
            for l in range(d):
                out_x[l] = out_x[l] + coeff * xs[l]
                out_xi[l] = out_xi[l] + coeff * vs[l]

    # minus J on the vertical Levi part: omega^{2j} -> omega^{2j+1}, omega^{2j+1} -> -omega^{2j}
    for j in range(n):
        for coeff, target in ((beta[2 * j], 2 * j + 1), (-1.0 * beta[2 * j + 1], 2 * j)):
            for l in range(d):
                out_xi[l] = out_xi[l] + coeff * coframe[target][l]

    div = divergence(out_x + out_xi)
    return -0.5 * div.constant_term()
