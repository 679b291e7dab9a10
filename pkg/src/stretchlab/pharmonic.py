"""Discrete equivariant p-Schatten harmonic map solver and its currents.

Maps are stored as one hyperboloid point per vertex class; the chart value at
vertex i is rho(w_i) applied to the class point, so equivariance is exact by
construction.  The per-triangle differential D is the linear map between
log-map charts (domain chart at the circumcenter, target chart at the
projected barycenter), first-order consistent; TrQ(df)^p = s1^p + s2^p is
evaluated as Tr((D^T D)^{p/2}) through the Newton power recurrence in
(tr, det), which is polynomial for even p and keeps gradients smooth.

The optimizer is projected gradient with Armijo backtracking on the product
of hyperboloids (retraction: renormalize to the sheet; exact exponential step
when the normalization would leave it), with a Barzilai-Borwein initial step.

Currents: S_{p-1} = Q(U)^{p-2} U with U = kappa_p du, V_q = *S_{p-1} x u,
T_q = (S_{p-1} (x) du)# - (1/p)|S_{p-1}| g, W_q = *T_q x id, assembled as
per-edge forms by averaging adjacent triangle contributions (with Ad
transport across the paired boundary).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lorentz
from .fuchsian import SurfaceGroupRep
from .lorentz import E_SHARP, cross, exp_so21, mink_cross_vec, mink_dot
from .mesh import DiscreteOneForm, FundamentalMesh, closedness_residual, maurer_cartan


# ---------------------------------------------------------------------------
# map and options
# ---------------------------------------------------------------------------

@dataclass
class EquivariantMap:
    """Hyperboloid point per vertex class, rho-equivariant chart extension."""

    mesh: FundamentalMesh
    rho: SurfaceGroupRep
    class_points: np.ndarray  # (nc, 3)

    def chart_points(self, lifts: np.ndarray | None = None) -> np.ndarray:
        lifts = lifts if lifts is not None else self.mesh.lift_matrices(self.rho)
        return np.einsum("vab,vb->va", lifts, self.class_points[self.mesh.vertex_class])

    def validate(self, tol: float = 1e-10):
        Z = self.class_points
        q = Z[:, 0] ** 2 + Z[:, 1] ** 2 - Z[:, 2] ** 2
        if float(np.abs(q + 1.0).max()) > tol:
            raise ValueError("class points are not on the hyperboloid")
        # boundary equivariance is structural; verify on the paired vertices
        lifts = self.mesh.lift_matrices(self.rho)
        pts = self.chart_points(lifts)
        for u, v, k in self.mesh.boundary_pairs:
            g = self.rho.evaluate(self.mesh.pairing_words[k])
            if float(np.abs(g @ pts[u] - pts[v]).max()) > tol * 10:
                raise ValueError("map is not equivariant across a paired boundary")
        return self


def identity_map(mesh: FundamentalMesh, rho: SurfaceGroupRep) -> EquivariantMap:
    """Class points at the domain representatives (the natural warm start)."""
    return EquivariantMap(mesh, rho, mesh.vertices[mesh.class_rep_vertex].copy())


@dataclass
class SolveOptions:
    tol: float = 1e-7          # stationarity: |grad| <= tol * max(1, J_p)
    max_iter: int = 4000
    step_cap: float = 1.0
    armijo_c1: float = 1e-4
    max_backtracks: int = 60
    seed: int = 0


@dataclass
class SolveResult:
    map: EquivariantMap
    p: int
    J_p: float
    kappa_p: float
    s1: np.ndarray
    s2: np.ndarray
    density: np.ndarray | None = None
    V_q: DiscreteOneForm | None = None
    W_q: DiscreteOneForm | None = None
    T_q: np.ndarray | None = None
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    converged: bool = True
    line_search_failure: bool = False
    grad_norm: float = float("nan")
    energy_log: list = field(default_factory=list)

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    def normalized_stage_value(self) -> float:
        """(J_p / Area)^{1/p}."""
        area = float(self.map.mesh.areas.sum())
        return float((self.J_p / area) ** (1.0 / self.p))


# ---------------------------------------------------------------------------
# vectorized energy / gradient context
# ---------------------------------------------------------------------------

class _Context:
    def __init__(self, mesh: FundamentalMesh, rho: SurfaceGroupRep):
        self.mesh = mesh
        self.rho = rho
        tri = mesh.triangles
        self.tri_class = mesh.vertex_class[tri]                    # (nt, 3)
        lifts = mesh.lift_matrices(rho)
        self.lift = lifts[tri]                                     # (nt, 3, 3, 3)
        self.areas = mesh.areas
        self.Ki = mesh.tri_dxinv                                   # (nt, 2, 2)
        self.KiT = self.Ki.transpose(0, 2, 1)
        self.nc = mesh.n_classes

    def chart_corners(self, Z: np.ndarray) -> np.ndarray:
        return np.einsum("tcab,tcb->tca", self.lift, Z[self.tri_class])


def _f_log(c):
    """f(c) = arccosh(c)/sqrt(c^2-1) and f'(c), stable near c = 1."""
    w = c - 1.0
    small = w < 1e-6
    s2 = np.maximum(c * c - 1.0, 1e-300)
    s = np.sqrt(s2)
    th = np.arccosh(np.maximum(c, 1.0))
    f_big = th / s
    fp_big = (s - th * c) / (s2 * s)
    f_small = 1.0 - w / 3.0 + (2.0 / 15.0) * w * w
    fp_small = -1.0 / 3.0 + (4.0 / 15.0) * w
    return np.where(small, f_small, f_big), np.where(small, fp_small, fp_big)


def _tri_metric(ctx: _Context, Z: np.ndarray):
    """Per-triangle M = D^T D (as tr, det) plus the intermediates for grads."""
    Y = ctx.chart_corners(Z)                     # (nt, 3, 3)
    S = Y.mean(axis=1)
    q = -(S[:, 0] ** 2 + S[:, 1] ** 2 - S[:, 2] ** 2)
    nu = np.sqrt(q)
    Yb = S / nu[:, None]
    EYb = Yb @ E_SHARP
    c = -np.einsum("ta,tca->tc", EYb, Y)         # (nt, 3), >= 1
    f, fp = _f_log(c)
    eta = f[:, :, None] * (Y - c[:, :, None] * Yb[:, None, :])
    d2 = eta[:, 1] - eta[:, 0]
    d3 = eta[:, 2] - eta[:, 0]
    Ed2 = d2 @ E_SHARP
    Ed3 = d3 @ E_SHARP
    G = np.empty((len(Y), 2, 2))
    G[:, 0, 0] = np.einsum("ta,ta->t", Ed2, d2)
    G[:, 0, 1] = G[:, 1, 0] = np.einsum("ta,ta->t", Ed2, d3)
    G[:, 1, 1] = np.einsum("ta,ta->t", Ed3, d3)
    M = ctx.KiT @ G @ ctx.Ki
    return {
        "Y": Y, "S": S, "nu": nu, "Yb": Yb, "c": c, "f": f, "fp": fp,
        "eta": eta, "d2": d2, "d3": d3, "M": M,
        "t": M[:, 0, 0] + M[:, 1, 1],
        "d": M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0],
    }


def _newton_power(t, d, half_p, want_grads=False):
    """p_k = tr(M^k) via p_k = t p_{k-1} - d p_{k-2}; optional d/dt, d/dd."""
    pkm2 = np.full_like(t, 2.0)
    pkm1 = t.copy()
    ukm2 = np.zeros_like(t)
    ukm1 = np.ones_like(t)
    vkm2 = np.zeros_like(t)
    vkm1 = np.zeros_like(t)
    if half_p == 0:
        return (pkm2, ukm2, vkm2) if want_grads else pkm2
    for k in range(2, half_p + 1):
        pk = t * pkm1 - d * pkm2
        if want_grads:
            uk = pkm1 + t * ukm1 - d * ukm2
            vk = t * vkm1 - pkm2 - d * vkm2
            ukm2, ukm1 = ukm1, uk
            vkm2, vkm1 = vkm1, vk
        pkm2, pkm1 = pkm1, pk
    if want_grads:
        return pkm1, ukm1, vkm1
    return pkm1


def _check_p(p):
    if not (isinstance(p, (int, np.integer)) and p >= 2 and p % 2 == 0):
        raise ValueError("p must be an even integer >= 2")


def energy_Jp(u: EquivariantMap, p: int) -> float:
    """J_p = sum_T area_T (s1^p + s2^p) with s_i the singular values of D."""
    _check_p(p)
    if float(u.mesh.areas.min()) <= 0.0:
        raise ValueError("mesh contains a degenerate (nonpositive-area) triangle")
    ctx = _Context(u.mesh, u.rho)
    m = _tri_metric(ctx, u.class_points)
    e = _newton_power(m["t"], m["d"], p // 2)
    return float(np.dot(ctx.areas, e))


def singular_values(u: EquivariantMap) -> tuple[np.ndarray, np.ndarray]:
    ctx = _Context(u.mesh, u.rho)
    m = _tri_metric(ctx, u.class_points)
    t, d = m["t"], np.maximum(m["d"], 0.0)
    disc = np.sqrt(np.maximum(t * t - 4.0 * d, 0.0))
    lam1 = 0.5 * (t + disc)
    lam2 = np.maximum(0.5 * (t - disc), 0.0)
    return np.sqrt(lam1), np.sqrt(lam2)


def _energy_and_grad(ctx: _Context, Z: np.ndarray, p: int):
    m = _tri_metric(ctx, Z)
    e, du, dv = _newton_power(m["t"], m["d"], p // 2, want_grads=True)
    J = float(np.dot(ctx.areas, e))

    M = m["M"]
    adjM = np.empty_like(M)
    adjM[:, 0, 0] = M[:, 1, 1]
    adjM[:, 1, 1] = M[:, 0, 0]
    adjM[:, 0, 1] = -M[:, 0, 1]
    adjM[:, 1, 0] = -M[:, 1, 0]
    dEdM = (ctx.areas * du)[:, None, None] * np.eye(2) + (ctx.areas * dv)[:, None, None] * adjM
    W = ctx.Ki @ dEdM @ ctx.KiT                                    # dE/dG, symmetric

    d2, d3 = m["d2"], m["d3"]
    gd2 = 2.0 * (W[:, 0, 0, None] * d2 + W[:, 0, 1, None] * d3) @ E_SHARP
    gd3 = 2.0 * (W[:, 0, 1, None] * d2 + W[:, 1, 1, None] * d3) @ E_SHARP
    geta = np.stack([-(gd2 + gd3), gd2, gd3], axis=1)              # (nt, 3, 3)

    Y, Yb, c, f, fp, nu = m["Y"], m["Yb"], m["c"], m["f"], m["fp"], m["nu"]
    EYb = Yb @ E_SHARP
    radial = Y - c[:, :, None] * Yb[:, None, :]
    dot_rad = np.einsum("tca,tca->tc", geta, radial)
    dot_Yb = np.einsum("tca,ta->tc", geta, Yb)
    s_coef = fp * dot_rad - f * dot_Yb                             # (nt, 3)

    gY = f[:, :, None] * geta + s_coef[:, :, None] * (-EYb)[:, None, :]
    gYb = np.einsum("tc,tca->ta", s_coef, -(Y @ E_SHARP)) - np.einsum(
        "tc,tca->ta", f * c, geta
    )
    # through the normalized barycenter: dYb = (I + Yb (E Yb)^T)/nu dS, dS = mean dY
    gS = (gYb + (E_SHARP @ Yb.T).T * np.einsum("ta,ta->t", Yb, gYb)[:, None]) / nu[:, None]
    gY = gY + gS[:, None, :] / 3.0

    g_chart = np.einsum("tcab,tca->tcb", ctx.lift, gY)             # lift^T applied
    g_class = np.zeros((ctx.nc, 3))
    np.add.at(g_class, ctx.tri_class.ravel(), g_chart.reshape(-1, 3))
    return J, g_class, m


def _riemannian_grad(Z: np.ndarray, g_euclid: np.ndarray) -> np.ndarray:
    R = g_euclid @ E_SHARP
    dot = np.einsum("ca,ca->c", R @ E_SHARP, Z)  # (R, Z)#
    return R + dot[:, None] * Z


def _retract(Z: np.ndarray, step: np.ndarray) -> np.ndarray:
    # garbage trial steps (inf/NaN from an oversized Barzilai-Borwein guess)
    # produce non-finite energies and are rejected by the line search
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        return _retract_impl(Z, step)


def _retract_impl(Z: np.ndarray, step: np.ndarray) -> np.ndarray:
    N = Z - step
    q = -(N[:, 0] ** 2 + N[:, 1] ** 2 - N[:, 2] ** 2)
    bad = ~(q >= 0.25)  # catches NaN/inf trial steps as well
    if bad.any():
        # exact exponential step where the normalization would leave the
        # sheet; clamp absurd trial steps (they get rejected by Armijo)
        for i in np.nonzero(bad)[0]:
            v = -step[i]
            if not np.isfinite(v).all():
                N[i] = Z[i]
                continue
            nv = np.sqrt(max(mink_dot(v, v), 1e-300))
            s = min(nv, 20.0)
            N[i] = np.cosh(s) * Z[i] + np.sinh(s) * v / nv
        q = -(N[:, 0] ** 2 + N[:, 1] ** 2 - N[:, 2] ** 2)
    return N / np.sqrt(q)[:, None]


def minimize(
    mesh: FundamentalMesh,
    rho: SurfaceGroupRep,
    p: int,
    init: EquivariantMap | None = None,
    opts: SolveOptions | None = None,
) -> SolveResult:
    """Projected-gradient minimization of J_p over equivariant maps.

    Energy never increases across accepted steps; returns the best iterate
    with flags on line-search failure or hitting the iteration budget.
    """
    _check_p(p)
    opts = opts or SolveOptions()
    u = init if init is not None else identity_map(mesh, rho)
    ctx = _Context(mesh, rho)
    Z = u.class_points.copy()

    J, g_euc, m = _energy_and_grad(ctx, Z, p)
    G = _riemannian_grad(Z, g_euc)
    gnorm2 = float(np.einsum("ca,cb,ab->", G, G, E_SHARP))
    log = [J]
    # initial step scaled down by the large-p conditioning s1^{p-2}
    smax = float(np.sqrt(max(m["t"].max(), 1.0)))
    tau = min(opts.step_cap, opts.step_cap / max(1.0, smax ** (p - 2)))
    tau = max(tau, 1e-12)

    iterations = 0
    converged = False
    ls_failure = False
    Z_prev = None
    G_prev = None
    resets = 0
    for iterations in range(1, opts.max_iter + 1):
        if np.sqrt(gnorm2) <= opts.tol * max(1.0, J):
            converged = True
            iterations -= 1
            break
        # Barzilai-Borwein initial step, Armijo safeguarded
        if Z_prev is not None:
            dZ = Z - Z_prev
            dG = G - G_prev
            denom = float((dZ * dG).sum())
            if denom > 1e-300:
                tau = float(np.clip((dZ * dZ).sum() / denom, 1e-12, opts.step_cap))
        accepted = False
        t_try = tau
        for _ in range(opts.max_backtracks):
            Z_new = _retract(Z, t_try * G)
            J_new, g_new, m_new = _energy_and_grad(ctx, Z_new, p)
            if J_new <= J - opts.armijo_c1 * t_try * gnorm2:
                accepted = True
                break
            t_try *= 0.5
        if not accepted:
            # a failed BB history can poison the step; restart the step-size
            # estimate a few times before giving up
            if resets < 3:
                resets += 1
                Z_prev = G_prev = None
                tau = max(
                    min(opts.step_cap, J / max(gnorm2, 1e-300)) * 1e-3, 1e-10
                )
                continue
            # certified decrease fell below float resolution; near-stationary
            # iterates are convergence, anything else is a genuine failure
            if np.sqrt(gnorm2) <= 100.0 * opts.tol * max(1.0, J):
                converged = True
            else:
                ls_failure = True
            break
        Z_prev, G_prev = Z, G
        Z, J, g_euc, m = Z_new, J_new, g_new, m_new
        G = _riemannian_grad(Z, g_euc)
        gnorm2 = float(np.einsum("ca,cb,ab->", G, G, E_SHARP))
        tau = t_try
        log.append(J)

    u_out = EquivariantMap(mesh, rho, Z)
    t, d = m["t"], np.maximum(m["d"], 0.0)
    disc = np.sqrt(np.maximum(t * t - 4.0 * d, 0.0))
    s1 = np.sqrt(0.5 * (t + disc))
    s2 = np.sqrt(np.maximum(0.5 * (t - disc), 0.0))
    return SolveResult(
        map=u_out,
        p=int(p),
        J_p=J,
        kappa_p=float(J ** (-1.0 / p)),
        s1=s1,
        s2=s2,
        iterations=iterations,
        converged=converged,
        line_search_failure=ls_failure,
        grad_norm=float(np.sqrt(gnorm2)),
        energy_log=log,
    )


def gradient_fd_check(mesh, rho, p, u: EquivariantMap, n_probes: int = 20, h: float = 3e-6, rng=None):
    """Max relative error of the analytic directional derivative vs central FD."""
    rng = rng or np.random.default_rng(0)
    ctx = _Context(mesh, rho)
    Z = u.class_points
    J, g_euc, _ = _energy_and_grad(ctx, Z, p)
    G = _riemannian_grad(Z, g_euc)
    worst = 0.0
    for _ in range(n_probes):
        c = int(rng.integers(0, mesh.n_classes))
        v = lorentz.project_tangent(Z[c], rng.standard_normal(3))
        v /= np.sqrt(mink_dot(v, v))
        dZ = np.zeros_like(Z)
        dZ[c] = v
        Jp = _energy_and_grad(ctx, _retract(Z, -h * dZ), p)[0]
        Jm = _energy_and_grad(ctx, _retract(Z, h * dZ), p)[0]
        fd = (Jp - Jm) / (2 * h)
        an = float(mink_dot(G[c], v))  # directional derivative (G_c, v)#
        scale = max(abs(fd), abs(an), 1e-12)
        worst = max(worst, abs(fd - an) / scale)
    return worst


def p_continuation(
    mesh: FundamentalMesh,
    rho: SurfaceGroupRep,
    schedule=(2, 4, 8, 16, 32, 64),
    opts: SolveOptions | None = None,
    init: EquivariantMap | None = None,
    enrich: bool = True,
) -> list:
    """Warm-started continuation in p; each stage reports (J_p/Area)^{1/p}.

    Monotonicity of the stage values in p is reported (not asserted): the
    normalized mixed norm has an l^p factor in (s1, s2) that decreases in p,
    so the power-mean trend holds only up to that factor.
    """
    if list(schedule) != sorted(schedule):
        raise ValueError("p schedule must be increasing")
    opts = opts or SolveOptions()
    results = []
    u = init if init is not None else identity_map(mesh, rho)
    for p in schedule:
        res = minimize(mesh, rho, int(p), init=u, opts=opts)
        if enrich:
            density_and_currents(res)
        results.append(res)
        u = res.map
    return results


# ---------------------------------------------------------------------------
# densities, currents, identities
# ---------------------------------------------------------------------------

def _rot_minus90(v2):
    """Rotate 2d coordinates by -90 degrees: (x, y) -> (y, -x)."""
    return np.stack([v2[..., 1], -v2[..., 0]], axis=-1)


def _target_frames(Yb, d2, d3):
    F1 = d2.copy()
    small = np.sqrt(np.abs(np.einsum("ta,ab,tb->t", F1, E_SHARP, F1))) < 1e-12
    F1[small] = d3[small]
    F1 = F1 / np.sqrt(np.einsum("ta,ab,tb->t", F1, E_SHARP, F1))[:, None]
    F2 = np.stack([mink_cross_vec(Yb[t], F1[t]) for t in range(len(Yb))])
    return F1, F2


def density_and_currents(result: SolveResult) -> SolveResult:
    """Fill the kappa_p-normalized density, V_q, W_q, T_q and residuals."""
    mesh = result.map.mesh
    rho = result.map.rho
    p = result.p
    kappa = result.kappa_p
    ctx = _Context(mesh, rho)
    m = _tri_metric(ctx, result.map.class_points)

    # target-frame differential D (2x2, domain chart -> target chart)
    F1, F2 = _target_frames(m["Yb"], m["d2"], m["d3"])
    dy = np.empty((mesh.n_triangles, 2, 2))
    dy[:, 0, 0] = np.einsum("ta,ab,tb->t", F1, E_SHARP, m["d2"])
    dy[:, 0, 1] = np.einsum("ta,ab,tb->t", F1, E_SHARP, m["d3"])
    dy[:, 1, 0] = np.einsum("ta,ab,tb->t", F2, E_SHARP, m["d2"])
    dy[:, 1, 1] = np.einsum("ta,ab,tb->t", F2, E_SHARP, m["d3"])
    D = dy @ ctx.Ki
    U = kappa * D                                                  # (nt, 2, 2)

    UUt = U @ U.transpose(0, 2, 1)
    evals, evecs = np.linalg.eigh(UUt)
    evals = np.maximum(evals, 0.0)
    N = np.einsum(
        "tab,tb,tcb->tac", evecs, evals ** ((p - 2) // 2), evecs
    )                                                              # (U U^T)^{(p-2)/2}
    S = N @ U                                                      # S_{p-1}(U)
    density = (evals ** (p // 2)).sum(axis=1)                      # TrQ(U)^p
    T = U.transpose(0, 2, 1) @ N @ U - (density / p)[:, None, None] * np.eye(2)

    result.density = density
    result.T_q = T
    result.residuals["density_mass"] = float(np.dot(mesh.areas, density))

    # per-edge assembly with boundary transport
    V_vals, W_vals = _assemble_edge_currents(mesh, rho, m, S, T, F1, F2)
    result.V_q = DiscreteOneForm(mesh, V_vals, "lie")
    result.W_q = DiscreteOneForm(mesh, W_vals, "lie")
    result.residuals["V_closedness"] = closedness_residual(result.V_q)
    result.residuals["W_closedness"] = closedness_residual(result.W_q)
    return result


def _assemble_edge_currents(mesh, rho, m, S, T, F1, F2):
    """Average per-triangle constant forms onto edges, transporting twins."""
    nt = mesh.n_triangles
    Yb, C = m["Yb"], mesh.circumcenters
    E1, E2 = mesh.frames[:, 0], mesh.frames[:, 1]

    v_contrib = {}
    w_contrib = {}
    for t in range(nt):
        i, j, k = mesh.triangles[t]
        idx = {int(i): 0, int(j): 1, int(k): 2}
        for a, b in ((i, j), (j, k), (k, i)):
            a, b = int(a), int(b)
            key = (min(a, b), max(a, b))
            xi = mesh.tri_coords[t, idx[max(a, b)]] - mesh.tri_coords[t, idx[min(a, b)]]
            r = _rot_minus90(xi)
            sv = S[t] @ r
            v3 = sv[0] * F1[t] + sv[1] * F2[t]
            tv = T[t] @ r
            w3 = tv[0] * E1[t] + tv[1] * E2[t]
            v_contrib.setdefault(key, []).append(cross(v3, Yb[t]))
            w_contrib.setdefault(key, []).append(cross(w3, C[t]))

    # twin contributions across the paired boundary
    edge_twin = _boundary_edge_twins(mesh)
    g_rho = {k: rho.evaluate(mesh.pairing_words[k]) for k in range(4)}
    g_sig = {k: mesh.rep.evaluate(mesh.pairing_words[k]) for k in range(4)}

    ne = len(mesh.edges)
    V_vals = np.zeros((ne, 3, 3))
    W_vals = np.zeros((ne, 3, 3))
    for key, e in mesh.edge_index.items():
        vs, ws = list(v_contrib[key]), list(w_contrib[key])
        if key in edge_twin:
            tw_key, k, flip, invert = edge_twin[key]
            s = -1.0 if flip else 1.0
            gv = lorentz.group_inv(g_rho[k]) if invert else g_rho[k]
            gs = lorentz.group_inv(g_sig[k]) if invert else g_sig[k]
            vs += [s * (gv @ x @ lorentz.group_inv(gv)) for x in v_contrib[tw_key]]
            ws += [s * (gs @ x @ lorentz.group_inv(gs)) for x in w_contrib[tw_key]]
        V_vals[e] = np.mean(vs, axis=0)
        W_vals[e] = np.mean(ws, axis=0)
    return V_vals, W_vals


def _boundary_edge_twins(mesh):
    """key -> (twin key, pairing index k, orientation flip flag).

    For an edge on side k its twin lies on side k+4 (and vice versa); the
    flip flag records whether the canonical orientations disagree under the
    pairing map.
    """
    twin_vertex = {}
    for u, v, k in mesh.boundary_pairs:
        twin_vertex.setdefault(k, {})[u] = v  # side k+4 -> side k
    out = {}
    for k in range(4):
        chain = mesh.side_chains[(k + 4) % 8]
        for a, b in zip(chain, chain[1:]):
            ta, tb = twin_vertex[k][a], twin_vertex[k][b]
            key = (min(a, b), max(a, b))       # edge on side k+4
            tw_key = (min(ta, tb), max(ta, tb))  # its image on side k
            # canonical (sorted) orientation of (a,b) maps to (ta,tb);
            # flip if the sort order disagrees across the pairing
            flip = ((a < b) and not (ta < tb)) or ((a > b) and not (ta > tb))
            # pulling the side-k value back to side k+4 uses Ad(x_k)^-1,
            # pushing side k+4 to side k uses Ad(x_k)
            out[key] = (tw_key, k, flip, True)   # True: invert the pairing
            out[tw_key] = (key, k, flip, False)
    return out


def relation_checks(result: SolveResult) -> dict:
    """Finite-p identities and trend diagnostics on an enriched result.

    (a) the exact algebraic identity -2 T_q = (*V_q (x) du x u)# + (2/p)|S| g
        per triangle; the limiting form -2T = (*V (x) du x u)# drops the trace
        term as p -> infinity, and the trace-free parts agree identically.
    (b) per-triangle density of *(omega_mc wedge W_q)# against 2|S_{p-1}|
        (relative L^1 gap; the continuum value is 2(1-2/p)|S|+O(h), so the
        gap shrinks as p grows).
    (c) density mass fraction on triangles with s1 >= 0.9 max(s1).
    """
    if result.density is None:
        raise ValueError("run density_and_currents first")
    mesh = result.map.mesh
    rho = result.map.rho
    p = result.p
    ctx = _Context(mesh, rho)
    m = _tri_metric(ctx, result.map.class_points)
    kappa = result.kappa_p

    F1, F2 = _target_frames(m["Yb"], m["d2"], m["d3"])
    dy = np.empty((mesh.n_triangles, 2, 2))
    dy[:, 0, 0] = np.einsum("ta,ab,tb->t", F1, E_SHARP, m["d2"])
    dy[:, 0, 1] = np.einsum("ta,ab,tb->t", F1, E_SHARP, m["d3"])
    dy[:, 1, 0] = np.einsum("ta,ab,tb->t", F2, E_SHARP, m["d2"])
    dy[:, 1, 1] = np.einsum("ta,ab,tb->t", F2, E_SHARP, m["d3"])
    U = kappa * (dy @ ctx.Ki)
    UUt = U @ U.transpose(0, 2, 1)
    evals, evecs = np.linalg.eigh(UUt)
    evals = np.maximum(evals, 0.0)
    N = np.einsum("tab,tb,tcb->tac", evecs, evals ** ((p - 2) // 2), evecs)
    S = N @ U

    # (a) pointwise algebra through the 3x3 cross/Killing machinery
    e_units = np.eye(2)
    max_exact = 0.0
    max_tracefree = 0.0
    literal_gap = 0.0
    for t in range(mesh.n_triangles):
        # V(xi) = S(rot_-90 xi) x u, so (*V)(e_a) = S(rot_-90 rot_-90 e_a) x u
        starV = np.empty((2, 3, 3))
        duxu = np.empty((2, 3, 3))
        for a in range(2):
            sv = S[t] @ _rot_minus90(_rot_minus90(e_units[a]))
            starV[a] = cross(sv[0] * F1[t] + sv[1] * F2[t], m["Yb"][t])
            uv = U[t] @ e_units[a]
            duxu[a] = cross(uv[0] * F1[t] + uv[1] * F2[t], m["Yb"][t])
        rhs = np.empty((2, 2))
        for a in range(2):
            for b in range(2):
                rhs[a, b] = float(np.tensordot(starV[a], duxu[b].T, axes=2))
        lhs = -2.0 * result.T_q[t]
        dens = result.density[t]
        exact = lhs - (rhs + (2.0 / p) * dens * np.eye(2))
        max_exact = max(max_exact, float(np.abs(exact).max()))
        tf = (lhs - np.trace(lhs) / 2.0 * np.eye(2)) - (rhs - np.trace(rhs) / 2.0 * np.eye(2))
        max_tracefree = max(max_tracefree, float(np.abs(tf).max()))
        literal_gap = max(literal_gap, float(np.abs(lhs - rhs).max()))

    # (b) discrete *(omega_mc wedge W) vs 2 |S|
    from .mesh import triangle_wedge_density

    omega = maurer_cartan(mesh)
    wedge_density = triangle_wedge_density(omega, result.W_q)
    target = 2.0 * result.density
    l1_gap = float(np.dot(mesh.areas, np.abs(wedge_density - target)))
    l1_norm = float(np.dot(mesh.areas, np.abs(target)))

    # (c) concentration
    s1max = float(result.s1.max())
    sel = result.s1 >= 0.9 * s1max
    concentration = float(np.dot(mesh.areas[sel], result.density[sel]))

    report = {
        "minus2T_exact_identity": max_exact,
        "minus2T_tracefree_gap": max_tracefree,
        "minus2T_literal_gap": literal_gap,
        "omega_wedge_W_l1_gap": l1_gap / max(l1_norm, 1e-300),
        "concentration_fraction": concentration,
    }
    result.residuals.update(report)
    return report


def extract_cocycle_from_current(V: DiscreteOneForm, mesh: FundamentalMesh, rho: SurfaceGroupRep,
                                 residual_flag: float = 0.5):
    """Cocycle alpha(g) = loop_integral(V, g) over rho; flags weak closedness."""
    from .mesh import extract_cocycle

    res = closedness_residual(V)
    alpha = extract_cocycle(V, rho)
    flagged = res > residual_flag
    return alpha, {"closedness_residual": res, "flagged": flagged}


# ---------------------------------------------------------------------------
# cylinder rig: abelian domain group, geodesic target (closed-form minimizer)
# ---------------------------------------------------------------------------

@dataclass
class CylinderRig:
    """Periodic 1d mesh for maps of the cylinder of core length a onto the
    cylinder of core length b; the twisted periodicity is u(t + a) =
    exp(b B) u(t).  The exact minimizer maps onto the target axis with
    constant stretch b/a for every p (the degenerate best-Lipschitz case)."""

    a_len: float
    b_len: float
    n: int
    points: np.ndarray  # (n, 3)

    @classmethod
    def initial(cls, a_len: float, b_len: float, n: int, wobble: float = 0.3, seed: int = 0):
        rng = np.random.default_rng(seed)
        ts = np.arange(n) / n * b_len
        pts = np.empty((n, 3))
        for i, t in enumerate(ts):
            X = lorentz.geodesic(lorentz.X0, np.array([0.0, 1.0, 0.0]), t)
            v = lorentz.project_tangent(X, rng.standard_normal(3))
            nv = np.sqrt(max(mink_dot(v, v), 1e-30))
            s = wobble * rng.uniform(-1, 1)
            pts[i] = np.cosh(s) * X + np.sinh(s) * (v / nv)
        return cls(a_len, b_len, n, pts)

    @property
    def holonomy(self) -> np.ndarray:
        return exp_so21(self.b_len * lorentz.B_STD)

    def segment_lengths(self, pts=None) -> np.ndarray:
        pts = self.points if pts is None else pts
        nxt = np.vstack([pts[1:], (self.holonomy @ pts[0])])
        c = -np.einsum("ia,ab,ib->i", pts, E_SHARP, nxt)
        return np.arccosh(np.maximum(c, 1.0))


def cylinder_energy(rig: CylinderRig, p: int, pts=None) -> float:
    """J_p = sum dt (d_i/dt)^p per unit transverse length (s2 = 0 exactly)."""
    _check_p(p)
    dt = rig.a_len / rig.n
    d = rig.segment_lengths(pts)
    return float(np.sum(dt * (d / dt) ** p))


def _cylinder_energy_grad(rig: CylinderRig, p: int, pts):
    dt = rig.a_len / rig.n
    hol = rig.holonomy
    nxt = np.vstack([pts[1:], (hol @ pts[0])])
    c = -np.einsum("ia,ab,ib->i", pts, E_SHARP, nxt)
    c = np.maximum(c, 1.0 + 1e-300)
    d = np.arccosh(c)
    J = float(np.sum(dt * (d / dt) ** p))
    # dJ/dd_i = p d^{p-1} / dt^{p-1}; dd/dc = 1/sqrt(c^2-1); dc = -(E nxt, dpt) ...
    coef = p * (d / dt) ** (p - 1) / np.sqrt(np.maximum(c * c - 1.0, 1e-30))
    g = np.zeros_like(pts)
    g += coef[:, None] * (-(nxt @ E_SHARP))
    prev_coef = np.roll(coef, 1)[:, None]
    prev_pts = np.roll(pts, 1, axis=0)
    prev_pts[0] = pts[-1]
    back = -(prev_pts @ E_SHARP)
    back[0] = back[0] @ hol  # chain through the twisted closure: c_0 uses hol @ pts[0]
    g += prev_coef * back
    return J, g


def cylinder_minimize(rig: CylinderRig, p: int, opts: SolveOptions | None = None):
    """Shared projected-gradient loop on the rig's product of hyperboloids."""
    _check_p(p)
    opts = opts or SolveOptions()
    Z = rig.points.copy()
    J, g = _cylinder_energy_grad(rig, p, Z)
    G = _riemannian_grad(Z, g)
    gnorm2 = float(np.einsum("ca,cb,ab->", G, G, E_SHARP))
    tau = 1e-2
    Z_prev = G_prev = None
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        if np.sqrt(gnorm2) <= opts.tol * max(1.0, J):
            converged = True
            break
        if Z_prev is not None:
            dZ, dG = Z - Z_prev, G - G_prev
            denom = float((dZ * dG).sum())
            if denom > 1e-300:
                tau = float(np.clip((dZ * dZ).sum() / denom, 1e-14, 1.0))
        accepted = False
        t_try = tau
        for _ in range(opts.max_backtracks):
            Z_new = _retract(Z, t_try * G)
            J_new, g_new = _cylinder_energy_grad(rig, p, Z_new)
            if J_new <= J - opts.armijo_c1 * t_try * gnorm2:
                accepted = True
                break
            t_try *= 0.5
        if not accepted:
            # decrease below float resolution counts as stationary
            converged = np.sqrt(gnorm2) <= 100.0 * opts.tol * max(1.0, J)
            break
        Z_prev, G_prev = Z, G
        Z, J, g = Z_new, J_new, g_new
        G = _riemannian_grad(Z, g)
        gnorm2 = float(np.einsum("ca,cb,ab->", G, G, E_SHARP))
        tau = t_try
    out = CylinderRig(rig.a_len, rig.b_len, rig.n, Z)
    stretch = float((cylinder_energy(out, p) / rig.a_len) ** (1.0 / p))
    return out, {"J_p": J, "stretch": stretch, "converged": converged, "iterations": it}


def cylinder_continuation(a_len: float, b_len: float, n: int = 64,
                          schedule=(2, 4, 8, 16, 32, 64), opts=None, seed: int = 0):
    rig = CylinderRig.initial(a_len, b_len, n, seed=seed)
    reports = []
    for p in schedule:
        rig, rep = cylinder_minimize(rig, int(p), opts)
        rep["p"] = int(p)
        reports.append(rep)
    return rig, reports
