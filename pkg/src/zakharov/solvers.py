"""Critical-point solvers and classification.

Mountain-pass search, Nehari-constrained descent, deflated Newton for
multiplicity, global minimization for the sixth-order truncation, Morse
index via the Hessian, and nonexistence certificates below the first
buckling eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .energy import (
    FiberingScanError,
    ModelParams,
    energy,
    fibering_project,
    gradient,
    hess_matrix,
    nehari_residual,
)
from .grids import Field, OperatorSet, measure
from .spectrum import Spectrum

__all__ = [
    "SolverCfg",
    "SolveReport",
    "DeflationSet",
    "BelowThresholdError",
    "mountain_pass_solve",
    "nehari_descent",
    "newton_deflated",
    "multiplicity_search",
    "global_minimize_e2",
    "nonexistence_certificate",
    "morse_index",
    "x_norm",
    "grad_l2",
    "sign_aligned_distance",
    "threshold_margin",
]


class BelowThresholdError(RuntimeError):
    """Raised when a solve is requested below the existence threshold."""


@dataclass
class SolverCfg:
    tol: float = 1e-8           # scaled gradient-norm tolerance
    coarse_tol: float = 1e-4    # hand-off point from globalizer to Newton
    max_newton: int = 80
    coarse_iters: int = 200
    path_points: int = 41
    morse_m: int = 6
    zero_floor: float = 1e-6    # |grad u|_{L2} below this is the zero solution
    distinct_floor: float = 0.01
    seed: int = 0
    n_random: int = 3


@dataclass
class SolveReport:
    solution: Field
    energy: float
    grad_norm: float
    nehari_res: float
    morse_index: int
    iterations: int
    level_trace: list = dc_field(default_factory=list)
    status: str = "converged"   # converged | zero_collapse | max_iter
    extras: dict = dc_field(default_factory=dict)


def x_norm(values: np.ndarray, ops: OperatorSet) -> float:
    """|Delta u|_{L2}, the working-space norm."""
    return float(np.sqrt(max(ops.w * float(values @ (ops.A @ values)), 0.0)))


def grad_l2(values: np.ndarray, ops: OperatorSet) -> float:
    """|grad u|_{L2} from the quadrature-point gradient."""
    s = np.zeros(ops.G[0].shape[0])
    for Ga in ops.G:
        ga = Ga @ values
        s += ga * ga
    return float(np.sqrt(ops.w * s.sum()))


def _grad_norm(g: np.ndarray, ops: OperatorSet) -> float:
    """Discrete L2 norm of the energy gradient density."""
    return float(np.linalg.norm(g)) / np.sqrt(ops.w)


def _scale(values: np.ndarray, ops: OperatorSet) -> float:
    return 1.0 + x_norm(values, ops)


def sign_aligned_distance(u: np.ndarray, v: np.ndarray, ops: OperatorSet) -> float:
    """Relative X-distance after aligning signs (solutions come in +/- pairs)."""
    nu, nv = x_norm(u, ops), x_norm(v, ops)
    ref = max(nu, nv, 1e-300)
    d = min(x_norm(u - v, ops), x_norm(u + v, ops))
    return d / ref


def threshold_margin(lambda1: float, ops: OperatorSet) -> float:
    """h^2-aware uncertainty band around the discrete threshold."""
    return lambda1 * max(ops.h) ** 2


def _solve_spd_or_reg(H: sp.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    """Sparse direct solve with a Tikhonov fallback for singular Hessians."""
    try:
        delta = spla.splu(H.tocsc()).solve(rhs)
        if np.all(np.isfinite(delta)):
            return delta
    except RuntimeError:
        pass
    alpha = 1e-10 * abs(H).max() + 1e-300
    for _ in range(20):
        try:
            delta = spla.splu((H + alpha * sp.identity(H.shape[0])).tocsc()).solve(rhs)
            if np.all(np.isfinite(delta)):
                return delta
        except RuntimeError:
            pass
        alpha *= 100.0
    raise RuntimeError("Hessian solve failed even with regularization")


def _newton_refine(u: Field, p: ModelParams, ops: OperatorSet, cfg: SolverCfg):
    """Damped Newton on E'(u) = 0, backtracking on the residual norm.

    Suitable for saddles as well as minima (no energy line search).
    Returns (field, converged, iterations, grad_norm).
    """
    v = u.values.copy()
    gn = np.inf
    for it in range(cfg.max_newton):
        g = gradient(Field(u.spec, v), p, ops)
        gn = _grad_norm(g, ops)
        if gn <= cfg.tol * _scale(v, ops):
            return Field(u.spec, v), True, it, gn
        H = hess_matrix(Field(u.spec, v), p, ops)
        delta = _solve_spd_or_reg(H, -g)
        # cap absurd steps, then backtrack on |E'|
        step_x = x_norm(delta, ops)
        if step_x > 10.0 * _scale(v, ops):
            delta *= 10.0 * _scale(v, ops) / step_x
        beta = 1.0
        accepted = False
        for _ in range(30):
            cand = v + beta * delta
            gc = gradient(Field(u.spec, cand), p, ops)
            if np.all(np.isfinite(gc)) and _grad_norm(gc, ops) < gn:
                v = cand
                accepted = True
                break
            beta *= 0.5
        if not accepted:
            # Levenberg-style fallback: increasingly regularized steps
            alpha = 1e-6 * abs(H).max() + 1e-300
            for _ in range(20):
                delta = _solve_spd_or_reg(
                    (H + alpha * sp.identity(H.shape[0])).tocsr(), -g)
                cand = v + delta
                gc = gradient(Field(u.spec, cand), p, ops)
                if np.all(np.isfinite(gc)) and _grad_norm(gc, ops) < gn:
                    v = cand
                    accepted = True
                    break
                alpha *= 10.0
            if not accepted:
                break
    g = gradient(Field(u.spec, v), p, ops)
    gn = _grad_norm(g, ops)
    return Field(u.spec, v), gn <= cfg.tol * _scale(v, ops), cfg.max_newton, gn


def _classify(u: Field, p: ModelParams, ops: OperatorSet, cfg: SolverCfg,
              iterations: int, level_trace: list, status: str,
              extras: dict | None = None) -> SolveReport:
    if status == "converged" and grad_l2(u.values, ops) <= cfg.zero_floor:
        status = "zero_collapse"
    if status == "converged":
        # snap onto the Nehari set: rescaling by the fibering root (which
        # sits at t ~ 1 for a converged point) zeroes the residual while
        # staying inside the gradient tolerance ball
        try:
            fr = fibering_project(u, p, ops)
            if fr.t_root is not None and abs(fr.t_root - 1.0) < 1e-6:
                cand = Field(u.spec, fr.t_root * u.values)
                gc = gradient(cand, p, ops)
                if _grad_norm(gc, ops) <= cfg.tol * _scale(cand.values, ops):
                    u = cand
        except FiberingScanError:
            pass
        nres = nehari_residual(u, p, ops)
        mi = morse_index(u, p, ops, cfg.morse_m)
    else:
        nres = float("nan")
        mi = -1
    gn = _grad_norm(gradient(u, p, ops), ops)
    return SolveReport(
        solution=u,
        energy=energy(u, p, ops),
        grad_norm=gn,
        nehari_res=nres,
        morse_index=mi,
        iterations=iterations,
        level_trace=level_trace,
        status=status,
        extras=extras or {},
    )


def _armijo(p: ModelParams, ops: OperatorSet, spec, v, d, e0, slope, alpha0=1.0):
    """Backtracking line search on the energy; returns (alpha, new_v, new_e)."""
    alpha = alpha0
    for _ in range(40):
        cand = v + alpha * d
        e = energy(Field(spec, cand), p, ops)
        if e <= e0 + 1e-4 * alpha * slope:
            return alpha, cand, e
        alpha *= 0.5
    return 0.0, v, e0


def _redistribute(path: np.ndarray) -> np.ndarray:
    """Re-space the path polyline uniformly by chord length."""
    diffs = np.linalg.norm(np.diff(path, axis=0), axis=1)
    t = np.concatenate(([0.0], np.cumsum(diffs)))
    if t[-1] == 0:
        return path
    t /= t[-1]
    tq = np.linspace(0, 1, path.shape[0])
    out = np.empty_like(path)
    for j in range(path.shape[1]):
        out[:, j] = np.interp(tq, t, path[:, j])
    return out


def mountain_pass_solve(p: ModelParams, ops: OperatorSet, spectrum: Spectrum,
                        cfg: SolverCfg | None = None) -> SolveReport:
    """Mountain-pass search along a deformed segment from 0 to t1*phi1.

    The endpoint with negative energy exists for the exponential model
    only above the threshold kappa - omega^2 > lambda_1; below it a
    BelowThresholdError is raised so callers can route to the
    nonexistence certificate.  The path maximizer is relaxed by descent
    steps orthogonal to the path, then polished by Newton.
    """
    cfg = cfg or SolverCfg()
    if p.functional not in ("zakharov", "approx1"):
        raise ValueError("mountain-pass solve applies to zakharov / approx1")
    lam1 = spectrum.pairs[0].lam
    if p.functional == "zakharov":
        gap = (p.kappa - p.omega_sq) - lam1
        if gap <= threshold_margin(lam1, ops):
            raise BelowThresholdError(
                f"kappa - omega^2 = {p.kappa - p.omega_sq:.6g} is not above "
                f"lambda_1 = {lam1:.6g} (margin {threshold_margin(lam1, ops):.2g})"
            )
    spec = ops.spec
    phi1 = spectrum.pairs[0].phi.values

    t1 = 1.0
    for _ in range(80):
        if energy(Field(spec, t1 * phi1), p, ops) < 0:
            break
        t1 *= 2.0
    else:
        raise RuntimeError("could not find a negative-energy endpoint t1*phi1")

    m = cfg.path_points
    path = np.outer(np.linspace(0.0, 1.0, m), t1 * phi1)
    level_trace: list[float] = []
    alpha_prev = 1.0
    it = 0
    best_v = None
    for it in range(cfg.coarse_iters):
        energies = np.array([energy(Field(spec, z), p, ops) for z in path])
        j = int(np.argmax(energies))
        if j == 0:
            break
        j = min(j, m - 2)
        v = path[j]
        if energies[j] > 0:
            best_v = v.copy()
        g = gradient(Field(spec, v), p, ops)
        gn = _grad_norm(g, ops)
        level_trace.append(float(energies[j]))
        if gn <= cfg.coarse_tol * _scale(v, ops):
            break
        tau = path[j + 1] - path[j - 1]
        tau /= np.linalg.norm(tau) + 1e-300
        d = -(g - (g @ tau) * tau) / ops.w
        slope = -ops.w * float(d @ d)
        if slope == 0.0:
            break
        alpha, new_v, _ = _armijo(p, ops, spec, v, d, energies[j], slope,
                                  alpha0=min(2 * alpha_prev, 1.0))
        if alpha == 0.0:
            break
        alpha_prev = alpha
        path[j] = new_v
        # keep the polyline well-spaced when node energies drift apart
        rel_jump = np.max(np.abs(np.diff(energies))) / (np.max(np.abs(energies)) + 1e-300)
        if rel_jump > 0.10 and it % 10 == 9:
            path = _redistribute(path)

    final = np.array([energy(Field(spec, z), p, ops) for z in path])
    jf = int(np.argmax(final))
    if (final[jf] <= 0 or not np.any(path[jf])) and best_v is not None:
        u0 = Field(spec, best_v)  # path degenerated; use last positive maximizer
    else:
        u0 = Field(spec, path[jf])
    u, ok, nit, _ = _newton_refine(u0, p, ops, cfg)
    if not ok or grad_l2(u.values, ops) <= cfg.zero_floor:
        # Newton fell off the ridge; restart on the Nehari manifold from
        # the path maximizer (the pass level is the Nehari level)
        try:
            rep = nehari_descent(p, ops, u0, cfg)
        except (BelowThresholdError, FiberingScanError, ValueError):
            rep = None
        if rep is not None and rep.status == "converged":
            rep.level_trace = level_trace + rep.level_trace
            rep.iterations += it + nit
            return rep
    status = "converged" if ok else "max_iter"
    return _classify(u, p, ops, cfg, it + nit, level_trace, status)


def nehari_descent(p: ModelParams, ops: OperatorSet, u0: Field,
                   cfg: SolverCfg | None = None) -> SolveReport:
    """Projected gradient descent on the Nehari manifold, Newton-polished.

    Each iterate is rescaled to the fibering root t_u; the Armijo search
    runs on the projected energy.  Loss of projectability restarts the
    step at half length.
    """
    cfg = cfg or SolverCfg()
    spec = ops.spec
    proj = fibering_project(u0, p, ops)
    if proj.t_root is None:
        raise BelowThresholdError("initial field admits no Nehari projection")
    v = proj.t_root * u0.values
    level_trace: list[float] = []
    e0 = energy(Field(spec, v), p, ops)
    alpha = 1.0
    it = 0
    for it in range(cfg.coarse_iters):
        g = gradient(Field(spec, v), p, ops)
        gn = _grad_norm(g, ops)
        level_trace.append(e0)
        if gn <= cfg.coarse_tol * _scale(v, ops):
            break
        d = -g / ops.w
        accepted = False
        for _ in range(40):
            cand = v + alpha * d
            if not np.any(cand):
                alpha *= 0.5
                continue
            try:
                pr = fibering_project(Field(spec, cand), p, ops)
            except FiberingScanError:
                pr = None
            if pr is None or pr.t_root is None:
                alpha *= 0.5  # projection lost: restart with halved step
                continue
            cand = pr.t_root * cand
            e = energy(Field(spec, cand), p, ops)
            if e <= e0 - 1e-4 * alpha * ops.w * float(d @ d):
                v, e0 = cand, e
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        alpha = min(alpha * 2.0, 1.0)
    u, ok, nit, _ = _newton_refine(Field(spec, v), p, ops, cfg)
    status = "converged" if ok else "max_iter"
    return _classify(u, p, ops, cfg, it + nit, level_trace, status)


@dataclass
class DeflationSet:
    """Known solutions to repel, with shifted-deflation parameters."""

    known: list[np.ndarray] = dc_field(default_factory=list)
    power: int = 2
    shift: float = 1.0

    def factor(self, v: np.ndarray, ops: OperatorSet) -> float:
        out = 1.0
        for u_i in self.known:
            d = max(ops.w * float((v - u_i) @ (ops.A @ (v - u_i))), 1e-300)
            out *= 1.0 / d ** (self.power / 2) + self.shift
        return out

    def grad_factor(self, v: np.ndarray, ops: OperatorSet) -> np.ndarray:
        M = self.factor(v, ops)
        out = np.zeros_like(v)
        for u_i in self.known:
            d = max(ops.w * float((v - u_i) @ (ops.A @ (v - u_i))), 1e-300)
            f_i = 1.0 / d ** (self.power / 2) + self.shift
            dd = 2.0 * ops.w * (ops.A @ (v - u_i))
            out += (M / f_i) * (-(self.power / 2) * d ** (-self.power / 2 - 1)) * dd
        return out

    def add(self, v: np.ndarray) -> None:
        self.known.append(np.asarray(v, dtype=float).copy())


def newton_deflated(p: ModelParams, ops: OperatorSet, u0: Field,
                    defl: DeflationSet, cfg: SolverCfg | None = None) -> SolveReport:
    """Newton on the deflated residual M(u) E'(u).

    The deflated step is the undeflated Newton step rescaled by the
    standard scalar correction, so each iteration costs one Hessian
    factorization.  Converged solutions are appended to the deflation
    set.
    """
    cfg = cfg or SolverCfg()
    spec = ops.spec
    v = u0.values.copy()
    if not np.any(v):
        raise ValueError("deflated Newton needs a nonzero start")
    trace: list[float] = []
    for it in range(cfg.coarse_iters):
        g = gradient(Field(spec, v), p, ops)
        gn = _grad_norm(g, ops)
        trace.append(energy(Field(spec, v), p, ops))
        if gn <= cfg.tol * _scale(v, ops):
            if grad_l2(v, ops) <= cfg.zero_floor:
                return _classify(Field(spec, v), p, ops, cfg, it, trace,
                                 "zero_collapse")
            for u_i in defl.known:
                if sign_aligned_distance(v, u_i, ops) < cfg.distinct_floor:
                    return _classify(Field(spec, v), p, ops, cfg, it, trace,
                                     "zero_collapse",
                                     extras={"reason": "re-converged to deflated solution"})
            defl.add(v)
            defl.add(-v)
            return _classify(Field(spec, v), p, ops, cfg, it, trace, "converged")
        H = hess_matrix(Field(spec, v), p, ops)
        y = _solve_spd_or_reg(H, -g)
        M = defl.factor(v, ops)
        mhat = defl.grad_factor(v, ops)
        denom = 1.0 - float(mhat @ y) / M
        c = 1.0 / denom if abs(denom) > 1e-12 else np.sign(denom if denom else 1.0) * 1e12
        delta = c * y
        step_x = x_norm(delta, ops)
        if step_x > 5.0 * _scale(v, ops):
            delta *= 5.0 * _scale(v, ops) / step_x
        # backtrack on the deflated residual norm
        r0 = M * gn
        beta, accepted = 1.0, False
        for _ in range(25):
            cand = v + beta * delta
            gc = gradient(Field(spec, cand), p, ops)
            rc = defl.factor(cand, ops) * _grad_norm(gc, ops)
            if np.isfinite(rc) and rc < r0:
                v = cand
                accepted = True
                break
            beta *= 0.5
        if not accepted:
            v = v + 1e-6 * delta
    return _classify(Field(spec, v), p, ops, cfg, cfg.coarse_iters, trace, "max_iter")


def multiplicity_search(p: ModelParams, ops: OperatorSet, spectrum: Spectrum,
                        k: int, cfg: SolverCfg | None = None) -> list[SolveReport]:
    """Best-effort search for the k solutions promised in the k-th window.

    Seeds Nehari descent at the first k eigenfunctions (a heuristic
    pairing; only the count is meaningful), then sweeps deflated Newton
    from eigenfunction and random starts.  Returns distinct converged
    solutions sorted by energy.
    """
    cfg = cfg or SolverCfg()
    if len(spectrum.pairs) < k + 1:
        raise ValueError("spectrum must contain at least k+1 eigenpairs")
    lam = spectrum.lambdas
    diff = p.kappa - p.omega_sq
    if p.functional == "zakharov" and not (lam[k - 1] < diff < lam[k]):
        raise ValueError(
            f"kappa - omega^2 = {diff:.6g} is outside the window "
            f"({lam[k - 1]:.6g}, {lam[k]:.6g})"
        )
    rng = np.random.default_rng(cfg.seed)
    found: list[SolveReport] = []

    def is_new(v: np.ndarray) -> bool:
        return all(sign_aligned_distance(v, r.solution.values, ops)
                   >= cfg.distinct_floor for r in found)

    seeds = [spectrum.pairs[i].phi.values.copy() for i in range(k)]
    for _ in range(cfg.n_random):
        coef = rng.standard_normal(k)
        seeds.append(sum(c * spectrum.pairs[i].phi.values
                         for i, c in enumerate(coef)))
    for seed_v in seeds:
        try:
            rep = nehari_descent(p, ops, Field(ops.spec, seed_v), cfg)
        except (BelowThresholdError, FiberingScanError, RuntimeError):
            continue
        if rep.status == "converged" and is_new(rep.solution.values):
            found.append(rep)

    defl = DeflationSet()
    for r in found:
        defl.add(r.solution.values)
        defl.add(-r.solution.values)
    for seed_v in seeds:
        try:
            rep = newton_deflated(p, ops, Field(ops.spec, seed_v), defl, cfg)
        except RuntimeError:
            continue
        if rep.status == "converged" and is_new(rep.solution.values):
            found.append(rep)

    found.sort(key=lambda r: r.energy)
    return found


def global_minimize_e2(p: ModelParams, ops: OperatorSet, spectrum: Spectrum,
                       cfg: SolverCfg | None = None) -> SolveReport:
    """Multi-start minimization of the sixth-order truncation.

    Also evaluates the negativity criterion along t*phi1 and reports
    whether a negative level is certified there.
    """
    cfg = cfg or SolverCfg()
    if p.functional != "approx2":
        raise ValueError("global minimization applies to approx2 only")
    spec = ops.spec
    rng = np.random.default_rng(cfg.seed)
    phi1 = spectrum.pairs[0].phi.values
    t_grid = np.geomspace(0.05, 50.0, 160)
    line = np.array([energy(Field(spec, t * phi1), p, ops) for t in t_grid])
    neg_certified = bool(line.min() < 0)

    seeds = [t_grid[int(np.argmin(line))] * phi1]
    seeds += [t * phi1 for t in np.geomspace(0.2, 10.0, 4)]
    lu_b = spla.splu(ops.B.tocsc())
    for _ in range(cfg.n_random):
        raw = lu_b.solve(rng.standard_normal(spec.num_nodes))
        nrm = x_norm(raw, ops)
        seeds.append(raw / (nrm + 1e-300) * 10 ** rng.uniform(-0.5, 0.5))

    best: SolveReport | None = None
    for seed_v in seeds:
        v = seed_v.copy()
        e0 = energy(Field(spec, v), p, ops)
        alpha = 1.0
        for _ in range(120):
            g = gradient(Field(spec, v), p, ops)
            if _grad_norm(g, ops) <= cfg.coarse_tol * _scale(v, ops):
                break
            d = -g / ops.w
            alpha, v, e0 = _armijo(p, ops, spec, v, d, e0,
                                   -ops.w * float(d @ d),
                                   alpha0=min(alpha * 2, 1.0))
            if alpha == 0.0:
                break
        u, ok, nit, _ = _newton_refine(Field(spec, v), p, ops, cfg)
        rep = _classify(u, p, ops, cfg, nit, [], "converged" if ok else "max_iter")
        if rep.status != "converged":
            continue
        if best is None or rep.energy < best.energy:
            best = rep
    if best is None:
        zero = Field(spec)
        return SolveReport(zero, 0.0, 0.0, 0.0, 0, 0, [], "max_iter",
                           {"neg_certified": neg_certified})
    best.extras["neg_certified"] = neg_certified
    best.extras["line_min"] = float(line.min())
    return best


@dataclass
class NonexistenceCertificate:
    threshold_check: str        # "pass" | "abstain" | "fail"
    lambda1: float
    margin: float
    kappa_minus_omega_sq: float
    trials: int
    descent_collapse_count: int
    projection_absent_count: int
    violations: list
    passed: bool


def nonexistence_certificate(p: ModelParams, ops: OperatorSet, spectrum: Spectrum,
                             trials: int = 50,
                             cfg: SolverCfg | None = None) -> NonexistenceCertificate:
    """Numerical certificate that only the zero solution exists.

    Valid below the threshold kappa - omega^2 <= lambda_1: every random
    Newton descent must collapse to zero and every fibering projection
    must be absent.  Within the h^2 margin of the threshold the
    certificate abstains; any nonzero critical point found is a loud
    violation (it would contradict the theory up to discretization).
    """
    cfg = cfg or SolverCfg()
    if p.functional != "zakharov":
        raise ValueError("nonexistence certificate applies to the exponential model")
    lam1 = spectrum.pairs[0].lam
    margin = threshold_margin(lam1, ops)
    diff = p.kappa - p.omega_sq
    if abs(diff - lam1) <= margin:
        return NonexistenceCertificate("abstain", lam1, margin, diff, 0, 0, 0, [],
                                       passed=False)
    if diff > lam1:
        return NonexistenceCertificate("fail", lam1, margin, diff, 0, 0, 0, [],
                                       passed=False)

    rng = np.random.default_rng(cfg.seed)
    lu_b = spla.splu(ops.B.tocsc())

    def _sobolev_descent(v: np.ndarray) -> np.ndarray:
        # energy descent in the X metric (d = -A^{-1} g, two B solves);
        # globalizes large-amplitude starts where plain Newton can stall
        e0 = energy(Field(ops.spec, v), p, ops)
        for _ in range(cfg.coarse_iters):
            g = gradient(Field(ops.spec, v), p, ops)
            if _grad_norm(g, ops) <= cfg.coarse_tol * _scale(v, ops):
                break
            d = -lu_b.solve(lu_b.solve(g)) / ops.w
            slope = float(g @ d)
            if slope >= 0:
                break
            alpha, v, e0 = _armijo(p, ops, ops.spec, v, d, e0, slope)
            if alpha == 0.0:
                break
        return v

    collapses = 0
    absents = 0
    violations = []
    for _ in range(trials):
        raw = lu_b.solve(rng.standard_normal(ops.spec.num_nodes))
        raw /= x_norm(raw, ops) + 1e-300
        v0 = raw * 10 ** rng.uniform(-1, 1)
        pr = fibering_project(Field(ops.spec, v0), p, ops)
        if pr.t_root is None:
            absents += 1
        u, ok, _, _ = _newton_refine(Field(ops.spec, _sobolev_descent(v0)),
                                     p, ops, cfg)
        if grad_l2(u.values, ops) <= 1e-8:
            collapses += 1
        elif ok:
            violations.append(u.values.tolist())
    passed = collapses == trials and absents == trials and not violations
    return NonexistenceCertificate("pass", lam1, margin, diff, trials,
                                   collapses, absents, violations, passed)


def morse_index(u: Field, p: ModelParams, ops: OperatorSet, m: int = 6) -> int:
    """Count of negative Hessian eigenvalues among the m smallest.

    Eigenvalues are normalized by the quadrature weight so the
    negativity threshold is resolution-independent.
    """
    H = hess_matrix(u, p, ops)
    size = H.shape[0]
    m = min(m, size - 1)
    if size <= 4000:
        import scipy.linalg

        vals = scipy.linalg.eigh(H.toarray(), eigvals_only=True,
                                 subset_by_index=[0, m - 1])
    else:
        try:
            vals = spla.eigsh(H, k=m, which="SA", maxiter=20000,
                              v0=np.ones(size), return_eigenvectors=False)
        except spla.ArpackNoConvergence as exc:
            raise RuntimeError(f"Morse-index eigensolve failed: {exc}") from exc
    vals = np.sort(np.asarray(vals)) / ops.w
    tol_ev = 1e-8 * max(1.0, p.kappa)
    return int(np.count_nonzero(vals < -tol_ev))
