"""Centralized equilibrium computation and baseline allocation schemes.

``solve_eg`` computes the market equilibrium (the optimum of the
budget-weighted log-utility program whose capacity duals are the prices):
for providers all at alpha >= 1 it delegates to the provably convergent bid
dynamics; otherwise it runs a damped multiplicative tatonnement on the
closed-form demands (or, on request, a dual subgradient method on the
capacity multipliers).  ``solve_social_optimal`` and ``static_share`` are the
efficiency and isolation baselines, and ``poa_bound`` / ``nash_welfare``
provide the fairness/efficiency diagnostics.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from .market import (
    Allocation,
    SolveReport,
    make_report,
    sp_utility_homog,
    verify_equilibrium,
)
from .model import MarketIndex, NormalizedScenario, normalize_scenario

#: Fairness parameter standing in for alpha=0 (degenerate linear demands)
#: inside market-equilibrium solves.
ALPHA_ZERO_SURROGATE = 1e-3


@dataclass(frozen=True)
class SolverConfig:
    method: str = "auto"  # auto | dynamics | tatonnement | dual-subgradient
    kappa0: float = 0.1
    decay: float = 0.5
    max_iterations: int = 50000
    tol: float = 1e-7

    def __post_init__(self):
        if self.kappa0 <= 0:
            raise ValueError("kappa0 must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.method not in ("auto", "dynamics", "tatonnement", "dual-subgradient"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class SchemeComparison:
    """ME/SO/SS side-by-side at one fairness setting."""

    alpha: float
    utilities: dict[str, np.ndarray]
    welfare: dict[str, float]
    nash: dict[str, float]
    poa_value: float | None
    poa_bound: float
    max_utilities: np.ndarray
    me_minus_ss: np.ndarray
    converged: dict[str, bool]


@dataclass
class WelfareReport:
    """Cross-scheme comparison of one instance over a fairness sweep."""

    sp_names: tuple[str, ...]
    budgets: np.ndarray
    comparisons: list[SchemeComparison]


def best_response(scn: NormalizedScenario, prices: np.ndarray, s: int) -> np.ndarray:
    """Utility-maximizing spending of provider ``s`` at posted prices.

    Closed form from the first-order conditions of the provider's problem:
    the induced rate is uniform over each class's resources,
    ``u_ck = b_ckr / (p_cr d_ckr)``, and

        b_ckr = B * p_cr d_ckr * w^(1/a) * PD_ck^(-1/a) / Z,
        Z = sum_ck w^(1/a) * PD_ck^((1-a)/(-a)),   PD_ck = sum_r p_cr d_ckr.

    At alpha = inf the provider equalizes per-user rates, spending
    ``b = t * w * p d`` with ``t = B / sum w PD``.  Returns a full-shape
    array, zero outside the provider's rows, summing to the budget exactly.
    """
    index = scn.index
    alpha = float(index.alphas[s])
    if alpha == 0.0:
        raise ValueError(
            "best response degenerates at alpha=0 (linear utility concentrates); "
            "market solves route alpha=0 through a smoothed surrogate"
        )
    prices = np.asarray(prices, dtype=float)
    if np.any(prices < 0):
        raise ValueError("negative price")
    rows = index.sp_rows(s)
    pd_rows = prices[None, :] * index.demand[rows]
    pd = pd_rows.sum(axis=1)
    if np.any(pd <= 0):
        # a class whose every consumed resource is free has unbounded demand
        raise ValueError("best response needs a positive price on some consumed resource per class")
    w = index.weights[rows]
    budget = index.budgets[s]
    if math.isinf(alpha):
        t = budget / float(np.dot(w, pd))
        b_rows = t * w[:, None] * pd_rows
    else:
        # b ~ pd_rows * exp((log w - log PD)/a); normalize the coefficient in
        # log space so sharp concentration at small alpha stays finite
        log_coef = (np.log(w) - np.log(pd)) / alpha
        coef = np.exp(log_coef - log_coef.max())
        z = float(np.dot(coef, pd))
        b_rows = budget * coef[:, None] * pd_rows / z
    b_rows *= budget / b_rows.sum()
    out = np.zeros((index.n_triples, index.n_goods))
    out[rows] = b_rows
    return out


def _joint_best_response(scn: NormalizedScenario, prices: np.ndarray) -> np.ndarray:
    """All providers' closed-form demands in one vectorized pass (the update
    kernel evaluates the same formulas and is valid for any alpha > 0)."""
    from .dynamics import _update_bids

    return _update_bids(scn.index, prices)


def _rate_allocation(index: MarketIndex, rates: np.ndarray) -> Allocation:
    """Leontief-tight allocation ``x = u * d`` for given rates."""
    return Allocation(x=rates[:, None] * index.demand, rates=rates)


def _repair_rates(index: MarketIndex, rates: np.ndarray, caps: np.ndarray) -> np.ndarray:
    """Scale each triple's rate by the worst overuse factor of its consumed
    goods so that no capacity is exceeded."""
    usage = (rates[:, None] * index.demand).sum(axis=0)
    factor = np.where(usage > caps, caps / np.maximum(usage, 1e-300), 1.0)
    per_triple = np.where(index.consumed, factor[None, :], np.inf).min(axis=1)
    return rates * np.minimum(per_triple, 1.0)


def _with_surrogates(scn: NormalizedScenario, mapping) -> tuple[NormalizedScenario, dict[str, float]]:
    """Re-normalize with per-SP alpha substitutions; returns (scenario, flags)."""
    flags = {}
    sps = []
    for sp in scn.spec.sps:
        new_alpha = mapping(sp.alpha)
        if new_alpha != sp.alpha:
            flags[sp.name] = sp.alpha
        sps.append(replace(sp, alpha=new_alpha))
    if not flags:
        return scn, {}
    return normalize_scenario(replace(scn.spec, sps=tuple(sps))), flags


def solve_eg(scn: NormalizedScenario, config: SolverConfig | None = None) -> SolveReport:
    """Market-equilibrium allocation and prices.

    auto: bid dynamics when every alpha >= 1 (convergence guaranteed),
    damped tatonnement otherwise.  alpha=0 providers are routed through a
    smoothed alpha=1e-3 surrogate and flagged in the report.  Deterministic:
    identical scenario and config give an identical report.
    """
    from .dynamics import DynamicsConfig, run_dynamics

    config = config or SolverConfig()
    method = config.method
    all_geq1 = bool(np.all(scn.index.alphas >= 1.0))
    if method == "auto":
        method = "dynamics" if all_geq1 else "tatonnement"
    if method == "dynamics":
        if not all_geq1:
            raise ValueError("dynamics method requires every alpha >= 1")
        dcfg = DynamicsConfig(
            max_iterations=config.max_iterations,
            tol=max(config.tol * 1e-2, 1e-12),
        )
        return run_dynamics(scn, dcfg)
    if method == "tatonnement":
        return _solve_tatonnement(scn, config)
    return _solve_eg_dual(scn, config)


def _tatonnement_loop(work, p0, kappa0, tol, max_iterations, price_rows):
    """Damped multiplicative updates ``p <- p * exp(k (demand - 1))``.

    The step is halved after a sustained worsening of the clearing residual;
    hyper-elastic demands (tiny alpha) oscillate under any fixed schedule.
    """
    index = work.index
    demanded = index.demanded_goods()
    p = p0
    kappa = kappa0
    best = math.inf
    worse = 0
    b = None
    resid = math.inf
    it = 0
    for it in range(1, max_iterations + 1):
        b = _joint_best_response(work, p)
        demand = np.divide(b.sum(axis=0), p, out=np.zeros_like(p), where=demanded)
        resid = float(np.abs((demand - 1.0) * p)[demanded].max())
        if resid <= tol:
            break
        if resid < best:
            best = resid
            worse = 0
        else:
            worse += 1
            if worse >= 25:
                kappa = max(kappa / 2.0, 1e-5)
                worse = 0
                best = resid
        step = np.clip(kappa * (demand - 1.0), -2.0, 2.0)
        p = np.where(demanded, p * np.exp(step), 0.0)
        price_rows.append(p)
    return p, b, it, resid


def _solve_tatonnement(scn: NormalizedScenario, config: SolverConfig) -> SolveReport:
    """Damped tatonnement on the closed-form demands.

    alpha=0 providers run through the smoothed surrogate, reached by a
    continuation over decreasing surrogate values so the near-linear final
    stage starts from almost-equilibrium prices.
    """
    has_zero = bool(np.any(scn.index.alphas == 0.0))
    stages = [0.1, 0.01, ALPHA_ZERO_SURROGATE] if has_zero else [None]
    demanded = scn.index.demanded_goods()
    p = np.where(demanded, 1.0 / demanded.sum(), 0.0)
    price_rows = [p]
    total_it = 0
    flags: dict[str, float] = {}
    work = scn
    b = None
    resid = math.inf
    for stage in stages:
        work, flags = _with_surrogates(
            scn, lambda a, st=stage: (st if st is not None else a) if a == 0.0 else a
        )
        p, b, it, resid = _tatonnement_loop(
            work, p, config.kappa0, config.tol, config.max_iterations, price_rows
        )
        total_it += it

    pd = work.index.demand @ p
    rates = b.sum(axis=1) / pd
    rates = _repair_rates(work.index, rates, np.ones(work.index.n_goods))
    allocation = _rate_allocation(work.index, rates)
    # the equilibrium flag is judged against the surrogate market (an exact
    # alpha=0 equilibrium does not exist); gaps at the default 1e-6
    check = verify_equilibrium(work, allocation, p, tol=max(config.tol, 1e-6))
    report = make_report(
        scn,
        method="tatonnement",
        prices=p,
        allocation=allocation,
        iterations=total_it,
        converged=resid <= config.tol and check.is_equilibrium,
        residuals={
            "budget_gap": check.budget_gap,
            "clearing_gap": check.clearing_gap,
            "br_gap": check.br_gap,
        },
        price_trace=np.array(price_rows),
        surrogate_alphas=flags,
    )
    report.bids = b
    return report


def _solve_eg_dual(scn: NormalizedScenario, config: SolverConfig) -> SolveReport:
    """Projected subgradient on the capacity multipliers of the equilibrium
    program; the inner provider problems have closed forms because the
    log-utility objective bounds the spending at ``B_s``."""
    work, flags = _with_surrogates(
        scn, lambda a: ALPHA_ZERO_SURROGATE if a == 0.0 else a
    )
    index = work.index
    lam = np.where(index.demanded_goods(), 1.0, 0.0)
    iters = min(config.max_iterations, 20000)
    acc_u = np.zeros(index.n_triples)
    acc_w = 0.0
    lam_acc = np.zeros_like(lam)
    for t in range(1, iters + 1):
        lam_f = np.maximum(lam, 1e-12)
        u = np.zeros(index.n_triples)
        for s in range(index.n_sps):
            rows = index.sp_rows(s)
            big_l = index.demand[rows] @ lam_f
            alpha = float(index.alphas[s])
            w = index.weights[rows]
            if math.isinf(alpha):
                v = index.users[rows].astype(float)
            else:
                v = np.exp((np.log(w) - np.log(big_l)) / alpha)
            u[rows] = index.budgets[s] * v / float(np.dot(big_l, v))
        usage = (u[:, None] * index.demand).sum(axis=0)
        kappa = config.kappa0 * t ** (-config.decay)
        lam = np.maximum(lam + kappa * (usage - 1.0), 0.0)
        if t > iters // 2:
            acc_u += kappa * u
            acc_w += kappa
            lam_acc += kappa * lam
    rates = _repair_rates(index, acc_u / acc_w, np.ones(index.n_goods))
    lam_bar = lam_acc / acc_w
    allocation = _rate_allocation(index, rates)
    check = verify_equilibrium(work, allocation, lam_bar, tol=config.tol)
    return make_report(
        scn,
        method="dual-subgradient",
        prices=lam_bar,
        allocation=allocation,
        iterations=iters,
        converged=check.is_equilibrium,
        residuals={
            "budget_gap": check.budget_gap,
            "clearing_gap": check.clearing_gap,
            "br_gap": check.br_gap,
        },
        surrogate_alphas=flags,
    )


# ---------------------------------------------------------------------------
# Concave welfare engine (social optimum, static-share inner problems)
# ---------------------------------------------------------------------------

def _homog_value_and_grad(u, w, alpha):
    """Degree-one aggregate and its gradient at strictly positive rates."""
    if alpha == 1.0:
        wn = w / w.sum()
        val = math.exp(float(np.dot(wn, np.log(u))))
        return val, val * wn / u
    if alpha == 0.0:
        return float(np.dot(w, u)), w.astype(float)
    logs = np.log(w) + (1.0 - alpha) * np.log(u)
    m = logs.max()
    ssum = np.exp(logs - m).sum()
    log_val = (m + math.log(ssum)) / (1.0 - alpha)
    val = math.exp(log_val)
    grad = np.exp(alpha * log_val + np.log(w) - alpha * np.log(u))
    return val, grad


def _welfare(index: MarketIndex, groups, u) -> float:
    total = 0.0
    for rows, alpha, bw in groups:
        ug = np.maximum(u[rows], 0.0)
        if math.isinf(alpha):
            total += bw * float((ug / index.users[rows]).min())
            continue
        if alpha >= 1.0 and np.any(ug == 0):
            continue
        val, _ = _homog_value_and_grad(np.maximum(ug, 1e-300), index.weights[rows], alpha)
        total += bw * val
    return total


def _rate_caps(index: MarketIndex, caps: np.ndarray) -> np.ndarray:
    """Per-triple rate upper bound from taking every consumed good whole."""
    with np.errstate(divide="ignore"):
        box = np.where(index.consumed, caps[None, :] / index.demand, np.inf)
    return box.min(axis=1)


def _concave_welfare_solve(
    index: MarketIndex,
    groups: list[tuple[np.ndarray, float, float]],
    caps: np.ndarray,
    kappa0: float,
    decay: float,
    n_iter: int,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Maximize ``sum_g bw * U_g(u)`` under per-good capacities.

    Dual subgradient on the capacity multipliers with closed-form inner
    directions (``v ~ (w / Lambda)^(1/alpha)`` for finite alpha, the
    per-user-equalized direction ``v = n`` for max-min groups; bang-bang
    scale along the ray), tail-averaged primal recovery, feasibility repair,
    then deterministic SLSQP polishes from the recovered point and from a
    proportional fair-share start; the best feasible candidate wins.
    Max-min groups enter the polish through their rate level ``t``
    (``u = t n``), which is lossless at the optimum.  Everything runs on the
    objective rescaled to O(1), since utility scales vary over orders of
    magnitude with the fairness parameter and the class weights.
    Returns ``(rates, multipliers, polished_ok)``.
    """
    rows_all = np.concatenate([rows for rows, _, _ in groups])
    u_cap = _rate_caps(index, caps)

    # proportional fair-share point: every group optimizes inside its
    # budget-weight slice of the caps; feasible and strictly positive
    u_fair = np.zeros(index.n_triples)
    total_bw = sum(bw for _, _, bw in groups)
    for rows, alpha, bw in groups:
        share = bw / total_bw
        u_fair[rows] = _single_sp_allocate(index, rows, alpha, share * caps)[rows]
    scale = max(_welfare(index, groups, u_fair), 1e-300)
    sgroups = [(rows, alpha, bw / scale) for rows, alpha, bw in groups]

    lam = np.where(index.consumed[rows_all].any(axis=0), 1.0 / index.n_goods, 0.0)
    acc_u = np.zeros(index.n_triples)
    acc_w = 0.0
    lam_acc = np.zeros_like(lam)
    for t in range(1, n_iter + 1):
        lam_f = np.maximum(lam, 1e-15)
        u = np.zeros(index.n_triples)
        for rows, alpha, bw in sgroups:
            big_l = index.demand[rows] @ lam_f
            w = index.weights[rows]
            if alpha == 0.0:
                take = bw * w > big_l
                u[rows[take]] = u_cap[rows[take]]
                continue
            if math.isinf(alpha):
                v = index.users[rows].astype(float)
                val = 1.0
            else:
                v = np.exp((np.log(w) - np.log(big_l)) / alpha)
                val, _ = _homog_value_and_grad(v, w, alpha)
            if bw * val > float(np.dot(big_l, v)):
                t_edge = float((u_cap[rows] / v).min())
                u[rows] = t_edge * v
        usage = (u[:, None] * index.demand).sum(axis=0)
        kappa = kappa0 * t ** (-decay)
        lam = np.maximum(lam + kappa * (usage - caps), 0.0)
        if t > n_iter // 2:
            acc_u += kappa * u
            acc_w += kappa
            lam_acc += kappa * lam
    u_avg = _repair_rates(index, acc_u / acc_w, caps)
    lam_bar = scale * lam_acc / acc_w

    candidates = [u_avg, u_fair]
    any_polished = False
    for start in (u_avg, u_fair):
        u_p, ok = _polish(index, sgroups, caps, u_cap, start)
        candidates.append(u_p)
        any_polished = any_polished or ok
    best = max(candidates, key=lambda u: _welfare(index, sgroups, u))
    return best, lam_bar, any_polished


def _polish(index, groups, caps, u_cap, u0):
    """SLSQP refinement of the recovered primal point.

    Finite-alpha groups contribute one variable per triple; max-min groups
    contribute their common per-user level only.
    """
    floor = 1e-12
    var_of = []  # (kind, rows, alpha, bw, slice)
    amat_cols = []
    bounds = []
    x0 = []
    for rows, alpha, bw in groups:
        if math.isinf(alpha):
            n_vec = index.users[rows].astype(float)
            start = len(bounds)
            var_of.append(("level", rows, n_vec, bw, start))
            amat_cols.append((n_vec[:, None] * index.demand[rows]).sum(axis=0))
            cap_t = float((u_cap[rows] / n_vec).min())
            bounds.append((0.0, cap_t))
            x0.append(max(float((u0[rows] / n_vec).min()), floor))
        else:
            start = len(bounds)
            var_of.append(("free", rows, alpha, bw, slice(start, start + rows.size)))
            for i in rows:
                amat_cols.append(index.demand[i])
                bounds.append((0.0, float(u_cap[i])))
                x0.append(max(float(u0[i]), floor))
    amat = np.array(amat_cols)  # [V, G]
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    x0 = np.clip(np.array(x0), lo, hi)

    def objective(z):
        val = 0.0
        grad = np.zeros(z.size)
        for kind, rows, aux, bw, loc in var_of:
            if kind == "level":
                val += bw * z[loc]
                grad[loc] += bw
            else:
                ug = np.maximum(z[loc], floor)
                v, g = _homog_value_and_grad(ug, index.weights[rows], aux)
                val += bw * v
                grad[loc] = bw * g
        return -val, -grad

    cons = {
        "type": "ineq",
        "fun": lambda z: caps - amat.T @ z,
        "jac": lambda z: -amat.T,
    }
    try:
        with warnings.catch_warnings():
            # SLSQP steps outside the box during line search and clips back
            warnings.filterwarnings("ignore", message=".*outside bounds.*")
            res = optimize.minimize(
                objective,
                x0,
                jac=True,
                bounds=bounds,
                constraints=[cons],
                method="SLSQP",
                options={"maxiter": 300, "ftol": 1e-12},
            )
    except (ValueError, FloatingPointError):
        return u0, False
    if not np.all(np.isfinite(res.x)):
        return u0, False
    u = np.zeros(index.n_triples)
    for kind, rows, aux, bw, loc in var_of:
        if kind == "level":
            u[rows] = max(res.x[loc], 0.0) * aux
        else:
            u[rows] = np.maximum(res.x[loc], 0.0)
    return _repair_rates(index, u, caps), bool(res.success)


# ---------------------------------------------------------------------------
# Single-provider alpha-fair allocation (static share, standalone utilities)
# ---------------------------------------------------------------------------

def _single_sp_allocate(index: MarketIndex, rows: np.ndarray, alpha: float, caps: np.ndarray) -> np.ndarray:
    """Optimal rates of one provider under per-good caps.

    Max-min has the waterfill closed form (a common per-user level set by the
    tightest good).  Finite alpha decomposes per cell: maximizing the
    degree-one aggregate is a monotone transform of the separable sum
    ``sum w u^(1-alpha)`` (``sum w log u`` at alpha=1), and the caps couple
    classes only within a cell.  Per-cell problems are solved exactly
    (closed form, LP at alpha=0, or a tiny SLSQP).
    """
    u = np.zeros(index.n_triples)
    u_cap = _rate_caps(index, caps)
    if math.isinf(alpha):
        n_vec = index.users[rows].astype(float)
        usage = (n_vec[:, None] * index.demand[rows]).sum(axis=0)
        active = usage > 0
        level = float((caps[active] / usage[active]).min())
        u[rows] = level * n_vec
        return u

    by_cell: dict[str, list[int]] = {}
    for i in rows:
        by_cell.setdefault(index.triples[i][1], []).append(int(i))
    for cell_rows in by_cell.values():
        cr = np.array(cell_rows)
        if cr.size == 1:
            u[cr[0]] = u_cap[cr[0]]
            continue
        goods = np.flatnonzero(index.consumed[cr].any(axis=0))
        dmat = index.demand[np.ix_(cr, goods)]
        cap_g = caps[goods]
        w = index.weights[cr]
        if alpha == 0.0:
            res = optimize.linprog(
                -w,
                A_ub=dmat.T,
                b_ub=cap_g,
                bounds=[(0.0, float(u_cap[i])) for i in cr],
                method="highs",
            )
            if res.status == 0:
                u[cr] = np.maximum(res.x, 0.0)
            continue
        u[cr] = _cell_fair_rates(dmat, cap_g, w, alpha, u_cap[cr])
    return _repair_rates(index, u, caps)


def _cell_fair_rates(dmat, cap_g, w, alpha, u_cap):
    """Maximize the alpha-fair sum for a handful of classes in one cell."""
    floor = 1e-12
    # start from the equal-split box point, strictly interior
    x0 = np.clip(0.9 * np.min(cap_g[None, :] / dmat, axis=1) / dmat.shape[0], floor, u_cap)

    if alpha == 1.0:
        def objective(z):
            zt = np.maximum(z, floor)
            return -float(np.dot(w, np.log(zt))), -w / zt
    else:
        sign = 1.0 if alpha > 1.0 else -1.0
        # alpha>1: sum w u^(1-a) decreases in u, so minimize it; alpha<1: maximize
        def objective(z):
            zt = np.maximum(z, floor)
            val = sign * float(np.dot(w, zt ** (1.0 - alpha)))
            grad = sign * w * (1.0 - alpha) * zt ** (-alpha)
            return val, grad

    cons = {"type": "ineq", "fun": lambda z: cap_g - dmat.T @ z, "jac": lambda z: -dmat.T}
    try:
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message=".*outside bounds.*")
            res = optimize.minimize(
                objective,
                x0,
                jac=True,
                bounds=[(floor, float(c)) for c in u_cap],
                constraints=[cons],
                method="SLSQP",
                options={"maxiter": 200, "ftol": 1e-14},
            )
        if np.all(np.isfinite(res.x)):
            return np.maximum(res.x, 0.0)
    except (ValueError, FloatingPointError):
        pass
    return x0


def solve_social_optimal(scn: NormalizedScenario, config: SolverConfig | None = None) -> SolveReport:
    """Budget-weighted utilitarian optimum ``max sum_s B_s U_s`` under the
    capacity constraints, with the degree-one aggregate utilities so values
    are comparable across alpha and against the market schemes.

    Max-min providers enter exactly through their common per-user rate level
    (``u = t n``, lossless at the optimum).  Reported prices are the averaged
    capacity multipliers from the dual subgradient phase.
    """
    config = config or SolverConfig()
    index = scn.index
    groups = [
        (index.sp_rows(s), float(index.alphas[s]), float(index.budgets[s]))
        for s in range(index.n_sps)
    ]
    n_iter = min(config.max_iterations, 2000)
    rates, lam_bar, ok = _concave_welfare_solve(
        index, groups, np.ones(index.n_goods), config.kappa0, config.decay, n_iter
    )
    allocation = _rate_allocation(index, rates)
    usage = allocation.x.sum(axis=0)
    return make_report(
        scn,
        method="dual-subgradient",
        prices=lam_bar,
        allocation=allocation,
        iterations=n_iter,
        converged=ok,
        residuals={"capacity_gap": float(np.maximum(usage - 1.0, 0.0).max())},
    )


def static_share(scn: NormalizedScenario, config: SolverConfig | None = None) -> SolveReport:
    """Static proportional sharing: every provider is capped at its budget
    share of every resource and splits that box across its classes by its own
    alpha-fair optimum.

    Single-class providers and max-min providers have exact closed forms
    (box Leontief rate and the common per-user rate level); other providers
    reuse the concave welfare engine on their private box.
    """
    config = config or SolverConfig()
    index = scn.index
    rates = np.zeros(index.n_triples)
    for s in range(index.n_sps):
        rows = index.sp_rows(s)
        caps = np.full(index.n_goods, index.budgets[s])
        u = _single_sp_allocate(index, rows, float(index.alphas[s]), caps)
        rates[rows] = u[rows]
    allocation = _rate_allocation(index, rates)
    usage = allocation.x.sum(axis=0)
    return make_report(
        scn,
        method="closed-form",
        prices=np.zeros(index.n_goods),
        allocation=allocation,
        iterations=0,
        converged=True,
        residuals={"capacity_gap": float(np.maximum(usage - 1.0, 0.0).max())},
    )


def max_utilities(scn: NormalizedScenario, config: SolverConfig | None = None) -> np.ndarray:
    """Each provider's best achievable utility when it holds every resource
    alone (the scale constants of the price-of-anarchy bound)."""
    config = config or SolverConfig()
    index = scn.index
    out = np.zeros(index.n_sps)
    caps = np.ones(index.n_goods)
    for s in range(index.n_sps):
        rows = index.sp_rows(s)
        rates = _single_sp_allocate(index, rows, float(index.alphas[s]), caps)
        out[s] = sp_utility_homog(index, rates, s)
    return out


def nash_welfare(util: np.ndarray, budgets: np.ndarray) -> float:
    """Budget-weighted Nash welfare ``prod U_s^{B_s}``, computed in log space."""
    util = np.asarray(util, dtype=float)
    budgets = np.asarray(budgets, dtype=float)
    if np.any(util <= 0):
        raise ValueError("Nash welfare needs positive utilities")
    return float(np.exp(np.dot(budgets, np.log(util))))


def poa_bound(
    scn: NormalizedScenario,
    max_utils: np.ndarray | None = None,
    config: SolverConfig | None = None,
    so_report: SolveReport | None = None,
    me_report: SolveReport | None = None,
) -> tuple[float, float]:
    """Realized price of anarchy and its theoretical bound.

    ``poa = (U(SO) - U(ME)) / U(SO)`` on the budget-weighted utilitarian
    welfare;
    ``bound = 1 - ((2 sqrt(S) - 1)/S) * (min/max of the standalone utilities)
    - 1/S + min/sum`` (which reduces to ``1 - (2 sqrt(S) - 1)/S`` when they
    are all equal).
    """
    config = config or SolverConfig()
    if max_utils is None:
        max_utils = max_utilities(scn, config)
    max_utils = np.asarray(max_utils, dtype=float)
    if np.any(max_utils <= 0):
        raise ValueError("standalone utilities must be positive")
    if so_report is None:
        so_report = solve_social_optimal(scn, config)
    if me_report is None:
        me_report = solve_eg(scn, config)
    budgets = scn.index.budgets
    u_so = float(np.dot(budgets, so_report.utilities))
    u_me = float(np.dot(budgets, me_report.utilities))
    if u_so <= 0:
        raise ValueError("social optimum welfare must be positive")
    poa = (u_so - u_me) / u_so
    s_count = scn.index.n_sps
    ratio = max_utils.min() / max_utils.max()
    bound = 1.0 - (2.0 * math.sqrt(s_count) - 1.0) / s_count * ratio
    bound -= 1.0 / s_count
    bound += max_utils.min() / max_utils.sum()
    return poa, bound
