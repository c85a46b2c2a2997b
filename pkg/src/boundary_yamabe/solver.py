"""Monotone iteration between barriers, the zeta cap, and the tau -> 0- continuation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .barriers import (
    NEGATIVE_EIGEN,
    POSITIVE_EIGEN,
    ZERO_EIGEN,
    BarrierPair,
    case_negative,
    case_positive,
    positive_constants,
    select_shift,
    validate_pair,
    zero_pair,
)
from .errors import (
    ConvergenceError,
    DegenerationError,
    MonotonicityError,
    PreconditionError,
    WrongCaseError,
    YamabeError,
)
from .geometry import RadialGeometry, norm_lp
from .linalg import solve_banded
from .operators import assemble, box_system, discrete_residual, residual_scale, roundoff_floor
from .spectral import classify_geometry, minimize_yamabe_quotient

ORDER_RTOL = 1e-12
ORDER_FATAL = 1e-9
KEEP = 3
ROUNDOFF_FACTOR = 10.0


@dataclass
class IterationReport:
    iterates_kept: list
    residual_history: np.ndarray
    increment_history: np.ndarray
    ordering_violations: int
    ordering_worst: float
    converged: bool
    final: np.ndarray
    lam: float
    zeta: float
    A: float
    iterations: int
    A_doublings: int = 0
    negative_steps: int = 0


def iteration_system(geom: RadialGeometry, A: float):
    """-a*Lap_g + A with the Robin coefficient of B_g: the matrix of every linear step."""
    return assemble(geom, A, geom.robin_c)


def iteration_rhs(geom: RadialGeometry, pair: BarrierPair, sys, u):
    """Right-hand side M((A - R - tau)u + lam u^(p-1)) plus the boundary load k*zeta*u^(p/2)."""
    p = geom.dim.p
    k = geom.dim.robin_coeff
    c = pair.A - np.asarray(geom.R) - pair.tau
    rhs = sys.mass_M * (c * u + pair.lam * u ** (p - 1))
    rhs[0] += sys.robin_load[0] * k * pair.zeta * u[0] ** (p / 2)
    rhs[-1] += sys.robin_load[1] * k * pair.zeta * u[-1] ** (p / 2)
    return rhs


def _iterate(geom, pair, tol, max_iter, start):
    sys = iteration_system(geom, pair.A)
    box = box_system(geom, pair.tau)
    u_minus = np.asarray(pair.u_minus, float)
    u = np.array(pair.u_plus if start is None else start, dtype=float)
    size = max(1.0, float(np.max(pair.u_plus)))
    order_tol = ORDER_RTOL * size
    kept = [u.copy()]
    res_hist, inc_hist = [], []
    violations, worst, negative_steps = 0, 0.0, 0
    for it in range(1, max_iter + 1):
        new = solve_banded(sys.form_K, iteration_rhs(geom, pair, sys, u))
        up = float(np.max(new - u))
        down = float(np.max(u_minus - new))
        bad = max(up, down)
        if np.any(u - new < -order_tol):
            negative_steps += 1
        if bad > order_tol:
            violations += 1
            worst = max(worst, bad)
            if bad > ORDER_FATAL * size:
                raise MonotonicityError("iterate left the monotone band", stage="monotone_iterate",
                                        iteration=it, node=int(np.argmax(np.maximum(new - u, u_minus - new))),
                                        value=bad, A=pair.A)
        inc = float(np.max(np.abs(new - u)))
        u = new
        res = discrete_residual(box, u, pair.lam, pair.zeta)
        rnorm = float(np.max(np.abs(res)))
        res_hist.append(rnorm)
        inc_hist.append(inc)
        if it <= KEEP:
            kept.append(u.copy())
        if inc <= tol * float(np.max(np.abs(u))) and rnorm <= max(10 * tol * residual_scale(box, u, pair.lam),
                                                              roundoff_floor(box, u, ROUNDOFF_FACTOR)):
            break
    else:
        raise ConvergenceError("monotone iteration hit max_iter", stage="monotone_iterate",
                               iterations=max_iter, last_residual=res_hist[-1], last_increment=inc_hist[-1])
    kept.append(u.copy())
    if np.min(u) <= 0:
        raise ConvergenceError("limit is not strictly positive", stage="monotone_iterate", min=float(np.min(u)))
    return IterationReport(kept, np.array(res_hist), np.array(inc_hist), violations, worst, True, u,
                           pair.lam, pair.zeta, pair.A, it, 0, negative_steps)


def monotone_iterate(geom: RadialGeometry, pair: BarrierPair, tol: float = 1e-9, max_iter: int = 20000,
                     start=None) -> IterationReport:
    """Decreasing iteration from u_plus (or ``start``) towards a solution above u_minus.

    A monotonicity failure is retried once with A doubled.
    """
    try:
        return _iterate(geom, pair, tol, max_iter, start)
    except MonotonicityError:
        doubled = BarrierPair(pair.u_minus, pair.u_plus, pair.lam, pair.zeta, 2 * pair.A, pair.tau,
                              pair.case_tag, dict(pair.diagnostics))
        rep = _iterate(geom, doubled, tol, max_iter, start)
        rep.A_doublings = 1
        return rep


# ---------------------------------------------------------------- zeta cap


def sobolev_norm(geom: RadialGeometry, f, q: float) -> float:
    """||f||_{L^q} + ||grad_g f||_{L^q}; gradients by first differences on cells."""
    n, p = geom.dim.n, geom.dim.p
    f = np.asarray(f, dtype=float)
    r = np.asarray(geom.nodes)
    v = np.asarray(geom.v)
    h = geom.spacing
    rm, vm = 0.5 * (r[1:] + r[:-1]), np.sqrt(v[1:] * v[:-1])
    grad = vm ** ((2 - p) / 2) * np.diff(f) / h
    cell = geom.omega * vm ** p * rm ** (n - 1) * h
    return norm_lp(geom, f, q) + float(np.dot(cell, np.abs(grad) ** q) ** (1.0 / q))


def resolvent_norm(geom: RadialGeometry, A: float) -> float:
    """Max-norm of the inverse of the strong operator -a*Lap_g + A (Robin rows).

    The matrix is inverse-nonnegative, so the probe vector of ones gives the
    norm exactly; one extra probe per node block guards that assumption.
    """
    sys = iteration_system(geom, A)
    col = solve_banded(sys.form_K, sys.mass_M)
    if np.min(col) < 0:
        probes = np.eye(geom.num_nodes)[:: max(1, geom.num_nodes // 16)]
        return max(float(np.sum(np.abs(solve_banded(sys.form_K, sys.mass_M * e)))) for e in probes)
    return float(np.max(col))


def select_zeta_cap(geom: RadialGeometry, pair: BarrierPair):
    """Shrink zeta to satisfy both smallness conditions of the iteration; returns ``(zeta, info)``."""
    n, p = geom.dim.n, geom.dim.p
    k = geom.dim.robin_coeff
    q = n + 1
    u0 = np.asarray(pair.u_plus, dtype=float)
    vol = geom.volume
    w1q = sobolev_norm(geom, u0 ** (p / 2), q)
    c_prime = resolvent_norm(geom, pair.A)
    sup_r = float(np.max(np.abs(np.asarray(geom.R) + pair.tau)))
    inner = (pair.A + sup_r + abs(pair.lam) * np.max(u0) ** (p - 2)) * np.max(u0) * vol + 1.0
    cap_sobolev = 1.0 / (k * w1q)
    cap_volume = 1.0 / (k * np.max(u0) ** (p / 2) * vol + k * (p / 2) * np.max(u0) ** ((p - 2) / 2) * c_prime * inner)
    zeta = min(pair.zeta, cap_sobolev, cap_volume)
    active = "barrier" if zeta == pair.zeta else ("sobolev" if cap_sobolev <= cap_volume else "volume")
    info = {"zeta_in": pair.zeta, "zeta_out": zeta, "cap_sobolev": cap_sobolev, "cap_volume": float(cap_volume),
            "resolvent_norm": c_prime, "w1q_norm": w1q, "q": q, "active": active}
    return float(zeta), info


def apply_zeta_cap(geom: RadialGeometry, pair: BarrierPair) -> BarrierPair:
    zeta, info = select_zeta_cap(geom, pair)
    diag = dict(pair.diagnostics, zeta_cap=info)
    out = BarrierPair(pair.u_minus, pair.u_plus, pair.lam, zeta, pair.A, pair.tau, pair.case_tag, diag)
    if zeta < pair.zeta:
        out.diagnostics["validation"] = validate_pair(geom, out)
    return out


# ---------------------------------------------------------------- positive-case fallback


def variational_solution(geom: RadialGeometry, tau: float, lam: float, zeta: float, start,
                         ramp: int = 4, tol: float = 1e-13, max_newton: int = 60) -> np.ndarray:
    """Positive solution by Newton continuation in zeta from a quotient minimiser.

    ``start`` must be a minimiser normalised to ||u||_p = 1 in the lumped
    mass, so that it solves the equation with zeta = 0 and lam = its quotient.
    """
    p = geom.dim.p
    k = geom.dim.robin_coeff
    sys = box_system(geom, tau)
    m = sys.mass_M
    load = np.zeros(geom.num_nodes)
    load[0], load[-1] = sys.robin_load
    u = np.array(start, dtype=float)
    for z in np.linspace(0.0, zeta, ramp + 1):
        for _ in range(max_newton):
            F = sys.apply_form(u) - lam * m * u ** (p - 1) - load * k * z * u ** (p / 2)
            J = sys.form_K.shifted(-(p - 1) * lam * m * u ** (p - 2) - load * k * z * (p / 2) * u ** (p / 2 - 1))
            step = solve_banded(J, F)
            u = u - step
            if np.any(u <= 0):
                raise ConvergenceError("Newton step left the positive cone", stage="variational", zeta=z)
            if np.max(np.abs(step)) <= tol * np.max(u):
                break
        else:
            raise ConvergenceError("Newton did not converge", stage="variational", zeta=z)
    return u


# ---------------------------------------------------------------- continuation


@dataclass
class ContinuationStep:
    tau: float
    lambda_tau: float
    solution: np.ndarray | None
    norm_p: float
    norm_r: float
    distance_prev: float
    source: str
    failure: str | None = None
    iteration: IterationReport | None = None
    barrier: dict = field(default_factory=dict)


@dataclass
class ContinuationTrace:
    tau_schedule: np.ndarray
    steps: list
    limit: np.ndarray | None
    lambda_limit: float | None
    zeta: float | None
    r_exponent: float
    failure_stage: str | None = None
    failure_detail: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def lambdas(self):
        return np.array([s.lambda_tau for s in self.steps])


def _solve_at_tau(geom, tau, lam, minimizer, delta, zeta, strategy, previous, seed, tol):
    """One schedule point: barrier pipeline first, the variational fallback if allowed."""
    barrier = {}
    try:
        pair = case_positive(geom, tau, delta=delta, lambda_tau=lam, seed=seed, report=barrier)
        pair = apply_zeta_cap(geom, pair)
        start = None
        if previous is not None and np.all(previous >= pair.u_minus) and np.all(previous <= pair.u_plus):
            start = previous
        rep = monotone_iterate(geom, pair, tol=tol, start=start)
        return rep.final, "monotone", None, rep, barrier
    except YamabeError as exc:
        failure = f"{exc.stage}: {exc}"
        barrier["error"] = {"stage": exc.stage, "message": str(exc), **_plain(exc.details)}
        if strategy != "auto":
            return None, "none", failure, None, barrier
    u = variational_solution(geom, tau, lam, zeta, minimizer)
    return u, "variational", failure, None, barrier


def _plain(d):
    out = {}
    for k_, v in d.items():
        if isinstance(v, np.generic):
            v = v.item()
        if isinstance(v, (int, float, str, bool)) or v is None:
            out[k_] = v
    return out


def continuation(geom: RadialGeometry, tau0: float, steps: int = 8, seed: int = 0, strategy: str = "auto",
                 tol: float = 1e-9, warm: bool = True) -> ContinuationTrace:
    """Solve along tau_k = tau0 * 2^-k, k = 0..steps, then at tau = 0.

    ``strategy="glue"`` stops at the first step whose barrier construction
    fails; ``"auto"`` falls back to :func:`variational_solution` and records
    the failure on the step.
    """
    if tau0 >= 0:
        raise PreconditionError("tau0 must be negative", stage="continuation")
    if strategy not in ("auto", "glue"):
        raise PreconditionError(f"unknown strategy {strategy!r}", stage="continuation")
    sign = classify_geometry(geom)
    if sign.label != "positive":
        raise WrongCaseError(f"first eigenvalue classified {sign.label}", stage="continuation")
    p = geom.dim.p
    r_exp = p * 1.25
    schedule = tau0 * 2.0 ** -np.arange(steps + 1)
    lam0, mini = minimize_yamabe_quotient(geom, float(schedule[0]), seed=seed)
    consts = positive_constants(geom, float(schedule[0]), lam0)
    delta, zeta = consts["delta"], consts["zeta_barrier_cap"]
    trace = ContinuationTrace(schedule, [], None, None, zeta, r_exp,
                              diagnostics={"delta": delta, "beta": consts["beta"], "C_eta1": consts["C_eta1"],
                                           "eta1_beta": consts["eta1_beta"], "zeta": zeta, "eta1": sign.eta1})
    prev = None
    points = list(schedule) + [0.0]
    for j, tau in enumerate(points):
        tau = float(tau)
        if j > 0:
            lam, mini = minimize_yamabe_quotient(geom, tau, seed=seed, x0=mini if warm else None)
        else:
            lam = lam0
        u, source, failure, rep, barrier = _solve_at_tau(
            geom, tau, lam, mini, delta, zeta, strategy, prev if warm else None, seed, tol)
        if u is None:
            trace.steps.append(ContinuationStep(tau, lam, None, float("nan"), float("nan"), float("nan"),
                                                source, failure, None, barrier))
            trace.failure_stage = barrier.get("error", {}).get("stage", "unknown")
            trace.failure_detail = barrier.get("error", {})
            return trace
        dist = float(np.max(np.abs(u - prev))) if prev is not None else float("nan")
        step = ContinuationStep(tau, lam, u, norm_lp(geom, u, p), norm_lp(geom, u, r_exp), dist,
                                source, failure, rep, {k_: v for k_, v in barrier.items() if k_ != "u1"})
        trace.steps.append(step)
        prev = u
    sched = trace.steps[:-1]
    norms_p = np.array([s.norm_p for s in sched])
    norms_r = np.array([s.norm_r for s in sched])
    if np.min(norms_p) < 1e-6:
        raise DegenerationError("L^p norm collapsed along the schedule", stage="continuation",
                                min_norm=float(np.min(norms_p)))
    if np.max(norms_r) > 10.0 * norms_r[0]:
        raise DegenerationError("L^r norm grows along the schedule", stage="continuation",
                                max_norm=float(np.max(norms_r)))
    last, final = sched[-1], trace.steps[-1]
    gap = final.distance_prev
    trace.diagnostics.update(limit_gap=gap, last_schedule_step=last.distance_prev,
                             cauchy_reached=bool(last.distance_prev <= 1e-8))
    if not gap <= 2.0 * last.distance_prev + 1e-8:
        raise DegenerationError("tau = 0 solution is not the limit of the schedule", stage="continuation",
                                gap=gap, last_step=last.distance_prev)
    trace.limit = final.solution
    trace.lambda_limit = final.lambda_tau
    return trace


# ---------------------------------------------------------------- case pipeline


@dataclass
class SolveResult:
    case_tag: str
    solution: np.ndarray
    lam: float
    zeta: float
    tau: float
    source: str
    pair: BarrierPair | None = None
    iteration: IterationReport | None = None
    trace: ContinuationTrace | None = None
    diagnostics: dict = field(default_factory=dict)


def solve(geom: RadialGeometry, case: str = "auto", lam: float | None = None, tol: float = 1e-9,
          max_iter: int = 20000, tau0: float = -0.01, steps: int = 8, seed: int = 0,
          strategy: str = "auto") -> SolveResult:
    """Classify (unless ``case`` forces one) and run the matching pipeline."""
    sign = classify_geometry(geom)
    label = sign.label if case == "auto" else case
    base = {"eta1": sign.eta1, "eta1_coarse": sign.eta1_coarse, "threshold": sign.threshold,
            "classified": sign.label}
    if label == "zero":
        pair = zero_pair(geom, sign if case == "auto" else _forced(sign, "zero"))
        rep = monotone_iterate(geom, pair, tol=tol, max_iter=max_iter)
        return SolveResult(ZERO_EIGEN, rep.final, 0.0, 0.0, 0.0, "monotone", pair, rep, None,
                           dict(base, **_plain(pair.diagnostics)))
    if label == "negative":
        pair = case_negative(geom, lam=lam, sign=sign if case == "auto" else _forced(sign, "negative"))
        pair = apply_zeta_cap(geom, pair)
        rep = monotone_iterate(geom, pair, tol=tol, max_iter=max_iter)
        diag = dict(base, **_plain(pair.diagnostics))
        diag["zeta_cap"] = pair.diagnostics.get("zeta_cap")
        return SolveResult(NEGATIVE_EIGEN, rep.final, pair.lam, pair.zeta, 0.0, "monotone", pair, rep, None, diag)
    if label == "positive":
        trace = continuation(geom, tau0, steps, seed=seed, strategy=strategy, tol=tol)
        if trace.limit is None:
            raise _pipeline_failure(trace)
        final = trace.steps[-1]
        return SolveResult(POSITIVE_EIGEN, trace.limit, trace.lambda_limit, trace.zeta, 0.0, final.source,
                           None, final.iteration, trace, dict(base, **trace.diagnostics))
    raise PreconditionError(f"unknown case {case!r}", stage="solve")


def _forced(sign, label):
    from dataclasses import replace
    return replace(sign, label=label)


def _pipeline_failure(trace):
    detail = {k_: v for k_, v in trace.failure_detail.items() if k_ not in ("stage", "message")}
    cause = trace.failure_detail.get("message", "")
    return YamabeError(f"positive pipeline failed at stage {trace.failure_stage}: {cause}",
                       stage=trace.failure_stage or "continuation", **detail)


__all__ = [
    "IterationReport", "ContinuationTrace", "ContinuationStep", "SolveResult", "monotone_iterate",
    "select_zeta_cap", "apply_zeta_cap", "select_shift", "continuation", "variational_solution", "solve",
]
