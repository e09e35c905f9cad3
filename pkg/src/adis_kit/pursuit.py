"""Multistage source extraction.

Stage 0 scatters random unit vectors over the feasible manifold and keeps the
best-scoring few as seeds. Stage 1 extracts one direction at a time in
deflated coordinates (an orthonormal basis of the complement of the earlier
directions), so orthogonality is structural and each solve carries a single
unit-norm constraint. Stage 2 re-optimizes all directions jointly under one
scalar constraint collecting every orthonormality defect, starting from the
Stage 1 solution and falling back to it if no improvement is found.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .contrast import ContrastFn, LogCoshNegentropy, ProblemFactory, compose
from .latdim import LatDimSummary, estimate_q
from .nlp import AugLagConfig, NlpSolution, SolveStatus, SolveTrace, solve
from .whiten import DataMatrix, PpcaModel, SourceStats, center, fit_ppca, source_stats

JOINT_LAMBDA0 = -1e6
JOINT_ETA_CON = 1e-12


class PursuitError(RuntimeError):
    """Extraction failed; carries the stage name and all solver traces."""

    def __init__(self, stage: str, message: str, traces=None):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.traces = traces or []


@dataclass
class PursuitConfig:
    n_seeds: int = 1000          # random starts scored in Stage 0
    retained: int = 2            # seeds carried into Stage 1 solves
    run_stage2: bool = True
    rng_seed: int = 0
    solver: AugLagConfig = field(default_factory=AugLagConfig)
    channel_center: bool = True

    def validate(self):
        if not 1 <= self.retained <= self.n_seeds:
            raise ValueError("need 1 <= retained <= n_seeds")
        self.solver.validate()


@dataclass
class PursuitResult:
    Q: np.ndarray                      # q x q, rows are the directions
    S_hat: np.ndarray                  # q x n sources, equals Q @ x_tilde
    A_full: np.ndarray                 # p x q mixing for this Q
    component_traces: List[SolveTrace]
    joint_trace: Optional[SolveTrace]
    stage1_objectives: np.ndarray
    stage2_objectives: np.ndarray
    Q_stage1: np.ndarray
    joint_fallback: bool = False       # Stage 2 result was discarded
    q_source: str = "user"             # "user" or "estimated"
    latdim: Optional[LatDimSummary] = None
    seed: int = 0


def orthonormal_complement(priors: np.ndarray, q: int) -> np.ndarray:
    """Orthonormal basis of the complement of the given rows in R^q.

    Modified Gram-Schmidt with one re-orthogonalization pass; candidate
    vectors are the standard basis in index order, so the result is
    deterministic.
    """
    priors = np.asarray(priors, dtype=float).reshape(-1, q)
    k = priors.shape[0]
    cols = []
    for i in range(q):
        v = np.zeros(q)
        v[i] = 1.0
        for _ in range(2):
            for w in priors:
                v -= (v @ w) * w
            for w in cols:
                v -= (v @ w) * w
        norm = np.linalg.norm(v)
        if norm > 1e-10:
            cols.append(v / norm)
        if len(cols) == q - k:
            break
    if len(cols) != q - k:
        raise ValueError("could not complete an orthonormal complement")
    return np.stack(cols, axis=1)


def seed_search(contrast: ContrastFn, w_basis: np.ndarray,
                x_tilde: np.ndarray, n_seeds: int, retained: int,
                rng: np.random.Generator
                ) -> Tuple[np.ndarray, np.ndarray]:
    """Score random unit vectors in reduced coordinates, keep the best.

    Draws uniform entries on (-1, 1), normalizes each draw, evaluates the
    contrast at the lifted direction and returns the ``retained`` reduced
    vectors with the highest scores (ties keep the lower draw index).
    Returns ``(seeds, scores)`` with seeds as rows.
    """
    W = np.asarray(w_basis, dtype=float)
    X = np.asarray(x_tilde, dtype=float)
    r = W.shape[1]
    Z = rng.uniform(-1.0, 1.0, size=(n_seeds, r))
    norms = np.linalg.norm(Z, axis=1)
    # a zero draw has probability zero; re-draw deterministically if it happens
    while np.any(norms == 0.0):
        bad = norms == 0.0
        Z[bad] = rng.uniform(-1.0, 1.0, size=(int(bad.sum()), r))
        norms = np.linalg.norm(Z, axis=1)
    Z /= norms[:, None]
    scores = np.array([contrast.evaluate(W @ z, X)[0] for z in Z])
    order = np.argsort(-scores, kind="stable")[:retained]
    return Z[order], scores[order]


def _closed_form_last_component(factory: ProblemFactory, w_basis: np.ndarray,
                                x_tilde: np.ndarray
                                ) -> Tuple[np.ndarray, float, SolveTrace, NlpSolution]:
    """One-dimensional manifold: the direction is +-basis, pick the better."""
    from .nlp.trace import TraceRecord

    w = w_basis[:, 0]
    best_sign = 1.0
    best_val, _ = factory._score(w, x_tilde)
    val_neg, _ = factory._score(-w, x_tilde)
    if val_neg > best_val:
        best_sign, best_val = -1.0, val_neg
    trace = SolveTrace()
    trace.append(TraceRecord(outer=0, inner=1, f=-best_val,
                             lagrangian=-best_val, pg_norm=0.0, c_norm=0.0,
                             lam_norm=0.0, mu=0.0, delta=0.0, rho=None,
                             accepted=True, qn_skipped=False,
                             status="converged", kkt_grad=0.0, kkt_con=0.0))
    sol = NlpSolution(x=np.array([best_sign]), lam=np.zeros(1), f=-best_val,
                      status=SolveStatus.CONVERGED, trace=trace, kkt_grad=0.0,
                      kkt_con=0.0, n_inner=1, n_outer=1)
    return best_sign * w, best_val, trace, sol


def extract_component(k: int, priors: np.ndarray, x_tilde: np.ndarray,
                      factory: ProblemFactory, config: PursuitConfig,
                      rng: np.random.Generator
                      ) -> Tuple[np.ndarray, float, SolveTrace]:
    """Extract direction ``k`` (1-based) orthogonal to the prior rows.

    Runs Stage 0 seeding then one solve per retained seed; returns the
    best-scoring converged direction, its score and the trace of the winning
    solve. Raises ``PursuitError`` with all traces when every solve fails.
    """
    X = np.asarray(x_tilde, dtype=float)
    q = X.shape[0]
    W = orthonormal_complement(priors, q)
    r = W.shape[1]

    if r == 1:
        w, value, trace, _ = _closed_form_last_component(factory, W, X)
        return w, value, trace

    seeds, _ = seed_search(factory.contrast, W, X, config.n_seeds,
                           config.retained, rng)
    problem = factory.component_problem(W, X)
    traces, winners = [], []
    for z0 in seeds:
        sol = solve(problem, x0=z0, config=config.solver)
        traces.append(sol.trace)
        if sol.converged:
            z = sol.x / np.linalg.norm(sol.x)   # polish onto the sphere
            w = W @ z
            value, _ = factory._score(w, X)
            winners.append((value, w, sol.trace))
    if not winners:
        raise PursuitError(f"component {k}",
                           f"all {len(seeds)} seed solves failed to converge",
                           traces)
    value, w, trace = max(winners, key=lambda t: t[0])
    return w, value, trace


def _orthonormality_wall(Q: np.ndarray, weight: float) -> np.ndarray:
    """Hessian of weight * sum of squared orthonormality defects at Q.

    At a feasible point the defect terms vanish, leaving the exactly known
    rank-q(q+1)/2 outer-product part; this is the stiff block of the merit
    Hessian that a scaled-identity start would force the quasi-Newton state
    to relearn one direction at a time.
    """
    q = Q.shape[0]
    rows = []
    for i in range(q):
        for j in range(i, q):
            g = np.zeros((q, q))
            if i == j:
                g[i] = 2.0 * Q[i]
            else:
                g[i] = Q[j]
                g[j] = Q[i]
            rows.append(g.ravel())
    D = np.array(rows)
    return 2.0 * weight * (D.T @ D)


def _nearest_orthonormal(Q: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(Q)
    return U @ Vt


def refine_joint(Q_init: np.ndarray, x_tilde: np.ndarray,
                 factory: ProblemFactory, config: PursuitConfig
                 ) -> Tuple[np.ndarray, Optional[SolveTrace], bool]:
    """Joint re-optimization of all directions from the Stage 1 solution.

    The orthonormality defect enters as a single scalar sum of squares, whose
    gradient vanishes on the feasible set. That shape makes one solve do two
    incompatible jobs: near the manifold the merit surface is quartic (soft),
    so certifying per-entry orthonormality needs a large multiplier, while a
    large multiplier turns the manifold into a stiff canyon that blocks any
    real movement between joint optima. The refinement therefore runs two
    solves: a travel phase with zero initial multipliers and default
    tolerances (the penalty ratchet builds up on its own), then, from the
    nearest orthonormal matrix to the travel endpoint, a certification phase
    with a warm negative multiplier, the quasi-Newton state seeded with the
    known constraint-wall Hessian, and the constraint tolerance tightened so
    the scalar bound implies per-entry orthonormality of 1e-6. A travel
    endpoint that did not actually improve the objective is discarded, which
    keeps an input already at a joint optimum fixed.

    Falls back to the input when the certification fails or loses objective
    value; returns ``(Q, trace, fell_back)`` with the certification trace.
    """
    X = np.asarray(x_tilde, dtype=float)
    q = X.shape[0]
    Q_init = np.asarray(Q_init, dtype=float)
    problem = factory.joint_problem(X, q)

    def joint_value(Q):
        return sum(factory._score(Q[k], X)[0] for k in range(q))

    value_init = joint_value(Q_init)

    travel = solve(problem, x0=Q_init.ravel(),
                   config=replace(config.solver, lambda0=None, b0_matrix=None))
    Q_start = Q_init
    if travel.converged:
        candidate = _nearest_orthonormal(travel.x.reshape(q, q))
        if joint_value(candidate) > value_init + 1e-10:
            Q_start = candidate

    n_eq = problem.n_eq
    lambda0 = np.zeros(n_eq)
    lambda0[0] = JOINT_LAMBDA0
    certify_cfg = replace(
        config.solver,
        lambda0=lambda0,
        eta_con_star=min(JOINT_ETA_CON, config.solver.eta_con_star),
        b0_matrix=np.eye(q * q) + _orthonormality_wall(Q_start,
                                                       abs(JOINT_LAMBDA0)),
        delta0=min(config.solver.delta0, 1e-2),
    )
    sol = solve(problem, x0=Q_start.ravel(), config=certify_cfg)
    if not sol.converged:
        return Q_init, sol.trace, True
    Q_new = sol.x.reshape(q, q)
    if joint_value(Q_new) < value_init - 1e-8:
        return Q_init, sol.trace, True
    return Q_new, sol.trace, False


def _fix_signs(Q: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Sign convention: positive skewness per source, falling back to a
    positive largest-magnitude entry. Returns the flip signs applied."""
    signs = np.ones(Q.shape[0])
    for k, s in enumerate(S):
        sd = s.std()
        skew = float(np.mean((s - s.mean()) ** 3)) / sd ** 3 if sd > 0 else 0.0
        if abs(skew) > 1e-8:
            signs[k] = np.sign(skew)
        else:
            signs[k] = np.sign(s[np.argmax(np.abs(s))]) or 1.0
    return signs


def run_stages(x_tilde: np.ndarray, factory: ProblemFactory,
               config: PursuitConfig) -> PursuitResult:
    """Stage 0/1 deflation over all components plus optional Stage 2."""
    X = np.asarray(x_tilde, dtype=float)
    q = X.shape[0]
    seed_seq = np.random.SeedSequence(config.rng_seed)
    children = seed_seq.spawn(q)

    rows: List[np.ndarray] = []
    values: List[float] = []
    traces: List[SolveTrace] = []
    for k in range(1, q + 1):
        priors = np.array(rows) if rows else np.zeros((0, q))
        rng = np.random.default_rng(children[k - 1])
        w, value, trace = extract_component(k, priors, X, factory, config, rng)
        rows.append(w)
        values.append(value)
        traces.append(trace)
    Q1 = np.array(rows)
    stage1 = np.array(values)

    joint_trace = None
    fallback = False
    Q = Q1
    if config.run_stage2 and q >= 2:
        Q, joint_trace, fallback = refine_joint(Q1, X, factory, config)
    stage2 = np.array([factory._score(Q[k], X)[0] for k in range(q)])

    S = Q @ X
    signs = _fix_signs(Q, S)
    Q = signs[:, None] * Q
    Q1 = Q1.copy()
    S = Q @ X

    return PursuitResult(
        Q=Q, S_hat=S, A_full=np.zeros((0, q)), component_traces=traces,
        joint_trace=joint_trace, stage1_objectives=stage1,
        stage2_objectives=stage2, Q_stage1=Q1, joint_fallback=fallback,
        seed=config.rng_seed)


def decompose(data: DataMatrix, q: Optional[int] = None,
              config: Optional[PursuitConfig] = None,
              contrast: Optional[ContrastFn] = None,
              factory: Optional[ProblemFactory] = None
              ) -> Tuple[PursuitResult, PpcaModel, Optional[SourceStats]]:
    """Full pipeline: center, estimate the latent dimension when not given,
    whiten, extract sources, compute source statistics.

    Source statistics need p > q (the residual has p - q degrees of freedom);
    for square problems they are returned as None. Deterministic for a fixed
    ``config.rng_seed``.
    """
    cfg = config or PursuitConfig()
    cfg.validate()
    if factory is None:
        factory = compose(contrast or LogCoshNegentropy())

    latdim_summary = None
    q_source = "user"
    if q is None:
        centered, _ = center(data, channel_center=cfg.channel_center)
        latdim_summary = estimate_q(centered.values, seed=cfg.rng_seed)
        q = latdim_summary.q_hat
        q_source = "estimated"
    if not 1 <= q <= data.p:
        raise ValueError(f"latent dimension {q} out of range [1, {data.p}]")

    model = fit_ppca(data, q, channel_center=cfg.channel_center,
                     degenerate="clip")
    result = run_stages(model.x_tilde, factory, cfg)
    result.A_full = model.mixing_for(result.Q)
    result.q_source = q_source
    result.latdim = latdim_summary

    stats = None
    if data.p > q:
        stats = source_stats(model, data, result.S_hat, mixing=result.A_full)
    return result, model, stats
