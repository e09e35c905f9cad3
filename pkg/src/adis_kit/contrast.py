"""Contrast functions for projection pursuit and their NLP wrappers.

A contrast maps a direction w and whitened data to a scalar "interestingness"
and its gradient. The built-in contrast is the squared distance of the
projected log-cosh moment from its Gaussian value, a robust non-Gaussianity
score. ``compose`` turns a contrast plus optional hooks into minimization
problems for the solver: the per-component problem in deflated coordinates
and the joint problem over all directions at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, List, Optional, Protocol, Tuple

import numpy as np

from .nlp import NlpProblem


def g_logcosh(x):
    """Overflow-safe log cosh and its derivative tanh.

    ``log cosh x = |x| + log((1 + exp(-2|x|)) / 2)`` stays finite over the
    whole double range. Accepts scalars or arrays.
    """
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    value = a + np.log1p(np.exp(-2.0 * np.minimum(a, 400.0))) - np.log(2.0)
    deriv = np.tanh(x)
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


@lru_cache(maxsize=None)
def gauss_expectation(nodes: int = 80) -> float:
    """E[log cosh v] for standard normal v, by Gauss-Hermite quadrature."""
    if nodes < 60:
        raise ValueError("use at least 60 quadrature nodes")
    t, w = np.polynomial.hermite.hermgauss(nodes)
    vals, _ = g_logcosh(np.sqrt(2.0) * t)
    return float((w @ vals) / np.sqrt(np.pi))


def negentropy(w: np.ndarray, x_tilde: np.ndarray) -> Tuple[float, np.ndarray]:
    """Squared excess of the projected log-cosh moment over the Gaussian one.

    Returns the score and its gradient with respect to ``w``. The projection
    is ``w' x_tilde``; the expectation is the plain sample mean.
    """
    w = np.asarray(w, dtype=float)
    X = np.asarray(x_tilde, dtype=float)
    n = X.shape[1]
    if n < 2:
        raise ValueError("need at least 2 samples")
    z = w @ X
    vals, derivs = g_logcosh(z)
    m = float(vals.mean())
    c = gauss_expectation()
    diff = m - c
    grad = (2.0 * diff / n) * (X @ derivs)
    return diff * diff, grad


class ContrastFn(Protocol):
    name: str

    def evaluate(self, w: np.ndarray, x_tilde: np.ndarray
                 ) -> Tuple[float, np.ndarray]: ...


@dataclass
class LogCoshNegentropy:
    """Default contrast; stateless apart from the cached Gaussian moment."""

    name: str = "negentropy-logcosh"

    def evaluate(self, w, x_tilde):
        return negentropy(w, x_tilde)


CONTRASTS = {"negentropy-logcosh": LogCoshNegentropy}


def make_contrast(name: str) -> ContrastFn:
    try:
        return CONTRASTS[name]()
    except KeyError:
        raise ValueError(f"unknown contrast {name!r}; "
                         f"available: {sorted(CONTRASTS)}") from None


# hook signature: (w, x_tilde) -> (value, gradient wrt w)
HookFn = Callable[[np.ndarray, np.ndarray], Tuple[float, np.ndarray]]
# user constraint block: (w, x_tilde) -> (values, jacobian wrt w)
UserConstraintFn = Callable[[np.ndarray, np.ndarray],
                            Tuple[np.ndarray, np.ndarray]]


@dataclass
class ConstraintSet:
    """User equality and inequality blocks on a single direction."""

    eq: List[Tuple[UserConstraintFn, int]] = field(default_factory=list)
    ineq: List[Tuple[UserConstraintFn, int]] = field(default_factory=list)

    @property
    def n_eq(self) -> int:
        return sum(m for _, m in self.eq)

    @property
    def n_ineq(self) -> int:
        return sum(m for _, m in self.ineq)


def _stack_user_block(blocks, w, X, chain: Optional[np.ndarray]):
    """Evaluate user constraint blocks at w, mapping Jacobians through chain."""
    vals, jacs = [], []
    for fn, m in blocks:
        v, J = fn(w, X)
        v = np.atleast_1d(np.asarray(v, dtype=float))
        J = np.asarray(J, dtype=float).reshape(-1, w.size)
        if v.shape != (m,) or J.shape != (m, w.size):
            raise ValueError(
                f"user constraint returned shapes {v.shape}, {J.shape}; "
                f"declared ({m},), ({m}, {w.size})")
        vals.append(v)
        jacs.append(J if chain is None else J @ chain)
    return np.concatenate(vals), np.vstack(jacs)


@dataclass
class ProblemFactory:
    """Builds solver problems from a contrast, a hook and user constraints.

    The solver minimizes, so objectives are the negated contrast (plus hook).
    """

    contrast: ContrastFn
    b_hook: Optional[HookFn] = None
    constraints: ConstraintSet = field(default_factory=ConstraintSet)

    def _score(self, w, X):
        value, grad = self.contrast.evaluate(w, X)
        if self.b_hook is not None:
            bv, bg = self.b_hook(w, X)
            value = value + float(bv)
            grad = grad + np.asarray(bg, dtype=float)
        return value, grad

    def component_problem(self, w_basis: np.ndarray,
                          x_tilde: np.ndarray) -> NlpProblem:
        """Problem over reduced coordinates z with direction w = w_basis @ z.

        One built-in equality keeps z on the unit sphere; user constraints are
        chained through the basis. Orthogonality to earlier directions is
        structural (the basis spans their complement).
        """
        W = np.asarray(w_basis, dtype=float)
        X = np.asarray(x_tilde, dtype=float)
        r = W.shape[1]

        def objective(z):
            w = W @ z
            value, grad_w = self._score(w, X)
            return -value, -(W.T @ grad_w)

        cs = self.constraints

        def eq(z):
            w = W @ z
            c = np.array([float(z @ z) - 1.0])
            J = (2.0 * z)[None, :]
            if cs.eq:
                uc, uJ = _stack_user_block(cs.eq, w, X, W)
                c = np.concatenate([c, uc])
                J = np.vstack([J, uJ])
            return c, J

        ineq = None
        n_ineq = cs.n_ineq
        if n_ineq:
            def ineq(z):
                return _stack_user_block(cs.ineq, W @ z, X, W)

        return NlpProblem(dim=r, objective=objective, eq_constraints=eq,
                          n_eq=1 + cs.n_eq, ineq_constraints=ineq,
                          n_ineq=n_ineq, name="pursuit-component")

    def joint_problem(self, x_tilde: np.ndarray, q: int) -> NlpProblem:
        """Problem over all q directions stacked row-major into one vector.

        The objective sums the per-direction score; a single scalar equality
        collects every pairwise orthonormality defect as a sum of squares.
        User constraints are applied to each direction.
        """
        X = np.asarray(x_tilde, dtype=float)
        cs = self.constraints
        n_user = cs.n_eq

        def objective(x):
            Q = x.reshape(q, q)
            total = 0.0
            grad = np.empty_like(Q)
            for k in range(q):
                value, gw = self._score(Q[k], X)
                total += value
                grad[k] = gw
            return -total, -grad.ravel()

        def eq(x):
            Q = x.reshape(q, q)
            G = Q @ Q.T - np.eye(q)
            value = 0.0
            grad = np.zeros_like(Q)
            for i in range(q):
                for j in range(i, q):
                    e = G[i, j]
                    value += e * e
                    if i == j:
                        grad[i] += 4.0 * e * Q[i]
                    else:
                        grad[i] += 2.0 * e * Q[j]
                        grad[j] += 2.0 * e * Q[i]
            c = np.array([value])
            J = grad.ravel()[None, :]
            if cs.eq:
                for k in range(q):
                    uc, uJ = _stack_user_block(cs.eq, Q[k], X, None)
                    c = np.concatenate([c, uc])
                    Jrow = np.zeros((uc.size, q * q))
                    Jrow[:, k * q:(k + 1) * q] = uJ
                    J = np.vstack([J, Jrow])
            return c, J

        ineq = None
        n_ineq = cs.n_ineq * q
        if n_ineq:
            def ineq(x):
                Q = x.reshape(q, q)
                vals, jacs = [], []
                for k in range(q):
                    uv, uJ = _stack_user_block(cs.ineq, Q[k], X, None)
                    vals.append(uv)
                    Jrow = np.zeros((uv.size, q * q))
                    Jrow[:, k * q:(k + 1) * q] = uJ
                    jacs.append(Jrow)
                return np.concatenate(vals), np.vstack(jacs)

        return NlpProblem(dim=q * q, objective=objective, eq_constraints=eq,
                          n_eq=1 + n_user * q, ineq_constraints=ineq,
                          n_ineq=n_ineq, name="pursuit-joint")


def compose(contrast: ContrastFn, b_hook: Optional[HookFn] = None,
            constraints: Optional[ConstraintSet] = None) -> ProblemFactory:
    return ProblemFactory(contrast=contrast, b_hook=b_hook,
                          constraints=constraints or ConstraintSet())
