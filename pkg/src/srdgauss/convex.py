"""Log-barrier interior-point engine for log-determinant programs.

Problems have the form

    minimize    sum_k c_k logdet F_k(X) + const
    subject to  G_j(X) >= 0          (linear matrix inequalities)
                trace(X_v) <= b_v

over symmetric matrix variables X = (X_0, ..., X_{m-1}).  Every affine map
is a constant plus a sum of congruences ``coeff * M X_v M^T``, which keeps
them symmetric by construction and makes derivatives cheap.

Each symmetric variable is parametrized by its upper-triangle entries
(row-major ``np.triu_indices`` order).  The centering problems

    minimize  f0(x) + mu * phi(x),  phi = -sum logdet G_j - sum log(b_v - tr X_v)

are solved by damped Newton with Armijo backtracking; mu shrinks
geometrically until ``mu * theta`` (theta = sum of LMI sizes + number of
trace constraints) falls below the requested gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg as sla

ARMIJO = 1e-4
SHRINK = 0.5
MAX_BACKTRACKS = 60
MAX_START_HALVINGS = 200


class SolverError(RuntimeError):
    pass


class InfeasibleStartError(SolverError):
    pass


class NewtonDivergenceError(SolverError):
    pass


@dataclass(frozen=True)
class Congruence:
    """``coeff * M X_var M^T``."""
    var: int
    M: np.ndarray
    coeff: float = 1.0


@dataclass(frozen=True)
class AffineMatrix:
    constant: np.ndarray
    terms: tuple[Congruence, ...] = ()

    @property
    def size(self) -> int:
        return self.constant.shape[0]

    def evaluate(self, X: Sequence[np.ndarray]) -> np.ndarray:
        F = np.array(self.constant, dtype=float)
        for t in self.terms:
            F = F + t.coeff * (t.M @ X[t.var] @ t.M.T)
        return 0.5 * (F + F.T)


def var_term(var: int, n: int, coeff: float = 1.0) -> Congruence:
    return Congruence(var, np.eye(n), coeff)


@dataclass(frozen=True)
class LogDetTerm:
    coeff: float
    arg: AffineMatrix


@dataclass
class LogDetProgram:
    variable_shapes: list[int]
    objective: list[LogDetTerm]
    lmi_constraints: list[AffineMatrix] = field(default_factory=list)
    trace_constraints: list[tuple[int, float]] = field(default_factory=list)
    objective_constant: float = 0.0
    # first trial value of the scaled-identity starting point
    initial_scale: float = 1.0

    @property
    def barrier_degree(self) -> int:
        return sum(G.size for G in self.lmi_constraints) + len(self.trace_constraints)


@dataclass(frozen=True)
class SolverConfig:
    barrier_initial: float = 1.0
    barrier_decrease: float = 0.2
    newton_tolerance: float = 1e-10
    max_newton_iters: int = 200
    max_outer_iters: int = 60
    final_gap_tolerance: float = 1e-9

    def __post_init__(self):
        if self.barrier_initial <= 0:
            raise ValueError("barrier_initial must be positive")
        if not 0 < self.barrier_decrease < 1:
            raise ValueError("barrier_decrease must lie in (0, 1)")
        if self.newton_tolerance <= 0 or self.final_gap_tolerance <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class SolverReport:
    objective_value: float
    variables: list[np.ndarray]
    outer_iterations: int
    # Newton decrement sqrt(g^T H^-1 g) at the last centering point
    final_gradient_norm: float
    feasibility_margins: list[float]
    converged: bool
    newton_iterations: int = 0
    objective_history: list[float] = field(default_factory=list)
    gap_bound: float = float("inf")

    def summary(self) -> dict:
        return {
            "objective_value": self.objective_value,
            "outer_iterations": self.outer_iterations,
            "newton_iterations": self.newton_iterations,
            "final_gradient_norm": self.final_gradient_norm,
            "feasibility_margins": self.feasibility_margins,
            "gap_bound": self.gap_bound,
            "converged": self.converged,
        }


class _Layout:
    """Maps between symmetric matrix variables and a flat vector."""

    def __init__(self, shapes):
        self.shapes = list(shapes)
        self.triu = [np.triu_indices(n) for n in self.shapes]
        sizes = [n * (n + 1) // 2 for n in self.shapes]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.dim = int(self.offsets[-1])
        # flat-vector index of every entry of every variable
        self.gather = []
        for v, n in enumerate(self.shapes):
            idx = np.empty((n, n), dtype=int)
            i, j = self.triu[v]
            idx[i, j] = self.offsets[v] + np.arange(len(i))
            idx[j, i] = idx[i, j]
            self.gather.append(idx)

    def block(self, v):
        return slice(self.offsets[v], self.offsets[v + 1])

    def unpack(self, x):
        return [x[idx] for idx in self.gather]

    def pack(self, Xs):
        return np.concatenate([np.asarray(X, float)[iu] for X, iu in zip(Xs, self.triu)])

    def sym_gradient(self, v, G):
        """Gradient w.r.t. upper-triangle entries of <G, X_v> for symmetric G."""
        i, j = self.triu[v]
        return np.where(i == j, 1.0, 2.0) * G[i, j]

    def trace_indicator(self, v):
        i, j = self.triu[v]
        return (i == j).astype(float)


def _chol(F):
    try:
        return np.linalg.cholesky(F)
    except np.linalg.LinAlgError:
        return None


class _CompiledPiece:
    """``weight * logdet aff(X)`` with index tables for its derivatives.

    The congruence matrices of all terms are stacked column-wise, so one Gram
    matrix ``N^T N`` with ``N = L^-1 [M_1 ... M_k]`` yields every gradient
    and Hessian entry through fancy indexing.  Piece coordinates (one per
    upper-triangle entry per term) are folded onto the distinct flat-vector
    coordinates they touch by the 0/1 matrix ``R``.
    """

    def __init__(self, aff: AffineMatrix, weight: float, layout: _Layout):
        self.aff = aff
        self.weight = float(weight)
        self.M = np.hstack([np.asarray(t.M, float) for t in aff.terms]) if aff.terms else None
        rows, cols, scale, half, sym, glob = [], [], [], [], [], []
        col = 0
        for t in aff.terms:
            i, j = layout.triu[t.var]
            diag = i == j
            rows.append(col + i)
            cols.append(col + j)
            scale.append(np.full(len(i), float(t.coeff)))
            half.append(np.where(diag, 0.5, 1.0))
            sym.append(np.where(diag, 1.0, 2.0))
            glob.append(layout.offsets[t.var] + np.arange(len(i)))
            col += t.M.shape[1]
        if not aff.terms:
            self.coords = None
            return
        I, J = np.concatenate(rows), np.concatenate(cols)
        self.I, self.J = I, J
        self.Ic, self.Jc = I[:, None], J[:, None]
        c = np.concatenate(scale)
        self.gscale = c * np.concatenate(sym)
        ch = c * np.concatenate(half)
        self.hscale = np.outer(ch, ch)
        g = np.concatenate(glob)
        self.coords, inverse = np.unique(g, return_inverse=True)
        self.R = None
        if len(self.coords) < len(g):
            self.R = np.zeros((len(g), len(self.coords)))
            self.R[np.arange(len(g)), inverse] = 1.0
        else:
            order = np.argsort(g)
            # unique coordinates come back sorted; permute piece coordinates to match
            self.I, self.J = I[order], J[order]
            self.Ic, self.Jc = self.I[:, None], self.J[:, None]
            self.gscale = self.gscale[order]
            self.hscale = self.hscale[np.ix_(order, order)]
        self.ix = np.ix_(self.coords, self.coords)

    def accumulate(self, X, order: int, grad, hess):
        """Add value and derivatives into grad/hess; None when aff(X) is not PD."""
        L = _chol(self.aff.evaluate(X))
        if L is None:
            return None
        val = self.weight * 2.0 * np.log(L.diagonal()).sum()
        if order == 0 or self.coords is None:
            return val
        N = np.linalg.solve(L, self.M) if L.shape[0] > 8 else np.linalg.inv(L) @ self.M
        G = N.T @ N
        gp = self.weight * self.gscale * G[self.I, self.J]
        if self.R is None:
            grad[self.coords] += gp
        else:
            grad[self.coords] += self.R.T @ gp
        if order >= 2:
            Hp = (-2.0 * self.weight) * self.hscale * (
                G[self.Ic, self.I] * G[self.Jc, self.J] + G[self.Ic, self.J] * G[self.Jc, self.I])
            if self.R is not None:
                Hp = self.R.T @ Hp @ self.R
            hess[self.ix] += Hp
        return val


_OFF_DOMAIN = (np.inf, np.inf, None, None, None, None)


def _combine(split, mu):
    f0, phi, g0, gphi, H0, Hphi = split
    if not np.isfinite(f0):
        return np.inf, None, None
    g = None if g0 is None else g0 + mu * gphi
    H = None if H0 is None else H0 + mu * Hphi
    return f0 + mu * phi, g, H


class _Problem:
    def __init__(self, program: LogDetProgram):
        self.program = program
        self.layout = _Layout(program.variable_shapes)
        for tc in program.trace_constraints:
            if not 0 <= tc[0] < len(program.variable_shapes):
                raise ValueError(f"trace constraint refers to unknown variable {tc[0]}")
        lay = self.layout
        self._objective = [_CompiledPiece(t.arg, t.coeff, lay) for t in program.objective]
        self._lmis = [_CompiledPiece(G, -1.0, lay) for G in program.lmi_constraints]
        self._traces = [(lay.block(v), lay.trace_indicator(v), v, float(b))
                        for v, b in program.trace_constraints]

    def objective(self, X):
        prog = self.program
        total = prog.objective_constant
        for term in prog.objective:
            F = term.arg.evaluate(X)
            L = _chol(F)
            if L is None:
                return np.inf
            total += term.coeff * 2.0 * np.log(L.diagonal()).sum()
        return total

    def margins(self, X):
        out = [float(np.linalg.eigvalsh(G.evaluate(X))[0]) for G in self.program.lmi_constraints]
        out += [float(b - np.trace(X[v])) for v, b in self.program.trace_constraints]
        return out

    def evaluate_split(self, x, order=2):
        """Objective and barrier parts separately: (f0, phi, g0, gphi, H0, Hphi).

        f0 is inf when x is off-domain.
        """
        X = self.layout.unpack(x)
        n = self.layout.dim
        parts = []
        for pieces in (self._objective, self._lmis):
            grad = np.zeros(n) if order >= 1 else None
            hess = np.zeros((n, n)) if order >= 2 else None
            val = 0.0
            for piece in pieces:
                v = piece.accumulate(X, order, grad, hess)
                if v is None:
                    return _OFF_DOMAIN
                val += v
            parts.append((val, grad, hess))
        (f0, g0, H0), (phi, gphi, Hphi) = parts
        for blk, e, v, b in self._traces:
            s = b - np.trace(X[v])
            if s <= 0:
                return _OFF_DOMAIN
            phi -= np.log(s)
            if order >= 1:
                gphi[blk] += e / s
                if order >= 2:
                    Hphi[blk, blk] += np.outer(e, e) / s ** 2
        return f0 + self.program.objective_constant, phi, g0, gphi, H0, Hphi

    def evaluate(self, x, mu, order=2):
        """Barrier-augmented value (and derivatives); value is inf off-domain."""
        return _combine(self.evaluate_split(x, order), mu)

    def starting_point(self):
        lay = self.layout
        eps = float(self.program.initial_scale)
        for _ in range(MAX_START_HALVINGS):
            X = [eps * np.eye(n) for n in lay.shapes]
            x = lay.pack(X)
            if np.isfinite(self.evaluate(x, 1.0, order=0)[0]) and min(self.margins(X), default=1.0) > 0:
                return x
            eps *= 0.5
        raise InfeasibleStartError("could not find a strictly feasible scaled-identity start")


def _newton_direction(g, H):
    n = len(g)
    scale = max(1.0, float(np.max(np.abs(np.diag(H))))) if n else 1.0
    tau = 0.0
    for _ in range(30):
        try:
            c = sla.cho_factor(H + tau * np.eye(n), lower=True)
            return -sla.cho_solve(c, g)
        except np.linalg.LinAlgError:
            tau = max(2.0 * tau, 1e-14 * scale)
    raise NewtonDivergenceError("Hessian could not be regularized")


def _center(prob: _Problem, x, mu, config: SolverConfig, split=None):
    """Minimize f0 + mu * phi from x.

    Returns (x, decrement, iterations, centered, split) where split is the
    second-order evaluation at the returned x, reusable for the next mu.
    """
    decrement = np.inf
    for it in range(1, config.max_newton_iters + 1):
        if split is None:
            split = prob.evaluate_split(x, order=2)
        f, g, H = _combine(split, mu)
        dx = _newton_direction(g, H)
        slope = float(g @ dx)
        lam2 = max(-slope, 0.0)
        decrement = np.sqrt(lam2)
        if lam2 / 2.0 <= config.newton_tolerance:
            return x, decrement, it, True, split
        s = 1.0
        trial = None
        for k in range(MAX_BACKTRACKS):
            # the full step is usually accepted, so evaluate it to second
            # order and reuse that evaluation as the next iterate's split
            trial = prob.evaluate_split(x + s * dx, order=2 if k == 0 else 0)
            if _combine(trial, mu)[0] <= f + ARMIJO * s * slope:
                break
            s *= SHRINK
        else:
            # roundoff floor: the merit cannot resolve further progress
            if lam2 / 2.0 <= max(1e-6, 1e3 * config.newton_tolerance):
                return x, decrement, it, True, split
            raise NewtonDivergenceError(
                f"line search failed (Newton decrement {decrement:.3e}, mu={mu:.3e})")
        x = x + s * dx
        split = trial if s == 1.0 else None
    return x, decrement, config.max_newton_iters, False, split


def solve(program: LogDetProgram, config: SolverConfig | None = None,
          start: Sequence[np.ndarray] | None = None) -> SolverReport:
    """Solve a log-determinant program by the barrier method.

    ``start`` must be strictly feasible when given; otherwise a scaled
    identity is shrunk until it is.  Hitting an iteration cap produces a
    report with ``converged=False`` instead of an exception.
    """
    config = config or SolverConfig()
    prob = _Problem(program)
    lay = prob.layout
    if start is None:
        x = prob.starting_point()
    else:
        x = lay.pack(start)
        if not np.isfinite(prob.evaluate(x, 1.0, order=0)[0]):
            raise InfeasibleStartError("supplied starting point is not strictly feasible")
    theta = program.barrier_degree
    mu = config.barrier_initial
    history = []
    split = None
    total_newton = 0
    converged = False
    decrement = np.inf
    outer = 0
    for outer in range(1, config.max_outer_iters + 1):
        x, decrement, iters, centered, split = _center(prob, x, mu, config, split)
        total_newton += iters
        history.append(float(split[0]) if split is not None else float(prob.objective(lay.unpack(x))))
        if not centered:
            break
        if mu * theta <= config.final_gap_tolerance:
            converged = True
            break
        mu *= config.barrier_decrease
    X = lay.unpack(x)
    return SolverReport(
        objective_value=float(prob.objective(X)),
        variables=X,
        outer_iterations=outer,
        final_gradient_norm=float(decrement),
        feasibility_margins=prob.margins(X),
        converged=converged,
        newton_iterations=total_newton,
        objective_history=history,
        gap_bound=mu * theta,
    )


def barrier_value_and_gradient(program: LogDetProgram, point: Sequence[np.ndarray], mu: float = 1.0):
    """Barrier-augmented objective and its gradient in upper-triangle coordinates."""
    prob = _Problem(program)
    val, grad, _ = prob.evaluate(prob.layout.pack(point), mu, order=1)
    return val, grad


def gradient_check(program: LogDetProgram, point: Sequence[np.ndarray], step: float = 1e-6,
                   mu: float = 1.0) -> float:
    """Worst central-difference mismatch of the barrier-objective gradient.

    The error is ``max_k |g_fd[k] - g[k]| / max_k |g[k]|`` over every
    upper-triangle entry of every variable.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    prob = _Problem(program)
    x = prob.layout.pack(point)
    val, grad, _ = prob.evaluate(x, mu, order=1)
    if not np.isfinite(val):
        raise InfeasibleStartError("gradient check point is not strictly feasible")
    fd = np.empty_like(grad)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = step
        fp = prob.evaluate(x + e, mu, order=0)[0]
        fm = prob.evaluate(x - e, mu, order=0)[0]
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise InfeasibleStartError("finite-difference step leaves the domain")
        fd[k] = (fp - fm) / (2.0 * step)
    scale = max(float(np.max(np.abs(grad))), np.finfo(float).tiny)
    return float(np.max(np.abs(fd - grad)) / scale)
