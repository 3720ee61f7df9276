"""Proximal recovery algorithms: ISTA, Loris, NESTA, SFISTA and their
tight-frame (TF) and rescaled tight-frame (RTF) variants.

Every algorithm shares the same skeleton: start from ``x0 = A.T y``, iterate
until the common stopping rule ``||x_k - x_{k-1}|| < tol`` fires or the
iteration budget runs out. The fidelity gradient is selected by the mode
(ls / tf / rtf, see :func:`tfsr.frames.grad_fidelity`); because the
dictionary is Parseval tight, ``D T(.) D.T`` is the exact proximal map of
the analysis l1 penalty.

All cores operate on matrices of column vectors, so a batch of independent
trials runs through level-3 BLAS and fast DCTs. Per-column regularization,
smoothing, step and constraint values are supported, and columns are retired
from the batch as they converge; retired or not, every column follows
exactly the sequence it would follow in a solo run.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from . import frames
from .errors import DivergenceError, ShapeError

ALGORITHMS = ("ista", "loris", "nesta", "sfista")
FIDELITIES = ("ls", "tf", "rtf")

# A column whose (surrogate) objective exceeds this multiple of its initial
# value is declared divergent: fail loudly on a mis-set step size.
GUARD_FACTOR = 1e6


@dataclass
class SolverSpec:
    """Algorithm identity, fidelity mode, and hyperparameters."""

    algorithm: str
    fidelity: str
    lam: float = 0.01
    eta: Optional[float] = None       # None -> mode default 0.99 / L
    mu: Optional[float] = None        # None -> 0.01 * max|D.T x0| per column
    epsilon: Optional[float] = None   # constraint radius (NESTA)
    max_iters: int = 2000
    tol: float = 1e-4

    def __post_init__(self):
        self.algorithm = self.algorithm.lower()
        self.fidelity = self.fidelity.lower()
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.fidelity not in FIDELITIES:
            raise ValueError(f"unknown fidelity {self.fidelity!r}")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")


@dataclass
class RecoveryResult:
    """Recovered signal with iteration metadata."""

    x_hat: np.ndarray
    iterations: int
    objective_trace: Optional[np.ndarray]
    converged: bool
    rsnr_db: Optional[float] = None


def soft_threshold(v, t):
    """Elementwise shrinkage ``sgn(v) * max(|v| - t, 0)`` for ``t >= 0``."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("threshold must be nonnegative")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def default_eta(spec, op):
    """Mode default step size ``0.99 / L`` for the fidelity gradient."""
    return 0.99 / frames.fidelity_lipschitz(op, spec.fidelity)


def _colnorms(x):
    return np.sqrt(np.einsum("ij,ij->j", x, x))


def _as_cols(v, t, name):
    out = np.broadcast_to(np.asarray(v, dtype=np.float64), (t,)).copy()
    if not np.all(np.isfinite(out) | np.isposinf(out)):
        raise ValueError(f"{name} must be finite (or +inf where allowed)")
    return out


def _grad_cols(op, r, mode):
    if mode == "ls":
        return op.A.T @ r
    g = op.pinv @ r
    if mode == "rtf":
        g = g / op.c_diag[:, None]
    return g


def _fid_value(op, r, mode):
    # ls reports the plain least-squares value; tf and rtf report the
    # back-projection (B-norm) value, which is the objective they descend.
    if mode == "ls":
        return 0.5 * np.einsum("ij,ij->j", r, r)
    z = op.half_gram_solve(r)
    return 0.5 * np.einsum("ij,ij->j", z, z)


class _Book:
    """Per-column result bookkeeping with active-set compaction."""

    def __init__(self, x0, max_iters):
        n, t = x0.shape
        self.out = x0.copy()
        self.iters = np.full(t, max_iters, dtype=np.int64)
        self.converged = np.zeros(t, dtype=bool)
        self.diverged = np.zeros(t, dtype=bool)
        self.act = np.arange(t)

    def retire(self, mask, x, k, diverged=False):
        """Retire active columns flagged by ``mask`` at iteration count ``k``.

        Returns the keep mask (or None if nothing retired).
        """
        if not mask.any():
            return None
        cols = self.act[mask]
        self.out[:, cols] = x[:, mask]
        self.iters[cols] = k
        if diverged:
            self.diverged[cols] = True
        else:
            self.converged[cols] = True
        keep = ~mask
        self.act = self.act[keep]
        return keep

    def finish(self, x, k):
        self.out[:, self.act] = x
        self.iters[self.act] = k

    @property
    def done(self):
        return self.act.size == 0


def _run_ista(op, dct, y, lam, eta, mode, max_iters, tol, trace, x0=None):
    x = (op.A.T @ y) if x0 is None else x0.copy()
    book = _Book(x, max_iters)
    y0, lam0 = y, lam
    guard0 = None
    for k in range(max_iters):
        r = op.A @ x - y
        fid = _fid_value(op, r, mode)
        if guard0 is None:
            # reference scale: initial objective or the value at x = 0,
            # whichever is larger (the start can sit at near-zero residual)
            guard0 = np.maximum(np.maximum(fid, _fid_value(op, -y, mode)),
                                1e-12)
        if trace is not None:
            trace.append(fid[0] + lam[0] * np.abs(dct.analysis(x)).sum())
        div = fid > GUARD_FACTOR * guard0
        keep = book.retire(div, x, k, diverged=True)
        if keep is not None:
            if book.done:
                return book
            x, y, r, lam, eta, guard0 = (a[..., keep] for a in
                                         (x, y, r, lam, eta, guard0))
        g = _grad_cols(op, r, mode)
        xn = dct.synthesis(soft_threshold(dct.analysis(x - eta * g), eta * lam))
        diff = _colnorms(xn - x)
        x = xn
        keep = book.retire(diff < tol, x, k + 1)
        if keep is not None:
            if book.done:
                break
            x, y, lam, eta, guard0 = (a[..., keep] for a in
                                      (x, y, lam, eta, guard0))
    else:
        book.finish(x, max_iters)
    if trace is not None and not book.diverged.any():
        xf = book.out
        trace.append(_fid_value(op, op.A @ xf - y0, mode)[0]
                     + lam0[0] * np.abs(dct.analysis(xf)).sum())
    return book


def _run_loris(op, dct, y, lam, eta, mode, max_iters, tol, trace, x0=None):
    x = (op.A.T @ y) if x0 is None else x0.copy()
    w = np.zeros((dct.d, x.shape[1]))
    book = _Book(x, max_iters)
    y0, lam0 = y, lam
    guard0 = None
    for k in range(max_iters):
        r = op.A @ x - y
        fid = _fid_value(op, r, mode)
        if guard0 is None:
            # reference scale: initial objective or the value at x = 0,
            # whichever is larger (the start can sit at near-zero residual)
            guard0 = np.maximum(np.maximum(fid, _fid_value(op, -y, mode)),
                                1e-12)
        if trace is not None:
            trace.append(fid[0] + lam[0] * np.abs(dct.analysis(x)).sum())
        div = fid > GUARD_FACTOR * guard0
        keep = book.retire(div, x, k, diverged=True)
        if keep is not None:
            if book.done:
                return book
            x, w, y, r, lam, eta, guard0 = (a[..., keep] for a in
                                            (x, w, y, r, lam, eta, guard0))
        desc = x - eta * _grad_cols(op, r, mode)
        xbar = desc - dct.synthesis(w)
        v = w + dct.analysis(xbar)
        w = v - soft_threshold(v, lam)      # projection onto the l-inf ball
        xn = desc - dct.synthesis(w)
        diff = _colnorms(xn - x)
        x = xn
        keep = book.retire(diff < tol, x, k + 1)
        if keep is not None:
            if book.done:
                break
            x, w, y, lam, eta, guard0 = (a[..., keep] for a in
                                         (x, w, y, lam, eta, guard0))
    else:
        book.finish(x, max_iters)
    if trace is not None and not book.diverged.any():
        xf = book.out
        trace.append(_fid_value(op, op.A @ xf - y0, mode)[0]
                     + lam0[0] * np.abs(dct.analysis(xf)).sum())
    return book


def _project_l2ball(op, v, y, eps):
    """Euclidean projection of columns of ``v`` onto ``||A x - y|| <= eps``."""
    r = op.A @ v - y
    rn = _colnorms(r)
    outside = rn > eps
    if not outside.any():
        return v
    eig = op.gram_eigen
    lamg = eig.eigenvalues[:, None]
    u = eig.eigenvectors
    rt = u.T @ r[:, outside]
    rt2 = rt * rt
    e2 = np.where(np.isinf(eps[outside]), np.inf, eps[outside] ** 2)
    theta = np.zeros(int(outside.sum()))
    # phi(theta) = sum r~_i^2 / (1 + theta lam_i)^2 - eps^2 is convex and
    # decreasing, so Newton from 0 converges monotonically.
    for _ in range(60):
        den = 1.0 + theta * lamg
        phi = np.sum(rt2 / den ** 2, axis=0) - e2
        dphi = -2.0 * np.sum(rt2 * lamg / den ** 3, axis=0)
        step = phi / dphi
        theta = theta - step
        if np.all(np.abs(step) <= 1e-14 * (1.0 + theta)):
            break
    scaled = rt * (theta / (1.0 + theta * lamg))
    proj = v.copy()
    proj[:, outside] -= op.A.T @ (u @ scaled)
    return proj


def _project_bball(op, v, y, eps):
    """Projection of columns of ``v`` onto the B-norm tube ``||Ax-y||_B <= eps``.

    Closed form by tightness of ``B A``: move by ``(1 - eps/r)`` of the
    back-projected residual.
    """
    r = op.A @ v - y
    rb = frames.bnorm_of(op, r)
    outside = rb > eps
    if not outside.any():
        return v
    gamma = np.zeros_like(rb)
    gamma[outside] = 1.0 - eps[outside] / rb[outside]
    proj = v - op.pinv @ (r * gamma)
    return proj


NESTA_STAGES = 6


def _run_nesta(op, dct, y, lam, mode, max_iters, tol, eps, mu_given, trace,
               x0_init=None):
    """Smoothed constrained l1 minimization with acceleration and
    smoothing continuation.

    Runs the accelerated scheme (projected smoothed-gradient step,
    anchored accumulated-gradient step, tau-convex combination) over
    ``NESTA_STAGES`` continuation stages of geometrically decreasing
    smoothing width, warm-starting each stage at the previous solution.
    The final width sets the accuracy and acts as the method's tuning
    knob: it is ``lam`` times the initial analysis peak unless an explicit
    ``mu_given`` overrides it. The stage's inner loop ends when the common
    stopping rule fires for the column; the budget is global. The
    constraint ball is the B-norm tube for the tf/rtf modes and the plain
    l2 ball for ls. Stage bookkeeping is per column, so batched columns
    follow exactly their solo sequences.
    """
    project = _project_l2ball if mode == "ls" else _project_bball
    x = (op.A.T @ y) if x0_init is None else x0_init.copy()
    book = _Book(x, max_iters)
    t = x.shape[1]
    peak = np.maximum(np.abs(dct.analysis(x)).max(axis=0), 1e-30)
    mu_final = mu_given if mu_given is not None else lam * peak
    mu_first = np.maximum(0.1 * peak, mu_final)
    last = NESTA_STAGES - 1
    stage = np.zeros(t, dtype=np.int64)
    k = np.zeros(t)
    mu = mu_first.copy()
    x0 = x.copy()
    s = np.zeros_like(x)
    guard0 = None
    for total in range(max_iters):
        xan = dct.analysis(x)
        pen = np.abs(xan).sum(axis=0)
        if guard0 is None:
            guard0 = np.maximum(pen, 1e-12)
        if trace is not None:
            trace.append(pen[0])
        div = pen > GUARD_FACTOR * guard0
        keep = book.retire(div, x, total, diverged=True)
        if keep is not None:
            if book.done:
                return book
            x, x0, s, y, eps, mu, mu_first, mu_final, stage, k, guard0 = (
                a[..., keep] for a in (x, x0, s, y, eps, mu, mu_first,
                                       mu_final, stage, k, guard0))
            xan = xan[:, keep]
        gmu = dct.synthesis(np.clip(xan / mu, -1.0, 1.0))
        s = s + (0.5 * (k + 1.0)) * gmu
        u = project(op, x - mu * gmu, y, eps)
        z = project(op, x0 - mu * s, y, eps)
        tau = 2.0 / (k + 4.0)
        xn = tau * z + (1.0 - tau) * u
        diff = _colnorms(xn - x)
        k += 1
        x = xn
        done = diff < tol
        finish = done & (stage == last)
        advance = done & (stage < last)
        if advance.any():
            stage[advance] += 1
            w = stage[advance] / float(last)
            mu[advance] = (mu_first[advance] ** (1.0 - w)
                           * mu_final[advance] ** w)
            x0[:, advance] = x[:, advance]
            s[:, advance] = 0.0
            k[advance] = 0.0
        keep = book.retire(finish, x, total + 1)
        if keep is not None:
            if book.done:
                break
            x, x0, s, y, eps, mu, mu_first, mu_final, stage, k, guard0 = (
                a[..., keep] for a in (x, x0, s, y, eps, mu, mu_first,
                                       mu_final, stage, k, guard0))
    else:
        book.finish(x, max_iters)
    if trace is not None and not book.diverged.any():
        trace.append(np.abs(dct.analysis(book.out)).sum())
    return book


def _huber_value(v, mu, lam):
    # Smoothed lam*|.| with curvature 1/mu: quadratic inside |v| <= mu*lam.
    cut = mu * lam
    a = np.abs(v)
    quad = a * a / (2.0 * mu)
    lin = lam * (a - 0.5 * cut)
    return np.where(a <= cut, quad, lin).sum(axis=0)


SFISTA_STAGES = 5


def _run_sfista(op, dct, y, lam, eta, mode, max_iters, tol, mu_final, trace,
                x0=None, continuation=True):
    """Monotone accelerated descent on the smoothed analysis-l1 objective
    with smoothing continuation.

    Each stage runs the accelerated scheme at a fixed smoothing width with
    the step sized to the full curvature (fidelity plus ``1/mu``), keeping
    the iterate monotone in the stage objective; when the stopping rule
    fires the width shrinks geometrically toward ``mu_final`` and the
    momentum restarts from the current iterate. An explicitly supplied
    ``eta`` is honored in every stage. Stage bookkeeping is per column.
    The objective trace follows the current stage's smoothed objective.
    """
    x = (op.A.T @ y) if x0 is None else x0.copy()
    ncols = x.shape[1]
    big_l = frames.fidelity_lipschitz(op, mode)
    peak = np.maximum(np.abs(dct.analysis(x)).max(axis=0), 1e-30)
    mu_first = np.maximum(peak, mu_final) if continuation else mu_final.copy()
    last = SFISTA_STAGES - 1
    stage = np.zeros(ncols, dtype=np.int64)
    if not continuation:
        stage += last          # plain single-width monotone run
    mu = mu_first.copy()
    eta_given = eta
    eta = (0.99 / (big_l + 1.0 / mu)) if eta_given is None else eta_given.copy()
    u = x.copy()
    xan = dct.analysis(x)
    fid_x = _fid_value(op, op.A @ x - y, mode)
    fx = fid_x + _huber_value(xan, mu, lam)
    t = np.ones(ncols)
    book = _Book(x, max_iters)
    guard0 = np.maximum(np.maximum(fx, _fid_value(op, -y, mode)), 1e-12)
    if trace is not None:
        trace.append(fx[0])
    for k in range(max_iters):
        div = fx > GUARD_FACTOR * guard0
        keep = book.retire(div, x, k, diverged=True)
        if keep is not None:
            if book.done:
                return book
            (x, u, xan, y, fx, fid_x, lam, eta, mu, mu_first, mu_final,
             stage, t, guard0) = (a[..., keep] for a in
                                  (x, u, xan, y, fx, fid_x, lam, eta, mu,
                                   mu_first, mu_final, stage, t, guard0))
        gpen = dct.synthesis((xan - soft_threshold(xan, mu * lam)) / mu)
        gfid = _grad_cols(op, op.A @ u - y, mode)
        z = u - eta * (gfid + gpen)
        tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        zan = dct.analysis(z)
        fid_z = _fid_value(op, op.A @ z - y, mode)
        fz = fid_z + _huber_value(zan, mu, lam)
        take = fz <= fx
        xn = np.where(take, z, x)
        fxn = np.where(take, fz, fx)
        fid_xn = np.where(take, fid_z, fid_x)
        xann = np.where(take, zan, xan)
        u = xn + (t / tn) * (z - xn) + ((t - 1.0) / tn) * (xn - x)
        diff = _colnorms(xn - x)
        x, fx, fid_x, xan, t = xn, fxn, fid_xn, xann, tn
        if trace is not None:
            trace.append(fx[0])
        done = diff < tol
        finish = done & (stage == last)
        advance = done & (stage < last)
        if advance.any():
            stage[advance] += 1
            w = stage[advance] / float(last)
            mu[advance] = (mu_first[advance] ** (1.0 - w)
                           * mu_final[advance] ** w)
            if eta_given is None:
                eta[advance] = 0.99 / (big_l + 1.0 / mu[advance])
            fx[advance] = fid_x[advance] + _huber_value(
                xan[:, advance], mu[advance], lam[advance])
            u[:, advance] = x[:, advance]
            t[advance] = 1.0
        keep = book.retire(finish, x, k + 1)
        if keep is not None:
            if book.done:
                break
            (x, u, xan, y, fx, fid_x, lam, eta, mu, mu_first, mu_final,
             stage, t, guard0) = (a[..., keep] for a in
                                  (x, u, xan, y, fx, fid_x, lam, eta, mu,
                                   mu_first, mu_final, stage, t, guard0))
    else:
        book.finish(x, max_iters)
    return book


def ista_step(spec, op, dct, y, x_k):
    """One ISTA update in the spec's fidelity mode (exposed for diagnostics)."""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x_k, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[:, None]
        y = y[:, None]
    eta = spec.eta if spec.eta is not None else default_eta(spec, op)
    g = _grad_cols(op, op.A @ x - y, spec.fidelity)
    out = dct.synthesis(soft_threshold(dct.analysis(x - eta * g),
                                       eta * spec.lam))
    return out[:, 0] if single else out


def solve_batch(spec, op, dct, y, lam=None, epsilon=None, mu=None, eta=None,
                record_trace=False, x0=None):
    """Run the spec's algorithm on a batch of measurement columns.

    ``lam``, ``epsilon``, ``mu`` and ``eta`` may be scalars or per-column
    arrays; unset values fall back to the spec and then to mode defaults.
    ``x0`` overrides the default start ``A.T y`` (same shape as the result).
    Returns ``(x_hat, iterations, converged, diverged, trace)`` where the
    trace is populated only for single-column runs with ``record_trace``.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[0] != op.m:
        raise ShapeError(f"measurement length {y.shape[0]} != m={op.m}")
    if dct.n != op.n:
        raise ShapeError(f"dictionary n={dct.n} != operator n={op.n}")
    t = y.shape[1]
    lam = _as_cols(spec.lam if lam is None else lam, t, "lambda")
    if np.any(lam <= 0):
        raise ValueError("lambda must be positive")
    big_l = frames.fidelity_lipschitz(op, spec.fidelity)
    trace = [] if (record_trace and t == 1) else None

    if spec.algorithm in ("ista", "loris"):
        e = eta if eta is not None else spec.eta
        e = _as_cols(0.99 / big_l if e is None else e, t, "eta")
        if np.any(e <= 0) or np.any(e * big_l >= 1.0 + 1e-12):
            raise ValueError(f"eta must satisfy 0 < eta < 1/L = {1.0 / big_l:.3g}")
        runner = _run_ista if spec.algorithm == "ista" else _run_loris
        book = runner(op, dct, y, lam, e, spec.fidelity, spec.max_iters,
                      spec.tol, trace, x0=x0)
    elif spec.algorithm == "nesta":
        mug = mu if mu is not None else spec.mu
        mug = None if mug is None else _as_cols(mug, t, "mu")
        epsv = epsilon if epsilon is not None else spec.epsilon
        if epsv is None:
            raise ValueError("nesta requires a constraint radius epsilon")
        epsv = _as_cols(epsv, t, "epsilon")
        if np.any(epsv < 0):
            raise ValueError("epsilon must be nonnegative")
        book = _run_nesta(op, dct, y, lam, spec.fidelity, spec.max_iters,
                          spec.tol, epsv, mug, trace, x0_init=x0)
    else:  # sfista
        begin = (op.A.T @ y) if x0 is None else x0
        mug = mu if mu is not None else spec.mu
        continuation = mug is None
        if mug is None:
            # default final smoothing width relative to the initial
            # analysis peak; continuation walks down to it from the peak
            mug = np.maximum(
                0.01 * np.abs(dct.analysis(begin)).max(axis=0), 1e-12)
        muv = _as_cols(mug, t, "mu")
        e = eta if eta is not None else spec.eta
        if e is not None:
            e = _as_cols(e, t, "eta")
            if np.any(e <= 0) or np.any(e * big_l >= 1.0 + 1e-12):
                raise ValueError(
                    f"eta must satisfy 0 < eta < 1/L = {1.0 / big_l:.3g}")
        book = _run_sfista(op, dct, y, lam, e, spec.fidelity, spec.max_iters,
                           spec.tol, muv, trace, x0=x0,
                           continuation=continuation)

    tr = np.asarray(trace) if trace is not None else None
    return book.out, book.iters, book.converged, book.diverged, tr


def solve(spec, op, dct, y, epsilon=None, record_trace=True):
    """Solve a single instance; raises :class:`DivergenceError` on blow-up."""
    eta_used = spec.eta if spec.eta is not None else default_eta(spec, op)
    x, iters, conv, div, trace = solve_batch(
        spec, op, dct, np.asarray(y, dtype=np.float64).reshape(-1, 1),
        epsilon=epsilon, record_trace=record_trace)
    if div[0]:
        raise DivergenceError(eta_used, f"algorithm {spec.algorithm}")
    return RecoveryResult(x_hat=x[:, 0], iterations=int(iters[0]),
                          objective_trace=trace, converged=bool(conv[0]))


def result_to_json(spec, result, include_trace=False):
    """Serialize a result; the +inf RSNR sentinel becomes the string "inf"."""
    rsnr = result.rsnr_db
    if rsnr is not None and np.isinf(rsnr):
        rsnr = "inf"
    out = {
        "algorithm": spec.algorithm,
        "fidelity": spec.fidelity,
        "lambda": spec.lam,
        "eta": spec.eta,
        "iterations": result.iterations,
        "converged": result.converged,
        "rsnr_db": rsnr,
    }
    if include_trace and result.objective_trace is not None:
        out["objective_trace"] = [float(v) for v in result.objective_trace]
    return out

