"""Maximum-entropy state reconstruction.

The density matrix is parametrized as rho = exp(-sum_i lam_i A_i) / Z and the
multipliers are tuned to minimize the squared mismatch between the measured
bin probabilities and Tr(rho A_i).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .projectors import MOMENTUM, ObservableSet

log = logging.getLogger(__name__)

EIG_FLOOR = 1e-14


class DataError(ValueError):
    """Measurement data inconsistent with the observable set."""


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray
    eigenvalues: np.ndarray = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if self.eigenvalues is None:
            object.__setattr__(self, "eigenvalues", np.linalg.eigvalsh(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityMatrix":
        return cls(np.eye(n, dtype=complex) / n)

    def purity(self) -> float:
        return float(np.sum(self.eigenvalues**2))


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    """Normalized histogram for one dataset.

    ``dataset_id`` is the probe time in ps for a position distribution or
    ``"momentum"``.  Probabilities are renormalized to unit sum on creation.
    """

    dataset_id: float | str
    probabilities: np.ndarray
    counts: int | None = None

    def __post_init__(self):
        a = np.asarray(self.probabilities, dtype=float)
        if a.ndim != 1:
            raise DataError("probabilities must be a 1-d vector")
        if not np.all(np.isfinite(a)) or np.any(a < 0):
            raise DataError(f"dataset {self.dataset_id!r}: probabilities must be finite and >= 0")
        total = a.sum()
        if total <= 0:
            raise DataError(f"dataset {self.dataset_id!r}: probabilities sum to zero")
        a = a / total
        a.flags.writeable = False
        object.__setattr__(self, "probabilities", a)
        if self.dataset_id != MOMENTUM:
            object.__setattr__(self, "dataset_id", float(self.dataset_id))


@dataclass(frozen=True)
class OptimizerOptions:
    gtol: float = 1e-8
    dtol: float = 1e-12
    max_iter: int = 2000
    restarts: int = 8
    seed: int = 0
    init_range: float = 5.0
    weighted: bool = False
    memory: int = 30
    dual_iter: int = 200
    newton_iter: int = 50

    def __post_init__(self):
        if self.gtol < 0 or self.dtol < 0:
            raise ValueError("tolerances must be non-negative")
        if self.max_iter < 1 or self.restarts < 0 or self.memory < 1 or self.dual_iter < 0 or self.newton_iter < 0:
            raise ValueError("max_iter and memory must be >= 1, restarts >= 0")
        if self.init_range <= 0:
            raise ValueError("init_range must be positive")


@dataclass(frozen=True)
class FitReport:
    delta: float
    entropy: float
    iterations: int
    gradient_norm: float
    restarts_used: int
    converged: bool
    reason: str
    evaluations: int = 0
    run_deltas: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "entropy": self.entropy,
            "entropy_unit": "nats",
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "restarts_used": self.restarts_used,
            "converged": self.converged,
            "reason": self.reason,
            "evaluations": self.evaluations,
            "run_deltas": list(self.run_deltas),
        }


def _generator(lam, obs: ObservableSet) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (len(obs),):
        raise ValueError(f"dimension mismatch: {lam.shape[0] if lam.ndim else 0} multipliers "
                         f"for {len(obs)} observables")
    n = obs.dim
    g = -(lam @ obs.stack.reshape(len(obs), n * n)).reshape(n, n)
    return (g + g.conj().T) / 2


def _exp_family(lam, obs):
    """Eigen-decomposition of the generator and the normalized exponential."""
    g, v = np.linalg.eigh(_generator(lam, obs))
    s = g - g.max()
    e = np.exp(s)
    z = e.sum()
    p = e / z
    rho = (v * p) @ v.conj().T
    return rho, p, v, g, s, e, z


def density_from_lambda(lam, obs: ObservableSet) -> DensityMatrix:
    rho, p, *_ = _exp_family(lam, obs)
    return DensityMatrix((rho + rho.conj().T) / 2, p)


def _expectations(rho: np.ndarray, obs: ObservableSet) -> np.ndarray:
    n = obs.dim
    return np.real(obs.stack.reshape(len(obs), n * n) @ rho.T.reshape(n * n))


def expectations(rho: DensityMatrix, obs: ObservableSet) -> np.ndarray:
    """Tr(rho A_i) for every observable."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if m.shape != (obs.dim, obs.dim):
        raise ValueError(f"dimension mismatch: rho is {m.shape}, observables are {obs.dim}x{obs.dim}")
    return _expectations(m, obs)


def align_data(obs: ObservableSet, data: Sequence[MeasurementRecord]):
    """Target vector and per-bin counts in the flat order of ``obs``.

    Several momentum records are averaged into one.
    """
    n = obs.dim
    by_id: dict = {}
    for rec in data:
        if rec.probabilities.shape != (n,):
            raise DataError(f"dataset {rec.dataset_id!r} has {rec.probabilities.shape[0]} bins, expected {n}")
        by_id.setdefault(rec.dataset_id, []).append(rec)
    target = np.empty(len(obs))
    counts = np.full(len(obs), np.nan)
    for d in obs.dataset_ids:
        recs = by_id.pop(d, None)
        if recs is None:
            raise DataError(f"no measurement for dataset {d!r}")
        if len(recs) > 1 and d != MOMENTUM:
            raise DataError(f"duplicate measurement for dataset {d!r}")
        sl = obs.dataset_slice(d)
        target[sl] = np.mean([r.probabilities for r in recs], axis=0)
        c = [r.counts for r in recs]
        if all(x is not None for x in c):
            counts[sl] = sum(c)
    if by_id:
        raise DataError(f"measurements for unknown datasets {sorted(map(str, by_id))}")
    return target, counts


def bin_weights(target, counts) -> np.ndarray:
    """Inverse binomial-variance weights, scaled to unit mean.

    Bins without counts get weight one.
    """
    w = np.ones_like(target)
    have = np.isfinite(counts)
    if np.any(have):
        c = counts[have]
        var = np.maximum(target[have] * (1 - target[have]), 1.0 / c) / c
        w[have] = 1.0 / var
        w /= w.mean()
    return w


def _divided_differences(s, e, g):
    diff = s[:, None] - s[None, :]
    tol = 1e-10 * np.max(np.abs(g))
    degenerate = np.abs(diff) <= tol
    with np.errstate(divide="ignore", invalid="ignore"):
        k = (e[:, None] - e[None, :]) / diff
    mid = np.exp((s[:, None] + s[None, :]) / 2)
    return np.where(degenerate, mid, k)


def _objective(lam, obs, target, weights):
    rho, p, v, g, s, e, z = _exp_family(lam, obs)
    resid = target - _expectations(rho, obs)
    delta = float(np.sum(weights * resid**2))
    n = obs.dim
    c = -2 * weights * resid
    b = (c @ obs.stack.reshape(len(obs), n * n)).reshape(n, n)
    b -= np.trace(rho @ b) * np.eye(n)
    bbar = v.conj().T @ b @ v
    h = v @ (_divided_differences(s, e, g) * bbar) @ v.conj().T
    grad = -np.real(obs.stack.reshape(len(obs), n * n) @ h.T.reshape(n * n)) / z
    return delta, grad


def objective(lam, obs: ObservableSet, data: Sequence[MeasurementRecord], weighted: bool = False):
    """Squared mismatch between data and model expectations, with its gradient.

    The gradient uses the Frechet derivative of the matrix exponential in the
    eigenbasis of the generator, including the derivative of Z.
    """
    target, counts = align_data(obs, data)
    weights = bin_weights(target, counts) if weighted else np.ones_like(target)
    return _objective(lam, obs, target, weights)


def entropy(rho: DensityMatrix) -> float:
    """von Neumann entropy in nats; eigenvalues below 1e-14 count as zero."""
    p = np.asarray(rho.eigenvalues, dtype=float)
    p = p[p > EIG_FLOOR]
    return float(-np.sum(p * np.log(p)))


def _dual(lam, obs, target):
    """Convex dual ln Z + lam.a; its gradient a - <A> vanishes exactly on the data."""
    rho, p, v, g, s, e, z = _exp_family(lam, obs)
    return np.log(z) + g.max() + lam @ target, target - _expectations(rho, obs)


def _dual_hessian(lam, obs, target):
    """Dual value, gradient and Hessian; the Hessian is the Kubo-Mori covariance of the observables."""
    rho, p, v, g, s, e, z = _exp_family(lam, obs)
    n = obs.dim
    mean = _expectations(rho, obs)
    at = (v.conj().T @ obs.stack @ v).reshape(len(obs), n * n)
    k = (_divided_differences(s, e, g) / z).reshape(n * n)
    hess = np.real((at * k) @ at.conj().T) - np.outer(mean, mean)
    return np.log(z) + g.max() + lam @ target, target - mean, (hess + hess.T) / 2


def _newton_dual(x, obs, target, weights, opts: OptimizerOptions):
    """Levenberg-damped Newton on the dual; returns the point with the lowest mismatch."""
    value, grad, hess = _dual_hessian(x, obs, target)
    best = (float(np.sum(weights * grad**2)), x)
    mu = 1e-3 * max(np.abs(np.diag(hess)).max(), 1e-12)
    nit = nfev = 0
    while nit < opts.newton_iter and best[0] >= opts.dtol:
        nit += 1
        w, u = np.linalg.eigh(hess)
        step = -u @ ((u.T @ grad) / (np.clip(w, 0, None) + mu))
        trial = x + step
        tv, tg, th = _dual_hessian(trial, obs, target)
        nfev += 1
        if not (np.isfinite(tv) and np.all(np.isfinite(tg))):
            raise FloatingPointError("non-finite dual")
        if tv < value:
            x, value, grad, hess = trial, tv, tg, th
            mu = max(mu / 10, 1e-15)
            delta = float(np.sum(weights * grad**2))
            if delta < best[0]:
                best = (delta, x)
        else:
            mu *= 10
            if mu > 1e10:
                break
    return best[1], best[0], nit, nfev


def _lbfgs(fun, x0, opts: OptimizerOptions, maxiter: int, stop):
    """L-BFGS-B driver tracking the best point seen; ``stop(value, grad)`` returns a reason or None."""
    state = {"best": None, "nfev": 0, "nit": 0, "reason": "max_iter"}

    def wrapped(x):
        value, grad, score, gnorm = fun(x)
        state["nfev"] += 1
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            raise FloatingPointError("non-finite objective")
        if state["best"] is None or score < state["best"][0]:
            state["best"] = (score, x.copy(), gnorm)
        return value, grad

    def callback(intermediate_result):
        state["nit"] += 1
        reason = stop(*state["best"])
        if reason:
            state["reason"] = reason
            raise StopIteration

    res = minimize(wrapped, x0, jac=True, method="L-BFGS-B", callback=callback,
                   options={"maxiter": maxiter, "maxcor": opts.memory, "ftol": 0.0, "gtol": 0.0,
                            "maxfun": 20 * maxiter, "maxls": 50})
    if state["best"] is None:
        raise FloatingPointError("optimizer made no evaluations")
    score, x, gnorm = state["best"]
    reason = state["reason"]
    if reason == "max_iter":
        reason = stop(score, x, gnorm) or ("max_iter" if state["nit"] >= maxiter else "line_search")
        if reason == "line_search":
            log.debug("L-BFGS stopped early: %s", res.message)
    return x, score, gnorm, reason, state["nit"], state["nfev"]


def _run(x0, obs, target, weights, opts: OptimizerOptions):
    nit = nfev = 0
    x = x0
    if opts.dual_iter:
        def dual(lam):
            value, grad = _dual(lam, obs, target)
            return value, grad, float(np.sum(weights * grad**2)), 0.0

        def dual_stop(delta, lam, _):
            return "dtol" if delta < opts.dtol else None

        x, delta, _, reason, it, fev = _lbfgs(dual, x, opts, opts.dual_iter, dual_stop)
        nit, nfev = it, fev
        log.debug("dual stage: delta=%.3e after %d iterations", delta, it)
        if opts.newton_iter and delta >= opts.dtol:
            x, delta, it, fev = _newton_dual(x, obs, target, weights, opts)
            nit, nfev = nit + it, nfev + fev
            log.debug("newton stage: delta=%.3e after %d iterations", delta, it)

    def primal(lam):
        delta, grad = _objective(lam, obs, target, weights)
        return delta, grad, delta, float(np.linalg.norm(grad))

    def primal_stop(delta, lam, gnorm):
        if delta < opts.dtol:
            return "dtol"
        if gnorm < opts.gtol:
            return "gtol"
        return None

    x, delta, gnorm, reason, it, fev = _lbfgs(primal, x, opts, opts.max_iter, primal_stop)
    return x, delta, gnorm, reason, nit + it, nfev + fev


def reconstruct(obs: ObservableSet, data: Sequence[MeasurementRecord],
                options: OptimizerOptions | None = None):
    """Multi-start L-BFGS minimization of the mismatch.

    Each run first descends the convex dual ln Z + lam.a for up to
    ``dual_iter`` iterations (its minimizer matches the data exactly when
    that is possible) and then minimizes the mismatch itself with the
    analytic gradient.  The first run starts from lam = 0 (the maximally
    mixed state); further
    runs start from uniform random multipliers in [-init_range, init_range]
    and are only attempted while no run has reached ``dtol``.  Returns
    ``(lam, rho, report)`` for the run with the lowest mismatch.
    """
    opts = options or OptimizerOptions()
    target, counts = align_data(obs, data)
    weights = bin_weights(target, counts) if opts.weighted else np.ones_like(target)
    rng = np.random.default_rng(opts.seed)
    starts = [np.zeros(len(obs))]
    starts += [rng.uniform(-opts.init_range, opts.init_range, len(obs)) for _ in range(opts.restarts)]

    best = None
    deltas = []
    total_it = total_fev = 0
    used = 0
    for i, x0 in enumerate(starts):
        if best is not None and best[1] < opts.dtol:
            break
        used = i
        try:
            x, delta, gnorm, reason, nit, nfev = _run(x0, obs, target, weights, opts)
        except FloatingPointError:
            log.warning("run %d aborted: non-finite objective", i)
            deltas.append(float("nan"))
            continue
        total_it += nit
        total_fev += nfev
        deltas.append(delta)
        log.info("run %d: delta=%.3e |grad|=%.3e iterations=%d (%s)", i, delta, gnorm, nit, reason)
        if best is None or delta < best[1]:
            best = (x, delta, gnorm, reason)
    if best is None:
        raise FloatingPointError("every optimizer run produced a non-finite objective")
    x, delta, gnorm, reason = best
    rho = density_from_lambda(x, obs)
    report = FitReport(delta=delta, entropy=entropy(rho), iterations=total_it, gradient_norm=gnorm,
                       restarts_used=used, converged=reason in ("dtol", "gtol"), reason=reason,
                       evaluations=total_fev, run_deltas=tuple(deltas))
    return x, rho, report
