"""Split Bregman solvers for TV minimization from partial Fourier data.

Two problems are solved for a pattern ``Omega`` and data ``y``:

* constrained: ``min ||Dz||  s.t.  ||P_Omega A z - y||_2 <= delta``, by Bregman
  add-back of the data residual around an alternating (x, d) splitting;
* unconstrained: ``min ||P_Omega A z - y||_2^2 + alpha ||Dz||``, by the same
  splitting without add-back (this is ADMM).

The x-update ``(mu A* P A + lam D* D) x = rhs`` is solved by preconditioned
conjugate gradients. ``A* P A`` is diagonal in the Fourier basis and ``D* D``
is close to the periodic Laplacian, so the preconditioner is the inverse of
``mu * mask + lam * sum 4 sin^2(pi k / N)`` applied with FFTs.
"""
from dataclasses import dataclass, field, asdict
from typing import List, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from . import kernels, ops
from .sampling import SamplingPattern


@dataclass
class SolverConfig:
    """Solver parameters.

    Parameters
    ----------
    mode : {"constrained", "unconstrained"}
    delta : float
        Noise level for the constrained mode.
    alpha : float
        TV weight for the unconstrained mode.
    tv_flavor : {"one_d", "iso_2d", "aniso_2d"} or None
        ``None`` picks ``one_d`` for vectors and ``iso_2d`` for grids.
    lam : float
        Splitting penalty on ``d = Dx``, relative to data normalized to unit
        RMS on ``Omega``.
    mu : float
        Data weight of the constrained subproblem.
    bregman : bool
        Add back the data residual after each outer step (constrained mode).
    n_inner : int
        Alternating (x, d) sweeps per outer step.
    """

    mode: str = "constrained"
    delta: float = 0.0
    alpha: float = 1.0
    tv_flavor: Optional[str] = None
    lam: float = 1.0
    mu: float = 10.0
    bregman: bool = True
    n_inner: int = 1
    cg_tol: float = 1e-10
    cg_maxiter: int = 500
    outer_tol: float = 1e-8
    max_outer: int = 2000
    residual_floor: float = 1e-10
    record_inner: bool = False

    def __post_init__(self):
        if self.mode not in ("constrained", "unconstrained"):
            raise ValueError("mode must be 'constrained' or 'unconstrained'")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.tv_flavor is not None and self.tv_flavor not in ops.TV_FLAVORS:
            raise ValueError(f"unknown TV flavor {self.tv_flavor!r}")
        for name in ("lam", "mu", "cg_tol", "outer_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_inner < 1 or self.max_outer < 1:
            raise ValueError("iteration counts must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass
class RecoveryResult:
    """Solver output.

    ``residual`` is ``||P_Omega A x - y||_2`` in the units of the input data;
    ``kkt`` holds the primal splitting gap ``||Dx - d||`` and, in
    unconstrained mode, the stationarity residual, both relative to the
    normalized data.
    """

    x: np.ndarray
    iterations: int
    residual: float
    objective: float
    converged: bool
    residual_history: List[float]
    kkt: dict
    rel_error: Optional[float] = None
    inner_objective: List[List[float]] = field(default_factory=list)
    config: Optional[SolverConfig] = None

    def summary(self):
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "objective": self.objective,
            "converged": self.converged,
            "rel_error": self.rel_error,
            "kkt": self.kkt,
        }


def relative_error(x_hat, x):
    """``||x_hat - x||_2 / ||x||_2``."""
    x_hat = np.asarray(x_hat)
    x = np.asarray(x)
    if x_hat.shape != x.shape:
        raise ops.DimensionError("shapes differ")
    nx = np.linalg.norm(x)
    if nx == 0:
        raise ValueError("relative error undefined for a zero reference")
    return float(np.linalg.norm(x_hat - x) / nx)


def shrink(g, threshold, flavor=None):
    """Proximal map of ``threshold * TV`` on a gradient.

    ``iso_2d`` scales each pixel's 2-vector by ``max(|g| - t, 0)/|g|``;
    ``aniso_2d`` and ``one_d`` soft-threshold every entry.
    """
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    if isinstance(g, tuple):
        flavor = flavor or "iso_2d"
        if flavor == "iso_2d":
            return ops.GradientField(*kernels.shrink_iso(g[0], g[1], threshold))
        return ops.GradientField(kernels.shrink_soft(g[0], threshold), kernels.shrink_soft(g[1], threshold))
    return kernels.shrink_soft(g, threshold)


def alpha_from_delta(q, delta, b):
    """TV weight ``sqrt(q) * (delta + sqrt(b))`` matched to a noise level."""
    return float(np.sqrt(q) * (delta + np.sqrt(b)))


class _Problem:
    """Operators for one reconstruction, all in FFT frequency order."""

    def __init__(self, pattern, n, flavor):
        self.n = n
        self.dim = pattern.dimension
        self.shape = pattern.shape
        self.mask = pattern.mask("fft")
        self.flavor = flavor
        k = np.fft.fftfreq(n) * n
        lap1 = 4.0 * np.sin(np.pi * k / n) ** 2
        if self.dim == 1:
            self.lap = lap1
        else:
            self.lap = lap1[:, None] + lap1[None, :]

    def A(self, x):
        return ops.dft_fft_order(x)

    def At(self, s):
        return ops.dft_adjoint_fft_order(s)

    def D(self, x):
        if self.dim == 1:
            return x[1:] - x[:-1]
        return ops.GradientField(*kernels.grad2d(x))

    def Dt(self, g):
        if self.dim == 1:
            return ops.diff_1d_adjoint(g)
        return kernels.grad2d_adjoint(g[0], g[1])

    def tv(self, g):
        return ops.tv_norm_of_gradient(g, self.flavor)

    def shrink(self, g, t):
        return shrink(g, t, self.flavor)

    def add(self, a, b, sign=1.0):
        if self.dim == 1:
            return a + sign * b
        return ops.GradientField(a[0] + sign * b[0], a[1] + sign * b[1])

    def gnorm(self, g):
        if self.dim == 1:
            return float(np.linalg.norm(g))
        return float(np.sqrt(np.linalg.norm(g[0]) ** 2 + np.linalg.norm(g[1]) ** 2))

    def zeros_grad(self):
        if self.dim == 1:
            return np.zeros(self.n - 1, dtype=np.complex128)
        z = np.zeros(self.shape, dtype=np.complex128)
        return ops.GradientField(z, z.copy())

    def solve(self, mu, lam, rhs, x0, tol, maxiter):
        size = rhs.size
        shape = self.shape
        mask = self.mask

        def matvec(v):
            v = v.reshape(shape)
            out = mu * self.At(mask * self.A(v)) + lam * self.Dt(self.D(v))
            return out.ravel()

        diag = mu * mask + lam * self.lap
        diag = np.where(diag > 0, diag, 1.0)

        def precond(v):
            return (self.At(self.A(v.reshape(shape)) / diag)).ravel()

        op = LinearOperator((size, size), matvec=matvec, dtype=np.complex128)
        pre = LinearOperator((size, size), matvec=precond, dtype=np.complex128)
        sol, info = cg(op, rhs.ravel(), x0=x0.ravel(), rtol=tol, atol=0.0, maxiter=maxiter, M=pre)
        return sol.reshape(shape), info


def _prepare(y, pattern, n):
    if not isinstance(pattern, SamplingPattern):
        raise TypeError("pattern must be a SamplingPattern")
    if len(pattern) == 0:
        raise ValueError("empty sampling pattern")
    if n is not None and n != pattern.n:
        raise ops.DimensionError("N does not match the pattern")
    y = np.asarray(y, dtype=np.complex128).reshape(-1)
    if y.size != len(pattern):
        raise ops.DimensionError(f"expected {len(pattern)} samples, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise ValueError("data contain NaN or Inf")
    full = np.zeros(pattern.n ** pattern.dimension, dtype=np.complex128)
    full[pattern.positions] = y
    y_fft = ops.to_fft_order(full.reshape(pattern.shape))
    scale = np.linalg.norm(y) / np.sqrt(len(pattern))
    if scale == 0:
        scale = 1.0
    return y_fft / scale, scale


def recover(y, pattern, config=None, n=None, truth=None):
    """Recover a signal or image from Fourier samples.

    Parameters
    ----------
    y : array_like
        Samples ``(A x)_k`` for ``k`` in ``pattern.freqs`` (same order).
    pattern : SamplingPattern
    config : SolverConfig, optional
        Dispatches on ``config.mode``.
    n : int, optional
        Checked against ``pattern.n`` when given.
    truth : array_like, optional
        Ground truth for the ``rel_error`` field.
    """
    config = config or SolverConfig()
    if config.mode == "unconstrained":
        return recover_unconstrained(y, pattern, config.alpha, config, n, truth)
    y_fft, scale = _prepare(y, pattern, n)
    flavor = config.tv_flavor or ("one_d" if pattern.dimension == 1 else "iso_2d")
    prob = _Problem(pattern, pattern.n, flavor)
    mu, lam = config.mu, config.lam
    mask = prob.mask
    y_norm = np.linalg.norm(y_fft)
    target = config.delta / scale if config.delta > 0 else config.residual_floor * y_norm

    f = y_fft.copy()
    x = prob.At(y_fft)
    d = prob.zeros_grad()
    b = prob.zeros_grad()
    history, inner_log = [], []
    converged = False
    it = 0
    for it in range(1, config.max_outer + 1):
        x_prev = x
        sweep = []
        for _ in range(config.n_inner):
            rhs = mu * prob.At(mask * f) + lam * prob.Dt(prob.add(d, b, -1.0))
            x, _ = prob.solve(mu, lam, rhs, x, config.cg_tol, config.cg_maxiter)
            dx = prob.D(x)
            d = prob.shrink(prob.add(dx, b), 1.0 / lam)
            if config.record_inner:
                fit = np.linalg.norm(mask * prob.A(x) - f) ** 2
                gap = prob.gnorm(prob.add(prob.add(d, dx, -1.0), b, -1.0)) ** 2
                sweep.append(prob.tv(d) + 0.5 * mu * fit + 0.5 * lam * gap)
        b = prob.add(b, prob.add(dx, d, -1.0))
        r = mask * prob.A(x) - y_fft
        res = float(np.linalg.norm(r))
        history.append(res * scale)
        if config.record_inner:
            inner_log.append(sweep)
        change = np.linalg.norm(x - x_prev) / max(np.linalg.norm(x), 1e-300)
        if config.delta > 0 and res <= target:
            converged = True
            break
        if config.delta == 0 and res <= target and change < config.outer_tol:
            converged = True
            break
        if config.bregman:
            f = f - r
    x_out = x * scale
    kkt = {"split_gap": prob.gnorm(prob.add(prob.D(x), d, -1.0)),
           "data_residual": res}
    result = RecoveryResult(
        x=x_out, iterations=it, residual=res * scale, objective=prob.tv(prob.D(x_out)),
        converged=converged, residual_history=history, kkt=kkt,
        inner_objective=inner_log, config=config)
    if truth is not None:
        result.rel_error = relative_error(x_out, truth)
    return result


def recover_unconstrained(y, pattern, alpha, config=None, n=None, truth=None):
    """Minimize ``||P_Omega A z - y||_2^2 + alpha ||Dz||`` by ADMM.

    Stops when the relative change of ``x`` and both KKT residuals (splitting
    gap and stationarity, relative to the normalized data) fall below
    ``config.outer_tol``.
    """
    config = config or SolverConfig(mode="unconstrained", alpha=alpha)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    y_fft, scale = _prepare(y, pattern, n)
    flavor = config.tv_flavor or ("one_d" if pattern.dimension == 1 else "iso_2d")
    prob = _Problem(pattern, pattern.n, flavor)
    lam = config.lam
    a = alpha / scale
    mask = prob.mask
    y_norm = max(np.linalg.norm(y_fft), 1e-300)

    x = prob.At(y_fft)
    d = prob.zeros_grad()
    b = prob.zeros_grad()
    history, inner_log = [], []
    converged = False
    it = 0
    stat = gap = np.inf
    for it in range(1, config.max_outer + 1):
        x_prev = x
        sweep = []
        for _ in range(config.n_inner):
            rhs = 2.0 * prob.At(mask * y_fft) + lam * prob.Dt(prob.add(d, b, -1.0))
            x, _ = prob.solve(2.0, lam, rhs, x, config.cg_tol, config.cg_maxiter)
            dx = prob.D(x)
            d = prob.shrink(prob.add(dx, b), a / lam)
            if config.record_inner:
                fit = np.linalg.norm(mask * prob.A(x) - y_fft) ** 2
                gp = prob.gnorm(prob.add(prob.add(d, dx, -1.0), b, -1.0)) ** 2
                sweep.append(fit + a * prob.tv(d) + 0.5 * lam * gp)
        b = prob.add(b, prob.add(dx, d, -1.0))
        r = mask * prob.A(x) - y_fft
        history.append(float(np.linalg.norm(r)) * scale)
        if config.record_inner:
            inner_log.append(sweep)
        grad = 2.0 * prob.At(r) + lam * prob.Dt(b)
        stat = float(np.linalg.norm(grad)) / y_norm
        gap = prob.gnorm(prob.add(dx, d, -1.0)) / y_norm
        change = np.linalg.norm(x - x_prev) / max(np.linalg.norm(x), 1e-300)
        if change < config.outer_tol and stat < config.outer_tol and gap < config.outer_tol:
            converged = True
            break
    x_out = x * scale
    resid = np.linalg.norm(mask * prob.A(x) - y_fft) * scale
    obj = float(resid ** 2 + alpha * prob.tv(prob.D(x_out)))
    kkt = {"stationarity": stat, "split_gap": gap}
    result = RecoveryResult(
        x=x_out, iterations=it, residual=float(resid), objective=obj, converged=converged,
        residual_history=history, kkt=kkt, inner_objective=inner_log, config=config)
    if truth is not None:
        result.rel_error = relative_error(x_out, truth)
    return result


def measure(x, pattern):
    """Noise-free samples ``P_Omega A x`` in pattern order."""
    return pattern.restrict(ops.dft(x))


def objective_unconstrained(z, y, pattern, alpha, flavor=None):
    """``||P_Omega A z - y||_2^2 + alpha ||Dz||``."""
    r = measure(z, pattern) - np.asarray(y).reshape(-1)
    return float(np.linalg.norm(r) ** 2 + alpha * ops.tv_norm(z, flavor))
