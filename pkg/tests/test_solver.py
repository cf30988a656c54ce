import numpy as np
import pytest
import cvxpy as cp

from tvcs import ops, sampling as sm, solver as sv, structure as st


def _dense_A(n):
    """Columns ``A e_j`` in canonical order, built one basis vector at a time."""
    return np.stack([ops.dft(e) for e in np.eye(n)], axis=1)


def _cvx_minimizer(y, pat, alpha=None):
    """Dense convex oracle for the 1D problems, plus a uniqueness probe.

    The probe minimizes and maximizes a random linear functional over the
    (slightly relaxed) optimal set; a small spread means the minimizer is
    unique and pointwise comparison is meaningful.
    """
    n = pat.n
    Ap = _dense_A(n)[pat.positions]
    z = cp.Variable(n, complex=True)
    tv = cp.sum(cp.abs(z[1:] - z[:-1]))
    if alpha is None:
        cons = [Ap @ z == y]
        obj = tv
    else:
        cons = []
        obj = cp.sum_squares(Ap @ z - y) + alpha * tv
    opts = dict(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    cp.Problem(cp.Minimize(obj), cons).solve(**opts)
    best = z.value
    opt = float(obj.value)
    # every minimizer shares the sampled values (the fit is strictly convex in
    # them) and the TV value, so the optimal set is a TV level set on an
    # affine slice in both modes
    slice_ = [Ap @ z == (y if alpha is None else Ap @ best)]
    level = float(np.sum(np.abs(np.diff(best))))
    c = np.random.default_rng(0).normal(size=n)
    spread = []
    for sign in (1, -1):
        probe = cp.Problem(cp.Minimize(sign * (c @ cp.real(z))), slice_ + [tv <= level + 1e-7 * max(level, 1)])
        probe.solve(solver=cp.CLARABEL)
        spread.append(float(c @ np.real(z.value)))
    unique = abs(spread[0] - spread[1]) < 1e-5 * np.linalg.norm(best) * np.linalg.norm(c)
    return best, opt, unique


def _fixture(seed, widths):
    r = np.random.default_rng(seed)
    js = st.JumpSet.from_widths(widths)
    x = js.signal(r.normal(size=js.n_blocks))
    pat = sm.uniform_plus_dc(16, 7, seed=seed)
    return x, pat, sv.measure(x, pat)


CASES = [(0, (4, 5, 7)), (1, (3, 6, 4, 3)), (2, (4, 5, 7)), (3, (3, 6, 4, 3)),
         (4, (4, 5, 7)), (5, (3, 6, 4, 3))]


@pytest.mark.parametrize("seed,widths", CASES)
def test_constrained_matches_convex_oracle(seed, widths):
    x, pat, y = _fixture(seed, widths)
    ref, opt, unique = _cvx_minimizer(y, pat)
    res = sv.recover(y, pat, sv.SolverConfig(max_outer=20000))
    assert res.converged
    assert res.objective == pytest.approx(opt, rel=1e-6)
    if unique:
        assert sv.relative_error(res.x, ref) < 1e-4


@pytest.mark.parametrize("seed,widths", CASES)
def test_unconstrained_matches_convex_oracle(seed, widths):
    x, pat, y = _fixture(seed, widths)
    alpha = 0.05
    ref, opt, unique = _cvx_minimizer(y, pat, alpha)
    cfg = sv.SolverConfig(mode="unconstrained", alpha=alpha, max_outer=20000, outer_tol=1e-10)
    res = sv.recover(y, pat, cfg)
    assert res.objective == pytest.approx(opt, rel=1e-6)
    if unique:
        assert sv.relative_error(res.x, ref) < 1e-4


@pytest.mark.parametrize("alpha", [None, 0.05])
def test_oracle_cases_include_unique_minimizers(alpha):
    # guard against the pointwise checks above being vacuous
    flags = []
    for s, w in CASES:
        _, pat, y = _fixture(s, w)
        flags.append(_cvx_minimizer(y, pat, alpha)[2])
    assert sum(flags) >= 3


@pytest.mark.parametrize("dim", [1, 2])
def test_full_sampling_exact(dim, rng):
    n = 32 if dim == 1 else 16
    shape = (n,) if dim == 1 else (n, n)
    x = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    pat = sm.SamplingPattern.from_mask(np.ones(shape, dtype=bool))
    res = sv.recover(sv.measure(x, pat), pat, truth=x)
    assert res.rel_error < 1e-6 and res.converged


def test_residual_meets_delta(rng):
    n = 64
    js = st.JumpSet.from_widths([10, 20, 14, 20])
    x = js.signal([0.0, 1.0, -0.5, 0.3])
    pat = sm.lowpass_plus_uniform(n, 12, 0.2, seed=1)
    noise = 0.01 * (rng.normal(size=len(pat)) + 1j * rng.normal(size=len(pat)))
    y = sv.measure(x, pat) + noise
    delta = float(np.linalg.norm(noise))
    res = sv.recover(y, pat, sv.SolverConfig(delta=delta))
    assert res.converged
    assert res.residual <= delta * (1 + 1e-6)


def test_inner_objective_monotone():
    n = 64
    js = st.JumpSet.from_widths([10, 20, 14, 20])
    x = js.signal([0.0, 1.0, -0.5, 0.3])
    pat = sm.lowpass_plus_uniform(n, 8, 0.15, seed=2)
    y = sv.measure(x, pat)
    for mode in ("constrained", "unconstrained"):
        cfg = sv.SolverConfig(mode=mode, alpha=0.1, n_inner=4, record_inner=True, max_outer=40)
        res = sv.recover(y, pat, cfg)
        for sweep in res.inner_objective:
            steps = np.diff(sweep)
            assert np.all(steps <= 1e-10 * max(1.0, abs(sweep[0])))


def test_inner_objective_monotone_2d(rng):
    x = np.zeros((16, 16))
    x[3:9, 4:13] = 1.0
    pat = sm.uniform_plus_dc(16, 60, seed=0, dim=2)
    cfg = sv.SolverConfig(n_inner=3, record_inner=True, max_outer=30)
    res = sv.recover(sv.measure(x, pat), pat, cfg)
    for sweep in res.inner_objective:
        assert np.all(np.diff(sweep) <= 1e-10 * max(1.0, abs(sweep[0])))


def test_blocky_recovered_exactly():
    from tvcs import assets
    pat = sm.lowpass_plus_uniform(256, 32, 0.10, seed=0)
    blocky = assets.blocky_1d(256, seed=0)
    res = sv.recover(sv.measure(blocky, pat), pat, truth=blocky)
    assert res.rel_error < 1e-3


def test_idempotent():
    x, pat, y = _fixture(0, (4, 5, 7))
    cfg = sv.SolverConfig(max_outer=20000)
    first = sv.recover(y, pat, cfg)
    again = sv.recover(sv.measure(first.x, pat), pat, cfg)
    assert sv.relative_error(again.x, first.x) < 1e-6


def test_real_roundtrip():
    n = 64
    js = st.JumpSet.from_widths([10, 20, 14, 20])
    x = js.signal([0.0, 1.0, -0.5, 0.3])
    base = sm.uniform_plus_dc(n, 10, seed=4)
    mirror = sm.SamplingPattern(n, 1, ops.canonical_frequency(-base.freqs, n))
    pat = base.union(mirror)
    res = sv.recover(sv.measure(x, pat), pat)
    assert np.max(np.abs(res.x.imag)) < 1e-10


def test_large_alpha_gives_constant():
    n = 32
    x = np.full(n, 2.5)
    pat = sm.uniform_plus_dc(n, 6, seed=3)
    y = sv.measure(x, pat)
    res = sv.recover_unconstrained(y, pat, 1e6)
    assert np.ptp(np.abs(res.x)) < 1e-6
    dc = pat.restrict(ops.dft(res.x))[np.flatnonzero(pat.freqs == 0)[0]]
    assert dc == pytest.approx(y[np.flatnonzero(pat.freqs == 0)[0]], abs=1e-6)


def test_unconstrained_b_optimal():
    n = 64
    js = st.JumpSet.from_widths([10, 20, 14, 20])
    x = js.signal([0.0, 1.0, -0.5, 0.3])
    pat = sm.lowpass_plus_uniform(n, 8, 0.2, seed=5)
    noise = 0.01 * np.random.default_rng(0).normal(size=len(pat))
    y = sv.measure(x, pat) + noise
    res = sv.recover_unconstrained(y, pat, 0.05)
    assert res.converged
    b = res.config.outer_tol * max(1.0, res.objective)
    assert res.objective <= sv.objective_unconstrained(x, y, pat, 0.05) + b


# ------------------------------------------------------------------ shrink


def test_shrink_zero_and_small():
    g = ops.GradientField(np.zeros((4, 4)), np.zeros((4, 4)))
    out = sv.shrink(g, 0.5)
    assert np.all(out[0] == 0) and np.all(out[1] == 0)
    small = np.array([0.1, -0.2, 0.3j])
    assert np.all(sv.shrink(small, 0.5) == 0)
    with pytest.raises(ValueError):
        sv.shrink(small, -1.0)


def test_shrink_iso_grid_oracle(rng):
    theta = 0.7
    g1, g2 = rng.normal(size=(1, 5)), rng.normal(size=(1, 5))
    out = sv.shrink(ops.GradientField(g1, g2), theta)
    axis = np.linspace(-3, 3, 1201)
    u1, u2 = np.meshgrid(axis, axis, indexing="ij")
    for p in range(5):
        cost = theta * np.hypot(u1, u2) + 0.5 * ((u1 - g1[0, p]) ** 2 + (u2 - g2[0, p]) ** 2)
        i, j = np.unravel_index(np.argmin(cost), cost.shape)
        assert abs(out[0][0, p] - axis[i]) <= 0.01
        assert abs(out[1][0, p] - axis[j]) <= 0.01


def test_shrink_soft_grid_oracle(rng):
    theta = 0.4
    g = rng.normal(size=5)
    out = sv.shrink(g, theta)
    axis = np.linspace(-4, 4, 8001)
    for p in range(5):
        cost = theta * np.abs(axis) + 0.5 * (axis - g[p]) ** 2
        assert abs(out[p] - axis[np.argmin(cost)]) <= 1e-3


def test_shrink_aniso():
    g = ops.GradientField(np.array([[1.0, -0.2]]), np.array([[-2.0, 0.5]]))
    out = sv.shrink(g, 0.5, flavor="aniso_2d")
    assert np.allclose(out[0], [[0.5, 0.0]]) and np.allclose(out[1], [[-1.5, 0.0]])


# ----------------------------------------------------------------- helpers


def test_relative_error():
    x = np.array([1.0, -2.0, 3.0])
    assert sv.relative_error(x, x) == 0.0
    assert sv.relative_error(np.zeros(3), x) == 1.0
    assert sv.relative_error(1.1 * x, x) == pytest.approx(0.1, abs=1e-12)
    with pytest.raises(ValueError):
        sv.relative_error(x, np.zeros(3))
    with pytest.raises(ops.DimensionError):
        sv.relative_error(x, x[:2])


def test_alpha_from_delta():
    assert sv.alpha_from_delta(0.25, 0.1, 0.04) == pytest.approx(0.5 * 0.3)


@pytest.mark.parametrize("kwargs", [
    {"mode": "other"}, {"delta": -1.0}, {"alpha": 0.0}, {"tv_flavor": "l0"},
    {"lam": 0.0}, {"cg_tol": -1.0}, {"n_inner": 0}, {"max_outer": 0}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        sv.SolverConfig(**kwargs)


def test_input_validation():
    pat = sm.uniform_plus_dc(16, 4)
    with pytest.raises(ValueError):
        sv.recover(np.zeros(0), sm.SamplingPattern(16, 1, np.zeros(0, dtype=int)))
    with pytest.raises(ops.DimensionError):
        sv.recover(np.zeros(3), pat)
    with pytest.raises(ValueError):
        sv.recover(np.full(len(pat), np.nan), pat)
    with pytest.raises(ops.DimensionError):
        sv.recover(np.zeros(len(pat)), pat, n=32)


def test_nonconvergence_flagged():
    x, pat, y = _fixture(3, (3, 6, 4, 3))
    res = sv.recover(y, pat, sv.SolverConfig(max_outer=3))
    assert not res.converged and res.iterations == 3
