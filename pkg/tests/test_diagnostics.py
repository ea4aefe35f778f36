import numpy as np
import pytest

from pdpfi.diagnostics import (conditional_pfi_by_losses, conditional_pfi_by_moments, fresh_models,
                               pd_mse_decomposition, pfi_bias_decomposition, pfi_mse_decomposition)
from pdpfi.dgp import linear_dgp, nonlinear_dgp
from pdpfi.errors import ValidationError
from pdpfi.learners import FunctionModel, make_learner
from pdpfi.simulation import CoverageConfig


def test_pd_mse_split():
    d = pd_mse_decomposition(linear_dgp(), make_learner("lm"), CoverageConfig(reference_runs=150))
    R = d.runs
    # with the unbiased variance the split is exact up to the (R-1)/R factor
    np.testing.assert_allclose(d.mse, d.bias_sq + d.variance * (R - 1) / R, rtol=1e-10, atol=1e-15)
    assert np.all(np.abs(d.mse - d.bias_sq - d.variance) <= 3 * d.mse_se)
    np.testing.assert_allclose(d.truth[0], np.array(d.grid) - 0.5)


def test_pfi_bias_terms_for_exact_model_vanish():
    spec = linear_dgp()
    r = pfi_bias_decomposition(spec, [FunctionModel(spec.f)], 0, mc_n=5000)
    assert r.model_bias_sq == 0.0 and r.variance_inflation == 0.0
    assert r.permutation_loss_bias == 0.0
    assert r.direct == 0.0


def test_pfi_bias_constant_shift():
    # fhat = f + 1 has the same PFI: model bias 1 is cancelled by the permutation loss bias
    spec = linear_dgp()
    r = pfi_bias_decomposition(spec, [FunctionModel(lambda Z: spec.f(Z) + 1.0)], 1, mc_n=5000)
    assert r.model_bias_sq == pytest.approx(1.0)
    assert abs(r.total) <= 3 * r.total_se
    assert abs(r.direct) <= 3 * r.direct_se


def test_pfi_bias_terms_sum_to_direct_gap():
    spec = nonlinear_dgp()
    models, _ = fresh_models(spec, make_learner("lm"), 100, 25, seed=4)
    for j in range(spec.p):
        r = pfi_bias_decomposition(spec, models, j, mc_n=20_000, seed=j)
        assert abs(r.discrepancy) <= 3 * r.discrepancy_se
    with pytest.raises(ValidationError):
        pfi_bias_decomposition(spec, [], 0)


def test_pfi_mse():
    d = pfi_mse_decomposition(linear_dgp(), make_learner("lm"), CoverageConfig(reference_runs=100), 0)
    assert d.truth == pytest.approx(1 / 6)
    assert d.mse == pytest.approx(d.bias_sq + d.variance * 99 / 100, rel=1e-10)


def test_conditional_gap_routines_agree():
    rng = np.random.default_rng(0)
    xs, xc = np.linspace(0, 1, 6), np.linspace(-1, 1, 5)
    joint = rng.random((6, 5)) ** 3
    joint /= joint.sum()
    f = lambda a, c: np.sin(2 * a) + a * c
    fh = lambda a, c: 0.8 * a + 0.3 * c * c
    a = conditional_pfi_by_losses(f, fh, xs, xc, joint, noise_sigma=0.7)
    b = conditional_pfi_by_moments(f, fh, xs, xc, joint)
    assert a == pytest.approx(b, rel=1e-10)
    # no noise dependence
    assert conditional_pfi_by_losses(f, fh, xs, xc, joint, 3.0) == pytest.approx(a, rel=1e-10)
    with pytest.raises(ValidationError):
        conditional_pfi_by_moments(f, fh, xs, xc, joint * 2)
