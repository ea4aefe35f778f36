"""Bias/variance diagnostics of model PD and PFI against the true function."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _rng
from .data import view
from .dgp import dgp_pd, dgp_pfi, sample_dgp
from .errors import ValidationError
from .pd import pd_matrix
from .pfi import ReplacementSampler, model_pfi
from .refit import fit_seed
from .resampling import n_train_fresh


def fresh_models(spec, learner, n: int, runs: int, seed: int = 0, fraction: float = 0.632):
    """Fit ``runs`` models, each on ``round(fraction * n)`` freshly drawn rows.

    Returns ``(models, test_sets)`` where each test set is the ``(X, y)``
    remainder of that run's draw.
    """
    n1 = n_train_fresh(n, fraction)
    models, tests = [], []
    for r in range(int(runs)):
        s = _rng.derive(seed, _rng.REFERENCE, r)
        ds = sample_dgp(spec, n, s)
        models.append(learner.fit(view(ds, np.arange(n1)), fit_seed(s, 0)))
        tests.append((ds.features[n1:], ds.target[n1:]))
    return models, tests


@dataclass
class PDDecomposition:
    """Per feature and grid point (arrays of shape ``(p, G)``)."""

    grid: np.ndarray
    truth: np.ndarray
    bias_sq: np.ndarray
    variance: np.ndarray
    mse: np.ndarray
    mse_se: np.ndarray
    runs: int


def pd_mse_decomposition(spec, learner, config) -> PDDecomposition:
    """Split the MSE of model-PD around the true PD into squared bias and
    variance across ``config.reference_runs`` fresh-data refits.

    ``mse`` averages squared errors; ``bias_sq`` is the squared error of the
    mean PD and ``variance`` the unbiased spread of PD across refits.
    """
    if config.reference_runs < 100:
        raise ValidationError("need at least 100 fresh refits")
    grid = np.asarray(config.grid, dtype=np.float64)
    models, tests = fresh_models(spec, learner, config.n, config.reference_runs, config.seed, config.fraction)
    R = len(models)
    est = np.empty((R, spec.p, grid.size))
    for r, (mod, (X, _)) in enumerate(zip(models, tests)):
        for j in range(spec.p):
            est[r, j] = pd_matrix(mod, X, j, grid).mean(axis=1)
    truth = np.stack([dgp_pd(spec, j, grid).value for j in range(spec.p)])
    sq = (est - truth) ** 2
    mean = est.mean(axis=0)
    return PDDecomposition(grid, truth, (mean - truth) ** 2, est.var(axis=0, ddof=1), sq.mean(axis=0),
                           sq.std(axis=0, ddof=1) / math.sqrt(R), R)


@dataclass
class PFIDecomposition:
    permutation_loss_bias: float
    model_bias_sq: float
    variance_inflation: float
    total: float          # permutation_loss_bias - model_bias_sq + variance_inflation
    total_se: float
    direct: float         # PFI of the models minus PFI of f, estimated from losses on Y
    direct_se: float

    @property
    def discrepancy(self):
        return self.total - self.direct

    @property
    def discrepancy_se(self):
        return math.hypot(self.total_se, self.direct_se)


def pfi_bias_decomposition(spec, f_hat_family, feature: int, mc_n: int = 20_000, seed: int = 0) -> PFIDecomposition:
    """Monte Carlo estimates of the three L2 PFI bias terms for a model family.

    ``f_hat_family`` is a list of fitted models (or anything with
    ``predict``) standing in for the distribution of models; expectations
    over models are averages over the list. The combination
    ``permutation_loss_bias - model_bias_sq + variance_inflation`` is
    compared against a direct estimate of ``E_F[PFI_fhat] - PFI_f`` computed
    from noisy targets on an independent sample.
    """
    j = spec.check_feature(feature)
    models = list(f_hat_family)
    if not models:
        raise ValidationError("need at least one model")
    mc_n = int(mc_n)

    # routine 1: decomposition terms from f, on one sample
    rng = _rng.stream(seed, _rng.MC, 3, j)
    X = rng.random((mc_n, spec.p))
    Xt = X.copy()
    Xt[:, j] = rng.random(mc_n)
    f, ft = spec.f(X), spec.f(Xt)
    P = np.stack([np.asarray(mod.predict(X), dtype=np.float64) for mod in models])
    Pt = np.stack([np.asarray(mod.predict(Xt), dtype=np.float64) for mod in models])
    Ef, Eft = P.mean(axis=0), Pt.mean(axis=0)
    plb = (f - Eft) ** 2 - (f - ft) ** 2
    mb = (f - Ef) ** 2
    vi = Pt.var(axis=0) - P.var(axis=0)
    per_point = plb - mb + vi

    # routine 2: direct loss differences on Y, on an independent sample
    rng = _rng.stream(seed, _rng.MC, 4, j)
    X2 = rng.random((mc_n, spec.p))
    X2t = X2.copy()
    X2t[:, j] = rng.random(mc_n)
    y = spec.f(X2) + (rng.normal(0.0, spec.noise_sigma, mc_n) if spec.noise_sigma > 0 else 0.0)
    model_gap = np.zeros(mc_n)
    for mod in models:
        model_gap += (y - mod.predict(X2t)) ** 2 - (y - mod.predict(X2)) ** 2
    model_gap /= len(models)
    direct = model_gap - ((y - spec.f(X2t)) ** 2 - (y - spec.f(X2)) ** 2)

    se = lambda a: float(a.std(ddof=1) / math.sqrt(a.size))
    return PFIDecomposition(float(plb.mean()), float(mb.mean()), float(vi.mean()), float(per_point.mean()),
                            se(per_point), float(direct.mean()), se(direct))


@dataclass
class PFIMSEDecomposition:
    truth: float
    bias_sq: float
    variance: float
    mse: float
    mse_se: float


def pfi_mse_decomposition(spec, learner, config, feature: int) -> PFIMSEDecomposition:
    """Scalar analogue of :func:`pd_mse_decomposition` for model-PFI."""
    models, tests = fresh_models(spec, learner, config.n, config.reference_runs, config.seed, config.fraction)
    vals = np.array([model_pfi(mod, t, feature, ReplacementSampler(l=config.pfi_l, seed=config.seed),
                               stream=(r,)).mean for r, (mod, t) in enumerate(zip(models, tests))])
    truth = float(dgp_pfi(spec, feature).value)
    sq = (vals - truth) ** 2
    return PFIMSEDecomposition(truth, float((vals.mean() - truth) ** 2), float(vals.var(ddof=1)),
                               float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(sq.size)))


# ---------------------------------------------------------------- conditional PFI gap


def _check_joint(joint):
    joint = np.asarray(joint, dtype=np.float64)
    if joint.ndim != 2 or np.any(joint < 0) or not math.isclose(joint.sum(), 1.0, rel_tol=1e-12):
        raise ValidationError("joint must be a 2-D probability table summing to 1")
    return joint


def conditional_pfi_by_losses(f, f_hat, xs, xc, joint, noise_sigma=1.0):
    """``cPFI_f - cPFI_fhat`` from expected squared losses on a discrete joint.

    ``joint[a, b] = P(X_S = xs[a], X_C = xc[b])``; the replacement value is
    drawn from ``P(X_S | X_C)`` independently of ``X_S`` and ``Y``, and
    ``Y = f(X) + eps`` with ``Var(eps) = noise_sigma**2``.
    """
    joint = _check_joint(joint)
    pc = joint.sum(axis=0)
    s2 = noise_sigma ** 2

    def cpfi(g):
        permuted = original = 0.0
        for b in range(len(xc)):
            if pc[b] == 0:
                continue
            cond = joint[:, b] / pc[b]
            for a in range(len(xs)):
                if joint[a, b] == 0:
                    continue
                y_mean = f(xs[a], xc[b])
                original += joint[a, b] * ((y_mean - g(xs[a], xc[b])) ** 2 + s2)
                for a2 in range(len(xs)):
                    permuted += joint[a, b] * cond[a2] * ((y_mean - g(xs[a2], xc[b])) ** 2 + s2)
        return permuted - original

    return cpfi(f) - cpfi(f_hat)


def conditional_pfi_by_moments(f, f_hat, xs, xc, joint):
    """``2 E_{X_C}[Var_{X_S|X_C}(f) - Cov_{X_S|X_C}(f, fhat)]`` on a discrete joint."""
    joint = _check_joint(joint)
    xs = np.asarray(xs, dtype=np.float64)
    pc = joint.sum(axis=0)
    total = 0.0
    for b, c in enumerate(xc):
        if pc[b] == 0:
            continue
        w = joint[:, b] / pc[b]
        F = np.array([f(a, c) for a in xs])
        H = np.array([f_hat(a, c) for a in xs])
        ef, eh = w @ F, w @ H
        total += pc[b] * (w @ (F - ef) ** 2 - w @ ((F - ef) * (H - eh)))
    return 2.0 * total
