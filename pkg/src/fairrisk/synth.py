"""Two-group synthetic populations with a known, group-blind outcome model.

Baseline covariates come from a Gaussian copula with right-skewed gamma
marginals (ages and prior-record counts that peak low and tail off to the
right). Comparison covariates are an independent draw from the same law plus
a location shift. The counterfactual outcome ``y_star`` follows one logistic
model for everybody; the observed outcome equals it for the baseline group and
for the comparison group adds ``observation_bias`` to the log-odds, using the
same uniform draw so that ``y >= y_star`` and zero bias gives ``y == y_star``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import expit

from .tabular import Dataset, Group


@dataclass(frozen=True)
class Marginal:
    name: str
    offset: float
    shape: float
    scale: float


DEFAULT_MARGINALS = (
    Marginal("age", 18.0, 2.0, 7.0),
    Marginal("prior_arrests", 0.0, 1.2, 5.0),
    Marginal("violent_priors", 0.0, 0.8, 2.0),
    Marginal("age_first_charge", 16.0, 1.5, 4.0),
)

# latent normal correlation between the four default covariates
DEFAULT_CORRELATION = (
    (1.00, 0.45, 0.30, 0.55),
    (0.45, 1.00, 0.60, -0.35),
    (0.30, 0.60, 1.00, -0.25),
    (0.55, -0.35, -0.25, 1.00),
)

DEFAULT_SHIFT = (-2.5, 2.5, 0.6, -2.0)

# log-odds intercept followed by one coefficient per covariate
DEFAULT_COEFFICIENTS = (3.56, -0.22, 0.02, 0.25, -0.03)


@dataclass(frozen=True)
class SynthConfig:
    n_per_group: int = 4000
    d: int = 4
    shift: tuple[float, ...] = DEFAULT_SHIFT
    outcome_coefficients: tuple[float, ...] = DEFAULT_COEFFICIENTS
    observation_bias: float = 0.2
    seed: int = 0
    marginals: tuple[Marginal, ...] | None = None
    correlation: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if self.n_per_group < 1:
            raise ValueError("n_per_group must be at least 1")
        if len(self.shift) != self.d:
            raise ValueError(f"shift needs {self.d} entries")
        if len(self.outcome_coefficients) != self.d + 1:
            raise ValueError(f"outcome_coefficients needs intercept + {self.d} entries")
        if self.observation_bias < 0:
            raise ValueError("observation_bias must be nonnegative")
        if self.marginals is not None and len(self.marginals) != self.d:
            raise ValueError("one marginal per covariate")

    def resolved_marginals(self) -> tuple[Marginal, ...]:
        if self.marginals is not None:
            return self.marginals
        if self.d == len(DEFAULT_MARGINALS):
            return DEFAULT_MARGINALS
        return tuple(Marginal(f"x{k}", 0.0, 2.0, 1.0) for k in range(self.d))

    def resolved_correlation(self) -> np.ndarray:
        if self.correlation is not None:
            return np.asarray(self.correlation, dtype=np.float64)
        if self.d == len(DEFAULT_MARGINALS) and self.marginals is None:
            return np.asarray(DEFAULT_CORRELATION)
        return 0.7 * np.eye(self.d) + 0.3

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.resolved_marginals())


def _baseline_draw(cfg: SynthConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    chol = np.linalg.cholesky(cfg.resolved_correlation())
    z = rng.standard_normal((n, cfg.d)) @ chol.T
    u = stats.norm.cdf(z)
    cols = [m.offset + stats.gamma.ppf(u[:, k], m.shape, scale=m.scale)
            for k, m in enumerate(cfg.resolved_marginals())]
    return np.column_stack(cols)


def outcome_probability(cfg: SynthConfig, X: np.ndarray, bias: float = 0.0) -> np.ndarray:
    """Group-blind outcome probability, optionally with extra log-odds."""
    coef = np.asarray(cfg.outcome_coefficients, dtype=np.float64)
    return expit(coef[0] + X @ coef[1:] + bias)


def generate(cfg: SynthConfig) -> Dataset:
    """Draw ``n_per_group`` baseline rows followed by as many comparison rows."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_per_group
    xb = _baseline_draw(cfg, rng, n)
    xc = _baseline_draw(cfg, rng, n) + np.asarray(cfg.shift, dtype=np.float64)
    X = np.vstack([xb, xc])
    group = np.repeat([int(Group.BASELINE), int(Group.COMPARISON)], n)
    u = rng.random(2 * n)
    y_star = (u < outcome_probability(cfg, X)).astype(np.int8)
    bias = np.where(group == int(Group.COMPARISON), cfg.observation_bias, 0.0)
    y = (u < outcome_probability(cfg, X, bias)).astype(np.int8)
    return Dataset(X, group, y, cfg.feature_names, cfg.seed, y_star)
