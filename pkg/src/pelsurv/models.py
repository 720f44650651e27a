"""Parametric conditional category probabilities f_h(y, z_j, beta).

The model interface is pluggable; the built-in family is proportional
odds on the cumulative category probabilities,

    log[P(Z <= j | y) / P(Z > j | y)] = c_j + beta * y,

with strictly increasing cutpoints c_1 < ... < c_{s-1} that are either
fixed constants (default c_j = j) or estimated through a monotone
reparameterization.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParseError, PelsurvError


@dataclass(frozen=True)
class ModelParams:
    """Parameter vector beta."""

    beta: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(b) for b in self.beta)
        if not all(np.isfinite(v) for v in vals):
            raise PelsurvError(f"parameters must be finite, got {self.beta!r}")
        object.__setattr__(self, "beta", vals)

    @property
    def p(self) -> int:
        return len(self.beta)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=np.float64)


def _logistic(x: np.ndarray) -> np.ndarray:
    # branch on sign to keep exp() off large positive arguments
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class CategoryModel(ABC):
    """Conditional category probability family.

    Subclasses fix ``n_categories`` (s), ``param_dim`` (p), and
    ``per_stratum`` (whether probabilities depend on the stratum), and
    implement the batch evaluator ``prob_matrix``.  Rows of the result
    are probability vectors: nonnegative, summing to 1 within 1e-10.
    """

    n_categories: int
    param_dim: int
    per_stratum: bool = False

    @abstractmethod
    def prob_matrix(self, h: int, y: np.ndarray, beta: np.ndarray) -> np.ndarray:
        """(len(y), s) matrix of f_h(y_i, z_j, beta)."""

    def prob_row(self, h: int, y: float, beta: np.ndarray) -> np.ndarray:
        return self.prob_matrix(h, np.asarray([y], dtype=np.float64), beta)[0]


class ProportionalOddsModel(CategoryModel):
    """Proportional odds over s ordered categories, shared across strata.

    Parameters
    ----------
    n_categories : int
        Number of categories s (at least 1).
    cutpoints : {"fixed", "estimated"}
        Fixed cutpoints are constants supplied via ``values`` (default
        1, 2, ..., s-1); estimated cutpoints become part of beta through
        c_1 = beta_1, c_{j+1} = c_j + exp(beta_{j+1}), which keeps them
        strictly increasing for any real beta.  The slope multiplying y
        is the final entry of beta in both modes.
    values : sequence of float, optional
        Fixed cutpoints, strictly increasing, length s-1.
    """

    per_stratum = False

    def __init__(self, n_categories: int, cutpoints: str = "fixed", values=None):
        if n_categories < 1:
            raise DataError("n_categories must be at least 1")
        if cutpoints not in ("fixed", "estimated"):
            raise DataError(f"cutpoints must be 'fixed' or 'estimated', got {cutpoints!r}")
        self.n_categories = n_categories
        self.cutpoints_mode = cutpoints
        if cutpoints == "fixed":
            if values is None:
                values = np.arange(1, n_categories, dtype=np.float64)
            cut = np.asarray(values, dtype=np.float64)
            if cut.shape != (n_categories - 1,):
                raise DataError(
                    f"expected {n_categories - 1} cutpoints, got {cut.size}"
                )
            if cut.size and not np.all(np.diff(cut) > 0):
                raise DataError("cutpoints must be strictly increasing")
            self.fixed_cutpoints = cut
            self.param_dim = 1
        else:
            if values is not None:
                raise DataError("estimated cutpoints take no fixed values")
            self.fixed_cutpoints = None
            self.param_dim = n_categories  # s-1 cutpoint parameters plus the slope

    def resolve(self, beta: np.ndarray) -> tuple[np.ndarray, float]:
        """(cutpoints, slope) for a parameter vector."""
        beta = np.asarray(beta, dtype=np.float64)
        if beta.shape != (self.param_dim,):
            raise PelsurvError(
                f"expected {self.param_dim} parameters, got {beta.shape}"
            )
        if self.cutpoints_mode == "fixed":
            return self.fixed_cutpoints, float(beta[0])
        raw = beta[: self.n_categories - 1]
        cut = np.cumsum(np.concatenate(([raw[0]], np.exp(raw[1:]))))
        return cut, float(beta[-1])

    def prob_matrix(self, h: int, y: np.ndarray, beta: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        cut, slope = self.resolve(beta)
        if self.n_categories == 1:
            return np.ones((y.size, 1))
        cdf = _logistic(cut[None, :] + slope * y[:, None])
        probs = np.empty((y.size, self.n_categories))
        probs[:, 0] = cdf[:, 0]
        probs[:, 1:-1] = np.diff(cdf, axis=1)
        probs[:, -1] = 1.0 - cdf[:, -1]
        # adjacent sigmoids can cross by an ulp; clamp without breaking row sums
        np.maximum(probs, 0.0, out=probs)
        return probs


def cell_probability_row(model: CategoryModel, h: int, y: float, params: ModelParams) -> np.ndarray:
    """All s category probabilities at one (h, y)."""
    if not np.isfinite(y):
        raise PelsurvError(f"y must be finite, got {y!r}")
    if params.p != model.param_dim:
        raise PelsurvError(f"expected {model.param_dim} parameters, got {params.p}")
    return model.prob_row(h, float(y), params.as_array())


def cell_probability(model: CategoryModel, h: int, y: float, j: int, params: ModelParams) -> float:
    """f_h(y, z_j, beta) for one category index j in 1..s."""
    if not 1 <= j <= model.n_categories:
        raise PelsurvError(f"category index {j} outside 1..{model.n_categories}")
    return float(cell_probability_row(model, h, y, params)[j - 1])


def model_from_config(config: dict, n_categories: int = None) -> CategoryModel:
    """Build a model from its JSON configuration.

    ``n_categories`` (from the sample metadata) is required for
    estimated cutpoints and cross-checked against fixed ones.
    """
    family = config.get("family")
    if family != "proportional_odds":
        raise ParseError(f"unsupported model family {family!r}")
    slope_dim = config.get("slope_dim", 1)
    if slope_dim != 1:
        raise ParseError("only slope_dim=1 (scalar y) is supported")
    mode = config.get("cutpoints", "fixed")
    if mode == "fixed":
        values = config.get("values")
        if values is None:
            if n_categories is None:
                raise ParseError("fixed cutpoints need 'values' or a category count")
            return ProportionalOddsModel(n_categories, "fixed")
        s = len(values) + 1
        if n_categories is not None and n_categories != s:
            raise ParseError(
                f"model implies {s} categories but metadata has {n_categories}"
            )
        return ProportionalOddsModel(s, "fixed", values)
    if mode == "estimated":
        if n_categories is None:
            raise ParseError("estimated cutpoints need the category count")
        return ProportionalOddsModel(n_categories, "estimated")
    raise ParseError(f"unknown cutpoints mode {mode!r}")


def model_config(model: ProportionalOddsModel) -> dict:
    """JSON configuration for a built-in model."""
    cfg = {"family": "proportional_odds", "cutpoints": model.cutpoints_mode, "slope_dim": 1}
    if model.cutpoints_mode == "fixed":
        cfg["values"] = [float(c) for c in model.fixed_cutpoints]
    return cfg
