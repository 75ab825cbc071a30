"""Baseline, aux-inputs, aux-outputs and In-N-Out estimators for the linear model.

Every design gets a leading constant column unless ``fit_intercept=False``;
the generative model has no intercept, so fitted intercepts hover near zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .numerics import least_squares, reduced_rank_regression
from .problem import Dataset, ProblemSetting, concat

LAMBDA_GRID = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))


@dataclass(frozen=True, eq=False)
class LinearPredictor:
    """``y_hat = <theta_x, x> + <theta_z, z> + intercept``."""

    theta_x: np.ndarray
    theta_z: np.ndarray
    intercept: float = 0.0
    kind: str = "linear"

    def predict(self, X: np.ndarray, Z: np.ndarray) -> np.ndarray:
        return X @ self.theta_x + Z @ self.theta_z + self.intercept

    @property
    def uses_z(self) -> bool:
        return bool(np.any(self.theta_z != 0))

    def as_linear(self, T: int = None) -> "LinearPredictor":
        return self


@dataclass(frozen=True, eq=False)
class FeatureModel:
    """Head on top of a feature map; predicts from ``x`` alone."""

    b_hat: np.ndarray
    theta_w_hat: np.ndarray
    intercept: float = 0.0
    kind: str = "aux-outputs"

    def features(self, X: np.ndarray) -> np.ndarray:
        return X @ self.b_hat.T

    def predict(self, X: np.ndarray, Z: np.ndarray = None) -> np.ndarray:
        return self.features(X) @ self.theta_w_hat + self.intercept

    uses_z = False

    def as_linear(self, T: int) -> LinearPredictor:
        """Equivalent predictor in ambient coordinates (zero weight on a T-dim ``z``)."""
        return LinearPredictor(self.b_hat.T @ self.theta_w_hat, np.zeros(T), self.intercept, self.kind)


@dataclass(frozen=True, eq=False)
class InputOnFeatures:
    """Aux-inputs model on features: ``<gamma_w, w> + <gamma_z, z> + intercept``."""

    gamma_w: np.ndarray
    gamma_z: np.ndarray
    intercept: float = 0.0

    def predict(self, W: np.ndarray, Z: np.ndarray) -> np.ndarray:
        return W @ self.gamma_w + Z @ self.gamma_z + self.intercept


Predictor = Union[LinearPredictor, FeatureModel]


def _design(*blocks: np.ndarray, fit_intercept: bool = True) -> np.ndarray:
    n = blocks[0].shape[0]
    cols = ([np.ones((n, 1))] if fit_intercept else []) + list(blocks)
    return np.hstack(cols)


def _split(coef: np.ndarray, fit_intercept: bool) -> tuple[float, np.ndarray]:
    if fit_intercept:
        return float(coef[0]), coef[1:]
    return 0.0, coef


def _require_labels(ds: Dataset) -> None:
    if ds.Y is None:
        raise ValueError("dataset has no labels")


def fit_baseline(labeled: Dataset, fit_intercept: bool = True) -> LinearPredictor:
    """Least squares from ``x`` to ``y``, ignoring ``z``."""
    _require_labels(labeled)
    sol = least_squares(_design(labeled.X, fit_intercept=fit_intercept), labeled.Y)
    intercept, theta_x = _split(sol.coefficients, fit_intercept)
    return LinearPredictor(theta_x, np.zeros(labeled.Z.shape[1]), intercept, "baseline")


def fit_aux_inputs(labeled: Dataset, fit_intercept: bool = True) -> LinearPredictor:
    """Joint least squares from ``(x, z)`` to ``y``."""
    _require_labels(labeled)
    if labeled.Z is None:
        raise ValueError("dataset has no auxiliary inputs")
    d = labeled.X.shape[1]
    sol = least_squares(_design(labeled.X, labeled.Z, fit_intercept=fit_intercept), labeled.Y)
    intercept, coef = _split(sol.coefficients, fit_intercept)
    return LinearPredictor(coef[:d], coef[d:], intercept, "aux-inputs")


def pretrain_aux_outputs(unlabeled_pool: Union[Dataset, Sequence[Dataset]], k: int) -> np.ndarray:
    """Feature map ``b_hat`` (k x d) from rank-k regression of ``z`` on ``x`` over the pooled rows."""
    if isinstance(unlabeled_pool, Dataset):
        pool = unlabeled_pool
    else:
        if len(unlabeled_pool) == 0:
            raise ValueError("empty unlabeled pool")
        pool = concat(list(unlabeled_pool))
    _, b_hat = reduced_rank_regression(pool.X, pool.Z, k)
    return b_hat


def transfer_aux_outputs(b_hat: np.ndarray, labeled: Dataset, fit_intercept: bool = True) -> FeatureModel:
    """Least-squares head from frozen features ``W = X b_hat^T`` to ``y``."""
    _require_labels(labeled)
    W = labeled.X @ b_hat.T
    sol = least_squares(_design(W, fit_intercept=fit_intercept), labeled.Y)
    intercept, head = _split(sol.coefficients, fit_intercept)
    return FeatureModel(b_hat, head, intercept, "aux-outputs")


def fit_input_on_features(b_hat: np.ndarray, labeled: Dataset, fit_intercept: bool = True) -> InputOnFeatures:
    """Joint least squares from ``(w, z)`` to ``y`` with ``w = b_hat x``."""
    _require_labels(labeled)
    W = labeled.X @ b_hat.T
    k = W.shape[1]
    sol = least_squares(_design(W, labeled.Z, fit_intercept=fit_intercept), labeled.Y)
    intercept, coef = _split(sol.coefficients, fit_intercept)
    return InputOnFeatures(coef[:k], coef[k:], intercept)


def fit_in_n_out(
    b_hat: np.ndarray,
    labeled: Dataset,
    id_unlabeled: Dataset,
    lam: float,
    *,
    pseudolabeler: str = "features",
    normalization: str = "mean",
    fit_intercept: bool = True,
) -> FeatureModel:
    """Fine-tune a head on labeled data plus aux-inputs pseudolabels.

    The head minimizes ``(1 - lam) * L_labeled + lam * L_pseudo`` over
    features ``w = b_hat x``.  With ``normalization="mean"`` each loss is
    averaged over its own rows; ``"sum"`` uses raw sums.  ``pseudolabeler``
    picks the aux-inputs model: ``"features"`` fits on ``(w, z)``, ``"raw"``
    fits on ``(x, z)``.  The feature map itself stays frozen.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    if normalization not in ("mean", "sum"):
        raise ValueError("normalization must be 'mean' or 'sum'")
    if lam == 0.0:
        model = transfer_aux_outputs(b_hat, labeled, fit_intercept)
        return FeatureModel(model.b_hat, model.theta_w_hat, model.intercept, "in-n-out")
    _require_labels(labeled)
    if id_unlabeled is None or len(id_unlabeled) == 0:
        raise ValueError("empty unlabeled pool with lam > 0")

    W_pool = id_unlabeled.X @ b_hat.T
    if pseudolabeler == "features":
        pseudo = fit_input_on_features(b_hat, labeled, fit_intercept).predict(W_pool, id_unlabeled.Z)
    elif pseudolabeler == "raw":
        pseudo = fit_aux_inputs(labeled, fit_intercept).predict(id_unlabeled.X, id_unlabeled.Z)
    else:
        raise ValueError("pseudolabeler must be 'features' or 'raw'")

    n, m = len(labeled), len(id_unlabeled)
    if normalization == "mean":
        w_lab, w_pool = (1.0 - lam) / n, lam / m
    else:
        w_lab, w_pool = 1.0 - lam, lam
    if lam == 1.0:
        design = _design(W_pool, fit_intercept=fit_intercept)
        target = pseudo
    else:
        W_lab = labeled.X @ b_hat.T
        design = np.vstack([
            np.sqrt(w_lab) * _design(W_lab, fit_intercept=fit_intercept),
            np.sqrt(w_pool) * _design(W_pool, fit_intercept=fit_intercept),
        ])
        target = np.concatenate([np.sqrt(w_lab) * labeled.Y, np.sqrt(w_pool) * pseudo])
    intercept, head = _split(least_squares(design, target).coefficients, fit_intercept)
    return FeatureModel(b_hat, head, intercept, "in-n-out")


def in_n_out_population_head(gamma: InputOnFeatures, a_star: np.ndarray) -> np.ndarray:
    """Head obtained by self-training on infinite ID pseudolabels: ``gamma_w + A^T gamma_z``.

    ``a_star`` must express ``z`` in the coordinates of the feature map that
    produced ``gamma`` (see :func:`aux_map_in_features`).
    """
    return gamma.gamma_w + a_star.T @ gamma.gamma_z


def in_n_out_population_model(b_hat: np.ndarray, gamma: InputOnFeatures, a_star: np.ndarray) -> FeatureModel:
    # latent noise is zero mean, so the pseudolabel intercept carries over unchanged
    return FeatureModel(b_hat, in_n_out_population_head(gamma, a_star), gamma.intercept, "in-n-out")


def aux_map_in_features(setting: ProblemSetting, b_hat: np.ndarray) -> np.ndarray:
    """``A`` re-expressed for features ``b_hat x``: if ``b_hat = Q B`` this is ``A Q^{-1}``.

    Exact when ``b_hat`` shares the rowspace of ``B``; otherwise it is the
    least-squares fit of ``B`` onto the rows of ``b_hat``.
    """
    Q_inv = np.linalg.lstsq(b_hat.T, setting.B_star.T, rcond=None)[0].T
    return setting.A_star @ Q_inv


def in_n_out_oracle_head(W: np.ndarray, U: np.ndarray, Y: np.ndarray, fit_intercept: bool = True) -> np.ndarray:
    """Feature block of the joint least-squares fit of ``y`` on ``[W, U]``.

    Needs the oracle latents ``U``; equals the infinite-pool In-N-Out head.
    """
    design = _design(W, U, fit_intercept=fit_intercept)
    if design.shape[0] < design.shape[1]:
        raise np.linalg.LinAlgError("[W, U] has fewer rows than columns")
    sol = least_squares(design, Y)
    if sol.effective_rank < design.shape[1]:
        raise np.linalg.LinAlgError("[W, U] is rank deficient")
    _, coef = _split(sol.coefficients, fit_intercept)
    return coef[: W.shape[1]]


def select_lambda(
    b_hat: np.ndarray,
    labeled: Dataset,
    id_unlabeled: Dataset,
    validation: Dataset,
    grid: Sequence[float] = LAMBDA_GRID,
    **kwargs,
) -> tuple[float, FeatureModel]:
    """Pick the mixing weight with the lowest mean squared error on ``validation``."""
    _require_labels(validation)
    best = None
    for lam in grid:
        model = fit_in_n_out(b_hat, labeled, id_unlabeled, float(lam), **kwargs)
        err = float(np.mean((model.predict(validation.X) - validation.Y) ** 2))
        if best is None or err < best[0]:
            best = (err, float(lam), model)
    return best[1], best[2]


def model_to_dict(model: Predictor) -> dict:
    if isinstance(model, FeatureModel):
        return {
            "model": "feature",
            "kind": model.kind,
            "b_hat": model.b_hat.tolist(),
            "theta_w_hat": model.theta_w_hat.tolist(),
            "intercept": model.intercept,
        }
    return {
        "model": "linear",
        "kind": model.kind,
        "theta_x": model.theta_x.tolist(),
        "theta_z": model.theta_z.tolist(),
        "intercept": model.intercept,
    }


def model_from_dict(doc: dict) -> Predictor:
    if doc["model"] == "feature":
        return FeatureModel(np.asarray(doc["b_hat"], dtype=float), np.asarray(doc["theta_w_hat"], dtype=float),
                            float(doc["intercept"]), doc["kind"])
    if doc["model"] == "linear":
        return LinearPredictor(np.asarray(doc["theta_x"], dtype=float), np.asarray(doc["theta_z"], dtype=float),
                               float(doc["intercept"]), doc["kind"])
    raise ValueError(f"unknown model tag {doc['model']!r}")
