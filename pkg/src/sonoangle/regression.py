"""Closed-form ridge readout and evaluation metrics.

The readout is a bias-free linear map from standardized feature channels
``S`` (``F x T``) to the standardized angle ``theta`` (``T``)::

    theta_hat = w @ S
    w = theta S^T (S S^T + lam I)^-1

which minimizes ``sum (theta - theta_hat)^2 + lam * sum w^2``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .errors import NumericalError, ValidationError
from .signal import ZScoreParams, inverse_zscore

log = logging.getLogger(__name__)

MODEL_SCHEMA_VERSION = 1


def _cholesky_solve(A, B, lam):
    """Solve ``A X = B`` for SPD ``A``; ``lam`` is the ridge already in ``A``."""
    try:
        c, low = linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError:
        c = None
    if c is not None:
        # reciprocal condition estimate from the factor; below n*eps A is singular
        rcond, _ = lapack.dpocon(c, np.linalg.norm(A, 1), uplo="L")
        if rcond > A.shape[0] * np.finfo(float).eps:
            return linalg.cho_solve((c, low), B, check_finite=False)
    if lam == 0:
        raise NumericalError(
            "normal equations are singular with lambda = 0; use a positive lambda"
        )
    jitter = 1e-10 * np.trace(A)
    log.warning("ridge system not positive definite at lambda=%g; adding jitter %g", lam, jitter)
    try:
        c = linalg.cho_factor(A + jitter * np.eye(A.shape[0]), lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"ridge system could not be factorized: {exc}") from exc
    return linalg.cho_solve(c, B, check_finite=False)


def ridge_fit_primal(S, theta, lam):
    """``(S S^T + lam I) w^T = S theta^T``, an F x F solve."""
    A = S @ S.T
    A[np.diag_indices_from(A)] += lam
    return _cholesky_solve(A, S @ theta, lam)


def ridge_fit_dual(S, theta, lam):
    """``w = theta (S^T S + lam I)^-1 S^T``, a T x T solve."""
    K = S.T @ S
    K[np.diag_indices_from(K)] += lam
    alpha = _cholesky_solve(K, theta, lam)
    return S @ alpha


def ridge_fit(S, theta, lam, form="auto"):
    """Ridge weights for feature matrix ``S`` (F x T) and target ``theta`` (T).

    ``form`` is ``"primal"``, ``"dual"`` or ``"auto"`` (dual when T < F).
    """
    S = np.asarray(S, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if S.ndim != 2:
        raise ValidationError(f"S must be 2-D (features x time), got shape {S.shape}")
    F, T = S.shape
    if theta.shape != (T,):
        raise ValidationError(f"theta has shape {theta.shape}, expected ({T},)")
    if T < 2 or F < 1:
        raise ValidationError(f"need T >= 2 and F >= 1, got T={T}, F={F}")
    if not (lam >= 0 and math.isfinite(lam)):
        raise ValidationError(f"lambda must be finite and >= 0, got {lam}")
    if form == "auto":
        form = "dual" if T < F else "primal"
    if form == "primal":
        return ridge_fit_primal(S, theta, lam)
    if form == "dual":
        return ridge_fit_dual(S, theta, lam)
    raise ValidationError(f"unknown form {form!r}")


def normal_equation_residual(S, theta, w, lam):
    """``max|w (S S^T + lam I) - theta S^T| / max|theta S^T|``."""
    rhs = S @ theta
    lhs = (S @ S.T) @ w + lam * w
    return float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)))


def ridge_predict(weights, S):
    w = np.asarray(weights, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if w.ndim != 1 or S.ndim != 2 or S.shape[0] != w.size:
        raise ValidationError(f"weights {w.shape} do not match features {S.shape}")
    return w @ S


def ridge_loss(theta, theta_hat, weights, lam, half_penalty=True):
    """Squared residuals plus the L2 penalty.

    With ``half_penalty`` (default) the penalty is ``lam/2 * sum w^2``; pass
    ``half_penalty=False`` for the objective that ``ridge_fit`` minimizes.
    """
    theta = np.asarray(theta, dtype=np.float64)
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    if theta.shape != theta_hat.shape:
        raise ValidationError(f"length mismatch: {theta.shape} vs {theta_hat.shape}")
    w = np.asarray(weights, dtype=np.float64)
    coef = 0.5 if half_penalty else 1.0
    return float(np.sum((theta - theta_hat) ** 2) + coef * lam * np.sum(w * w))


def rmse(y, y_hat):
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValidationError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    if y.size < 1:
        raise ValidationError("rmse needs at least one sample")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def r_squared(y, y_hat):
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValidationError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    if y.size < 2:
        raise ValidationError("r_squared needs at least two samples")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 0:
        raise ValidationError("r_squared undefined: measured values have zero variance")
    return 1.0 - float(np.sum((y - y_hat) ** 2)) / ss_tot


def split_contiguous(T, train_fraction):
    """First ``floor(T * train_fraction)`` samples train, the rest validate."""
    if not 0 < train_fraction < 1:
        raise ValidationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if T < 5:
        raise ValidationError(f"need at least 5 samples to split, got {T}")
    n_train = int(math.floor(T * train_fraction))
    if n_train < 1 or n_train >= T:
        raise ValidationError(f"split of {T} samples at {train_fraction} leaves one side empty")
    return np.arange(n_train), np.arange(n_train, T)


@dataclass(frozen=True)
class EvalReport:
    rmse_deg: float
    r2: float
    n_train: int
    n_val: int
    split_boundary: int


@dataclass
class RidgeModel:
    weights: np.ndarray
    lam: float
    feature_zparams: ZScoreParams
    angle_zparams: ZScoreParams
    channel_ids: list
    config_fingerprint: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 1 or self.weights.size != len(self.channel_ids):
            raise ValidationError("weights must have one entry per channel")
        if self.lam < 0:
            raise ValidationError("lambda must be >= 0")

    def predict_standardized(self, S):
        return ridge_predict(self.weights, S)

    def predict_deg(self, S):
        return inverse_zscore(self.predict_standardized(S), self.angle_zparams)

    def to_json(self):
        """JSON text; floats use 17 significant digits so reloads are bit-exact."""
        doc = {
            "schema_version": MODEL_SCHEMA_VERSION,
            "lambda": self.lam,
            "config_fingerprint": self.config_fingerprint,
            "channel_ids": [[pid, axis] for pid, axis in self.channel_ids],
            "feature_zscore": self.feature_zparams.to_dict(),
            "angle_zscore": self.angle_zparams.to_dict(),
            "weights": "@WEIGHTS@",
        }
        if self.extra:
            doc["extra"] = self.extra
        text = json.dumps(doc, indent=1, sort_keys=True)
        weights = "[" + ", ".join(format(v, ".17g") for v in self.weights.tolist()) + "]"
        return text.replace('"@WEIGHTS@"', weights) + "\n"

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
            raise ValidationError(f"unsupported model schema {doc.get('schema_version')!r}")
        return cls(
            weights=np.asarray(doc["weights"], dtype=np.float64),
            lam=float(doc["lambda"]),
            feature_zparams=ZScoreParams.from_dict(doc["feature_zscore"]),
            angle_zparams=ZScoreParams.from_dict(doc["angle_zscore"]),
            channel_ids=[(int(p), a) for p, a in doc["channel_ids"]],
            config_fingerprint=doc.get("config_fingerprint", ""),
            extra=doc.get("extra", {}),
        )

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())
