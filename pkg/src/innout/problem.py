"""Linear multi-task generative model with auxiliary information.

Inputs ``x`` map to low-dimensional features ``w = B x``; latent noise ``u``
(zero mean, independent of ``x``) enters both the auxiliary vector
``z = A w + C u`` and the target ``y = <theta_w, w> + <theta_u, u> + eps``.
Every setting carries an in-distribution and an out-of-distribution pair of
input/latent distributions.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

SCHEMA_VERSION = 1

FAMILIES = ("gaussian", "uniform-box", "uniform-ball")
NOISE_FAMILIES = ("gaussian", "uniform")
ORIGINS = ("id", "ood")

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, None]


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _check_origin(origin: str) -> None:
    if origin not in ORIGINS:
        raise ValueError(f"origin must be one of {ORIGINS}, got {origin!r}")


@dataclass(frozen=True)
class Dims:
    """Problem dimensions: input ``d``, features ``k``, latent noise ``m``, auxiliary ``T``."""

    d: int
    k: int
    m: int
    T: int

    def __post_init__(self):
        for name in ("d", "k", "m", "T"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.k > self.d:
            raise ValueError(f"need k <= d, got k={self.k}, d={self.d}")
        if self.T < self.k:
            raise ValueError(f"need T >= k, got T={self.T}, k={self.k}")
        if self.T < self.m:
            raise ValueError(f"need T >= m, got T={self.T}, m={self.m}")


@dataclass(frozen=True, eq=False)
class DistributionSpec:
    """A distribution on R^dim with bounded density and closed-form moments.

    ``shape`` is the covariance matrix (gaussian), the per-axis half-widths
    (uniform-box) or the radius (uniform-ball).  Use the ``gaussian``,
    ``uniform_box`` and ``uniform_ball`` constructors.
    """

    family: str
    mean: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unsupported distribution family {self.family!r}")
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        shape = np.asarray(self.shape, dtype=float)
        dim = mean.shape[0]
        if self.family == "gaussian":
            shape = np.atleast_2d(shape)
            if shape.shape != (dim, dim):
                raise ValueError(f"covariance must be {dim}x{dim}, got {shape.shape}")
            if not np.allclose(shape, shape.T, rtol=0, atol=1e-12 * max(1.0, np.abs(shape).max())):
                raise ValueError("covariance is not symmetric")
            try:
                np.linalg.cholesky(shape)
            except np.linalg.LinAlgError:
                raise ValueError("covariance is not positive definite") from None
        elif self.family == "uniform-box":
            shape = np.atleast_1d(shape)
            if shape.shape != (dim,) or np.any(shape <= 0):
                raise ValueError("uniform-box needs one positive half-width per axis")
        else:
            if shape.ndim != 0 or shape <= 0:
                raise ValueError("uniform-ball needs a positive scalar radius")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def gaussian(cls, mean, cov) -> "DistributionSpec":
        return cls("gaussian", mean, cov)

    @classmethod
    def uniform_box(cls, half_widths, mean=None) -> "DistributionSpec":
        half_widths = np.atleast_1d(np.asarray(half_widths, dtype=float))
        if mean is None:
            mean = np.zeros_like(half_widths)
        return cls("uniform-box", mean, half_widths)

    @classmethod
    def uniform_ball(cls, radius: float, dim: int, mean=None) -> "DistributionSpec":
        if mean is None:
            mean = np.zeros(dim)
        return cls("uniform-ball", mean, radius)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def covariance(self) -> np.ndarray:
        if self.family == "gaussian":
            return self.shape.copy()
        if self.family == "uniform-box":
            return np.diag(self.shape**2 / 3.0)
        # each coordinate of the uniform ball in R^p has variance r^2 / (p + 2)
        return np.eye(self.dim) * float(self.shape) ** 2 / (self.dim + 2)

    def second_moment(self) -> np.ndarray:
        """E[v v^T], i.e. covariance plus the outer product of the mean."""
        return self.covariance() + np.outer(self.mean, self.mean)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        p = self.dim
        if self.family == "gaussian":
            chol = np.linalg.cholesky(self.shape)
            return self.mean + rng.standard_normal((n, p)) @ chol.T
        if self.family == "uniform-box":
            return self.mean + rng.uniform(-1.0, 1.0, size=(n, p)) * self.shape
        direction = rng.standard_normal((n, p))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = float(self.shape) * rng.uniform(size=(n, 1)) ** (1.0 / p)
        return self.mean + direction * radius

    def to_dict(self) -> dict:
        return {"family": self.family, "mean": self.mean.tolist(), "shape": self.shape.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "DistributionSpec":
        return cls(doc["family"], np.asarray(doc["mean"], dtype=float), np.asarray(doc["shape"], dtype=float))


def _matrix_rank(M: np.ndarray) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s > max(M.shape) * np.finfo(float).eps * s[0]))


@dataclass(frozen=True, eq=False)
class ProblemSetting:
    """Ground-truth parameters and ID/OOD distributions of the linear model."""

    dims: Dims
    A_star: np.ndarray
    B_star: np.ndarray
    C_star: np.ndarray
    theta_w: np.ndarray
    theta_u: np.ndarray
    sigma_sq: float
    p_x: DistributionSpec
    p_u: DistributionSpec
    p_x_ood: DistributionSpec
    p_u_ood: DistributionSpec
    noise: str = "gaussian"

    def __post_init__(self):
        d, k, m, T = self.dims.d, self.dims.k, self.dims.m, self.dims.T
        for name, shape in (("A_star", (T, k)), ("B_star", (k, d)), ("C_star", (T, m))):
            value = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if value.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {value.shape}")
            object.__setattr__(self, name, value)
        for name, size in (("theta_w", k), ("theta_u", m)):
            value = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if value.shape != (size,):
                raise ValueError(f"{name} must have length {size}, got {value.shape}")
            object.__setattr__(self, name, value)
        if _matrix_rank(self.A_star) != k or _matrix_rank(self.B_star) != k:
            raise ValueError("A_star and B_star must have rank k")
        # C_star is T x m with T >= m: full rank means rank m
        if _matrix_rank(self.C_star) != m:
            raise ValueError("C_star must have rank m")
        if self.sigma_sq < 0:
            raise ValueError("sigma_sq must be nonnegative")
        object.__setattr__(self, "sigma_sq", float(self.sigma_sq))
        if self.noise not in NOISE_FAMILIES:
            raise ValueError(f"noise must be one of {NOISE_FAMILIES}")
        for name, dim in (("p_x", d), ("p_x_ood", d), ("p_u", m), ("p_u_ood", m)):
            if getattr(self, name).dim != dim:
                raise ValueError(f"{name} must live in R^{dim}")
        for name in ("p_u", "p_u_ood"):
            if np.any(getattr(self, name).mean != 0):
                raise ValueError(f"{name} must have zero mean")

    @property
    def theta_x(self) -> np.ndarray:
        """Optimal x-only coefficients ``B^T theta_w``."""
        return self.B_star.T @ self.theta_w

    def distributions(self, origin: str) -> tuple[DistributionSpec, DistributionSpec]:
        _check_origin(origin)
        if origin == "id":
            return self.p_x, self.p_u
        return self.p_x_ood, self.p_u_ood

    def replace(self, **changes) -> "ProblemSetting":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "dims": dataclasses.asdict(self.dims),
            "A_star": self.A_star.tolist(),
            "B_star": self.B_star.tolist(),
            "C_star": self.C_star.tolist(),
            "theta_w": self.theta_w.tolist(),
            "theta_u": self.theta_u.tolist(),
            "sigma_sq": self.sigma_sq,
            "noise": self.noise,
            "p_x": self.p_x.to_dict(),
            "p_u": self.p_u.to_dict(),
            "p_x_ood": self.p_x_ood.to_dict(),
            "p_u_ood": self.p_u_ood.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ProblemSetting":
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}")
        return cls(
            dims=Dims(**doc["dims"]),
            A_star=np.asarray(doc["A_star"], dtype=float),
            B_star=np.asarray(doc["B_star"], dtype=float),
            C_star=np.asarray(doc["C_star"], dtype=float),
            theta_w=np.asarray(doc["theta_w"], dtype=float),
            theta_u=np.asarray(doc["theta_u"], dtype=float),
            sigma_sq=float(doc["sigma_sq"]),
            noise=doc.get("noise", "gaussian"),
            p_x=DistributionSpec.from_dict(doc["p_x"]),
            p_u=DistributionSpec.from_dict(doc["p_u"]),
            p_x_ood=DistributionSpec.from_dict(doc["p_x_ood"]),
            p_u_ood=DistributionSpec.from_dict(doc["p_u_ood"]),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ProblemSetting":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Sampled rows.  ``U`` holds the latent noise and is only kept on request."""

    X: np.ndarray
    Z: np.ndarray
    Y: Optional[np.ndarray] = None
    U: Optional[np.ndarray] = None
    origin: str = "id"

    def __post_init__(self):
        n = self.X.shape[0]
        if self.Z.shape[0] != n:
            raise ValueError("X and Z must have the same number of rows")
        for name in ("Y", "U"):
            value = getattr(self, name)
            if value is not None and value.shape[0] != n:
                raise ValueError(f"{name} must have {n} rows")

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def unlabeled(self) -> "Dataset":
        return Dataset(self.X, self.Z, None, self.U, self.origin)


def concat(datasets: Sequence[Dataset]) -> Dataset:
    """Stack datasets row-wise; optional fields survive only if present everywhere."""
    if not datasets:
        raise ValueError("nothing to concatenate")
    X = np.vstack([ds.X for ds in datasets])
    Z = np.vstack([ds.Z for ds in datasets])
    Y = np.concatenate([ds.Y for ds in datasets]) if all(ds.Y is not None for ds in datasets) else None
    U = np.vstack([ds.U for ds in datasets]) if all(ds.U is not None for ds in datasets) else None
    origins = {ds.origin for ds in datasets}
    origin = origins.pop() if len(origins) == 1 else "mixed"
    return Dataset(X, Z, Y, U, origin)


def _spectrum_clamped(rng: np.random.Generator, rows: int, cols: int, conditioning: float) -> np.ndarray:
    G = rng.standard_normal((rows, cols))
    left, s, right = np.linalg.svd(G, full_matrices=False)
    s = np.clip(s, 1.0 / conditioning, conditioning)
    return (left * s) @ right


def random_spd(rng: np.random.Generator, dim: int, conditioning: float = 1.0) -> np.ndarray:
    """Random rotation of a diagonal with eigenvalues log-uniform in [1/c, c]."""
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    if conditioning == 1.0:
        eig = np.ones(dim)
    else:
        eig = np.exp(rng.uniform(-np.log(conditioning), np.log(conditioning), size=dim))
    cov = (Q * eig) @ Q.T
    return (cov + cov.T) / 2


def make_problem_setting(
    dims: Dims,
    seed: SeedLike,
    conditioning: float = 1.0,
    *,
    sigma_sq: float = 0.1,
    sigma_u_sq: Optional[float] = None,
    noise: str = "gaussian",
) -> ProblemSetting:
    """Draw a random setting that satisfies all model assumptions.

    A, B, C come from a gaussian ensemble with singular values clamped to
    ``[1/conditioning, conditioning]``.  ``x`` and ``u`` are gaussian with zero
    mean and random covariances in the same band; OOD equals ID until a shift
    is applied (see :func:`random_covariate_shift`).  When ``sigma_u_sq`` is
    given, ``theta_u`` is rescaled so that the ID latent variance of ``y``
    equals it.
    """
    if not isinstance(dims, Dims):
        dims = Dims(*dims)
    if conditioning < 1:
        raise ValueError("conditioning must be >= 1")
    rng = _rng(seed)
    d, k, m, T = dims.d, dims.k, dims.m, dims.T
    A = _spectrum_clamped(rng, T, k, conditioning)
    B = _spectrum_clamped(rng, k, d, conditioning)
    C = _spectrum_clamped(rng, T, m, conditioning)
    theta_w = rng.standard_normal(k)
    theta_u = rng.standard_normal(m)
    p_x = DistributionSpec.gaussian(np.zeros(d), random_spd(rng, d, conditioning))
    p_u = DistributionSpec.gaussian(np.zeros(m), random_spd(rng, m, conditioning))
    if sigma_u_sq is not None:
        current = theta_u @ p_u.covariance() @ theta_u
        theta_u = theta_u * np.sqrt(sigma_u_sq / current)
    return ProblemSetting(dims, A, B, C, theta_w, theta_u, sigma_sq, p_x, p_u, p_x, p_u, noise)


def _scale_rotate(rng: np.random.Generator, cov: np.ndarray, scale_range: tuple[float, float]) -> np.ndarray:
    dim = cov.shape[0]
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    lo, hi = scale_range
    factors = np.exp(rng.uniform(np.log(lo), np.log(hi), size=dim))
    G = (Q * np.sqrt(factors)) @ Q.T
    out = G @ cov @ G
    return (out + out.T) / 2


def random_covariate_shift(
    setting: ProblemSetting,
    seed: SeedLike,
    scale_range: tuple[float, float] = (0.1, 10.0),
    mean_shift: float = 0.0,
) -> ProblemSetting:
    """Replace the OOD distributions with a random shift of the ID ones.

    Covariances of ``x`` and ``u`` are rescaled by per-axis factors drawn
    log-uniformly from ``scale_range`` along a random rotation; the ``x`` mean
    moves by a gaussian vector with scale ``mean_shift``.  ``u`` stays zero
    mean.  Gaussian families only.
    """
    if setting.p_x.family != "gaussian" or setting.p_u.family != "gaussian":
        raise ValueError("random covariate shifts are defined for gaussian families only")
    rng = _rng(seed)
    cov_x = _scale_rotate(rng, setting.p_x.covariance(), scale_range)
    cov_u = _scale_rotate(rng, setting.p_u.covariance(), scale_range)
    mean_x = setting.p_x.mean + mean_shift * rng.standard_normal(setting.dims.d)
    return setting.replace(
        p_x_ood=DistributionSpec.gaussian(mean_x, cov_x),
        p_u_ood=DistributionSpec.gaussian(np.zeros(setting.dims.m), cov_u),
    )


def example1_setting(R: float, sigma_sq: float = 1.0) -> ProblemSetting:
    """Scalar-input construction where auxiliary inputs hurt under shift.

    ``x = w`` is uniform on [-1, 1], ``z = (x + u1, u2)``, ``y = x + u1 + eps``.
    In-distribution ``u`` is uniform on the unit disc; out of distribution
    ``u1 ~ U(-1, 1)`` and ``u2 ~ U(-R, R)`` independently.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    box = DistributionSpec.uniform_box([1.0])
    return ProblemSetting(
        dims=Dims(d=1, k=1, m=2, T=2),
        A_star=np.array([[1.0], [0.0]]),
        B_star=np.array([[1.0]]),
        C_star=np.eye(2),
        theta_w=np.array([1.0]),
        theta_u=np.array([1.0, 0.0]),
        sigma_sq=sigma_sq,
        p_x=box,
        p_u=DistributionSpec.uniform_ball(1.0, 2),
        p_x_ood=box,
        p_u_ood=DistributionSpec.uniform_box([1.0, R]),
    )


def oracle_moments(setting: ProblemSetting, origin: str) -> tuple[np.ndarray, np.ndarray, float]:
    """Closed-form ``(E[x x^T], Cov(u), theta_u^T Cov(u) theta_u)`` at ``origin``."""
    p_x, p_u = setting.distributions(origin)
    Su = p_u.covariance()
    return p_x.second_moment(), Su, float(setting.theta_u @ Su @ setting.theta_u)


def _noise(setting: ProblemSetting, rng: np.random.Generator, n: int) -> np.ndarray:
    scale = np.sqrt(setting.sigma_sq)
    if setting.noise == "gaussian":
        return scale * rng.standard_normal(n)
    # uniform on [-a, a] has variance a^2 / 3
    return rng.uniform(-1.0, 1.0, size=n) * np.sqrt(3.0) * scale


def sample_given_inputs(
    setting: ProblemSetting,
    X: np.ndarray,
    origin: str = "id",
    with_labels: bool = True,
    with_latents: bool = False,
    seed: SeedLike = None,
) -> Dataset:
    """Draw fresh ``(u, eps)`` for fixed inputs and form ``Z`` and ``Y``."""
    rng = _rng(seed)
    _, p_u = setting.distributions(origin)
    n = X.shape[0]
    U = p_u.sample(rng, n)
    W = X @ setting.B_star.T
    Z = W @ setting.A_star.T + U @ setting.C_star.T
    Y = None
    if with_labels:
        Y = W @ setting.theta_w + U @ setting.theta_u + _noise(setting, rng, n)
    return Dataset(X, Z, Y, U if with_latents else None, origin)


def sample_dataset(
    setting: ProblemSetting,
    n: int,
    origin: str = "id",
    with_labels: bool = True,
    with_latents: bool = False,
    seed: SeedLike = None,
) -> Dataset:
    """Draw ``n`` i.i.d. rows from the ``origin`` distribution pair."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = _rng(seed)
    p_x, _ = setting.distributions(origin)
    X = p_x.sample(rng, n)
    return sample_given_inputs(setting, X, origin, with_labels, with_latents, rng)
