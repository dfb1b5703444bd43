"""Numerical analysis of the refinement behavior.

Three groups of tools:

* The *error-transfer operator* of an element: it maps the element's
  samples to the out-of-band coefficient content its four children acquire
  after the element is approximated by its kept 8x8 block.  Its spectral
  norm bounds how much refinement can amplify the approximation error.
* Non-central chi-squared distribution functions, used to evaluate a lower
  bound on the probability that refining any element of a noisy image does
  not grow the squared error by more than a fixed factor (subadditivity).
* Monte-Carlo estimation of the actual subadditivity violation rate under
  per-pixel Gaussian noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn, idctn
from scipy.special import gammainc, gammaincc, gammaln, ndtr

from .image import ChannelPlane, RasterImage
from .transform import KEPT_BLOCK

# Above this noncentrality the series for the non-central chi-squared cdf
# is replaced by a saddlepoint approximation.
SERIES_NONCENTRALITY_LIMIT = 5.0e4


# ---------------------------------------------------------------------------
# Error-transfer operator and its spectral norm


def _keep_band(coeffs: np.ndarray) -> np.ndarray:
    out = np.zeros_like(coeffs)
    out[:KEPT_BLOCK, :KEPT_BLOCK] = coeffs[:KEPT_BLOCK, :KEPT_BLOCK]
    return out


def _quadrants(height: int, width: int):
    h2, w2 = height // 2, width // 2
    return ((0, 0, h2, w2), (0, w2, h2, w2), (h2, 0, h2, w2), (h2, w2, h2, w2))


class ErrorTransferOperator:
    """Linear map from an element's samples to its children's leaked content.

    Applying it: transform the element, keep the top-left 8x8 coefficients,
    transform back, then on each of the four quadrants take the quadrant's
    own transform and drop *its* kept 8x8 block.  What remains is exactly
    the part of the coarse approximation the children cannot represent.
    """

    def __init__(self, height: int, width: int):
        if min(height, width) < 2 * KEPT_BLOCK:
            raise ValueError(f"element {height}x{width} too small: children need 8x8 blocks")
        if height % 2 or width % 2:
            raise ValueError(f"element {height}x{width} cannot be bisected")
        self.height = height
        self.width = width

    @property
    def shape(self) -> tuple[int, int]:
        n = self.height * self.width
        return (n, n)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(self.height, self.width)
        coarse = idctn(_keep_band(dctn(x, norm="ortho")), norm="ortho")
        out = np.empty_like(coarse)
        for top, left, h2, w2 in _quadrants(self.height, self.width):
            d = dctn(coarse[top : top + h2, left : left + w2], norm="ortho")
            d[:KEPT_BLOCK, :KEPT_BLOCK] = 0.0
            out[top : top + h2, left : left + w2] = d
        return out

    def rmatvec(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g, dtype=np.float64).reshape(self.height, self.width)
        acc = np.zeros_like(g)
        for top, left, h2, w2 in _quadrants(self.height, self.width):
            d = g[top : top + h2, left : left + w2].copy()
            d[:KEPT_BLOCK, :KEPT_BLOCK] = 0.0
            acc[top : top + h2, left : left + w2] = idctn(d, norm="ortho")
        return idctn(_keep_band(dctn(acc, norm="ortho")), norm="ortho")


def error_transfer_matrix(height: int, width: int) -> np.ndarray:
    """Dense matrix of the error-transfer operator (small elements only:
    the matrix has ``(height*width)**2`` entries)."""
    op = ErrorTransferOperator(height, width)
    n = height * width
    basis = np.zeros(n)
    cols = np.empty((n, n))
    for k in range(n):
        basis[k] = 1.0
        cols[:, k] = op.matvec(basis).ravel()
        basis[k] = 0.0
    return cols


def operator_norm(op, tol: float = 1e-8, max_iter: int = 100000, seed: int = 0) -> float:
    """Spectral norm by power iteration on the normal operator.

    Accepts a dense matrix or anything with ``matvec``/``rmatvec``.  The
    iteration error decays geometrically, so the loop stops only once the
    geometric tail extrapolated from consecutive increments is below the
    relative tolerance -- a plain increment test quits too early when the
    two leading singular values are close.
    """
    if isinstance(op, np.ndarray):
        matvec = lambda v: op @ v
        rmatvec = lambda v: op.T @ v
        n = op.shape[1]
    else:
        matvec, rmatvec, n = op.matvec, op.rmatvec, op.shape[1]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    prev_delta = math.inf
    for _ in range(max_iter):
        w = np.asarray(rmatvec(matvec(v))).ravel()
        s = float(np.linalg.norm(w))  # converges to the top singular value squared
        if s == 0.0:
            return 0.0
        v = w / s
        delta = abs(s - estimate)
        estimate = s
        if delta == 0.0:
            break
        if prev_delta > 0 and not math.isinf(prev_delta):
            ratio = min(delta / prev_delta, 0.999999)
            if delta * ratio / (1.0 - ratio) <= 0.5 * tol * s:
                break
        prev_delta = delta
    return math.sqrt(estimate)


# ---------------------------------------------------------------------------
# Non-central chi-squared distribution


def _check_ncx2_args(k: int, lam: float, x) -> np.ndarray:
    if k < 1:
        raise ValueError("degrees of freedom must be a positive integer")
    if lam < 0:
        raise ValueError("noncentrality must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("evaluation points must be nonnegative")
    return x


def _poisson_terms(lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Mixture indices and weights covering all non-negligible mass.

    Weights are built by the two-sided recurrence from the central term and
    then normalized; this keeps their relative accuracy near machine
    precision even for huge noncentralities, where evaluating
    ``exp(j log(lam/2) - lam/2 - lgamma(j+1))`` would lose digits to the
    cancellation of large exponents.
    """
    half = lam / 2.0
    center = int(half)
    span = int(math.ceil(12.0 * math.sqrt(half + 1.0) + 50.0))
    lo, hi = max(0, center - span), center + span
    js = np.arange(lo, hi + 1, dtype=np.float64)
    weights = np.empty(js.size)
    ci = center - lo
    weights[ci] = 1.0
    if ci + 1 < js.size:  # w_{j+1} = w_j * half / (j+1)
        weights[ci + 1 :] = np.cumprod(half / np.arange(center + 1, hi + 1))
    if ci > 0:  # w_{j-1} = w_j * j / half
        weights[ci - 1 :: -1] = np.cumprod(np.arange(center, lo, -1) / half)
    weights /= weights.sum()
    return js, weights


def _saddlepoint(k: int, lam: float, x: float, upper: bool) -> float:
    """Lugannani-Rice tail approximation, used for extreme noncentrality."""
    if x == 0.0:
        return 1.0 if upper else 0.0
    # Solve K'(s) = x via u = 1/(1-2s):  k*u + lam*u^2 = x.
    if lam > 0:
        u = (-k + math.sqrt(k * k + 4.0 * lam * x)) / (2.0 * lam)
    else:
        u = x / k
    s = 0.5 * (1.0 - 1.0 / u)
    cgf = 0.5 * k * math.log(u) + 0.5 * lam * (u - 1.0)
    second = 2.0 * k * u * u + 4.0 * lam * u**3
    arg = 2.0 * (s * x - cgf)
    w = math.copysign(math.sqrt(max(arg, 0.0)), s)
    v = s * math.sqrt(second)
    if abs(w) < 1e-5:  # removable singularity at the mean
        return 0.5
    correction = math.exp(-0.5 * w * w) / math.sqrt(2.0 * math.pi) * (1.0 / w - 1.0 / v)
    if upper:
        return min(max(float(ndtr(-w)) - correction, 0.0), 1.0)
    return min(max(float(ndtr(w)) + correction, 0.0), 1.0)


def _ncx2(k: int, lam: float, x, upper: bool):
    xs = _check_ncx2_args(k, lam, x)
    scalar = xs.ndim == 0
    xs = np.atleast_1d(xs)
    tail = gammaincc if upper else gammainc
    if lam == 0.0:
        out = tail(k / 2.0, xs / 2.0)
    elif lam > SERIES_NONCENTRALITY_LIMIT:
        out = np.array([_saddlepoint(k, lam, float(v), upper) for v in xs])
    else:
        js, weights = _poisson_terms(lam)
        # Poisson mixture of central chi-squared tails; summing the matching
        # tail on both sides avoids cancellation in either direction.
        out = np.sum(tail(k / 2.0 + js[None, :], xs[:, None] / 2.0) * weights, axis=1)
        np.clip(out, 0.0, 1.0, out=out)
    return float(out[0]) if scalar else out


def ncx2_cdf(k: int, lam: float, x):
    """Cumulative distribution of the non-central chi-squared law.

    ``k`` degrees of freedom, noncentrality ``lam``; reduces to the central
    chi-squared (regularized lower incomplete gamma) at ``lam = 0``.
    """
    return _ncx2(k, lam, x, upper=False)


def ncx2_sf(k: int, lam: float, x):
    """Survival function ``1 - cdf``, computed without cancellation."""
    return _ncx2(k, lam, x, upper=True)


@dataclass
class MonotonicityReport:
    ok: bool
    max_increase: float
    values: np.ndarray


def check_noncentrality_monotonicity(k: int, x: float, lams, slack: float = 1e-12) -> MonotonicityReport:
    """Verify the cdf at a fixed point never increases with the noncentrality."""
    lams = np.sort(np.asarray(lams, dtype=np.float64))
    values = np.array([ncx2_cdf(k, float(lam), x) for lam in lams])
    increases = np.diff(values)
    max_increase = float(increases.max(initial=0.0))
    return MonotonicityReport(ok=max_increase <= slack, max_increase=max_increase, values=values)


# ---------------------------------------------------------------------------
# Probability bound for subadditivity under pixel noise


@dataclass(frozen=True)
class RefinementBoundParams:
    """Inputs to the subadditivity probability bound.

    ``noise_amplitude`` is relative to a unit-norm element; ``delta`` is the
    spectral norm bound of the error-transfer operator; ``slack`` is the
    free constant: the subadditivity factor certified is ``2 + 2*slack``.
    ``dof_kept`` counts the kept coefficients, ``dof_rest`` is a lower bound
    on the remaining coefficients of any refinable element (the smallest
    admissible non-square one has ``32*16 - 64 = 448``).
    """

    noise_amplitude: float
    delta: float = 0.13
    slack: float = 1.0
    z: float | None = None
    dof_kept: int = 64
    dof_rest: int = 448

    def __post_init__(self):
        if not self.noise_amplitude > 0:
            raise ValueError("noise amplitude must be positive")
        if not 0 < self.delta < self.slack:
            raise ValueError("bound requires 0 < delta < slack constant")
        if self.z is not None and self.z < 0:
            raise ValueError("z must be nonnegative")

    @property
    def subadditivity_factor(self) -> float:
        return 2.0 + 2.0 * self.slack

    @property
    def noncentrality(self) -> float:
        return self.noise_amplitude**-2


def refinement_bound_gap(params: RefinementBoundParams, z: float | None = None) -> float:
    """``1 - bound`` evaluated additively, so tiny gaps keep full precision."""
    z = params.z if z is None else z
    if z is None:
        raise ValueError("no split point z given")
    mu = params.delta**2 / params.slack**2
    kept_cdf = ncx2_cdf(params.dof_kept, params.noncentrality, z)
    kept_sf = ncx2_sf(params.dof_kept, params.noncentrality, z)
    rest_cdf = ncx2_cdf(params.dof_rest, 0.0, mu * z / (1.0 - mu))
    return kept_sf + rest_cdf * kept_cdf


def refinement_probability_bound(params: RefinementBoundParams, z: float | None = None) -> float:
    """Lower bound on the probability that every refinement of a noisy,
    unit-norm element grows the squared error by at most ``2 + 2*slack``."""
    return 1.0 - refinement_bound_gap(params, z)


@dataclass
class BoundEvaluation:
    z: float
    probability: float
    gap: float


def best_refinement_bound(params: RefinementBoundParams, grid: int = 256) -> BoundEvaluation:
    """Maximize the bound over the split point ``z``.

    A coarse grid scan brackets the optimum (the gap falls and then rises),
    then golden-section search refines it.
    """
    z_max = 10.0 * (params.noncentrality + params.dof_kept)
    zs = np.linspace(0.0, z_max, grid)
    gaps = [refinement_bound_gap(params, float(z)) for z in zs]
    k = int(np.argmin(gaps))
    lo = zs[max(k - 1, 0)]
    hi = zs[min(k + 1, grid - 1)]

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = refinement_bound_gap(params, c)
    fd = refinement_bound_gap(params, d)
    while b - a > 1e-9 * max(1.0, b):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = refinement_bound_gap(params, c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = refinement_bound_gap(params, d)
    z_star = c if fc < fd else d
    gap = min(fc, fd)
    return BoundEvaluation(z=float(z_star), probability=1.0 - gap, gap=float(gap))


def rest_dof(height: int, width: int) -> int:
    """Coefficients of an element outside its kept 8x8 block."""
    return height * width - KEPT_BLOCK * KEPT_BLOCK


def min_rest_dof(max_exponent: int = 16) -> int:
    """Smallest rest-block size over refinable elements that can actually
    leak: both sides at least 16 and not the 16x16 element (whose children
    are fully covered by their kept blocks)."""
    sizes = [1 << e for e in range(4, max_exponent + 1)]
    return min(
        rest_dof(h, w)
        for h in sizes
        for w in sizes
        if (h, w) != (16, 16)
    )


# ---------------------------------------------------------------------------
# Noise and Monte-Carlo subadditivity


@dataclass(frozen=True)
class NoiseModel:
    """Additive i.i.d. Gaussian pixel noise, reproducible from the seed."""

    amplitude: float
    seed: int = 0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("noise amplitude must be nonnegative")


def add_noise(img, model: NoiseModel):
    """Add per-sample Gaussian noise, clamping the result into [0, 1].

    Accepts a RasterImage, a ChannelPlane, or a bare array and returns the
    same type.  Zero amplitude returns an identical copy.
    """
    if isinstance(img, RasterImage):
        return RasterImage(add_noise(img.samples, model))
    if isinstance(img, ChannelPlane):
        return ChannelPlane(add_noise(img.values, model), img.orig_height, img.orig_width)
    values = np.asarray(img, dtype=np.float64)
    if model.amplitude == 0.0:
        return values.copy()
    rng = np.random.default_rng(model.seed)
    return np.clip(values + model.amplitude * rng.standard_normal(values.shape), 0.0, 1.0)


def _band_energies(batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample squared errors of parents and of their four children.

    ``batch`` has shape (n, h, w).  The parent error is the coefficient
    energy outside the kept block; children contribute the same quantity on
    their quadrants.
    """
    n, h, w = batch.shape
    coeffs = dctn(batch, axes=(1, 2), norm="ortho")
    total = np.sum(coeffs * coeffs, axis=(1, 2))
    kept = np.sum(coeffs[:, :KEPT_BLOCK, :KEPT_BLOCK] ** 2, axis=(1, 2))
    parent = total - kept
    children = np.zeros(n)
    for top, left, h2, w2 in _quadrants(h, w):
        sub = dctn(batch[:, top : top + h2, left : left + w2], axes=(1, 2), norm="ortho")
        children += np.sum(sub * sub, axis=(1, 2)) - np.sum(
            sub[:, :KEPT_BLOCK, :KEPT_BLOCK] ** 2, axis=(1, 2)
        )
    return parent, children


def subadditivity_terms(block: np.ndarray) -> tuple[float, float]:
    """(parent squared error, summed child squared errors) of one element."""
    block = np.asarray(block, dtype=np.float64)
    parent, children = _band_energies(block[None, :, :])
    return float(max(parent[0], 0.0)), float(max(children[0], 0.0))


@dataclass
class SubadditivityMC:
    trials: int
    violations: int
    factor: float
    noise_amplitude: float
    seed: int

    @property
    def rate(self) -> float:
        return self.violations / self.trials if self.trials else 0.0


def mc_subadditivity(
    block: np.ndarray,
    noise_amplitude: float,
    trials: int,
    seed: int = 0,
    factor: float = 4.0,
    normalize: bool = True,
    batch: int = 4000,
) -> SubadditivityMC:
    """Estimate how often noise makes refinement break subadditivity.

    Each trial perturbs the (unit-normalized) element with i.i.d. Gaussian
    pixel noise and counts a violation when the children's summed squared
    error exceeds ``factor`` times the parent's squared error.
    """
    block = np.asarray(block, dtype=np.float64)
    h, w = block.shape
    if min(h, w) < 2 * KEPT_BLOCK or h % 2 or w % 2:
        raise ValueError(f"element {h}x{w} cannot be refined")
    if normalize:
        norm = np.linalg.norm(block)
        if norm > 0:
            block = block / norm
    rng = np.random.default_rng(seed)
    violations = 0
    done = 0
    while done < trials:
        n = min(batch, trials - done)
        noisy = block[None, :, :] + noise_amplitude * rng.standard_normal((n, h, w))
        parent, children = _band_energies(noisy)
        violations += int(np.sum(children > factor * parent))
        done += n
    return SubadditivityMC(trials, violations, factor, noise_amplitude, seed)
