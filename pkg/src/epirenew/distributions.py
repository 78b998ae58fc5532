"""
Lag distributions used by the renewal model.

Two kinds of delay enter the model: the generation interval ``g`` (time
from an infection to the infections it causes, supported on lags >= 1) and
the infection-to-observation delay ``pi`` (supported on lags >= 0). Both are
fixed inputs and are represented here as :class:`DiscretePmf` objects,
usually obtained by discretizing a continuous density.

This module also provides moment matching of two-parameter families, used
for the prior on latent infections (variance equal to ``d`` times the mean).
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, optimize, special, stats

FAMILIES = ("gamma", "lognormal", "weibull")

_FAMILY_ALIASES = {
    "gamma": "gamma",
    "lognormal": "lognormal",
    "log-normal": "lognormal",
    "log_normal": "lognormal",
    "weibull": "weibull",
}

SUM_TOL = 1e-9
WARN_CAPTURE = 0.99
ERROR_CAPTURE = 0.50


class TruncationWarning(UserWarning):
    """Discretization dropped a noticeable share of probability mass."""


def canonical_family(family: str) -> str:
    try:
        return _FAMILY_ALIASES[family.lower()]
    except (KeyError, AttributeError):
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}") from None


@dataclass(frozen=True)
class DiscretePmf:
    """Probability mass function on consecutive integer lags.

    Parameters
    ----------
    weights : array_like
        Nonnegative weights for lags ``first_lag, first_lag + 1, ...``.
    first_lag : int
        Lag of ``weights[0]``. Generation intervals start at 1, observation
        delays at 0.
    truncated_mass : float
        Mass of the source distribution beyond ``max_lag`` that was dropped
        before renormalization (0 for pmfs given directly).
    """

    weights: np.ndarray
    first_lag: int = 1
    truncated_mass: float = 0.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size == 0:
            raise ValueError("pmf needs at least one weight")
        if not np.all(np.isfinite(w)):
            raise ValueError("pmf weights must be finite")
        if np.any(w < 0):
            raise ValueError("pmf weights must be nonnegative")
        if abs(w.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"pmf weights sum to {w.sum()!r}, not 1")
        if self.first_lag not in (0, 1):
            raise ValueError("first_lag must be 0 (delay) or 1 (generation)")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_weights(cls, weights, first_lag: int = 1) -> "DiscretePmf":
        """Build a pmf from unnormalized nonnegative weights."""
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if total <= 0:
            raise ValueError("weights must have positive total")
        return cls(w / total, first_lag=first_lag)

    @classmethod
    def delta(cls, lag: int, first_lag: int | None = None) -> "DiscretePmf":
        """Point mass at ``lag``."""
        if first_lag is None:
            first_lag = 0 if lag == 0 else 1
        if lag < first_lag:
            raise ValueError("lag precedes first_lag")
        w = np.zeros(lag - first_lag + 1)
        w[-1] = 1.0
        return cls(w, first_lag=first_lag)

    @property
    def max_lag(self) -> int:
        return self.first_lag + self.weights.size - 1

    @property
    def lags(self) -> np.ndarray:
        return np.arange(self.first_lag, self.max_lag + 1)

    def full(self) -> np.ndarray:
        """Weights indexed by lag from 0 to ``max_lag`` (zero-padded)."""
        out = np.zeros(self.max_lag + 1)
        out[self.first_lag:] = self.weights
        return out

    def __call__(self, lag: int) -> float:
        if lag < self.first_lag or lag > self.max_lag:
            return 0.0
        return float(self.weights[lag - self.first_lag])

    def mean(self) -> float:
        return float(np.dot(self.lags, self.weights))

    def to_csv(self, path=None) -> str:
        """Write ``lag,weight`` rows; returns the text."""
        buf = io.StringIO()
        buf.write("lag,weight\n")
        for lag, w in zip(self.lags, self.weights):
            buf.write(f"{lag},{float(w)!r}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "DiscretePmf":
        """Read ``lag,weight`` rows from a path or a text string.

        Lags must be consecutive and the weights must sum to one within
        ``1e-9``. They are kept as written, so a pmf saved with
        :meth:`to_csv` reads back bit for bit.
        """
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            text = Path(source).read_text()
        else:
            text = source
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].replace(" ", "") != "lag,weight":
            raise ValueError("expected header 'lag,weight'")
        lags, weights = [], []
        for ln in lines[1:]:
            parts = ln.split(",")
            if len(parts) != 2:
                raise ValueError(f"malformed pmf row {ln!r}")
            lags.append(int(parts[0]))
            weights.append(float(parts[1]))
        if not lags:
            raise ValueError("no rows")
        lags = np.asarray(lags)
        if np.any(np.diff(lags) != 1):
            raise ValueError("lags must be consecutive and increasing")
        w = np.asarray(weights)
        if abs(w.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"pmf weights sum to {w.sum()!r}, not 1")
        return cls(w, first_lag=int(lags[0]))


@dataclass(frozen=True)
class ContinuousLagDensity:
    """A continuous lag density on the positive reals.

    Parameterizations: ``gamma(shape, rate)``, ``lognormal(mu, sigma)`` (of
    the underlying normal) and ``weibull(shape, scale)``.
    """

    family: str
    a: float
    b: float
    _dist: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        fam = canonical_family(self.family)
        object.__setattr__(self, "family", fam)
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("density parameters must be finite")
        # the log-normal location may be any real; everything else is positive
        if self.b <= 0 or (fam != "lognormal" and self.a <= 0):
            raise ValueError("density parameters must be strictly positive")
        if fam == "gamma":
            dist = stats.gamma(a=self.a, scale=1.0 / self.b)
        elif fam == "lognormal":
            dist = stats.lognorm(s=self.b, scale=math.exp(self.a))
        else:
            dist = stats.weibull_min(c=self.a, scale=self.b)
        object.__setattr__(self, "_dist", dist)

    @classmethod
    def gamma(cls, shape: float, rate: float) -> "ContinuousLagDensity":
        return cls("gamma", shape, rate)

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> "ContinuousLagDensity":
        return cls("lognormal", mu, sigma)

    @classmethod
    def weibull(cls, shape: float, scale: float) -> "ContinuousLagDensity":
        return cls("weibull", shape, scale)

    @classmethod
    def from_mean_sd(cls, family: str, mean: float, sd: float) -> "ContinuousLagDensity":
        """Density with the given mean and standard deviation."""
        m = match_moments(family, mean, sd**2 / mean)
        return m.density()

    def pdf(self, x):
        return self._dist.pdf(x)

    def cdf(self, x):
        return self._dist.cdf(x)

    def sf(self, x):
        return self._dist.sf(x)

    def ppf(self, q):
        return self._dist.ppf(q)

    def mean(self) -> float:
        return float(self._dist.mean())

    def var(self) -> float:
        return float(self._dist.var())

    def mode(self) -> float:
        if self.family == "gamma":
            return max(self.a - 1.0, 0.0) / self.b
        if self.family == "lognormal":
            return math.exp(self.a - self.b**2)
        k, lam = self.a, self.b
        return lam * ((k - 1) / k) ** (1 / k) if k > 1 else 0.0

    def sample(self, rng: np.random.Generator, size=None):
        return self._dist.rvs(size=size, random_state=rng)

    def max_on(self, lo, hi):
        """Maximum of the density over each interval ``[lo, hi]`` (unimodal families)."""
        lo = np.maximum(np.asarray(lo, dtype=float), 0.0)
        hi = np.asarray(hi, dtype=float)
        m = self.mode()
        at = np.clip(m, lo, hi)
        with np.errstate(divide="ignore"):
            out = self.pdf(at)
        # densities unbounded at 0 (shape < 1) give inf; callers need a finite bound
        return np.where(np.isfinite(out), out, np.inf)

    def integral_check(self, upper: float | None = None) -> float:
        """Numerically integrate the density over ``(0, upper]``."""
        if upper is None:
            upper = float(self.ppf(1 - 1e-12))
        val, _ = integrate.quad(self.pdf, 0.0, upper, limit=200, points=[self.mode()])
        return val


def discretize(
    density: ContinuousLagDensity, max_lag: int, kind: str = "generation"
) -> DiscretePmf:
    """Bin a continuous density into a truncated pmf by interval mass.

    For ``kind="generation"`` lag ``k`` (1..max_lag) receives the mass on
    ``(k - 1, k]``. For ``kind="delay"`` lag ``k`` (0..max_lag) receives the
    mass on ``[k, k + 1)``. The result is renormalized; the dropped tail is
    kept in ``truncated_mass``.

    Warns with :class:`TruncationWarning` when less than 99% of the mass is
    captured and raises ``ValueError`` below 50%.
    """
    if int(max_lag) != max_lag or max_lag < 1:
        raise ValueError("max_lag must be a positive integer")
    max_lag = int(max_lag)
    if kind == "generation":
        edges = np.arange(0, max_lag + 1, dtype=float)
        first = 1
    elif kind == "delay":
        edges = np.arange(0, max_lag + 2, dtype=float)
        first = 0
    else:
        raise ValueError("kind must be 'generation' or 'delay'")
    cdf = density.cdf(edges)
    mass = np.diff(cdf)
    # upper tail via the survival function keeps precision for tiny tails
    captured = float(cdf[-1] - cdf[0])
    truncated = float(density.sf(edges[-1]))
    if not np.isfinite(captured) or captured <= 0:
        raise ValueError("density has no mass in the discretization window")
    if captured < ERROR_CAPTURE:
        raise ValueError(
            f"max_lag={max_lag} captures only {captured:.3%} of the mass"
        )
    if captured < WARN_CAPTURE:
        warnings.warn(
            f"max_lag={max_lag} captures {captured:.3%} of the mass",
            TruncationWarning,
            stacklevel=2,
        )
    mass = np.clip(mass, 0.0, None)
    return DiscretePmf(mass / mass.sum(), first_lag=first, truncated_mass=truncated)


@dataclass(frozen=True)
class MomentMatchedPrior:
    """Two-parameter distribution with mean ``mean`` and variance ``d * mean``."""

    family: str
    mean: float
    d: float
    a: float
    b: float

    @property
    def variance(self) -> float:
        return self.d * self.mean

    def density(self) -> ContinuousLagDensity:
        return ContinuousLagDensity(self.family, self.a, self.b)

    @property
    def shape(self) -> float:
        if self.family == "lognormal":
            raise AttributeError("log-normal has (mu, sigma), not shape")
        return self.a

    @property
    def rate(self) -> float:
        if self.family != "gamma":
            raise AttributeError("rate is defined for the gamma family only")
        return self.b

    def sample(self, rng: np.random.Generator, size=None):
        return self.density().sample(rng, size)


def _weibull_cv2(k: float) -> float:
    # squared coefficient of variation of a Weibull with shape k
    lg1 = special.gammaln(1 + 1 / k)
    lg2 = special.gammaln(1 + 2 / k)
    return math.expm1(lg2 - 2 * lg1)


def match_moments(family: str, mean: float, d: float) -> MomentMatchedPrior:
    """Match a two-parameter family to mean ``mean`` and variance ``d * mean``.

    Examples
    --------
    >>> p = match_moments("gamma", 10.0, 2.0)
    >>> p.shape, p.rate
    (5.0, 0.5)
    """
    fam = canonical_family(family)
    if not (mean > 0 and d > 0) or not (np.isfinite(mean) and np.isfinite(d)):
        raise ValueError("mean and d must be positive and finite")
    if fam == "gamma":
        return MomentMatchedPrior(fam, mean, d, mean / d, 1.0 / d)
    if fam == "lognormal":
        sigma2 = math.log1p(d / mean)
        mu = math.log(mean) - sigma2 / 2
        return MomentMatchedPrior(fam, mean, d, mu, math.sqrt(sigma2))
    target = d / mean

    def f(logk):
        return math.log(_weibull_cv2(math.exp(logk))) - math.log(target)

    lo, hi = -6.0, 8.0
    try:
        flo, fhi = f(lo), f(hi)
    except (OverflowError, ValueError):
        raise ValueError("weibull moment inversion failed") from None
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
        raise ValueError(f"weibull moment inversion failed for mean={mean}, d={d}")
    logk = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    k = math.exp(logk)
    if abs(_weibull_cv2(k) / target - 1) > 1e-10:
        raise ValueError("weibull moment inversion did not reach tolerance")
    scale = mean / math.exp(special.gammaln(1 + 1 / k))
    return MomentMatchedPrior(fam, mean, d, k, scale)
