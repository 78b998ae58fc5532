"""
Continuous-time self-exciting infection process and Monte-Carlo oracles.

Infections form a point process with conditional intensity

    lambda(t) = R(t) * sum_j g(t - a_j) * (S0 - N(t)) / S0

where ``a_j`` are past event times (``alignment="exact"``) or the end of
the day each event fell in (``alignment="daily"``), ``g`` is a continuous
generation density and the depletion factor is present only with a finite
population. ``R(t)`` is piecewise constant on days ``(k-1, k]``.

With daily alignment the expected daily counts obey the discrete renewal
recursion with interval-mass generation weights exactly, which makes the
simulator an oracle for the discrete model. With exact alignment the
expected counts solve the continuous renewal integral equation, checked by
:func:`renewal_mean_quadrature`.

Simulation uses Ogata thinning. The general simulator recomputes the
dominating rate after every candidate from the kernel's maximum over the
lookahead window; vectorized batch simulators cover the exponential kernel
and the frozen-load saturating process used for the population lemma.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributions import ContinuousLagDensity, DiscretePmf, discretize


class EventCapExceeded(RuntimeError):
    """The simulation produced more events than ``max_events``."""


@dataclass(frozen=True)
class ObservationProcess:
    """Observation events of one type: intensity ``alpha * sum_j pi(t - s_j)`` over infections."""

    name: str
    alpha: float
    delay: ContinuousLagDensity

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.name in ("seed", "infection"):
            raise ValueError("observation names 'seed' and 'infection' are reserved")


@dataclass(frozen=True)
class IntensitySpec:
    """Definition of the infection point process.

    Parameters
    ----------
    R : float or array_like
        Reproduction number; an array gives the value on day ``(k-1, k]``
        for ``k = 1, 2, ...`` and the last value is held afterwards.
    g : ContinuousLagDensity
        Generation interval density.
    seeds : array_like
        Seed event times in ``[v, 0]``; repeat a time for multiple seeds.
    population : float, optional
        Initial susceptibles ``S0`` for the depletion factor.
    alignment : str
        ``"exact"`` or ``"daily"`` (see module docstring).
    observations : tuple of ObservationProcess
    """

    R: object
    g: ContinuousLagDensity
    seeds: object = (0.0,)
    population: float | None = None
    alignment: str = "exact"
    observations: tuple = ()

    def __post_init__(self):
        R = np.atleast_1d(np.asarray(self.R, dtype=float))
        if R.size == 0 or np.any(R < 0) or not np.all(np.isfinite(R)):
            raise ValueError("R must be finite and nonnegative")
        seeds = np.sort(np.atleast_1d(np.asarray(self.seeds, dtype=float)))
        if not np.all(np.isfinite(seeds)) or np.any(seeds > 0):
            raise ValueError("seed times must be finite and lie at or before 0")
        if self.alignment not in ("exact", "daily"):
            raise ValueError("alignment must be 'exact' or 'daily'")
        if self.population is not None and self.population < seeds.size:
            raise ValueError("population smaller than the number of seeds")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "seeds", seeds)
        object.__setattr__(self, "observations", tuple(self.observations))

    def R_at(self, t):
        """``R`` in force at time ``t`` (day ``ceil(t)``)."""
        k = np.clip(np.ceil(np.asarray(t, dtype=float)).astype(int) - 1, 0, self.R.size - 1)
        return self.R[k]

    def anchor(self, times):
        times = np.asarray(times, dtype=float)
        return np.ceil(times) if self.alignment == "daily" else times


@dataclass
class EventLog:
    """Event times with marks (``seed``, ``infection`` or an observation name)."""

    times: np.ndarray
    marks: list = field(default_factory=list)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        marks = list(self.marks)
        if len(marks) != t.size:
            raise ValueError("one mark per event is required")
        order = sorted(range(t.size), key=lambda i: (t[i], marks[i], i))
        self.times = t[order]
        self.marks = [marks[i] for i in order]

    def of(self, mark) -> np.ndarray:
        return np.array([t for t, m in zip(self.times, self.marks) if m == mark])

    def infections(self) -> np.ndarray:
        """Times of seeds and infections."""
        return np.array([t for t, m in zip(self.times, self.marks) if m in ("seed", "infection")])

    def daily_counts(self, T: int, mark: str = "infection") -> np.ndarray:
        """Number of ``mark`` events on each day ``(k-1, k]``, ``k = 1..T``."""
        t = self.of(mark)
        days = np.ceil(t).astype(int)
        days = days[(days >= 1) & (days <= T)]
        return np.bincount(days - 1, minlength=T)[:T]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "mark"])
        for t, m in zip(self.times, self.marks):
            w.writerow([repr(float(t)), m])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "EventLog":
        text = Path(source).read_text() if "\n" not in str(source) else str(source)
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["time", "mark"]:
            raise ValueError("expected header time,mark")
        return cls(np.array([float(r[0]) for r in rows[1:]]), [r[1] for r in rows[1:]])


# --- general Ogata thinning ----------------------------------------------


def _observation_events(rng, infection_times, proc: ObservationProcess, horizon):
    """Per-infection thinning of the observation intensity up to ``horizon``."""
    if proc.alpha == 0 or infection_times.size == 0:
        return np.zeros(0)
    span = np.maximum(horizon - infection_times, 0.0)
    gmax = float(proc.delay.max_on(0.0, float(span.max()) if span.size else 0.0))
    if not np.isfinite(gmax):
        raise ValueError("observation delay density is unbounded; choose a shape >= 1")
    n = rng.poisson(proc.alpha * gmax * span)
    owner = np.repeat(np.arange(infection_times.size), n)
    lag = rng.uniform(0.0, 1.0, owner.size) * span[owner]
    keep = rng.uniform(0.0, gmax, owner.size) < proc.delay.pdf(lag)
    return np.sort(infection_times[owner[keep]] + lag[keep])


def simulate_thinning(spec: IntensitySpec, horizon: float, rng, max_events: int = 100_000) -> EventLog:
    """Simulate the process on ``(0, horizon]`` by Ogata thinning.

    The dominating rate on each lookahead window (up to the next day
    boundary) is ``max R * sum_j max g(. - a_j) * depletion`` and is
    recomputed after every candidate.

    Raises
    ------
    EventCapExceeded
        When more than ``max_events`` infections occur.
    """
    rng = np.random.default_rng(rng)
    g = spec.g
    anchors = list(spec.anchor(spec.seeds))
    events: list = []
    n_total = spec.seeds.size
    S0 = spec.population
    t = 0.0
    while t < horizon:
        w_end = min(math.floor(t) + 1.0, horizon)
        a = np.asarray(anchors)
        depl = 1.0 if S0 is None else max(S0 - n_total, 0.0) / S0
        R_here = float(spec.R_at(w_end))
        bound = R_here * depl * float(np.sum(g.max_on(t - a, w_end - a))) if a.size else 0.0
        if not np.isfinite(bound):
            raise ValueError("generation density is unbounded near 0; choose a shape >= 1")
        if bound <= 0:
            t = w_end
            continue
        cand = t + rng.exponential(1.0 / bound)
        if cand > w_end:
            t = w_end
            continue
        t = cand
        lam = R_here * depl * float(np.sum(g.pdf(t - a)))
        if rng.uniform(0.0, bound) < lam:
            events.append(t)
            n_total += 1
            anchors.append(float(spec.anchor(t)))
            if len(events) > max_events:
                raise EventCapExceeded(
                    f"more than {max_events} events before t={t:.3f}; the process is exploding"
                )
    times = list(spec.seeds) + events
    marks = ["seed"] * spec.seeds.size + ["infection"] * len(events)
    inf_times = np.asarray(times)
    for proc in spec.observations:
        obs = _observation_events(rng, inf_times, proc, horizon)
        times += list(obs)
        marks += [proc.name] * obs.size
    return EventLog(np.asarray(times), marks)


# --- vectorized batches ---------------------------------------------------


def simulate_exponential_batch(R, rate: float, n_seeds: int, T: int, n_runs: int, rng, alignment="exact"):
    """Daily infection counts for many runs with kernel ``rate * exp(-rate u)``.

    All ``n_seeds`` seeds sit at time 0. Between events the intensity only
    decays, so the current intensity dominates until the next event or day
    boundary. Returns an ``(n_runs, T)`` integer array.
    """
    rng = np.random.default_rng(rng)
    R = np.broadcast_to(np.atleast_1d(np.asarray(R, dtype=float)), (T,)) if np.ndim(R) == 0 else np.asarray(R, float)
    if R.size < T:
        R = np.concatenate([R, np.full(T - R.size, R[-1])])
    if alignment not in ("exact", "daily"):
        raise ValueError("alignment must be 'exact' or 'daily'")
    counts = np.zeros((n_runs, T), dtype=np.int64)
    S = np.full(n_runs, rate * n_seeds, dtype=float)  # sum_j rate * exp(-rate (t - a_j))
    for k in range(T):
        t = np.zeros(n_runs)  # time since the start of day k+1
        pending = np.zeros(n_runs)
        active = np.ones(n_runs, bool)
        while np.any(active):
            idx = np.nonzero(active)[0]
            bound = R[k] * S[idx]
            with np.errstate(divide="ignore"):
                dt = np.where(bound > 0, rng.exponential(1.0, idx.size) / np.where(bound > 0, bound, 1.0), np.inf)
            over = t[idx] + dt > 1.0
            # runs whose next candidate falls past the day boundary
            done = idx[over]
            S[done] *= np.exp(-rate * (1.0 - t[done]))
            active[done] = False
            go = idx[~over]
            step = dt[~over]
            S[go] *= np.exp(-rate * step)
            t[go] += step
            accept = rng.uniform(0.0, 1.0, go.size) * bound[~over] < R[k] * S[go]
            acc = go[accept]
            counts[acc, k] += 1
            if alignment == "exact":
                S[acc] += rate
            else:
                pending[acc] += 1
        if alignment == "daily":
            S += rate * pending
    return counts


def simulate_frozen_saturation(S0, I0, R_u, L, n_runs: int, rng, horizon: float = 1.0) -> np.ndarray:
    """Final counts ``I(horizon)`` of the saturating process with frozen load.

    The intensity is ``(S0 - I(s)) / S0 * R_u * L`` starting from ``I(0) =
    I0``; ``S0 - I0`` must be a nonnegative integer. Thinning uses the
    initial intensity as the dominating rate; the run of rejected
    candidates before each acceptance is geometric and is drawn in one
    step, so the cost is one draw per accepted event.
    """
    rng = np.random.default_rng(rng)
    n = S0 - I0
    if n < 0 or abs(n - round(n)) > 1e-9:
        raise ValueError("S0 - I0 must be a nonnegative integer")
    n = int(round(n))
    lam_max = R_u * L * n / S0
    if lam_max <= 0 or n == 0:
        return np.full(n_runs, float(I0))
    total = rng.poisson(lam_max * horizon, n_runs)
    used = np.zeros(n_runs, dtype=np.int64)
    k = np.zeros(n_runs, dtype=np.int64)
    active = total > 0
    while np.any(active):
        idx = np.nonzero(active)[0]
        p = (n - k[idx]) / n
        gap = rng.geometric(p)
        ok = used[idx] + gap <= total[idx]
        hit = idx[ok]
        used[hit] += gap[ok]
        k[hit] += 1
        active[idx[~ok]] = False
        active[hit] = k[hit] < n
    return I0 + k.astype(float)


@dataclass(frozen=True)
class ZCheck:
    """Monte-Carlo estimate, target value and z-score."""

    name: str
    estimate: float
    target: float
    se: float

    @property
    def z(self) -> float:
        if self.se == 0:
            return 0.0 if self.estimate == self.target else math.copysign(math.inf, self.estimate - self.target)
        return (self.estimate - self.target) / self.se


def verify_population_lemma(S0, I0, R_u, L, n_runs: int, rng, method: str = "batch") -> ZCheck:
    """Compare simulated ``E[I(1)] - I0`` with ``(S0 - I0)(1 - exp(-R_u L / S0))``.

    ``method="ogata"`` runs the literal per-run thinning loop instead of
    the batched one (much slower; for cross-checks).
    """
    rng = np.random.default_rng(rng)
    if not 0 <= I0 <= S0:
        raise ValueError("need 0 <= I0 <= S0")
    if method == "batch":
        final = simulate_frozen_saturation(S0, I0, R_u, L, n_runs, rng)
    elif method == "ogata":
        final = np.empty(n_runs)
        lam0 = R_u * L / S0
        for r in range(n_runs):
            i, s = float(I0), 0.0
            bound = lam0 * (S0 - I0)
            while bound > 0:
                s += rng.exponential(1.0 / bound)
                if s > 1.0:
                    break
                if rng.uniform(0.0, bound) < lam0 * (S0 - i):
                    i += 1.0
                bound = lam0 * (S0 - i)
            final[r] = i
    else:
        raise ValueError("method must be 'batch' or 'ogata'")
    new = final - I0
    target = (S0 - I0) * -math.expm1(-R_u * L / S0)
    se = float(new.std(ddof=1) / math.sqrt(n_runs)) if n_runs > 1 else math.inf
    return ZCheck(f"lemma S0={S0} I0={I0} R_u={R_u} L={L}", float(new.mean()), target, se)


def verify_observation_intensity(alpha: float, delay: ContinuousLagDensity, n_infections: int, rng,
                                 horizon: float | None = None) -> ZCheck:
    """Mean observations per infection against ``alpha`` (times the delay mass within the horizon)."""
    rng = np.random.default_rng(rng)
    if horizon is None:
        horizon = float(delay.ppf(1 - 1e-12))
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    per = _per_infection_counts(rng, alpha, delay, n_infections, horizon)
    target = alpha * float(delay.cdf(horizon))
    se = float(per.std(ddof=1) / math.sqrt(n_infections)) if per.std() > 0 else 0.0
    return ZCheck(f"observations per infection, alpha={alpha}", float(per.mean()), target, se)


def _per_infection_counts(rng, alpha, delay, n, horizon):
    gmax = float(delay.max_on(0.0, horizon))
    cand = rng.poisson(alpha * gmax * horizon, n)
    owner = np.repeat(np.arange(n), cand)
    lag = rng.uniform(0.0, horizon, owner.size)
    keep = rng.uniform(0.0, gmax, owner.size) < delay.pdf(lag)
    return np.bincount(owner[keep], minlength=n).astype(float)


def _ratio_check(name, x, target) -> ZCheck:
    """Variance-to-mean ratio with a delta-method standard error."""
    x = np.asarray(x, dtype=float)
    n = x.size
    m = x.mean()
    c = x - m
    v = np.mean(c**2)
    m3, m4 = np.mean(c**3), np.mean(c**4)
    ratio = v / m
    # gradient of v/m with respect to (mean, variance)
    var_m = v / n
    var_v = (m4 - v**2) / n
    cov_mv = m3 / n
    se = math.sqrt(max(var_v / m**2 + v**2 * var_m / m**4 - 2 * v * cov_mv / m**3, 0.0))
    return ZCheck(name, float(ratio * n / (n - 1)), float(target), se)


def offspring_dispersion(R: float, g: ContinuousLagDensity, n_infectors: int, rng,
                         gamma_rate: float | None = None, horizon: float | None = None) -> ZCheck:
    """Offspring variance-to-mean ratio of single infections.

    Each infector at time 0 produces offspring through the intensity
    ``nu * R * g(t)``, simulated by thinning; ``nu = 1`` gives Poisson
    offspring (ratio 1) and ``nu ~ Gamma(gamma_rate, gamma_rate)`` gives
    the gamma-mixed ratio ``1 + R / gamma_rate``.
    """
    rng = np.random.default_rng(rng)
    if horizon is None:
        horizon = float(g.ppf(1 - 1e-12))
    nu = np.ones(n_infectors) if gamma_rate is None else rng.gamma(gamma_rate, 1.0 / gamma_rate, n_infectors)
    gmax = float(g.max_on(0.0, horizon))
    if not np.isfinite(gmax):
        raise ValueError("generation density is unbounded near 0")
    cand = rng.poisson(nu * R * gmax * horizon)
    owner = np.repeat(np.arange(n_infectors), cand)
    lag = rng.uniform(0.0, horizon, owner.size)
    keep = rng.uniform(0.0, gmax, owner.size) < g.pdf(lag)
    counts = np.bincount(owner[keep], minlength=n_infectors)
    mass = float(g.cdf(horizon))
    target = 1.0 if gamma_rate is None else 1.0 + R * mass / gamma_rate
    label = "poisson" if gamma_rate is None else f"gamma-mixed, rate {gamma_rate}"
    return _ratio_check(f"offspring dispersion, {label}", counts, target)


def per_infector_offspring(counts_by_day, R: float, g: DiscretePmf, d: float, n_runs: int, rng):
    """New infections built infector by infector, for the dispersion law.

    Given integer infection counts on past days (most recent last), each
    infector on day ``s`` independently produces offspring on the next day
    ``t`` with mean ``R g_{t-s}`` and variance ``d`` times that mean:
    Poisson for ``d = 1``, negative binomial for ``d > 1`` and gamma for
    ``d < 1``. Returns ``n_runs`` draws of the summed offspring ``I_t``.
    """
    rng = np.random.default_rng(rng)
    counts = np.asarray(counts_by_day, dtype=np.int64)
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative integers")
    w = g.full()
    total = np.zeros(n_runs)
    for lag, c in enumerate(counts[::-1], start=1):
        if lag >= w.size or c == 0 or w[lag] == 0:
            continue
        mean = R * w[lag]
        # per-infector draws, summed over the c infectors of that day
        if d == 1.0:
            draws = rng.poisson(mean, (n_runs, c))
        elif d > 1.0:
            draws = rng.negative_binomial(mean / (d - 1.0), 1.0 / d, (n_runs, c))
        else:
            draws = rng.gamma(mean / d, d, (n_runs, c))
        total += draws.sum(axis=1)
    return total


def dispersion_check(draws, d: float, name: str = "") -> ZCheck:
    """Variance-to-mean ratio of ``draws`` against ``d``."""
    return _ratio_check(name or f"dispersion d={d}", draws, d)


# --- quadrature oracle ------------------------------------------------------


def renewal_mean_quadrature(R, g: ContinuousLagDensity, seeds, t_max: float, h: float = 0.01):
    """Expected cumulative infections ``E[N(t)]`` of the exact-alignment process.

    Solves ``m(t) = R(t) [sum_j g(t - s_j) + int_0^t g(t - u) m(u) du]`` for
    the expected intensity on a grid of spacing ``h`` with the trapezoid
    rule, then integrates. Returns ``(grid, E[N])`` where ``E[N]`` counts
    seeds too. No population depletion.
    """
    seeds = np.atleast_1d(np.asarray(seeds, dtype=float))
    n = int(round(t_max / h))
    grid = np.linspace(0.0, n * h, n + 1)
    spec = IntensitySpec(R, g, seeds)
    Rg = spec.R_at(np.maximum(grid, 1e-12))
    kern = g.pdf(grid)
    kern = np.where(np.isfinite(kern), kern, 0.0)
    with np.errstate(divide="ignore"):
        forcing = g.pdf(grid[:, None] - seeds[None, :])
    forcing = np.where(np.isfinite(forcing), forcing, 0.0).sum(axis=1)
    m = np.zeros(n + 1)
    m[0] = Rg[0] * forcing[0]
    for i in range(1, n + 1):
        integral = h * (0.5 * kern[i] * m[0] + np.dot(kern[i - 1:0:-1], m[1:i]))
        # the u = t endpoint carries g(0), implicit in m[i]
        m[i] = Rg[i] * (forcing[i] + integral) / (1.0 - Rg[i] * 0.5 * h * kern[0])
    cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (m[1:] + m[:-1]))])
    return grid, seeds.size + cum


def exponential_renewal_mean(R: float, rate: float, n_seeds: int, t):
    """Closed-form ``E[N(t)]`` for constant ``R``, kernel ``rate e^{-rate u}``, seeds at 0."""
    t = np.asarray(t, dtype=float)
    k = rate * (1.0 - R)
    if abs(k) < 1e-12:
        return n_seeds * (1.0 + R * rate * t)
    return n_seeds * (1.0 + R * rate * (1.0 - np.exp(-k * t)) / k)


# --- suites -------------------------------------------------------------------

# (S0, I0, R_u, L); saturation R_u * L / S0 spans 0.1 to 10
LEMMA_SETTINGS = (
    (1000, 100, 1.0, 100.0),
    (1000, 100, 1.0, 1000.0),
    (1000, 100, 1.0, 10000.0),
    (1000, 100, 2.0, 50.0),
    (500, 0, 0.5, 100.0),
    (200, 20, 1.5, 200.0),
    (2000, 1500, 2.5, 800.0),
    (100, 10, 3.0, 100.0),
    (50, 20, 2.0, 25.0),
    (800, 0, 4.0, 1000.0),
)

DISPERSIONS = (0.5, 1.0, 2.0)


def population_lemma_suite(n_runs: int, rng, settings=LEMMA_SETTINGS) -> list[ZCheck]:
    rng = np.random.default_rng(rng)
    return [verify_population_lemma(*s, n_runs=n_runs, rng=rng) for s in settings]


def dispersion_suite(n_runs: int, rng, R: float = 1.5, dispersions=DISPERSIONS) -> list[ZCheck]:
    """Variance-to-mean ratio of one latent step, pooled and infector by infector.

    The latent step draws ``I_t`` given fixed past infections; the
    per-infector construction sums independent offspring with the same
    dispersion, so both ratios should equal ``d``.
    """
    from .renewal import simulate_latent_batch

    rng = np.random.default_rng(rng)
    g = discretize(ContinuousLagDensity.from_mean_sd("gamma", 6.5, 4.3), 30)
    past = np.full(10, 20)
    out = []
    for d in dispersions:
        step = simulate_latent_batch(past.astype(float), [R], g, d, n_runs, rng)[:, 0]
        out.append(dispersion_check(step, d, f"latent step d={d}"))
        kids = per_infector_offspring(past, R, g, d, n_runs, rng)
        out.append(dispersion_check(kids, d, f"per-infector offspring d={d}"))
    return out


def renewal_suite(n_runs: int, rng, R: float = 1.3, rate: float = 0.4, n_seeds: int = 5, T: int = 8) -> list[ZCheck]:
    """Simulated means against the discrete recursion and the closed form.

    Daily alignment is compared with ``propagate_expected`` under the
    interval-mass weights of the exponential kernel, exact alignment with
    the closed-form cumulative mean.
    """
    from .renewal import propagate_expected

    rng = np.random.default_rng(rng)
    out = []
    daily = simulate_exponential_batch(R, rate, n_seeds, T, n_runs, rng, alignment="daily")
    k = np.arange(1, 200)
    w = np.exp(-rate * (k - 1)) * -np.expm1(-rate)
    expected = propagate_expected([float(n_seeds)], np.full(T, R), DiscretePmf(w / w.sum())).values
    for t in (1, T // 2, T):
        x = daily[:, t - 1]
        out.append(ZCheck(f"daily alignment mean, day {t}", float(x.mean()), float(expected[t - 1]),
                          float(x.std(ddof=1) / math.sqrt(n_runs))))
    exact = simulate_exponential_batch(R, rate, n_seeds, T, n_runs, rng, alignment="exact").sum(axis=1) + n_seeds
    out.append(ZCheck(f"exact alignment E[N({T})]", float(exact.mean()),
                      float(exponential_renewal_mean(R, rate, n_seeds, T)),
                      float(exact.std(ddof=1) / math.sqrt(n_runs))))
    return out


def observation_suite(n_runs: int, rng) -> list[ZCheck]:
    rng = np.random.default_rng(rng)
    delay = ContinuousLagDensity.from_mean_sd("gamma", 10.0, 5.0)
    return [verify_observation_intensity(a, delay, n_runs, rng) for a in (0.01, 0.3, 1.0)]


def offspring_suite(n_runs: int, rng, R: float = 2.0) -> list[ZCheck]:
    rng = np.random.default_rng(rng)
    g = ContinuousLagDensity.from_mean_sd("gamma", 6.5, 4.3)
    return [offspring_dispersion(R, g, n_runs, rng), offspring_dispersion(R, g, n_runs, rng, gamma_rate=2.0)]


SUITES = {
    "population_lemma": population_lemma_suite,
    "dispersion": dispersion_suite,
    "renewal": renewal_suite,
    "observation": observation_suite,
    "offspring": offspring_suite,
}


def run_suites(n_runs: int = 100_000, seed: int = 0, names=None) -> dict:
    """Run the named suites (all by default) with independent streams.

    Returns a dict of suite name to list of :class:`ZCheck`.
    """
    names = list(SUITES) if names is None else list(names)
    unknown = sorted(set(names) - set(SUITES))
    if unknown:
        raise ValueError(f"unknown suite(s): {', '.join(unknown)}")
    streams = np.random.SeedSequence(seed).spawn(len(SUITES))
    order = {name: k for k, name in enumerate(SUITES)}
    return {name: SUITES[name](n_runs, np.random.default_rng(streams[order[name]])) for name in names}
