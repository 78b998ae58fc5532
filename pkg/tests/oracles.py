"""Independent reference implementations used by the tests."""

import numpy as np


def renewal_double_loop(seeds, R, g_weights, first_lag=1):
    """Expected renewal recursion written as explicit loops over days and lags."""
    seeds = [float(s) for s in seeds]
    n_seed = len(seeds)
    x = seeds + [0.0] * len(R)
    for t in range(len(R)):
        pos = n_seed + t
        load = 0.0
        for k, w in enumerate(g_weights):
            lag = first_lag + k
            src = pos - lag
            if src >= 0:
                load += x[src] * w
        x[pos] = R[t] * load
    return np.array(x[n_seed:])


def convolve_loop(values, delay_weights, alpha):
    """``alpha * sum_{s <= t} values[s] * delay[t - s]`` by explicit loops."""
    out = []
    for t in range(len(values)):
        acc = 0.0
        for s in range(t + 1):
            lag = t - s
            if lag < len(delay_weights):
                acc += values[s] * delay_weights[lag]
        out.append(alpha * acc)
    return np.array(out)


def random_renewal_instance(rng, T_max=50, K_max=15):
    T = int(rng.integers(1, T_max + 1))
    K = int(rng.integers(1, K_max + 1))
    w = rng.uniform(0.0, 1.0, K)
    w = w / w.sum()
    n_seed = int(rng.integers(1, 8))
    seeds = rng.uniform(0.0, 50.0, n_seed)
    R = rng.uniform(0.3, 2.5, T)
    return seeds, R, w
