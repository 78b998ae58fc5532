"""Flat parameter layouts with transforms to unconstrained space."""

from __future__ import annotations

from dataclasses import dataclass

import jax.numpy as jnp
import numpy as np

TRANSFORMS = ("real", "positive", "corr_cholesky")


@dataclass(frozen=True)
class Block:
    name: str
    shape: tuple
    transform: str = "real"

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.transform == "corr_cholesky" and (len(self.shape) != 2 or self.shape[0] != self.shape[1]):
            raise ValueError("corr_cholesky blocks must be square")

    @property
    def size(self) -> int:
        """Number of unconstrained coordinates."""
        if self.transform == "corr_cholesky":
            q = self.shape[0]
            return q * (q - 1) // 2
        return int(np.prod(self.shape, dtype=int))


def corr_cholesky_constrain(y, q: int):
    """Map ``q(q-1)/2`` reals to the Cholesky factor of a correlation matrix.

    Canonical partial correlations ``z = tanh(y)`` are filled row by row.
    Returns ``(L, log_jacobian)``.
    """
    z = jnp.tanh(y)
    log_jac = jnp.sum(jnp.log1p(-(z**2)))
    rows = [jnp.zeros(q).at[0].set(1.0)]
    k = 0
    for i in range(1, q):
        row = jnp.zeros(q)
        sum_sq = 0.0
        for j in range(i):
            if j > 0:
                log_jac = log_jac + 0.5 * jnp.log1p(-sum_sq)
            val = z[k] * jnp.sqrt(1.0 - sum_sq)
            row = row.at[j].set(val)
            sum_sq = sum_sq + val**2
            k += 1
        row = row.at[i].set(jnp.sqrt(1.0 - sum_sq))
        rows.append(row)
    return jnp.stack(rows), log_jac


def corr_cholesky_unconstrain(L) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    q = L.shape[0]
    out = []
    for i in range(1, q):
        sum_sq = 0.0
        for j in range(i):
            z = L[i, j] / np.sqrt(1.0 - sum_sq)
            out.append(np.arctanh(np.clip(z, -1 + 1e-15, 1 - 1e-15)))
            sum_sq += L[i, j] ** 2
    return np.asarray(out)


class ParamLayout:
    """Ordered named blocks packed into one unconstrained vector.

    Ordering is the insertion order, so identical construction gives an
    identical layout.
    """

    def __init__(self, blocks=()):
        self.blocks: list[Block] = []
        self._slices: dict[str, slice] = {}
        self.size = 0
        for b in blocks:
            self.add(b)

    def add(self, block: Block) -> Block:
        if block.name in self._slices:
            raise ValueError(f"duplicate block {block.name!r}")
        self._slices[block.name] = slice(self.size, self.size + block.size)
        self.blocks.append(block)
        self.size += block.size
        return block

    def extend(self, other: "ParamLayout", prefix: str = "") -> None:
        for b in other.blocks:
            self.add(Block(prefix + b.name, b.shape, b.transform))

    def __contains__(self, name) -> bool:
        return name in self._slices

    def slice(self, name) -> slice:
        return self._slices[name]

    def block(self, name) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def unpack(self, theta, prefix: str = ""):
        """Constrained values of every block and the total log-Jacobian."""
        out = {}
        log_jac = 0.0
        for b in self.blocks:
            if prefix and not b.name.startswith(prefix):
                continue
            raw = theta[self._slices[b.name]]
            if b.transform == "real":
                out[b.name] = raw.reshape(b.shape)
            elif b.transform == "positive":
                out[b.name] = jnp.exp(raw).reshape(b.shape)
                log_jac = log_jac + jnp.sum(raw)
            else:
                L, lj = corr_cholesky_constrain(raw, b.shape[0])
                out[b.name] = L
                log_jac = log_jac + lj
        return out, log_jac

    def pack(self, values: dict) -> np.ndarray:
        """Inverse of :meth:`unpack` (constrained dict to unconstrained vector)."""
        theta = np.zeros(self.size)
        for b in self.blocks:
            v = np.asarray(values[b.name], dtype=float)
            if b.transform == "real":
                flat = v.reshape(-1)
            elif b.transform == "positive":
                if np.any(v <= 0):
                    raise ValueError(f"block {b.name!r} must be positive")
                flat = np.log(v).reshape(-1)
            else:
                flat = corr_cholesky_unconstrain(v)
            theta[self._slices[b.name]] = flat
        return theta

    def names(self) -> list[str]:
        """One name per unconstrained coordinate."""
        names = []
        for b in self.blocks:
            if b.transform == "corr_cholesky":
                names += [f"{b.name}.cpc[{k}]" for k in range(b.size)]
            elif b.size == 1 and b.shape in ((), (1,)):
                names.append(b.name)
            else:
                for idx in np.ndindex(*b.shape):
                    names.append(f"{b.name}[{','.join(map(str, idx))}]")
        return names

    def constrained_names(self) -> list[str]:
        names = []
        for b in self.blocks:
            if b.size == 1 and b.shape in ((), (1,)):
                names.append(b.name)
            else:
                for idx in np.ndindex(*b.shape):
                    names.append(f"{b.name}[{','.join(map(str, idx))}]")
        return names
