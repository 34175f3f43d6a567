"""Mini-batch Adam with lazy row updates for the embedding tables.

Sparse mode skips embedding rows whose batch gradient is identically zero:
their moments are left untouched and the bias correction uses the shared
global step count, so a run in which every row is touched every step is
bit-identical to dense mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError, ShapeError
from .model import TABLE_NAMES, GradientSet, Params

_EMBEDDING_TABLES = ("E", "E_UC", "E_IC")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    alpha: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Params, alpha: float = 1e-4, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(m={k: np.zeros_like(t) for k, t in params.tables().items()},
                   v={k: np.zeros_like(t) for k, t in params.tables().items()},
                   t=0, alpha=alpha, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: Params, grads: GradientSet, state: AdamState,
              sparse: bool = True) -> None:
    """One in-place bias-corrected Adam update.

    In sparse mode the three embedding tables update only their touched rows;
    dense mode updates everything and exists as the oracle for tests.
    """
    for name in TABLE_NAMES:
        g = getattr(grads, name)
        p = getattr(params, name)
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
        if not np.all(np.isfinite(g)):
            bad = int(np.sum(~np.isfinite(g)))
            raise NonFiniteError(f"{bad} non-finite gradient entries in {name} at step {state.t + 1}")

    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for name in TABLE_NAMES:
        g = getattr(grads, name)
        p = getattr(params, name)
        m, v = state.m[name], state.v[name]
        if sparse and name in _EMBEDDING_TABLES:
            rows = grads.touched_rows(name)
            if len(rows) == 0:
                continue
            gr = g[rows]
            m[rows] = state.beta1 * m[rows] + (1.0 - state.beta1) * gr
            v[rows] = state.beta2 * v[rows] + (1.0 - state.beta2) * gr * gr
            m_hat = m[rows] / c1
            v_hat = v[rows] / c2
            p[rows] -= state.alpha * m_hat / (np.sqrt(v_hat) + state.eps)
        else:
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * g * g
            p -= state.alpha * (m / c1) / (np.sqrt(v / c2) + state.eps)
