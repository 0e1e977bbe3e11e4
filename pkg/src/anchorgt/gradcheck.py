"""Central finite-difference check of the transformer block's analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import LayerParams, transformer_block_backward, transformer_block_forward
from .encoding import ReceptiveField

# Relative error is |a - n| / max(|a|, |n|, REL_FLOOR): below the floor the
# comparison is absolute, since a central difference of step 1e-5 carries
# up to ~1e-8 of truncation and rounding error regardless of the true
# gradient.
REL_FLOOR = 1e-3


@dataclass
class GradCheckResult:
    max_rel_err: float
    worst: str
    checked: int

    def passed(self, tol: float = 1e-5) -> bool:
        return self.max_rel_err < tol


def relative_error(analytic: float, numeric: float, floor: float = REL_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def check_block_gradients(
    x: np.ndarray, rf: ReceptiveField, p: LayerParams, upstream: np.ndarray, step: float = 1e-5
) -> GradCheckResult:
    """Compare every coordinate of the input and parameter gradients."""

    def loss(xx, pp):
        return float(np.sum(upstream * transformer_block_forward(xx, rf, pp)))

    grad_x, grad_p = transformer_block_backward(x, rf, p, upstream)
    worst, where, count = 0.0, "", 0

    def visit(name, analytic, numeric):
        nonlocal worst, where, count
        err = relative_error(analytic, numeric)
        count += 1
        if err > worst:
            worst, where = err, name

    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += step
        xm[idx] -= step
        visit(f"x{list(idx)}", grad_x[idx], (loss(xp, p) - loss(xm, p)) / (2 * step))

    for name, arr in p.named().items():
        g = getattr(grad_p, name)
        for idx in np.ndindex(arr.shape):
            pp, pm = p.copy(), p.copy()
            getattr(pp, name)[idx] += step
            getattr(pm, name)[idx] -= step
            visit(f"{name}{list(idx)}", g[idx], (loss(x, pp) - loss(x, pm)) / (2 * step))
    return GradCheckResult(worst, where, count)


def randomize(p: LayerParams, rng: np.random.Generator, scale: float = 0.3) -> LayerParams:
    """Perturb every parameter (LayerNorm included) so no gradient is trivially zero."""
    out = p.copy()
    for arr in out.named().values():
        arr += rng.normal(0.0, scale, arr.shape)
    return out
