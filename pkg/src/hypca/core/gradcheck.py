"""Central finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tape, Tensor, mul, no_tape, sum_along


def grad_check(fn, wrt, step: float = 1e-5, max_coords: int | None = None,
               seed: int = 0, skip_kinks: bool = False) -> float:
    """Compare analytic and central-difference gradients of a closure.

    `fn` takes no arguments and returns a Tensor; it must be a deterministic
    function of the tensors in `wrt` (perturbations are applied in place).
    Non-scalar outputs are reduced with a fixed random projection so one
    backward pass covers every output coordinate.

    Returns max over checked coordinates of |analytic - fd| / max(1, |fd|).
    When `max_coords` is set, at most that many coordinates per tensor are
    probed (seeded subsample); otherwise all coordinates are.

    The check is only meaningful where the closure is differentiable. Small
    closures satisfy that by input construction; deep compositions cannot
    (relu zeros and pooling ties arise internally), so `skip_kinks` screens
    each coordinate by comparing the two one-sided differences and skips the
    points where they disagree, i.e. where no two-sided derivative exists.
    """
    rng = np.random.default_rng(seed)
    with no_tape():
        ref = fn()
    proj = rng.standard_normal(ref.data.shape) if ref.data.size > 1 else np.ones_like(ref.data)

    def scalar_value() -> float:
        with no_tape():
            return float((fn().data * proj).sum())

    for t in wrt:
        t.grad = np.zeros_like(t.data)
    with Tape() as tape:
        out = fn()
        loss = sum_along(mul(out, proj))
        tape.backward(loss)
    analytic = [np.zeros_like(t.data) if t.grad is None else np.array(t.grad, dtype=np.float64)
                for t in wrt]

    base = scalar_value() if skip_kinks else None
    worst = 0.0
    for t, ana in zip(wrt, analytic):
        flat = t.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for j in coords:
            orig = flat[j]
            flat[j] = orig + step
            f_plus = scalar_value()
            flat[j] = orig - step
            f_minus = scalar_value()
            flat[j] = orig
            fd = (f_plus - f_minus) / (2.0 * step)
            if skip_kinks:
                fd_right = (f_plus - base) / step
                fd_left = (base - f_minus) / step
                scale = max(1.0, abs(fd_right), abs(fd_left))
                if abs(fd_right - fd_left) > 1e-3 * scale:
                    continue
            err = abs(ana.reshape(-1)[j] - fd) / max(1.0, abs(fd))
            worst = max(worst, err)
    return worst
