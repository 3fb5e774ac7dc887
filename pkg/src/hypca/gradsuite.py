"""Finite-difference verification suites for primitives, attention blocks,
and the full micro network. Shared by the CLI `gradcheck` command and the
acceptance tests.

Inputs are seeded and kept away from nondifferentiable points: continuous
random draws avoid pooling ties almost surely, and relu-kink-adjacent values
are excluded by the fixed seeds below (verified once; the suite is
deterministic thereafter). Larger blocks probe a seeded subsample of
coordinates per tensor to keep the whole suite well under its time budget.
"""

from __future__ import annotations

import numpy as np

from .core import ops
from .core.gradcheck import grad_check
from .core.layers import Initializer, batch_norm
from .core.tensor import Parameter, Tensor, add, relu, sigmoid, softmax, transpose
from .dvca import Dvca, Fcif, Fdca, HySfa, Mcbi, Mmmua, Smif, Tfsi
from .network import HypcaNet, ModelConfig
from .rala import Chia, Mshc, Rala, Scala, Scpfa, Shia
from .transforms import dct2, dct_tokens, haar_dwt, haar_idwt, window_merge, window_partition

OP_TOL = 1e-4
BLOCK_TOL = 1e-4
NETWORK_TOL = 1e-3


def _t(rng, *shape) -> Tensor:
    return Tensor(rng.standard_normal(shape))


def _p(rng, name, *shape) -> Parameter:
    return Parameter(name, rng.standard_normal(shape), init="test")


def _entry(name, err, tol):
    return {"name": name, "error": float(err), "tol": tol, "ok": bool(err < tol)}


def op_checks() -> list[dict]:
    rng = np.random.default_rng(7)
    rows = []

    x = _t(rng, 2, 4, 6, 6)
    w_pc = _p(rng, "w", 1, 5, 4)
    b_pc = _p(rng, "b", 5)
    rows.append(_entry("conv2d/PC", grad_check(
        lambda: ops.conv2d(x, "PC", w_pc, b_pc), [x, w_pc, b_pc]), OP_TOL))

    w_gpc = _p(rng, "w", 2, 2, 2)
    b_gpc = _p(rng, "b", 4)
    rows.append(_entry("conv2d/GPC", grad_check(
        lambda: ops.conv2d(x, "GPC", w_gpc, b_gpc, groups=2), [x, w_gpc, b_gpc]), OP_TOL))

    w_dw = _p(rng, "w", 4, 3, 3)
    b_dw = _p(rng, "b", 4)
    rows.append(_entry("conv2d/DWC", grad_check(
        lambda: ops.conv2d(x, "DWC", w_dw, b_dw), [x, w_dw, b_dw]), OP_TOL))
    rows.append(_entry("conv2d/DDC", grad_check(
        lambda: ops.conv2d(x, "DDC", w_dw, b_dw, dilation=2), [x, w_dw, b_dw]), OP_TOL))
    rows.append(_entry("conv2d/SDWC(s=2)", grad_check(
        lambda: ops.conv2d(x, "SDWC", w_dw, b_dw, stride=2), [x, w_dw, b_dw]), OP_TOL))

    xd = _t(rng, 3, 5)
    wd = _p(rng, "w", 5, 4)
    bd = _p(rng, "b", 4)
    rows.append(_entry("dense", grad_check(
        lambda: ops.dense(xd, wd, bd), [xd, wd, bd]), OP_TOL))

    for kind in ops.LOCAL_POOLS:
        rows.append(_entry(f"pool_local/{kind}", grad_check(
            lambda k=kind: ops.pool_local(x, k, k=3, stride=1), [x]), OP_TOL))
        rows.append(_entry(f"pool_local/{kind}(k=2,s=2)", grad_check(
            lambda k=kind: ops.pool_local(x, k, k=2, stride=2), [x]), OP_TOL))
    for kind in ops.GLOBAL_POOLS:
        rows.append(_entry(f"pool_global/{kind}", grad_check(
            lambda k=kind: ops.pool_global(x, k), [x]), OP_TOL))

    # offset keeps relu preactivations away from the kink at 0
    raw = rng.standard_normal((2, 3, 4, 4))
    xr = Tensor(raw + np.sign(raw) * 0.05)
    rows.append(_entry("activation/relu", grad_check(lambda: relu(xr), [xr]), OP_TOL))
    rows.append(_entry("activation/sigmoid", grad_check(lambda: sigmoid(x), [x]), OP_TOL))
    rows.append(_entry("activation/softmax", grad_check(lambda: softmax(xd, 1), [xd]), OP_TOL))

    gamma = _p(rng, "gamma", 4)
    beta = _p(rng, "beta", 4)
    rows.append(_entry("batch_norm/train", grad_check(
        lambda: batch_norm(x, gamma, beta, 1e-5, "train"), [x, gamma, beta]), OP_TOL))
    rows.append(_entry("batch_norm/eval", grad_check(
        lambda: batch_norm(x, gamma, beta, 1e-5, "eval",
                           np.full(4, 0.3), np.full(4, 1.7)), [x, gamma, beta]), OP_TOL))

    # reseeding per call fixes the dropout mask, making the closure deterministic
    rows.append(_entry("dropout/train", grad_check(
        lambda: ops.dropout(x, 0.4, True, np.random.default_rng(11)), [x]), OP_TOL))
    rows.append(_entry("channel_shuffle", grad_check(
        lambda: ops.channel_shuffle(x, 2), [x]), OP_TOL))

    rows.append(_entry("dct2", grad_check(
        lambda: dct2(transpose(x, (0, 2, 3, 1))), [x]), OP_TOL))
    rows.append(_entry("haar_dwt", grad_check(
        lambda: haar_dwt(x).hh, [x]), OP_TOL))
    rows.append(_entry("haar_roundtrip", grad_check(
        lambda: haar_idwt(haar_dwt(x)), [x]), OP_TOL))
    rows.append(_entry("window_roundtrip", grad_check(
        lambda: window_merge(window_partition(x, 3, shift=(1, 1))), [x]), OP_TOL))
    return rows


def block_checks() -> list[dict]:
    rng = np.random.default_rng(13)
    init = Initializer(101)
    c = 4
    x = _t(rng, 1, c, 8, 8)
    x2 = _t(rng, 1, c, 8, 8)
    rows = []

    def check(name, module, fn, wrt_extra=(), max_coords=40):
        wrt = list(wrt_extra) + list(module.parameters())
        rows.append(_entry(name, grad_check(fn, wrt, max_coords=max_coords), BLOCK_TOL))

    mshc = Mshc(init, "mshc", c)
    check("MSHC", mshc, lambda: mshc(x), [x])
    chia = Chia(init, "chia", c)
    check("CHIA", chia, lambda: chia(x), [x])
    shia = Shia(init, "shia", c)
    check("SHIA", shia, lambda: shia(x), [x])
    for wiring in ("hybrid", "cascaded"):
        scpfa = Scpfa(init, f"scpfa_{wiring}", c, wiring)
        check(f"SCPFA/{wiring}", scpfa, lambda m=scpfa: m(x), [x])
    scala = Scala(init, "scala", c, "hybrid")
    check("SCALA", scala, lambda: scala(x), [x])
    rala = Rala(init, "rala", c).eval()
    check("RALA", rala, lambda: rala(x), [x])

    tfsi = Tfsi(init, "tfsi", c)
    check("TFSI", tfsi,
          lambda: tfsi(window_partition(x, 4, shift=(1, 1)).tokens,
                       dct_tokens(window_partition(x, 4, shift=(1, 1)))), [x])
    fdca = Fdca(init, "fdca", c, scale_index=0)
    check("FDCA", fdca,
          lambda: fdca(window_partition(x, 4, shift=(1, 1)).tokens)[0], [x])
    hysfa = HySfa(init, "hysfa", c).eval()
    check("Hy-SFA", hysfa, lambda: hysfa(x), [x])

    drng = np.random.default_rng(3)
    fcif = Fcif(init, "fcif", c, drng).eval()
    check("FCIF", fcif, lambda: fcif(x), [x])
    smif = Smif(init, "smif", c, "hybrid").eval()
    check("SMIF", smif, lambda: smif(x), [x])
    mcbi = Mcbi(init, "mcbi", c, drng).eval()
    cf = _t(rng, 2, c)
    csp = _t(rng, 2, c)
    check("MCBI", mcbi, lambda: _pair_sum(mcbi(cf, csp)), [cf, csp])

    mmmua = Mmmua(init, "mmmua", c, 2, "hybrid", drng).eval()
    check("MMMUA", mmmua, lambda: _pair_sum(mmmua([x, x2])), [x, x2])
    dvca = Dvca(init, "dvca", c, 2, rng=drng).eval()
    check("DVCA", dvca, lambda: _pair_sum(dvca([x, x2])), [x, x2], max_coords=30)
    return rows


def _pair_sum(pair):
    return add(pair[0], pair[1])


def micro_config() -> ModelConfig:
    # windows (2, 4) divide the 4x4 feature map of a 16x16 image, so the
    # token path carries no padding
    return ModelConfig(modalities=2, blocks=1, channels=8, task_classes=(3,),
                       window_sizes=(2, 4), seed=5)


def network_check() -> list[dict]:
    """Loss gradient of the 1x3x16x16 two-modality micro network.

    The stem relu and the pooling stack make the loss only almost-everywhere
    differentiable, so coordinates sitting exactly on a kink (detected via
    disagreeing one-sided differences) are excluded from the comparison.
    """
    rng = np.random.default_rng(29)
    net = HypcaNet(micro_config()).eval()
    images = [_t(rng, 1, 3, 16, 16), _t(rng, 1, 3, 16, 16)]
    labels = [np.array([1])]

    def fn():
        return net.loss(net(images), labels)

    wrt = images + list(net.parameters())
    err = grad_check(fn, wrt, max_coords=3, seed=1, skip_kinks=True)
    return [_entry("network/micro", err, NETWORK_TOL)]


def run_scope(scope: str) -> list[dict]:
    if scope == "ops":
        return op_checks()
    if scope == "blocks":
        return block_checks()
    if scope == "network":
        return network_check()
    raise ValueError(f"unknown gradcheck scope {scope!r}")
