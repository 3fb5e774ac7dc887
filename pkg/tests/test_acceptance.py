"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run with `pytest -s tests/test_acceptance.py -v` to see the per-criterion
lines as they complete. The whole module is self-contained and deterministic.
"""

import json
import time

import numpy as np

from hypca.ablation import ablate
from hypca.core import ops
from hypca.core.layers import Initializer
from hypca.core.tensor import Parameter, Tensor, sigmoid, softmax
from hypca.data import DatasetSpec, SyntheticDataset
from hypca.dvca import Fdca
from hypca.gradsuite import block_checks, network_check, op_checks
from hypca.network import ModelConfig, Switches
from hypca.rala import Rala, Scala
from hypca.train import (ExperimentConfig, TrainConfig, count_params_macs,
                         result_record, train)
from hypca.transforms import (cyclic_shift, cyclic_unshift, dct2, haar_dwt,
                              haar_idwt, idct2, window_merge, window_partition)

from test_rala import zero_weights


def criterion(name: str, ok: bool, detail: str = ""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def toy_config(epochs=30, n=400) -> ExperimentConfig:
    return ExperimentConfig(model=ModelConfig(seed=0),
                            data=DatasetSpec(seed=0, n=n),
                            train=TrainConfig(epochs=epochs))


def test_criterion_gradient_suite():
    started = time.perf_counter()
    rows = op_checks() + block_checks() + network_check()
    elapsed = time.perf_counter() - started
    bad = [r for r in rows if not r["ok"]]
    worst = max(r["error"] for r in rows)
    criterion("gradient suite: every op and block under tolerance",
              not bad, f"{len(rows)} checks, worst {worst:.2e}")
    criterion("gradient suite: completes under 10 minutes",
              elapsed < 600, f"{elapsed:.1f}s")


def test_criterion_transform_exactness():
    rng = np.random.default_rng(0)
    ok = True
    detail = []
    for w in (2, 4, 8):
        x = rng.standard_normal((w, w, 3))
        c = dct2(Tensor(x))
        roundtrip = np.abs(idct2(c).data - x).max()
        parseval = abs(np.linalg.norm(c.data) - np.linalg.norm(x)) / np.linalg.norm(x)
        ok &= roundtrip < 1e-10 and parseval < 1e-10
        detail.append(f"dct w={w}: rt {roundtrip:.1e}")
    criterion("transforms: DCT round-trip and Parseval within 1e-10", ok,
              "; ".join(detail))

    x = rng.standard_normal((2, 3, 8, 8))
    bands = haar_dwt(Tensor(x))
    recon = np.abs(haar_idwt(bands).data - x).max()
    energy = abs(sum(np.sum(b.data ** 2) for b in (bands.ll, bands.hl, bands.lh, bands.hh))
                 - np.sum(x ** 2)) / np.sum(x ** 2)
    criterion("transforms: Haar reconstruction and energy within 1e-10",
              recon < 1e-10 and energy < 1e-10,
              f"recon {recon:.1e}, energy {energy:.1e}")

    t = Tensor(rng.standard_normal((1, 3, 8, 8)))
    shifted_ok = np.array_equal(cyclic_unshift(cyclic_shift(t, 2, 3), 2, 3).data, t.data)
    merged_ok = np.array_equal(window_merge(window_partition(t, 4, shift=(1, 1))).data, t.data)
    t_odd = Tensor(rng.standard_normal((1, 2, 5, 7)))
    padded_ok = np.array_equal(window_merge(window_partition(t_odd, 4, shift=(1, 1))).data,
                               t_odd.data)
    criterion("transforms: window and shift roundtrips exact (bitwise)",
              shifted_ok and merged_ok and padded_ok)


def test_criterion_closed_form_identities():
    rng = np.random.default_rng(1)

    scala = Scala(Initializer(0), "s", 4, "hybrid")
    zero_weights(scala.mshc)
    x = rng.standard_normal((2, 4, 8, 8))
    scala_ok = np.array_equal(scala(Tensor(x)).data, x)
    criterion("identity: zero-init SCALA is exact identity", scala_ok)

    rala = Rala(Initializer(0), "r", 4).eval()
    zero_weights(rala)
    rala_ok = np.array_equal(rala(Tensor(x)).data, np.maximum(x, 0.0))
    criterion("identity: zero-init RALA is exact relu", rala_ok)

    fdca = Fdca(Initializer(2), "f", 3, scale_index=0)
    fdca.flow.weight.data = np.zeros((3, 3))
    tokens = Tensor(rng.standard_normal((2, 4, 16, 3)))
    fused, alpha, tau = fdca.refine(tokens)
    criterion("identity: zero-flow dual-solver fusion is exact identity",
              np.array_equal(fused.data, tokens.data))

    sig = sigmoid(Tensor(rng.standard_normal((4, 4)) * 50)).data
    sm = softmax(Tensor(rng.standard_normal((6, 5)) * 20), axis=1).data
    criterion("ranges: sigmoid maps strictly inside (0,1), softmax sums to 1",
              bool((sig > 0).all() and (sig < 1).all()
                   and np.abs(sm.sum(axis=1) - 1).max() < 1e-12
                   and np.abs(alpha.data.sum(axis=1) - 1).max() < 1e-12
                   and (tau.data > 0).all() and (tau.data < 1).all()))


def test_criterion_parameter_parity():
    base = toy_config()
    ha = ModelConfig(**{**base.model.to_dict(), "scpfa_wiring": "hybrid"})
    ca = ModelConfig(**{**base.model.to_dict(), "scpfa_wiring": "cascaded"})
    p_ha, m_ha = count_params_macs(ha, base.data.image_size)
    p_ca, m_ca = count_params_macs(ca, base.data.image_size)
    criterion("parity: hybrid and cascaded wirings match #P and #MACs exactly",
              (p_ha, m_ha) == (p_ca, m_ca),
              f"#P {p_ha} vs {p_ca}, #MACs {m_ha} vs {m_ca}")


def test_criterion_untrained_baseline():
    cfg = toy_config(epochs=0)
    result, _, _ = train(cfg)
    acc = result["test_metrics"]["mean"]["accuracy"]
    k = cfg.data.classes
    n_test = len(SyntheticDataset(cfg.data).splits()[2])
    sigma = np.sqrt((1 / k) * (1 - 1 / k) / n_test)
    criterion("toy run: untrained accuracy at chance within binomial 3 sigma",
              abs(acc - 1 / k) <= 3 * sigma,
              f"acc {acc:.3f} vs 1/K={1/k:.3f}, 3sigma {3*sigma:.3f}")


def test_criterion_toy_end_to_end():
    started = time.perf_counter()
    result, _, _ = train(toy_config())
    elapsed = time.perf_counter() - started
    acc = result["test_metrics"]["mean"]["accuracy"]
    criterion("toy run: >= 95% test accuracy within 30 epochs",
              result["status"] == "ok" and acc >= 0.95, f"accuracy {acc:.4f}")
    criterion("toy run: completes under 10 minutes single-core",
              elapsed < 600, f"{elapsed:.1f}s")


def test_criterion_determinism():
    cfg = ExperimentConfig(model=ModelConfig(seed=3),
                           data=DatasetSpec(seed=4, n=120),
                           train=TrainConfig(epochs=2, seed=5))
    r1 = result_record(train(cfg)[0])
    r2 = result_record(train(cfg)[0])
    same = json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)
    loss_same = r1["final_train_loss"] == r2["final_train_loss"]
    criterion("determinism: identical config+seed gives bit-identical loss and metrics",
              same and loss_same,
              f"final loss {r1['final_train_loss']!r}")


def test_criterion_ablation_harness():
    cfg = ExperimentConfig(model=ModelConfig(channels=8, blocks=1, seed=6),
                           data=DatasetSpec(seed=7, n=60, image_size=16),
                           train=TrainConfig(epochs=1, batch_size=16, seed=8))
    rows = ablate(cfg)
    grid_ok = (len(rows) == 18
               and all(r["status"] == "ok" for r in rows)
               and all(r["params"] > 0 and r["macs"] > 0 for r in rows)
               and all(r["metrics"]["accuracy"] is not None for r in rows))
    criterion("ablation: full 8+8+2 grid emitted with metrics, #P, #MACs",
              grid_ok, f"{len(rows)} rows")

    full = count_params_macs(cfg.model, cfg.data.image_size)[0]
    monotone = True
    for name in vars(Switches()):
        p = count_params_macs(cfg.model.with_switches(**{name: False}),
                              cfg.data.image_size)[0]
        monotone &= p <= full
    criterion("ablation: enabling any switch never decreases #P", monotone)


def test_criterion_counter_oracle():
    rng = np.random.default_rng(0)
    w = Parameter("w", rng.standard_normal((1, 16, 8)), "test")
    b = Parameter("b", np.zeros(16), "test")
    params = w.size + b.size
    with ops.count_macs() as macs:
        ops.conv2d(Tensor(rng.standard_normal((1, 8, 4, 4))), "PC", w, b)
    criterion("counter: pointwise 8->16 on 4x4 counts 144 params, 2048 MACs",
              params == 144 and macs.total == 2048,
              f"params {params}, macs {macs.total}")
