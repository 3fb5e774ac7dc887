"""Ablation grids: the 8-row module grid over {rala, hysfa, mmmua}, the 8-row
component grid, and the hybrid-vs-cascaded wiring pair. Accuracy orderings are
reported, never asserted; parameter/MAC counts are part of each row."""

from __future__ import annotations

import csv
import io
from dataclasses import replace

from .network import Switches
from .train import ExperimentConfig, count_params_macs, train

MODULE_NAMES = ("rala", "hysfa", "mmmua")
COMPONENT_NAMES = ("mshc", "chia", "shia", "fcif", "smif", "mcbi", "tfsi", "fdca")

# Component rows: within-module toggles; the parent module switch is the OR of
# its components (a module with everything disabled is absent entirely).
COMPONENT_ROWS = (
    (),
    ("mshc", "fcif", "tfsi"),
    ("mshc", "chia", "fcif", "tfsi"),
    ("shia", "fcif", "tfsi"),
    ("mshc", "chia", "shia", "fcif", "tfsi"),
    ("mshc", "fcif", "smif", "mcbi", "tfsi"),
    ("mshc", "chia", "shia", "fcif", "smif", "mcbi", "tfsi"),
    ("mshc", "chia", "shia", "fcif", "smif", "mcbi", "tfsi", "fdca"),
)

CSV_COLUMNS = ("row", "grid", "wiring", "rala", "hysfa", "mmmua", "mshc", "chia",
               "shia", "fcif", "smif", "mcbi", "tfsi", "fdca", "status",
               "accuracy", "macro_f1", "auc", "params", "macs")


def module_grid_switches():
    rows = []
    for bits in range(8):
        on = {name: bool(bits >> i & 1) for i, name in enumerate(reversed(MODULE_NAMES))}
        # component flags mirror their parent so each row is self-describing
        sw = Switches(rala=on["rala"], hysfa=on["hysfa"], mmmua=on["mmmua"],
                      mshc=on["rala"], chia=on["rala"], shia=on["rala"],
                      tfsi=on["hysfa"], fdca=on["hysfa"],
                      fcif=on["mmmua"], smif=on["mmmua"], mcbi=on["mmmua"])
        rows.append((f"M{bits + 1}", sw))
    return rows


def component_grid_switches():
    rows = []
    for r, enabled in enumerate(COMPONENT_ROWS):
        flags = {name: name in enabled for name in COMPONENT_NAMES}
        sw = Switches(
            rala=flags["mshc"] or flags["chia"] or flags["shia"],
            hysfa=flags["tfsi"] or flags["fdca"],
            mmmua=flags["fcif"] or flags["smif"] or flags["mcbi"],
            **flags,
        )
        rows.append((f"C{r + 1}", sw))
    return rows


def grid_rows(base: ExperimentConfig):
    """(row id, grid name, config) for all 8 + 8 + 2 rows."""
    rows = []
    for row_id, sw in module_grid_switches():
        rows.append((row_id, "modules", replace(base.model, switches=sw)))
    for row_id, sw in component_grid_switches():
        rows.append((row_id, "components", replace(base.model, switches=sw)))
    for row_id, wiring in (("HA", "hybrid"), ("CA", "cascaded")):
        rows.append((row_id, "wiring", replace(base.model, scpfa_wiring=wiring)))
    return [(rid, grid, ExperimentConfig(model=model, data=base.data, train=base.train))
            for rid, grid, model in rows]


def ablate(base: ExperimentConfig) -> list[dict]:
    """Train every grid row; per-row failures are recorded and do not stop
    the remaining rows."""
    results = []
    for row_id, grid, cfg in grid_rows(base):
        entry = {"row": row_id, "grid": grid, "wiring": cfg.model.scpfa_wiring,
                 "switches": cfg.model.switches.__dict__.copy()}
        try:
            record, _, _ = train(cfg)
            entry["status"] = record["status"]
            entry["metrics"] = record["test_metrics"]["mean"]
            entry["params"] = record["param_count"]
            entry["macs"] = record["mac_count"]
        except Exception as exc:  # keep the grid running
            entry["status"] = f"error: {exc}"
            entry["metrics"] = {"accuracy": None, "macro_f1": None, "auc": None}
            entry["params"], entry["macs"] = count_params_macs(cfg.model, cfg.data.image_size)
        results.append(entry)
    return results


def ablation_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        sw = r["switches"]
        m = r["metrics"]
        writer.writerow([
            r["row"], r["grid"], r["wiring"],
            *[int(sw[name]) for name in MODULE_NAMES],
            *[int(sw[name]) for name in COMPONENT_NAMES],
            r["status"],
            "" if m["accuracy"] is None else f"{m['accuracy']:.6f}",
            "" if m["macro_f1"] is None else f"{m['macro_f1']:.6f}",
            "" if m["auc"] is None else f"{m['auc']:.6f}",
            r["params"], r["macs"],
        ])
    return buf.getvalue()
