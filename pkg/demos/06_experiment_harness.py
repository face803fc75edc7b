"""The experiment harness end to end.

Loads the bundled Gilbert-Elliott fixture, trims it to three replications,
runs every policy into a temporary directory and reads the CSV back.  The
same thing from a shell is ``smile-spectrum run gilbert_elliott_4x4``.
"""
import json
import tempfile
from pathlib import Path

from smile_spectrum.experiment import load_config, read_trace_csv, run_experiment_config

cfg = load_config("gilbert_elliott_4x4")
cfg.replications = 3
cfg.horizon = 30_000
cfg.stride = 3_000

with tempfile.TemporaryDirectory() as tmp:
    cfg.output_dir = Path(tmp)
    summaries = run_experiment_config(cfg, jobs=1)
    print("files:", sorted(p.name for p in Path(tmp).iterdir()))
    oracle = json.loads((Path(tmp) / "oracle_allocation.json").read_text())
    print("oracle allocation:", oracle["allocation"], "value", round(oracle["value"], 2))
    for policy, s in summaries.items():
        print(f"{policy:>7}: final-window sum rate {s.final_window_sum_rate:.2f}")
    trace = read_trace_csv(Path(tmp) / "smile.csv")
    print("\n    t  mean regret  mean sum rate")
    for t, r, x in zip(trace["t"], trace["mean_regret"], trace["mean_sum_rate"]):
        print(f"{t:>6} {r:>12.0f} {x:>14.2f}")
