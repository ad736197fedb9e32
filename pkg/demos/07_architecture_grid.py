# %% [markdown]
# # Network-architecture grid
#
# The proxy learner (no-nlb) is scored on every combination of direction,
# weight scheme, decay, segment and reciprocity. Finished cells are logged
# as they complete, so an interrupted run resumes where it stopped.

# %%
import tempfile
from pathlib import Path

from churnnet import bench
from churnnet.synth import SynthConfig

plan = bench.ExperimentPlan(
    datasets=[bench.DatasetSource("demo", synth=SynthConfig(n_customers=1500, sparsity=1e-2, homophily=0.8, seed=11))],
    grid_segments=("whole", "wd", "we", "day", "evening", "night"),
)
out = Path(tempfile.mkdtemp(prefix="grid-"))
print(plan.grid_size, "cells")

# %%
bench.run_architecture_grid(plan, out, limit=40)
print("after a partial run:", (out / "grid_log.jsonl").read_text().count("\n"), "cells logged")
report = bench.run_architecture_grid(plan, out)
print("complete:", (out / "grid_report.csv").exists())

# %%
tables = bench.grid_tables(report, "auc")
for row in tables["demo/full"][:4]:
    print(" | ".join(x[:8] for x in row[:7]))
effects = bench.run_stats(report)["architecture"]["auc"]["no-nlb"]
for factor, res in effects.items():
    print(f"{factor:12s} p = {res['pvalue']:.3g}  means {res['levels']}")
