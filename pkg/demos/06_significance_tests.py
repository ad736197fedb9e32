# %% [markdown]
# # Comparing learners across datasets
#
# Each synthetic dataset ranks the learners; Friedman tests whether the
# average ranks differ and Nemenyi gives the critical difference. Kruskal-Wallis
# compares learners with and without collective inference.

# %%
from churnnet import bench
from churnnet.synth import SynthConfig

datasets = [bench.DatasetSource(f"d{i}", synth=SynthConfig(n_customers=1500, sparsity=1e-2, homophily=0.8, seed=i))
            for i in range(4)]
plan = bench.ExperimentPlan(datasets=datasets, learners=("no-wvrn", "no-nlb", "no-cdrn", "rl-wvrn", "ic-wvrn",
                                                          "gibbs-nlb", "spa-sparc"),
                            metrics=("auc", "lift@0.05"))
report = bench.run_learner_benchmark(plan)
report.extend(bench.run_nrc_benchmark(plan))
summary = bench.run_stats(report)

# %%
auc = summary["metrics"]["auc"]
print("Friedman p =", round(auc["learners"]["friedman"]["pvalue"], 4), "over", auc["learners"]["n_sets"], "score sets")
for model, rank in sorted(auc["learners"]["average_ranks"].items(), key=lambda kv: kv[1]):
    print(f"  {model:10s} {rank:.2f}")
print("Nemenyi CD:", round(auc["learners"]["nemenyi"]["cd"], 3))
print("CI vs no CI:", auc["kruskal_ci_vs_no_ci"])
for name, check in summary["checks"].items():
    print(name, "PASS" if check["pass"] else "FAIL")
