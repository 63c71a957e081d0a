# Power: fit the logistic family to data from all four generators.  Only the
# logistic generator is then correctly specified, and its statistic should be
# stochastically the smallest.
import numpy as np

from rotatest import Experiment, ExperimentConfig, edf_evaluate, pvalue_matrix, run_experiment

cfg = ExperimentConfig(Experiment.LOGISTIC_FIT, m_values=(1,), replications=300, master_seed=4)
edfs = run_experiment(cfg)

t = np.quantile(edfs[0].values, 0.95)   # 95% point under the null
for e in edfs:
    print(f"{e.generator:12s} P(KS > t) = {1 - edf_evaluate(e, t):.3f}")

pm = pvalue_matrix(edfs, N=1000, master_seed=4)
for a, b, p in pm.pairs():
    print(a[0], b[0], p)
