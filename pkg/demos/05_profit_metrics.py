# %% [markdown]
# # Ranking and profit metrics
#
# AUC and top-decile lift judge the ranking. Maximum profit (MP) picks the
# best targeting cut-off for a retention campaign with a known acceptance
# rate. Expected maximum profit (EMP) averages that over a Beta-distributed
# acceptance rate.

# %%
import numpy as np

from churnnet import EmpParams, auc, emp, lift, mp
from churnnet.metrics import profit_curve

rng = np.random.default_rng(0)
y = (rng.random(5000) < 0.05).astype(int)
for signal in (0.0, 0.5, 1.0, 2.0):
    s = rng.normal(size=y.size) + signal * y
    m, eta_m = mp(s, y)
    e, eta_e = emp(s, y)
    print(f"signal {signal:.1f}: AUC {auc(s, y):.3f} lift@10% {lift(s, y, 0.1):.2f} "
          f"MP {m:6.3f} (target {eta_m:.1%}) EMP {e:6.3f} (target {eta_e:.1%})")

# %% [markdown]
# The profit curve at the mean acceptance rate shows where MP sits.

# %%
p = EmpParams()
s = rng.normal(size=y.size) + 1.0 * y
profit, eta = profit_curve(s, y, p, p.gamma_point)
best = int(np.argmax(profit))
print(f"gamma {p.gamma_point:.3f}: best profit {profit[best]:.3f} targeting {eta[best]:.1%}")
