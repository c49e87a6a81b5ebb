"""
Three benchmark allocations
===========================

Equal weight, the long-only tangency portfolio and equal risk contribution
on the same two-asset moment estimate.
"""

import numpy as np

from marketadaptive import equal_weight, estimate_moments, risk_budgeting, risk_contributions, tangency
from marketadaptive.data import Regime, SynthConfig, synth_market, to_returns

prices = synth_market(SynthConfig(
    n_days=756,
    regimes=[Regime(756, annual_drift=[0.08, 0.03], annual_vol=[0.20, 0.05])],
    correlation=-0.2, seed=11, assets=("EQ", "BOND")))
moments = estimate_moments(to_returns(prices))
print("daily means:", moments.mean_vector)
print("daily vols: ", np.sqrt(np.diag(moments.covariance)))

for name, w in [("equal", equal_weight(2)),
                ("tangency", tangency(moments)),
                ("risk parity", risk_budgeting(moments.covariance))]:
    rc = risk_contributions(moments.covariance, w)
    print(f"{name:>12}: weights {np.round(w, 3)}  risk shares {np.round(rc / rc.sum(), 3)}")

###############################################################################
# Risk parity gives each asset the same share of portfolio volatility, so the
# quiet bond ends up with most of the capital. Custom budgets tilt that split.

w = risk_budgeting(moments.covariance, [0.8, 0.2])
rc = risk_contributions(moments.covariance, w)
print("80/20 budgets:", np.round(w, 3), np.round(rc / rc.sum(), 3))
