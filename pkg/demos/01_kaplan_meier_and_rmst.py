"""Kaplan-Meier curves, the RMST horizon, and the RMST difference on a small cohort.

Run:  python demos/01_kaplan_meier_and_rmst.py
"""

import math

import numpy as np

from causal_survival import (
    build_risk_table,
    rmst,
    rmst_difference,
    select_tau,
    weighted_km,
)
from causal_survival.simulation import simulate_cohort

data = simulate_cohort(400, gamma=math.log(1.3), censor_max=70.0, gen=np.random.default_rng(1))
print(f"{data.n} subjects, {data.event.mean():.0%} events, {data.exposure.mean():.0%} exposed")

ones = np.ones(data.n)
curves = {g: weighted_km(build_risk_table(data, ones, g)) for g in (1, 0)}

# horizon: largest time with at least 10% of each group still under observation
tau = select_tau(data)
print(f"tau = {tau:.2f}")

for g, s in curves.items():
    print(f"group {g}: S(10) = {s(10.0):.3f}, S(30) = {s(30.0):.3f}, RMST(tau) = {rmst(s, tau):.2f}")

delta = rmst_difference(curves[1], curves[0], tau)
print(f"unadjusted RMST difference (exposed - unexposed) = {delta:.3f}")
print("This contrast is confounded: exposure depends on L2 and L5, which also raise the hazard.")
