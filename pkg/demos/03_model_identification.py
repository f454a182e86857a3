"""
Identifying a seasonal model from its correlogram
=================================================

Before fitting, a forecaster reads the autocorrelation function (ACF) and
partial autocorrelation function (PACF) of the differenced series to guess
the model orders, then lets an information criterion referee the
candidates.  This demo walks that workflow on data whose true model is
known: a weekly "airline" process, (0,1,1)(0,1,1) with period 7.
"""
import numpy as np

from episignal.sarima import (
    SarimaParams,
    SarimaSpec,
    acf,
    difference,
    grid_search,
    pacf,
    simulate,
)

truth = SarimaSpec(0, 1, 1, 0, 1, 1, 7)
params = SarimaParams(ma=(0.5,), seasonal_ma=(0.5,))
y = simulate(truth, params, 500, seed=1000)
print(f"simulated {y.size} days from {truth}")

# Difference away the trend (d=1) and the weekly cycle (D=1, s=7); what
# remains should be stationary.
w = difference(y, d=1, D=1, s=7)
print(f"differenced length: {w.size}")

# The ACF of an MA process cuts off after its order; the PACF decays.
# Expect spikes near lag 1 and lag 7 from the two MA terms.
correlations = acf(w, max_lag=14)
partials = pacf(w, max_lag=14)
print("\nlag   acf     pacf")
for lag in range(1, 15):
    flag = " <-- seasonal lag" if lag % 7 == 0 else ""
    print(f"{lag:3d} {correlations[lag]:+7.3f} {partials[lag - 1]:+7.3f}"
          f"{flag}")

# Nothing beats trying the candidates.  grid_search fits every spec with
# orders up to 1 and ranks them by AIC (lower is better).
ranked = grid_search(y, p_max=1, q_max=1, P_max=1, Q_max=1,
                     d=1, D=1, s=7, seed=0)
print("\nAIC leaderboard (top 5 of 16):")
for fitted in ranked[:5]:
    marker = "  <-- true model" if fitted.spec == truth else ""
    print(f"  {fitted.spec}  aic={fitted.aic:9.2f}{marker}")
