"""
Fitting a seasonal model and forecasting with intervals
=======================================================

A fitted seasonal ARIMA yields point forecasts plus a widening band of
uncertainty.  This demo fits a weekly model to a trending series with a
seven-day rhythm, checks the fit on a holdout window it never saw, and
prints the two-week outlook.
"""
import numpy as np

from episignal.pipeline import holdout_evaluate
from episignal.sarima import SarimaSpec, fit, forecast

# 140 days of synthetic daily counts: linear growth, a weekly wave, and
# a little observation noise.
rng = np.random.default_rng(11)
t = np.arange(140, dtype=float)
y = 10.0 + 0.5 * t + 3.0 * np.sin(2.0 * np.pi * t / 7.0)
y += rng.normal(0.0, 0.5, size=t.size)

# Hold out the final two weeks; fit on the rest.
train, holdout = y[:126], y[126:]
spec = SarimaSpec(1, 1, 1, 0, 1, 1, 7)
fitted = fit(spec, train, seed=0)
print(f"fit {fitted.spec} on {train.size} days: "
      f"loglik={fitted.loglik:.2f}, aic={fitted.aic:.2f}, "
      f"converged={fitted.converged}")
print(f"coefficients: ar={fitted.params.ar}, ma={fitted.params.ma}, "
      f"seasonal_ma={fitted.params.seasonal_ma}, "
      f"sigma2={fitted.params.sigma2:.4f}")

# How good was that, really?  holdout_evaluate refits on the training
# span and scores the frozen model against the unseen days.
scores = holdout_evaluate(fitted, y, holdout=14, seed=0)
print(f"\nholdout scores: mae={scores.mae:.3f}, rmse={scores.rmse:.3f}, "
      f"mape={scores.mape:.2f}%")

# Forecast the next 14 days with a 95% interval.  The variance ladder
# climbs with the horizon: near-term days are tight, far days are loose.
fc = forecast(fitted, train, horizon=14, level=0.95)
print("\nday  actual  point   95% interval")
for step in range(14):
    print(f"+{step + 1:3d} {holdout[step]:7.1f} {fc.point[step]:7.1f}"
          f"   [{fc.lower[step]:7.1f}, {fc.upper[step]:7.1f}]")

inside = np.sum((fc.lower <= holdout) & (holdout <= fc.upper))
print(f"\n{inside} of 14 held-out days fell inside the interval")
