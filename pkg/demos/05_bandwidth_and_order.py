"""Data-driven tuning: cross-validated bandwidths and the lag-order criterion.

Both cross-validation objectives are leave-(p+1)-out so a point never scores
itself through its own regressors.  The order criterion penalizes the log
weighted residual sum with zeta_T (p+1), zeta_T = log(log T)/(T b).
"""

from tvarch import (
    CoefficientFunction,
    SimulationConfig,
    TvArchModel,
    cv_bandwidth_semiparametric,
    cv_bandwidth_tvarch,
    select_lag_order,
    simulate_path,
)

model = TvArchModel(
    p=1, coeffs=(CoefficientFunction.sine(2.0, 0.8), CoefficientFunction.constant(0.3))
)
series = simulate_path(model, SimulationConfig(T=1500, seed=21))

cv_tv = cv_bandwidth_tvarch(series, 1)
print("fully nonparametric model CV curve:")
for b, score in zip(cv_tv.bandwidths, cv_tv.scores):
    marker = "  <- selected" if b == cv_tv.bandwidth else ""
    print(f"  b = {b:.4f}   score = {score:10.4f}{marker}")

cv_sp = cv_bandwidth_semiparametric(series, 1)
print(f"constant-lags model: b = {cv_sp.bandwidth:.4f}, inner beta = {cv_sp.beta}")

sel = select_lag_order(series, q_max=6)
print(f"information criterion (b = {sel.bandwidth:.4f}, zeta = {sel.zeta:.5f}):")
for p, c in enumerate(sel.criteria):
    marker = "  <- selected" if p == sel.p_hat else ""
    print(f"  C({p}) = {c:.5f}{marker}")
