"""What a knockoff copy looks like, and how the swap check catches a bad one.

A Gaussian knockoff keeps the covariance of the data and its correlation with
every other column, but is only partly correlated with the column it stands
in for. Copying a column verbatim, or shuffling its rows, breaks that.

    python demos/02_knockoff_diagnostics.py
"""

import numpy as np

from knockoff_invariance import MultivariateTimeSeries, diagnose_exchangeability, fit_gaussian, fit_gmm, sample_knockoffs
from knockoff_invariance.knockoff import sample_gmm_knockoffs

rng = np.random.default_rng(0)
rho = 0.6
cov = (1 - rho) * np.eye(4) + rho * np.ones((4, 4))
series = MultivariateTimeSeries(rng.multivariate_normal(np.zeros(4), cov, size=20000))

model = fit_gaussian(series)
print("equicorrelated S (correlation scale):", np.round(model.s / np.diag(model.cov), 4))
knock = sample_knockoffs(model, series, seed=1)
print("\nGaussian knockoff:")
print(diagnose_exchangeability(series, knock, model).table())

print("\nverbatim copy (a 'knockoff' that is the data itself):")
print(diagnose_exchangeability(series, series, model).table())

print("\nrow-shuffled copy:")
shuffled = series.values[rng.permutation(series.length)]
print(diagnose_exchangeability(series, shuffled, model).table())

# two well separated blobs: a mixture fit keeps the knockoffs on the blobs
blobs = np.vstack([rng.normal(-3, 0.5, size=(3000, 2)), rng.normal(3, 0.5, size=(3000, 2))])
mix = fit_gmm(blobs, 2, seed=2)
kb = sample_gmm_knockoffs(mix, blobs, seed=3)
between = np.mean(np.abs(kb[:, 0]) < 1.5)
print(f"\nmixture knockoffs: weights {np.round(mix.weights, 3)}, share landing between blobs {between:.3%}")
