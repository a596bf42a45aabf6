"""eblab: empirical-Bayes regret machinery for Gaussian and Poisson mixtures.

Subpackages:

* specfun     -- orthogonal polynomials, scaled Bessel, quadrature rules
* models      -- priors, channels, mixture densities, Bayes rules, samplers
* operators   -- posterior-expectation operators K/K1 and their kernels
* lowerbound  -- perturbation families and the Assouad-program auditor
* estimators  -- Robbins, NPMLE/GMLEB, baselines
* regret      -- Monte Carlo regret engines and the Robbins certificate
* cli         -- the `eblab` command-line driver
"""

__version__ = "0.1.0"
