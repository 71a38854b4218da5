# %% [markdown]
# # Gaussian-input norms of shallow ReLU networks
#
# A network here is `x -> sum_i kappa_i relu(<w_i, x> + b_i)` with signs
# `kappa_i` in {-1, +1} and inputs `x ~ N(0, I_d)`.  This script walks
# through the two norms used everywhere else in the package: the L2 norm
# under the Gaussian (the "mu-norm") and the sub-Gaussian psi_2 norm.

# %%
import math

import numpy as np

from neurips_lab.gaussian_analysis import network_mu_norm, network_second_moments, relu_cross_moments
from neurips_lab.relu_model import ParameterClass, constant_function, linear_function, network_eval, sample_parameter_class
from neurips_lab.subgaussian import check_radius, exp_moment, psi2_norm

# %% [markdown]
# ## Second moments
#
# A single neuron has a closed-form second moment.  Sums of neurons need
# cross moments, which the package computes either by planar quadrature
# or, for a pair of neurons, in closed form from the bivariate normal CDF.
# Both should agree with a large Monte-Carlo sample.

# %%
net = sample_parameter_class(ParameterClass(3, 3, 1.0, 2.0), 1, seed=4)[0]
exact = float(network_second_moments([net])[0])
x = np.random.default_rng(0).standard_normal((2_000_000, 3))
mc = np.mean(network_eval(net, x) ** 2)
print(f"quadrature {exact:.6f}   Monte Carlo {mc:.6f}")

pairwise = sum(
    net.kappa[i] * net.kappa[j] * float(relu_cross_moments(net.W[i], net.b[i], net.W[j], net.b[j]))
    for i in range(net.n)
    for j in range(net.n)
)
print(f"closed-form pairwise sum {pairwise:.12f}")

# %% [markdown]
# ## psi_2 norms
#
# The psi_2 norm is the smallest `C` with `E exp(f^2 / C^2) <= 2`.  Two
# functions have known values: a constant `a` gives `|a| / sqrt(ln 2)` and a
# unit-variance linear function gives `sqrt(8/3)`.

# %%
print(psi2_norm(constant_function(1.5, 2)).value, 1.5 / math.sqrt(math.log(2)))
print(psi2_norm(linear_function([0.6, 0.8])).value, math.sqrt(8 / 3))

# %% [markdown]
# A ReLU of a linear function has a psi_2 norm below the linear one, since
# it clips half of the Gaussian.  The exponential moment as a function of
# `C` shows where the bisection lands.

# %%
relu = sample_parameter_class(ParameterClass(1, 2, 1.0, 1.0), 1, 0)[0]
est = psi2_norm(relu)
print("psi2", est.value, "bracket", est.bracket)
for C in (0.8 * est.value, est.value, 1.25 * est.value):
    print(f"C = {C:.4f}   E exp(f^2/C^2) = {exp_moment(relu, C):.6f}")

# %% [markdown]
# ## Radius of single-neuron classes
#
# Every admissible neuron with `||w|| <= c_w` and `|b| <= c_b` has psi_2
# norm at most `2 c_w`.  Sampling many neurons (weights on the sphere, the
# worst case) shows how much room the bound leaves.

# %%
rep = check_radius(ParameterClass(1, 2, 1.0, 1.0), 300, seed=1, weights="sphere")
print(f"max psi2 over {rep.samples} neurons: {rep.max_psi2:.4f} (bound {rep.bound})")
print("mu-norm of the first sampled neuron:", network_mu_norm(sample_parameter_class(ParameterClass(1, 2, 1.0, 1.0), 1, 1)[0]))
