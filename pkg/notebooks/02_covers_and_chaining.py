# %% [markdown]
# # Covers, covering numbers and chaining
#
# Nets of neurons are built by discretizing the weight norm, the bias and
# the weight direction.  This script builds a few nets, checks that they
# cover sampled neurons in psi_2 distance, and compares the chaining
# bounds that follow from the covering numbers.

# %%
from neurips_lab.chaining import (
    class_profile,
    dudley_integral,
    entropy_integral_closed_form,
    lambda_bound,
    lambda_bound_class,
)
from neurips_lab.covering import angle_cover, build_neuron_net, covering_number_bound, log_covering_number_bound
from neurips_lab.relu_model import ParameterClass, sample_parameter_class
from neurips_lab.subgaussian import psi2_distance

# %% [markdown]
# ## Angle covers
#
# In two dimensions an exact half-circle grid works.  From three
# dimensions on the cover is greedy and randomized, so its distortion is
# measured on random probes.

# %%
for d, gamma in ((2, 0.2), (3, 0.3), (4, 0.5)):
    cover = angle_cover(d, gamma, seed=0)
    print(d, gamma, len(cover), cover.construction, round(cover.distortion(probes=5000, seed=1), 4))

# %% [markdown]
# ## A neuron net and its witnesses

# %%
cls = ParameterClass(1, 2, 1.0, 1.0)
net = build_neuron_net(cls, 0.75)
print("cardinality", net.cardinality, "bound", round(net.cardinality_bound))
dists = [psi2_distance(p, net.witness(p)) for p in sample_parameter_class(cls, 20, 3)]
print("largest witness distance", max(dists))

# %% [markdown]
# ## Covering numbers
#
# The log covering number bound grows like `log(1/eps)` and collapses to
# zero once `eps` reaches the diameter `2 n c_w`.

# %%
for eps in (0.05, 0.2, 0.5, 1.0, 1.99, 2.0):
    print(f"eps {eps:5.2f}   log N <= {log_covering_number_bound(cls, eps):9.3f}   N = 1: {covering_number_bound(cls, eps) == 1}")

# %% [markdown]
# ## Dudley integral
#
# The numeric entropy integral of the exact step profile is always below
# its closed-form upper bound; the gap is large because the closed form
# replaces each logarithm by a cruder one.

# %%
for n, d, c_w, c_b in ((1, 2, 1.0, 1.0), (2, 3, 0.5, 2.0), (3, 1, 2.0, 3.0)):
    c = ParameterClass(n, d, c_w, c_b)
    numeric = dudley_integral(class_profile(c))
    closed = entropy_integral_closed_form(c)[1]
    print(f"{(n, d, c_w, c_b)}  numeric {numeric:9.3f}  closed {closed:9.3f}")

# %% [markdown]
# ## The class-specific Lambda bound and the radius it needs
#
# The generic bound `sqrt(2/e) (gamma_2 + Delta)` is dominated by the
# class-specific closed form when `Delta` is the single-neuron radius
# `2 c_w`.  With the full network radius `2 n c_w` that stops being true
# for wide networks.

# %%
for n in (1, 3, 10):
    c = ParameterClass(n, 2, 3.0, 1.0)
    gamma2 = entropy_integral_closed_form(c)[1]
    print(n, round(lambda_bound_class(c), 2), round(lambda_bound(gamma2, 2 * c.c_w), 2),
          round(lambda_bound(gamma2, 2 * n * c.c_w), 2))
