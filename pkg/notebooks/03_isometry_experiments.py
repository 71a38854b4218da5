# %% [markdown]
# # Empirical isometry and recovery experiments
#
# The theoretical sample sizes are far beyond anything runnable, so the
# experiments measure the quantities the bounds talk about on samples of
# realistic size.

# %%
from neurips_lab.bounds import DEFAULT_CONSTANTS, neurips_min_deviation, neurips_sample_bound
from neurips_lab.harness import (
    NeuripsConfig,
    agnostic_experiment,
    concentration_rate,
    teacher_student_runs,
    verify_neurips,
)
from neurips_lab.relu_model import ParameterClass, sample_parameter_class

cls = ParameterClass(2, 2, 1.0, 1.0)

# %% [markdown]
# ## How large is the theoretical sample size?

# %%
print("C1 = %.4g, C2 = %.4g" % (DEFAULT_CONSTANTS.C1, DEFAULT_CONSTANTS.C2))
for s in (0.9, 0.5, 0.1):
    print(f"s = {s}:  m >= {neurips_sample_bound(cls, s, 4.0, integer=True):.3e}")
print("smallest certified deviation at m = 1e12:", neurips_min_deviation(cls, 1e12, 4.0))

# %% [markdown]
# ## Concentration of the empirical norm
#
# For a fixed network the gap between empirical and expected squared norms
# shrinks like `m^{-1/2}`.

# %%
net = sample_parameter_class(cls, 1, 7)[0]
rep = concentration_rate(net, [100, 1000, 10_000], 100, 0)
print(rep.summary["mean_abs_dev"], "slope", round(rep.summary["slope"], 3))

# %% [markdown]
# ## Sup deviation over a normalized family
#
# The measured sup deviation is a lower bound on the sup over the whole
# class, since only a finite family is sampled.

# %%
for m in (100, 1000, 10_000):
    rep = verify_neurips(NeuripsConfig(cls, 20, m, 0.5, 40.0, 50, 0), geometry=False)
    print(m, round(rep.summary["s_tilde_median"], 4), rep.summary["neurips_fraction"])

# %% [markdown]
# ## Teacher-student recovery
#
# Whenever the measured isometry on far-away differences is good enough,
# every sampled network with small empirical risk must be close to the
# teacher in mu-distance.

# %%
one = ParameterClass(1, 2, 1.0, 1.0)
rep = teacher_student_runs(one, 1000, 0.1, 0.5, 5000, 10, 0)
print(rep.summary)
for tr in rep.trials[:3]:
    print(tr.measured)

# %% [markdown]
# ## Noisy labels

# %%
teacher = sample_parameter_class(one, 1, 9)[0]
rep = agnostic_experiment(one, teacher, 0.3, 2000, [0.0, 0.1, 0.3], 3000, 1)
print("noise sigma", rep.summary["noise_sigma"])
for tr in rep.trials:
    print(tr.measured)
