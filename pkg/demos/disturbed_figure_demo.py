# Reproduce the canned comparison: saturated loop under a cosine
# disturbance (blue trace) against the unsaturated, undisturbed loop (red
# trace).  Artifacts are CSV; point any plotter at them.
#
#   figure1_states.csv        full state history of the disturbed run
#                             (rows = time, columns = nodes) for a surface plot
#   figure1_norms.csv         t, norm_disturbed, norm_linear
#   figure1_observables.csv   per-step norms and Lyapunov observables

import numpy as np

from satiss.cli import reproduce_figure1

outdir, files = reproduce_figure1("demo_out/figure1")
print("wrote:")
for name in files:
    print("  %s/%s" % (outdir, name))

rows = np.loadtxt("%s/figure1_norms.csv" % outdir, delimiter=",", skiprows=1)
t, disturbed, linear = rows[:, 0], rows[:, 1], rows[:, 2]
print("\ndisturbed trace: starts %.3f, sup %.3f, ends %.4f"
      % (disturbed[0], disturbed.max(), disturbed[-1]))
print("linear trace:    starts %.3f, ends %.2e" % (linear[0], linear[-1]))
print("the disturbed norm stays bounded near 0 (input-to-state stability),")
print("the undisturbed linear norm decays exponentially below it")
