"""Sweep a built-in experiment preset and print the P_ES matrix.

Each preset pins an execution strategy (planner, binding, pilot shapes) and
sweeps it over bag-of-tasks sizes; repeats rerun each size under different
seeded queue-wait draws. The same sweep is available from the command line:

    pilotsim --preset exp3 --repeats 5 --out results/
"""

from dataclasses import replace

from pilotsim import format_table, get_preset, run_experiment

for name in ("exp1", "exp3"):
    cfg = replace(get_preset(name), repeats=5)
    result = run_experiment(cfg)
    print(format_table(result))
    print()

print("The derived late-binding strategy (exp3) consistently scores higher")
print("than the fixed early-binding one (exp1), and both decline as the")
print("bag grows: more pilot generations and larger pilots mean more time")
print("spent waiting relative to the ideal.")
