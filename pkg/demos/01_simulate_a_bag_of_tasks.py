"""Simulate a bag of tasks on one remote site and read the TTC breakdown.

The smallest useful round trip: describe a site with a stochastic batch
queue, derive a pilot plan sized to the workload, simulate, and decompose
the resulting time to completion into waiting and execution components.
"""

import math

from pilotsim import (
    QueueModel,
    QueueModelKind,
    SimConfig,
    Site,
    make_bot,
    p_es,
    plan_aimes,
    run,
    ttc,
    ttc_ideal,
)

# 64 independent single-core tasks of 20 minutes each.
workload = make_bot(64, duration_s=1200.0)

# One site whose queue wait is lognormal with a median of five minutes.
site = Site(
    name="cluster-a",
    total_cores=4096,
    queue_model=QueueModel(
        QueueModelKind.LOGNORMAL, (math.log(300.0), 0.4)
    ),
)

# A derived plan: one pilot sized so the whole bag fits at once, with
# realistic bootstrap and shutdown overheads.
plan = plan_aimes(workload, [site], bootstrap_s=150.0, shutdown_s=150.0)
print(f"pilot: {plan.pilot_descriptions[0].cores} cores, "
      f"{plan.pilot_descriptions[0].walltime_s:.0f} s walltime")

trace = run(plan, workload, [site], SimConfig(seed=1))
breakdown = ttc(trace)

print(f"TTC  {breakdown.ttc_s:9.1f} s")
print(f"  Tx {breakdown.tx_s:9.1f} s  (execution path)")
print(f"  Tw {breakdown.tw_s:9.1f} s  (waiting)")
for name, seconds in breakdown.components.items():
    if seconds:
        print(f"    {name:<12} {seconds:9.1f} s")

ideal = ttc_ideal(plan, workload)
print(f"ideal TTC {ideal:.1f} s -> strategy performance "
      f"{p_es(ideal, breakdown.ttc_s):.1f}%")
