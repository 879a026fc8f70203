"""Fault ablations: what each disturbance class costs.

Four runs of the same seeded scenario toggling the two fault classes.
Communication faults wiggle every declared link weight; actuator faults add
sinusoids to both input channels.  The table shows the tail tracking error
and the leader-matrix estimation error under each combination.
"""

import numpy as np

from etconsensus import analysis, simulator
from etconsensus.presets import paper_scenario

rows = []
for comm, act in ((True, True), (True, False), (False, True), (False, False)):
    sc = paper_scenario(comm_enabled=comm, actuator_enabled=act)
    tr = simulator.run(sc)
    tail = tr.t >= 16.0
    err = analysis.tracking_errors(tr)[tail].max()
    est = analysis.estimation_errors(tr)
    rows.append((comm, act, err, est["ahat"][tail].max(),
                 est["xbar"][tail].max()))

print(f"{'comm':>6} {'actuator':>9} {'tail tracking':>14} "
      f"{'matrix est.':>12} {'state obs.':>11}")
for comm, act, err, ahat, xbar in rows:
    print(f"{str(comm):>6} {str(act):>9} {err:>14.5f} {ahat:>12.6f} "
          f"{xbar:>11.6f}")

print("\nnotes:")
print("- actuator faults dominate the tail tracking error; the estimator")
print("  cannot cancel moving faults, so the feedback bandwidth absorbs them")
print("- communication faults barely disturb consensus: perturbed weights")
print("  multiply disagreement terms that vanish as the network agrees")
