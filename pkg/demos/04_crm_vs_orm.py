"""Closed-loop vs open-loop reference model.

The leader either evolves autonomously or absorbs feedback from its direct
followers.  Both runs share every other setting; the report lists transient
peaks and tail sups of the tracking error and their ratios (informational).
"""

from etconsensus import analysis, simulator
from etconsensus.presets import paper_scenario

sc_crm = paper_scenario(mode="crm", kappa=0.2)
sc_orm = paper_scenario(mode="orm", kappa=0.0)
tr_crm = simulator.run(sc_crm)
tr_orm = simulator.run(sc_orm)

report = analysis.compare_crm_orm(tr_crm, tr_orm)
print(f"{'':12} {'transient peak':>15} {'tail sup':>10}")
for label in ("crm", "orm"):
    entry = report[label]
    print(f"{label:>12} {entry['transient_peak']:>15.4f} "
          f"{entry['tail_sup']:>10.4f}")
print(f"\nratio (closed over open): transient {report['ratio_transient']:.3f},"
      f" tail {report['ratio_tail']:.3f}")
print("values below 1.0 mean the follower feedback into the leader helped")
