"""
MESReduce against the baselines on a synthetic join
====================================================

A random three-relation database is labeled as in the average-case scenario:
fair-coin ground truth, errors drawn from [0.2, 0.499] and labels flipped at
that rate.  Every strategy gets the same scenario draws and vote streams.
"""

import sys

from veriscope.datasets import synthetic_join_database
from veriscope.experiments import AVG, Strategy, run_comparison
from veriscope.query import evaluate_with_provenance, parse_query

repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 5

des, query = synthetic_join_database(seed=0)
outputs = evaluate_with_provenance(des, parse_query(query, des))
print(f"{len(des.tuple_ids)} input tuples, {len(outputs)} outputs, {repeats} repeats, budget 1000 votes")

reports = run_comparison(des, outputs, [AVG], Strategy.parse("all"), budget=1000, repeats=repeats, seed=0)

# Higher is better for both columns: a log-ratio above 1 means MES went down.
print(f"\n{'strategy':24s} {'mean log-ratio':>15s} {'worst F1 AUC':>13s}")
for r in sorted(reports, key=lambda r: -r.mean_log_ratio):
    print(f"{r.strategy:24s} {r.mean_log_ratio:15.3f} {r.worst_f1_auc:13.1f}")
