"""
Spending a verification budget on the startup database
=======================================================

MESReduce repeatedly picks the output with the highest MES, chooses a batch
of input tuples to re-verify and asks a simulated crowd for fresh votes.  We
run it with a perfect oracle and with a noisy majority-vote crowd, then run a
baseline that visits tuples by occurrence count.
"""

import numpy as np

from veriscope.datasets import EXAMPLE_WORLD, FOUNDERS_QUERY, running_example
from veriscope.query import evaluate_with_provenance, parse_query
from veriscope.reduce import OCCURRENCES_COUNT, mes_reduce, run_baseline
from veriscope.verifier import VerifierModel

des = running_example()
outputs = evaluate_with_provenance(des, parse_query(FOUNDERS_QUERY, des))


def show(title, result):
    t = result.trace
    print(f"\n{title}: {t.termination} after {t.cost} votes")
    for s in t.steps:
        mes_txt = "n/a" if s.max_mes is None else f"{s.max_mes:.4g}"
        print(f"  step {s.index:2d}  cost {s.cost:3d}  {s.action:8s}  verified {list(s.verified)}  max MES {mes_txt}")


# With an oracle that never errs, every verified label gets error 0 and MES
# falls to exactly 0.
show("perfect oracle", mes_reduce(des, outputs, 100, EXAMPLE_WORLD, VerifierModel.perfect()))

# A crowd of workers who are each wrong 30% of the time needs several votes
# per label; the target error shrinks step by step.
crowd = VerifierModel(error=0.3)
show("majority vote", mes_reduce(des, outputs, 60, EXAMPLE_WORLD, crowd, rng=np.random.default_rng(1)))

show("occurrences-count baseline",
     run_baseline(OCCURRENCES_COUNT, 0.01, des, outputs, 60, EXAMPLE_WORLD, crowd, np.random.default_rng(1)))
