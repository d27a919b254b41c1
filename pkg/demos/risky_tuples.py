"""
Risky tuples: when more confidence raises the worst-case error
===============================================================

Lowering the error probability of one input label can increase an output's
MES.  Such a tuple is risky.  This demo walks through the first answer of the
startup query and probes each of its labeled tuples.
"""

from veriscope.datasets import FOUNDERS_QUERY, NAMES, running_example
from veriscope.mes import mes
from veriscope.query import evaluate_with_provenance, parse_query
from veriscope.risky import classify_tuples, is_risky_at, smallest_unsafe_probe

des = running_example()
o1 = evaluate_with_provenance(des, parse_query(FOUNDERS_QUERY, des))[0]
print(f"baseline MES of o1: {mes(des, o1).value:.4f}")

# Each tuple is checked by comparing MES at its current error with MES at 0.
for r in classify_tuples(des, o1, impairing=True):
    print(f"{NAMES[r.tuple_id]}: {r.classification}, MES at err 0 = {r.zero_err_mes:.4f}, "
          f"every reduction unsafe: {r.impairing}")

# A risky tuple need not be harmful at every probe.  For e2 a small error is
# unsafe but a moderate one lowers MES.
e2 = 10
for q in (0.01, 0.1, 0.3):
    d = des.with_err(e2, q)
    print(f"err(e2) = {q}: MES = {mes(d, o1).value:.4f}, unsafe = {is_risky_at(des, o1, e2, q)}")

print(f"largest unsafe probe err/2^i for e2: {smallest_unsafe_probe(des, o1, e2)}")
