"""Search for witnesses against the structured classes of a few tuples.

A witness is a normalized point satisfying a class premise, so it shows the
tuple is *not* in the class. Finding none only means none was found.

    python3 demos/class_witnesses.py
"""

import numpy as np

from ehtcp import fixtures as fx
from ehtcp.class_analysis import ClassName, falsify, propagate_witness

for name in ("ex31", "ex32", "ex33", "ex34"):
    tup = fx.TUPLES[name]()
    print(f"{name} (m={tup.m}, n={tup.n}, k={tup.k})")
    verdicts = {c: falsify(c, tup, budget=0.5) for c in ClassName}
    for c, v in verdicts.items():
        line = f"  {c.value:12s} {v.status.value}"
        if v.refuted:
            line += f"  {np.round(v.witness.point, 4).tolist()}"
        print(line)
    # a refuted EHR0 also refutes EHE and EHP with the same point
    if verdicts[ClassName.EHR0].refuted:
        w = propagate_witness(verdicts[ClassName.EHR0].witness, ClassName.EHR0,
                              ClassName.EHP, tup)
        print("  EHR0 witness reused for EHP, residual", w.premise_residual)
