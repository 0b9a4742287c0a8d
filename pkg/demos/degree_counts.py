"""Signed solution counts of the stacked min-map at a random small target.

    python3 demos/degree_counts.py
"""

from ehtcp import fixtures as fx
from ehtcp.degree_lab import DegreeRefused, estimate_degree, verify_lemma_degsame

for name in ("hlcp", "ex34", "ex31", "infinite"):
    try:
        est = estimate_degree(fx.TUPLES[name]())
    except DegreeRefused as e:
        print(f"{name:9s} refused: {e}")
        continue
    signs = [s for _, s in est.solutions]
    print(f"{name:9s} degree {est.value:+d} from signs {signs}, reliable={est.reliable}")

agree, a, d = verify_lemma_degsame(fx.ex31_tuple(), [[5.0, 5.0]])
print(f"\nex31 with d=(5,5): {a.value} vs {d.value}, agree={agree}")
