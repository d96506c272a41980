"""Choosing which items to sell together when bundle totals are known more precisely."""

from __future__ import annotations

from robust_screening.bundles import best_partition, bundle_quote
from robust_screening.model import CollectionSpec

coll = CollectionSpec.from_dict({
    "subsets": [
        {"members": [0], "lower": 1, "upper": 4},
        {"members": [1], "lower": 1, "upper": 4},
        {"members": [2], "lower": 1, "upper": 4},
        {"members": [0, 1], "lower": 3.5, "upper": 4},
        {"members": [1, 2], "lower": 2, "upper": 8},
        {"members": [0, 1, 2], "lower": 3, "upper": 12},
    ]
})

best, candidates = best_partition(coll)
for part, g in candidates:
    print(f"{str(part.blocks):<22} guarantee {g:.6f}")
print(f"\nbest: {best.partition.blocks} at {best.gamma_star_B:.6f}")

q = bundle_quote(best, [2.0, 1.8, 3.0])
print(f"quote for v=(2, 1.8, 3): allocation {[round(x, 4) for x in q.allocation]}, payment {q.payment:.4f}")
