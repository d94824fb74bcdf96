"""Edit distance over Unicode code points.

The single-array Levenshtein below is the hot loop of both the fuzzy
dictionary index and the text-prediction clusterer, so it strips common
prefixes/suffixes before running the DP.
"""

from __future__ import annotations


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit-cost insert/delete/substitute.

    Operates on code points, not grapheme clusters; symmetric; 0 iff a == b.
    """
    if a == b:
        return 0
    la, lb = len(a), len(b)
    lim = min(la, lb)
    p = 0
    while p < lim and a[p] == b[p]:
        p += 1
    s = 0
    while s < lim - p and a[la - 1 - s] == b[lb - 1 - s]:
        s += 1
    a = a[p : la - s]
    b = b[p : lb - s]
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    row = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        diag = row[0]
        row[0] = i
        for j, cb in enumerate(b, 1):
            old = row[j]
            if ca == cb:
                row[j] = diag
            else:
                best = diag
                if row[j - 1] < best:
                    best = row[j - 1]
                if old < best:
                    best = old
                row[j] = best + 1
            diag = old
    return row[-1]


def normalized_distance(a: str, b: str) -> float:
    """Edit distance scaled to [0, 1] by the longer string's length.

    Two empty strings are defined to be at distance 0.
    """
    longer = max(len(a), len(b))
    if longer == 0:
        return 0.0
    return edit_distance(a, b) / longer
