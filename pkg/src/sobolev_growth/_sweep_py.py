"""Pure numpy fallback for the canonical four-wave sweep.

Mirrors ``_sweep.pyx`` operation for operation (same summation order, same
strict-improvement tie breaking) so that both back ends report identical
minima and attaining tuples.
"""

from __future__ import annotations

import numpy as np


def sweep_canonical(J: int, alpha: float, tol: float, cap: int = 10000) -> dict:
    grid = np.arange(-J, J + 1)
    pw = np.abs(grid.astype(float)) ** alpha
    wt = np.maximum(1.0, np.abs(grid.astype(float))) ** (1.0 - alpha)
    counts = np.zeros(5, dtype=np.int64)
    res_counts = np.zeros(5, dtype=np.int64)
    integrable_high = nonint_high = anomalies = 0
    min1 = min2 = min2s = 1e300
    arg1 = arg2 = arg2s = (0, 0, 0, 0)
    candidates: list[tuple[int, int, int, int]] = []

    j2, j3 = np.meshgrid(grid, grid, indexing="ij")
    j2 = j2.ravel()
    j3 = j3.ravel()
    out2 = np.abs(j2) != 1
    out3 = np.abs(j3) != 1
    for j1 in range(-J, J + 1):
        j4 = j1 - j2 + j3
        keep = (j4 >= -J) & (j4 <= J)
        a2, a3, a4 = j2[keep], j3[keep], j4[keep]
        n_out = int(abs(j1) != 1) + out2[keep].astype(int) + out3[keep].astype(int) + (np.abs(a4) != 1).astype(int)
        counts += np.bincount(n_out, minlength=5)
        om = pw[j1 + J] - pw[a2 + J] + pw[a3 + J] - pw[a4 + J]
        aom = np.abs(om)
        paired = ((j1 == a2) & (a3 == a4)) | ((j1 == a4) & (a2 == a3))

        res_counts[0] += int(np.count_nonzero(n_out == 0))

        sel = n_out == 1
        if np.any(sel):
            res_counts[1] += int(np.count_nonzero(aom[sel] <= tol))
            idx = np.flatnonzero(sel)
            i = idx[np.argmin(aom[idx])]
            if aom[i] < min1:
                min1 = float(aom[i])
                arg1 = (j1, int(a2[i]), int(a3[i]), int(a4[i]))

        sel2 = n_out == 2
        res_counts[2] += int(np.count_nonzero(sel2 & paired))
        np2 = sel2 & ~paired
        if np.any(np2):
            idx = np.flatnonzero(np2)
            anomalies += int(np.count_nonzero(aom[idx] <= tol))
            m = np.maximum(np.maximum(wt[j1 + J], wt[a2[idx] + J]), np.maximum(wt[a3[idx] + J], wt[a4[idx] + J]))
            scaled = aom[idx] * m
            i = idx[np.argmin(aom[idx])]
            if aom[i] < min2:
                min2 = float(aom[i])
                arg2 = (j1, int(a2[i]), int(a3[i]), int(a4[i]))
            k = int(np.argmin(scaled))
            if scaled[k] < min2s:
                min2s = float(scaled[k])
                i = idx[k]
                arg2s = (j1, int(a2[i]), int(a3[i]), int(a4[i]))

        high = n_out >= 3
        if np.any(high):
            hp = high & paired
            integrable_high += int(np.count_nonzero(hp))
            near = high & ~paired & (aom <= tol)
            nonint_high += int(np.count_nonzero(near))
            np.add.at(res_counts, n_out[hp | near], 1)
            for i in np.flatnonzero(near):
                if len(candidates) < cap:
                    candidates.append((j1, int(a2[i]), int(a3[i]), int(a4[i])))

    return {
        "counts": [int(c) for c in counts],
        "resonant_counts": [int(c) for c in res_counts],
        "min_class1": min1,
        "argmin_class1": arg1,
        "min_class2": min2,
        "argmin_class2": arg2,
        "min_class2_scaled": min2s,
        "argmin_class2_scaled": arg2s,
        "integrable_high": integrable_high,
        "nonintegrable_high": nonint_high,
        "class2_anomalies": anomalies,
        "candidates": candidates,
    }
