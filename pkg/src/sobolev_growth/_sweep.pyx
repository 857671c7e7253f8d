# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sweep over canonical four-wave tuples ((j1, j2, j3, j4), (+, -, +, -))."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def sweep_canonical(int J, double alpha, double tol, int cap=10000):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pw_arr = np.abs(np.arange(-J, J + 1, dtype=np.float64)) ** alpha
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wt_arr = np.maximum(1.0, np.abs(np.arange(-J, J + 1, dtype=np.float64))) ** (1.0 - alpha)
    cdef double[:] pw = pw_arr
    cdef double[:] wt = wt_arr
    cdef int j1, j2, j3, j4, n_out, a
    cdef double om, aom, m, scaled
    cdef bint paired
    cdef long long counts[5]
    cdef long long res_counts[5]
    cdef long long integrable_high = 0, nonint_high = 0, anomalies = 0
    cdef double min1 = 1e300, min2 = 1e300, min2s = 1e300
    cdef int arg1[4]
    cdef int arg2[4]
    cdef int arg2s[4]
    cdef int mj
    candidates = []
    for a in range(5):
        counts[a] = 0
        res_counts[a] = 0
    for a in range(4):
        arg1[a] = 0
        arg2[a] = 0
        arg2s[a] = 0
    for j1 in range(-J, J + 1):
        for j2 in range(-J, J + 1):
            for j3 in range(-J, J + 1):
                j4 = j1 - j2 + j3
                if j4 < -J or j4 > J:
                    continue
                n_out = (j1 != 1 and j1 != -1) + (j2 != 1 and j2 != -1) + (j3 != 1 and j3 != -1) + (j4 != 1 and j4 != -1)
                counts[n_out] += 1
                om = pw[j1 + J] - pw[j2 + J] + pw[j3 + J] - pw[j4 + J]
                aom = fabs(om)
                paired = (j1 == j2 and j3 == j4) or (j1 == j4 and j2 == j3)
                if n_out == 0:
                    res_counts[0] += 1
                elif n_out == 1:
                    if aom <= tol:
                        res_counts[1] += 1
                    if aom < min1:
                        min1 = aom
                        arg1[0] = j1; arg1[1] = j2; arg1[2] = j3; arg1[3] = j4
                elif n_out == 2:
                    if paired:
                        res_counts[2] += 1
                    else:
                        if aom <= tol:
                            anomalies += 1
                        m = wt[j1 + J]
                        if wt[j2 + J] > m:
                            m = wt[j2 + J]
                        if wt[j3 + J] > m:
                            m = wt[j3 + J]
                        if wt[j4 + J] > m:
                            m = wt[j4 + J]
                        scaled = aom * m
                        if aom < min2:
                            min2 = aom
                            arg2[0] = j1; arg2[1] = j2; arg2[2] = j3; arg2[3] = j4
                        if scaled < min2s:
                            min2s = scaled
                            arg2s[0] = j1; arg2s[1] = j2; arg2s[2] = j3; arg2s[3] = j4
                else:
                    if paired:
                        res_counts[n_out] += 1
                        integrable_high += 1
                    elif aom <= tol:
                        res_counts[n_out] += 1
                        nonint_high += 1
                        if len(candidates) < cap:
                            candidates.append((j1, j2, j3, j4))
    return {
        "counts": [counts[a] for a in range(5)],
        "resonant_counts": [res_counts[a] for a in range(5)],
        "min_class1": min1,
        "argmin_class1": (arg1[0], arg1[1], arg1[2], arg1[3]),
        "min_class2": min2,
        "argmin_class2": (arg2[0], arg2[1], arg2[2], arg2[3]),
        "min_class2_scaled": min2s,
        "argmin_class2_scaled": (arg2s[0], arg2s[1], arg2s[2], arg2s[3]),
        "integrable_high": integrable_high,
        "nonintegrable_high": nonint_high,
        "class2_anomalies": anomalies,
        "candidates": candidates,
    }
