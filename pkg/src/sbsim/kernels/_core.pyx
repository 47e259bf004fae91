# cython: boundscheck=False, wraparound=False, cdivision=False
"""Compiled twin of pyfallback.py; must match it bit for bit."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def thermal_advance(double temp, double t_env, double tau_ticks,
                    double watts, double c_j_per_k, double tick_s,
                    long n_ticks):
    cdef double gain = watts * tick_s / c_j_per_k
    cdef long i
    for i in range(n_ticks):
        temp = temp + (t_env - temp) / tau_ticks + gain
    return temp


def thermal_trace(double temp, double t_env, double tau_ticks,
                  double watts, double c_j_per_k, double tick_s,
                  long n_ticks):
    out = np.empty(n_ticks, dtype=np.float64)
    cdef double[::1] view = out
    cdef double gain = watts * tick_s / c_j_per_k
    cdef long i
    for i in range(n_ticks):
        temp = temp + (t_env - temp) / tau_ticks + gain
        view[i] = temp
    return out
