"""Pure-Python reference implementation of the hot kernels.

The compiled twin in _core.pyx must stay bit-identical: same expression
order, doubles only, no fused multiply-add (the extension is built with
-ffp-contract=off for that reason). Tests assert exact equality.
"""

import numpy as np


def thermal_advance(temp: float, t_env: float, tau_ticks: float,
                    watts: float, c_j_per_k: float, tick_s: float,
                    n_ticks: int) -> float:
    """Explicit-Euler room temperature after n_ticks.

    Per tick: dT = (t_env - T)/tau_ticks + watts*tick_s/c_j_per_k.
    Inputs (heater power, occupancy gain folded into watts) are constant
    over the window; callers split windows at every state change.
    """
    gain = watts * tick_s / c_j_per_k
    for _ in range(n_ticks):
        temp = temp + (t_env - temp) / tau_ticks + gain
    return temp


def thermal_trace(temp: float, t_env: float, tau_ticks: float,
                  watts: float, c_j_per_k: float, tick_s: float,
                  n_ticks: int) -> np.ndarray:
    """Temperature after each of n_ticks Euler steps (length n_ticks)."""
    out = np.empty(n_ticks, dtype=np.float64)
    gain = watts * tick_s / c_j_per_k
    for i in range(n_ticks):
        temp = temp + (t_env - temp) / tau_ticks + gain
        out[i] = temp
    return out
