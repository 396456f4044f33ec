"""Why accumulate? Compare a per-sample threshold with CUSUM.

We replay a stealthy sensor bias of 0.02 (twice the drift) on top of
measurement noise. The stateless test with the same threshold never sees a
single sample above 0.1, while CUSUM integrates the excess and fires.
Only the detector is exercised here, so this runs instantly.
"""
import numpy as np

from fdi_mpc import CusumState, cusum_update, stateless_check
from fdi_mpc.detector import Residual

rng = np.random.default_rng(0)
steps, onset = 400, 200

noise = rng.normal(0.0, 0.002, (steps, 2))
bias = np.zeros((steps, 2))
bias[onset:, 0] = 0.02
residuals = np.linalg.norm(noise + bias, axis=1)

state = CusumState(delta=0.01, gamma=0.1)
cusum_alarm = None
for k, r in enumerate(residuals):
    state, alarm = cusum_update(state, Residual(float(r), k))
    if alarm and cusum_alarm is None:
        cusum_alarm = state.alarm_step

stateless = [k for k, r in enumerate(residuals) if stateless_check(float(r), 0.1)]

print(f"bias starts at step {onset}")
print(f"largest residual: {residuals.max():.4f}")
print(f"stateless alarms: {stateless or 'none'}")
print(f"CUSUM first alarm: step {cusum_alarm} ({cusum_alarm - onset} steps after onset)")
