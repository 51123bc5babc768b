"""
Simulation and planning toolkit for tunable-magnet actuators: scalar Preisach hysteresis with return-point memory,
magnetization-state tuning (saturating and envelope methods), lumped circuit models of the C-shaped and the
bias-linearized hybrid actuator, coil heat accounting, and a randomized comparison harness.
"""

__version__ = "0.1.0"
