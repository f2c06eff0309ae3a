"""Sampled-data IDA-PBC attitude control of a rigid body.

Modules: ``attitude_math`` (quaternions, small linear algebra), ``dynamics``
(model, energies, structure matrices), ``flow`` (zero-order-hold flow and
Lie series), ``matching`` (discrete matching and damping equations),
``controllers`` (feedback laws, LQR baseline), ``simkit`` (closed-loop
simulation and sweeps) and ``verification`` (order-of-accuracy suites).
"""

__version__ = "0.1.0"
