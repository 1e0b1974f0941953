"""Spectator-qubit crosstalk detection toolkit.

Dense-matrix simulation of the single-flag modified-GHZ crosstalk detector:
noise channels (Kraus and Lindbladian), synthetic and H/S/A-parameterized
crosstalk models, circuit construction with dynamical decoupling, rotation-axis
characterization, and the experiment harness behind the ``csmqc`` CLI.
"""

__version__ = "0.1.0"
