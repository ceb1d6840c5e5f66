"""Security analysis of differential-phase-shift QKD with two i.i.d. light sources.

Subpackages:

- ``fock``      truncated Fock-space linear algebra (states, beam splitters, loss)
- ``source``    light-source models and photon-statistics characterization
- ``bounds``    phase-error and secret-key-rate bounds, intensity optimization, sweeps
- ``oracle``    exact verification of the measurement operators and every bound
- ``protocol``  Monte Carlo simulation of the block-wise protocol
- ``cli``       command-line front end (``dpsqkd`` entry point)
"""

from . import bounds, fock, oracle, protocol, source

__all__ = ["bounds", "fock", "oracle", "protocol", "source"]
__version__ = "0.1.0"
