"""Secure coded hierarchical aggregation over unreliable relay networks.

Submodules: ``codes`` (cyclic gradient codes), ``keys`` (zero-sum masks),
``netsim`` (Bernoulli links), ``protocol`` (round logic for each scheme),
``privacy`` (LDP accounting), ``fltrain`` (desk-scale training) and ``cli``.
"""

__version__ = "0.1.0"
