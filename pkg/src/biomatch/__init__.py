"""biomatch: privacy-preserving biometric verification.

A quantized log-likelihood-ratio comparator precomputed into lookup tables,
encrypted element-wise under additive threshold EC-ElGamal, and evaluated in
a two-round sensor/service protocol that reveals only the verdict, and only
to the sensor.
"""

__version__ = "0.1.0"
