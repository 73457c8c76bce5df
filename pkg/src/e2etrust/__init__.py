"""Trust metrics for low-power sensor networks.

Three metrics are provided (Simple, Weighted/WTM and WSES), together with a
requirement checker that searches for counterexamples to the two monotonicity
requirements, and a deterministic simulator of trust rounds over a DODAG.
"""

__version__ = "0.1.0"
