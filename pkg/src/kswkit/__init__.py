"""Key-switching toolkit: NTT variants, RNS conversion, hybrid and KLSS key switching,
a ModMul cost model and a cycle-level accelerator simulator."""

__version__ = "0.1.0"
