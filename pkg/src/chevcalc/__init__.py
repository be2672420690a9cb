"""Exact computation in elementary Chevalley groups.

The package provides root systems with verified structure constants,
exact polynomial rings with witnessed ideals, faithful matrix
representations used as correctness oracles, a group-word layer with
shape certificates, rewriting routines that normalize and localize
words while tracking ideal membership of every argument, and a
local-global patching pipeline built on top of them.
"""

__version__ = "0.1.0"
