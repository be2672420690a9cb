"""Exception hierarchy for the chevcalc package.

Every failure that callers are expected to catch and react to gets its own
class; anything else is a plain bug and raises a builtin.
"""


class ChevCalcError(Exception):
    """Base class for all package-specific errors."""


class InvalidType(ChevCalcError):
    """Root system label or rank outside the supported table."""


class OppositeRoots(ChevCalcError):
    """A commutator or constant lookup was asked for roots with beta = -gamma."""


class UnsupportedRing(ChevCalcError):
    """The requested ring construction or capability query is not available."""


class SubstitutionMismatch(ChevCalcError):
    """A substitution mapping does not cover the variables of the element."""


class UndecidableIdealClass(ChevCalcError):
    """Ideal membership was asked for a (ring, ideal) class with no complete test."""


class NotInIdeal(ChevCalcError):
    """A witness was requested for an element provably outside the ideal."""


class NotSplittingIdeal(ChevCalcError):
    """An operation needed a splitting pair (I, J) with I + J = full ring."""


class NotExtendedIdeal(ChevCalcError):
    """Witness reconstruction needed an ideal extended from the base ring."""


class CongruenceFailed(ChevCalcError):
    """A matrix congruence check that was asserted to hold did not."""


class ConditionViolated(ChevCalcError):
    """Ring/root-system hypotheses of the requested rewrite are not met."""


class NoUnitCombination(ChevCalcError):
    """No unit of the required shape exists in the ring (e.g. r with r^2-r a unit)."""


class BudgetExhausted(ChevCalcError):
    """A division-funded rewrite ran out of recorded multiplier budget."""


class NodeBudgetExceeded(ChevCalcError):
    """A word grew past the configured node-count limit during rewriting."""


class LocalizationMismatch(ChevCalcError):
    """Rings in a patching problem disagree about the localized element."""


class NotUnimodular(ChevCalcError):
    """A claimed cover does not generate the unit ideal."""


class ParseError(ChevCalcError):
    """Malformed serialized word or ring element."""


class OracleMismatch(ChevCalcError):
    """Two independent computations of the same quantity disagree."""
