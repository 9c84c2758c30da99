"""Exception hierarchy shared across the package.

Two families matter to callers: ``ValidationError`` (bad input, CLI exit
code 2) and ``NumericalError`` (a solve or check failed, CLI exit code 3).
"""


class LamelabError(Exception):
    pass


class ValidationError(LamelabError):
    pass


class NumericalError(LamelabError):
    pass


# -- input validation ---------------------------------------------------

class BadModulus(ValidationError):
    pass


class BadParams(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class OrderOverflow(ValidationError):
    pass


class ResonantOmega(ValidationError):
    pass


class VerticalComponent(ValidationError):
    pass


class CoincidentPoles(ValidationError):
    pass


# -- numerical failures -------------------------------------------------

class NonConvergent(NumericalError):
    pass


class NearPole(NumericalError):
    pass


class NotQuasiPeriodic(NumericalError):
    pass


class DegenerateSample(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class DegenerateA(NumericalError):
    pass


class CountMismatch(NumericalError):
    def __init__(self, expected, found, msg=""):
        self.expected = expected
        self.found = found
        super().__init__(msg or f"expected {expected} solutions, found {found}")


class NotEigen(NumericalError):
    pass


class NotConstant(NumericalError):
    pass


class Incompatible(NumericalError):
    pass


class IncompatibleQscon(NumericalError):
    pass


class DegenerateKernel(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class NoSolution(NumericalError):
    pass


class BranchAmbiguity(NumericalError):
    pass
