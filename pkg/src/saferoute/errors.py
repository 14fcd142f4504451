"""Exception hierarchy.

Two families matter to callers: :class:`DataError` covers malformed or
inconsistent inputs, :class:`ComputationError` covers well-formed inputs
for which no answer exists (zero-likelihood evidence, unreachable
destination).  The CLI maps them to exit codes 2 and 3.
"""


class SafeRouteError(Exception):
    pass


class DataError(SafeRouteError, ValueError):
    pass


class ComputationError(SafeRouteError):
    pass


class SchemaMismatch(DataError):
    pass


class CyclicStructure(DataError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        path = " -> ".join(str(i) for i in self.cycle + self.cycle[:1])
        super().__init__(f"structure contains a directed cycle: {path}")


class InvalidCpt(DataError):
    pass


class InvalidConfig(DataError):
    pass


class MalformedTable(DataError):
    pass


class HeaderMismatch(DataError):
    pass


class UnknownState(DataError):
    pass


class RejectedMissing(DataError):
    pass


class UntaggedVariable(DataError):
    pass


class StaticInSnapshot(DataError):
    pass


class UnknownEdge(DataError):
    pass


class NonMonotoneTimestamps(DataError):
    pass


class ConflictingEvidence(DataError):
    pass


class UnknownNode(DataError):
    pass


class MissingCollisionVariable(DataError):
    pass


class ZeroEvidenceLikelihood(ComputationError):
    pass


class StateSpaceTooLarge(ComputationError):
    pass


class Unreachable(ComputationError):
    pass


class NonPositiveProbability(ComputationError, ValueError):
    pass
