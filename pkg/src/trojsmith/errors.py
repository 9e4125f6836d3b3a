"""Exception hierarchy shared across the toolkit."""


class TrojsmithError(Exception):
    """Base class for all toolkit errors."""


# --- netlist construction / parsing ---

class NetlistError(TrojsmithError):
    pass


class UnsupportedCell(NetlistError):
    pass


class MultipleDrivers(NetlistError):
    pass


class UndrivenNet(NetlistError):
    pass


class UndeclaredNet(NetlistError):
    pass


class CombinationalCycle(NetlistError):
    pass


class NameCollision(NetlistError):
    pass


class MissingClock(NetlistError):
    pass


class InterfaceMismatch(NetlistError):
    pass


# --- feature extraction ---

class SequentialCell(TrojsmithError):
    pass


# --- ml kit ---

class MLError(TrojsmithError):
    pass


class EmptyClass(MLError):
    pass


class DimensionMismatch(MLError):
    pass


class TooFewSamples(MLError):
    pass


# --- insertion / harness ---

class InsertError(TrojsmithError):
    pass


class NoCandidates(InsertError):
    pass


class InsufficientCandidates(InsertError):
    pass


class NoLegalPayload(InsertError):
    pass


class PoolEmpty(InsertError):
    pass


class InsufficientRareNets(InsertError):
    pass
