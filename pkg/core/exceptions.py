"""
Error hierarchy shared by the numerical apps.

Every failure a simulation can signal derives from SimulationError so the
management command can turn it into a CommandError with scenario context.
"""


class SimulationError(Exception):
    """Base class for numerical failures"""


class InvalidGrid(SimulationError, ValueError):
    pass


class GridMismatch(SimulationError, ValueError):
    def __init__(self, message='grid mismatch'):
        super().__init__(message)


class ZeroReference(SimulationError, ZeroDivisionError):
    def __init__(self, message='zero reference'):
        super().__init__(message)


class WindowNotPeriodizable(SimulationError, ValueError):
    def __init__(self, message='window not numerically periodizable'):
        super().__init__(message)


class NotAFrame(SimulationError, ValueError):
    def __init__(self, message='not a frame'):
        super().__init__(message)


class UnknownPotential(SimulationError, KeyError):
    def __str__(self):
        # KeyError quotes its argument, we want the plain message
        return str(self.args[0]) if self.args else 'unknown potential'


class IndexOutOfRange(SimulationError, IndexError):
    pass


class StiffOrSingular(SimulationError, ArithmeticError):
    def __init__(self, message='stiff or singular'):
        super().__init__(message)


class FocalPoint(SimulationError, ArithmeticError):
    def __init__(self, message='focal point'):
        super().__init__(message)


class PropagationError(SimulationError):
    """A beam failed to propagate; carries the offending lattice index (m, n)"""

    def __init__(self, index, cause):
        self.index = index
        self.cause = cause
        super().__init__(f'beam at lattice index {index} failed: {cause}')
