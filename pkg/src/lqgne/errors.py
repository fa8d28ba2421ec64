"""Exception hierarchy shared by all solver modules."""

import numpy as np


class DimensionMismatch(ValueError):
    pass


class InvalidGame(ValueError):
    """Problem data violates a structural or monotonicity requirement."""


class InconsistentEqualities(InvalidGame):
    """The equality constraints ``E x = f`` admit no solution."""


class SingularMatrix(np.linalg.LinAlgError):
    pass


class SingularSchur(SingularMatrix):
    """A working-set Schur complement ``A_W G^-1 A_W^T`` is numerically singular."""


class SingularKKT(SingularMatrix):
    pass


class SingularDCGain(SingularMatrix):
    pass


class HasEqualities(ValueError):
    """Raised by builders that only accept inequality-constrained games."""


class NoBounds(ValueError):
    pass


class SolverFailed(RuntimeError):
    pass
