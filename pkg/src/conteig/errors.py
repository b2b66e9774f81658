"""Exception hierarchy for conteig."""


class ConteigError(Exception):
    """Base class for all conteig errors."""


class NonConvergent(ConteigError):
    """Adaptive refinement hit its degree cap without resolving the target."""


class DomainMismatch(ConteigError):
    """Operands are defined on different intervals."""


class IllConditioned(ConteigError):
    """A linear solve is too ill-conditioned to trust; usually the shift sits
    too close to the spectrum."""


class ZeroMatrix(ConteigError):
    """A factorization target is identically zero."""


class ZeroFunction(ConteigError):
    """An operation required a nonzero function."""


class PoleHit(ConteigError):
    """Evaluation point coincides with a quadrature node."""


class NotEnoughEigenvalues(ConteigError):
    """Fewer eigenvalue estimates supplied than the requested moment space."""


class RankCollapse(ConteigError):
    """The projected subspace lost all numerical rank."""


class SingularPencil(ConteigError):
    """The matrix pencil is singular to working tolerance."""


class NoConvergence(ConteigError):
    """A dense eigenvalue/SVD iteration failed to converge."""
