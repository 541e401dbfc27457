"""Exception hierarchy shared by every module of the package."""


class PolarLabError(Exception):
    """Base class for all computation errors raised by the package."""


class OnPrimeSphere(PolarLabError):
    pass


class OnPolarSphere(PolarLabError):
    pass


class ChartDomain(PolarLabError):
    pass


class EvaluationFailure(PolarLabError):
    pass


class InvarianceViolated(PolarLabError):
    pass


class NotC1(PolarLabError):
    """A Jacobian-dependent operation was asked of a map flagged C0 only."""


class RegularValueNotFound(PolarLabError):
    pass


class PreimageSearchIncomplete(PolarLabError):
    pass


class SamplingCapExceeded(PolarLabError):
    pass


class BoundaryZeroSuspected(PolarLabError):
    pass


class DepthCapExceeded(PolarLabError):
    pass


class TrackingLoss(PolarLabError):
    pass


class DegenerateTransversalDegree(PolarLabError):
    pass


class BoxCapExceeded(PolarLabError):
    pass


class CertificateInconsistency(PolarLabError):
    """Nonzero boundary degree but the interior Newton search found nothing."""


class SpectralGapTooSmall(PolarLabError):
    pass


class NonSingularJacobian(PolarLabError):
    """A_p is regular although |d| > 1, where it should be singular."""


class NotAFixedPoint(PolarLabError):
    pass


class RadiusCollapse(PolarLabError):
    pass


class ContinuumSuspected(PolarLabError):
    pass


class SpecError(PolarLabError):
    """Malformed map-family specification string."""


class DegreeInconsistent(PolarLabError):
    """Independent degree evaluations disagreed."""
