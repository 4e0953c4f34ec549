class LmprmError(Exception):
    pass


class SamplingError(LmprmError):
    """Rejection sampling ran out of budget; free space is (nearly) empty."""


class CalibrationError(LmprmError):
    """No intensity in the search bracket reaches the requested clear probability."""


class FormatError(LmprmError):
    """Bad magic, version, truncated file or checksum failure."""


class FingerprintMismatch(LmprmError):
    """A landmark table was paired with a graph other than the one it was built on."""


class ParentCycleError(LmprmError):
    pass
