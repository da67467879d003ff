"""Exception hierarchy shared across the package."""


class CubevidError(Exception):
    """Base class for all cubevid errors."""


class ConfigurationError(CubevidError):
    """A rule, axis binding or option set is invalid."""


class CodecError(CubevidError):
    """The external encoder or decoder process failed."""


class CorruptStreamError(CodecError):
    """A video or image stream could not be decoded."""


class ManifestError(CubevidError):
    """A container directory is missing files or carries a bad manifest."""
