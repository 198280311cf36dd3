"""Error taxonomy, mirrored onto CLI exit codes.

ValidationError covers arguments that can never work (1), AudioError
covers inputs that should exist or parse but do not (2), and
ModelUnavailableError covers a pretrained backend that cannot be
loaded in this environment (3).
"""


class ExporterError(Exception):
    pass


class ValidationError(ExporterError):
    pass


class AudioError(ExporterError):
    pass


class ModelUnavailableError(ExporterError):
    pass
