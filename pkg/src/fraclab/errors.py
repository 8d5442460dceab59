"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class FraclabError(Exception):
    exit_code = 1


class ConfigError(FraclabError, ValueError):
    exit_code = 2


class NonConvergenceError(FraclabError, RuntimeError):
    exit_code = 3


class BlowUpError(FraclabError, FloatingPointError):
    exit_code = 4


class NoiseFloorError(FraclabError, RuntimeError):
    exit_code = 5
