"""Exception hierarchy; every class maps to a process exit code."""

from __future__ import annotations

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NETWORK = 4
EXIT_INSUFFICIENT = 5


class MrlensError(Exception):
    """Base for all tool errors. `code_name` is the machine-parsable class tag."""

    exit_code = EXIT_DATA
    code_name = "error"


class UsageError(MrlensError):
    exit_code = EXIT_USAGE
    code_name = "usage-error"


class ConfigError(UsageError):
    code_name = "config-error"


class DataValidationError(MrlensError):
    exit_code = EXIT_DATA
    code_name = "validation-error"


class ParseError(MrlensError):
    exit_code = EXIT_DATA
    code_name = "parse-error"


class IOFailure(MrlensError):
    exit_code = EXIT_DATA
    code_name = "io-error"


class DomainError(MrlensError):
    """Inputs outside an operation's documented domain."""

    exit_code = EXIT_DATA
    code_name = "domain-error"


class UndefinedStatisticError(DomainError):
    code_name = "undefined-statistic"


class NotApplicableError(DomainError):
    code_name = "not-applicable"


class NetworkError(MrlensError):
    exit_code = EXIT_NETWORK
    code_name = "network-error"


class CredentialError(NetworkError):
    code_name = "credential-error"


class RateLimitError(NetworkError):
    code_name = "rate-limit-error"


class IncompleteFetchError(NetworkError):
    code_name = "incomplete-fetch"


class InsufficientDataError(MrlensError):
    exit_code = EXIT_INSUFFICIENT
    code_name = "insufficient-data"
