# Copyright (C) 2026, lmdp-lab contributors
# SPDX-License-Identifier: BSD-3-Clause


class LabException(Exception):
    exit_code = 1


class ConfigError(LabException):
    exit_code = 2


class MdpValidationError(LabException):
    exit_code = 2

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)


class SchemaMismatchError(LabException):
    exit_code = 2


class InstanceVerificationError(LabException):
    pass


class UnboundedSpanError(LabException):
    def __init__(self, message, iterations, span):
        super().__init__(message)
        self.iterations = iterations
        self.span = span


class ImpossibleHistoryError(LabException):
    pass


class BeliefLimitExceeded(LabException):
    def __init__(self, nodes, limit):
        super().__init__(
            f"belief MDP has more than {limit} nodes (reached {nodes} before stopping)"
        )
        self.nodes = nodes
        self.limit = limit


class InvalidActionError(LabException):
    pass


class AcceptanceFailure(LabException):
    exit_code = 3
