"""
Exception hierarchy for the simulator.

Everything raised on purpose by the simulator derives from ``GridflowError`` so
the management command and the API can map it to an exit code or a 400.
"""


class GridflowError(Exception):
    """Base class for simulator errors"""

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.message = message
        self.detail = detail

    def as_dict(self):
        payload = {'error': type(self).__name__, 'message': self.message}
        if self.detail is not None:
            payload['detail'] = self.detail
        return payload


class CaseError(GridflowError):
    """Network case violates the schema or a structural invariant"""


class ConfigurationError(GridflowError):
    """Scenario is inconsistent with its case or carries invalid settings"""


class UnobservableError(ConfigurationError):
    """WLS normal matrix is singular for the configured observation model"""


class InfeasibleDemandError(GridflowError):
    """Demand lies outside the combined generator limits"""


class EmptyFeasibleSetError(GridflowError):
    """No dispatch on the search grid satisfies the line limits"""


class SingularProjectionError(GridflowError):
    """Basis handed to a projection has numerically dependent columns"""
