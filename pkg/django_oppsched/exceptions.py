class OppSchedError(Exception):
    """Base class for errors raised by django-oppsched"""


class DomainError(OppSchedError, ValueError):
    """An argument lies outside the domain of a formula"""


class NoLimitError(DomainError):
    """A numerical limit could not be established"""


class ScenarioError(OppSchedError):
    """A scenario cannot be resolved into a runnable configuration"""


class ScenarioParseError(ScenarioError):
    def __init__(self, key, message=None):
        self.key = key
        super().__init__(message or f"Scenario key '{key}' is missing")
