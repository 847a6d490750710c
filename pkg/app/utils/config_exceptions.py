from dataclasses import dataclass
from typing import List, Optional


@dataclass(frozen=True)
class ConfigIssue:
    """One problem found in a configuration document."""
    line: Optional[int]
    key: str
    message: str

    def __str__(self) -> str:
        where = f"line {self.line}" if self.line is not None else "flag"
        return f"{where}: {self.key}: {self.message}"


class ConfigError(Exception):
    """Raised when a configuration document has one or more problems."""
    def __init__(self, issues: List[ConfigIssue], message: str = "Invalid configuration"):
        self.issues = list(issues)
        self.message = message
        details = "; ".join(str(issue) for issue in self.issues)
        super().__init__(f"{message}: {details}" if details else message)
