"""Toolkit for generating and comparing SICR event definitions on loan panels."""
from .core import (LoanHistory, SicrDefinition, compute_status, definition_grid,
                   is_default, label_outcomes)
from .errors import SchemaMismatchError, SicrError

__all__ = ["LoanHistory", "SicrDefinition", "compute_status", "definition_grid",
           "is_default", "label_outcomes", "SicrError", "SchemaMismatchError"]

__version__ = "0.1.0"
