"""Natural-language requirements verification for interactive GUI apps.

The pipeline: requirements are ingested into acceptance criteria, a
verification agent drives the GUI environment step by step, and each
run ends in a structured verdict summary from which the three-class
requirement state is derived. Runs persist as JSON-lines logs, are
queryable over HTTP, and are exposed to programming agents through a
JSON-RPC tool server. The bundled environment is a deterministic
simulator; the bundled agent replays recordings.
"""

from .requirements import (
    AcceptanceCriterion,
    Requirement,
    RequirementState,
    Verdict,
    VerificationSetup,
    derive_requirement_state,
    parse_requirements_structured,
)

__version__ = "0.1.0"

__all__ = [
    "AcceptanceCriterion",
    "Requirement",
    "RequirementState",
    "Verdict",
    "VerificationSetup",
    "derive_requirement_state",
    "parse_requirements_structured",
    "__version__",
]
