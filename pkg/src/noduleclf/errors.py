"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: InputError -> 2, ContractError -> 3.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class InputError(PipelineError):
    """A user-supplied input (file, manifest, image, CSV) is missing or malformed."""


class ContractError(PipelineError):
    """An artifact or argument violates an internal contract (schema version,
    bin counts, dimension mismatch, missing threshold)."""
