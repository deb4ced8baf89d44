from typing import Optional
from pydantic import BaseModel, ConfigDict, Field
from optivote.types import Digest

__all__: list[str] = [
    "RunManifest",
]


class RunManifest(BaseModel):
    """The provenance record written next to the outputs of every subcommand.

    Attributes:
        tool: The tool name.
        version: The tool version.
        command: The subcommand that produced the outputs.
        config_hash: The digest of the effective settings.
        seed (Optional): The seed of the run, if the subcommand draws randomness.
        inputs (Optional): The files read.
        outputs (Optional): The files written, relative to the output directory.
        wall_clock_s: The run duration in seconds. The only field that varies between
            identical runs.
    """

    model_config = ConfigDict(extra="forbid")

    tool: str = "optivote"
    version: str
    command: str
    config_hash: Digest
    seed: Optional[int] = None
    inputs: list[str] = Field(default_factory=list)
    outputs: list[str] = Field(default_factory=list)
    wall_clock_s: float = Field(ge=0)
