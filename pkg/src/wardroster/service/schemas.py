"""Request and response bodies for the scheduling service.

The instance, roster, and directives payloads reuse the file-format
documents verbatim, so anything the command line writes can be uploaded
unchanged.  Only the thin envelopes around them live here.
"""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field


class ConfigBody(BaseModel):
    """Mirror of the engine search configuration."""

    model_config = ConfigDict(extra="forbid")

    strategy: Literal["LNPS", "MP", "MP_IS"]
    time_limit_seconds: float
    random_seed: int = 0
    soften_hard: bool = False
    restart_interval_seconds: float | None = None
    mp_priority: Literal["highest", "middle", "lowest"] | None = None
    max_steps: int | None = None
    stall_stop_seconds: int | float | None = None

    def as_kwargs(self) -> dict[str, Any]:
        return self.model_dump()


class CreateSessionBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    instance: dict[str, Any]
    config: ConfigBody
    directives: dict[str, Any] | None = None


class ControlBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: Literal["start", "pause", "resume", "stop", "soften"]
    flag: bool | None = None


class CellRef(BaseModel):
    model_config = ConfigDict(extra="forbid")

    nurse: str
    day: int


class FixOp(BaseModel):
    model_config = ConfigDict(extra="forbid")

    nurse: str
    day: int
    shift: str


class RequestOp(BaseModel):
    model_config = ConfigDict(extra="forbid")

    nurse: str
    day: int
    shift: str
    polarity: Literal["pos", "neg"]


class DirectivePatchBody(BaseModel):
    """One atomic batch of edits; an empty patch is rejected by the handler."""

    model_config = ConfigDict(extra="forbid")

    fix: list[FixOp] = Field(default_factory=list)
    unfix: list[CellRef] = Field(default_factory=list)
    clear: list[CellRef] = Field(default_factory=list)
    set_request: list[RequestOp] = Field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.fix or self.unfix or self.clear or self.set_request)
