"""
Experiment documents, one model per CLI command. Unknown keys are rejected.
"""
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.errors import ConfigError


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TreeSpec(Strict):
    R: Optional[float] = Field(default=None, gt=0)
    delta: Optional[float] = Field(default=None, gt=0)
    depth: Optional[int] = Field(default=None, ge=0)
    family: int = Field(default=1, ge=1)


class QuadratureSpec(Strict):
    scheme: Literal["polar-grid", "monte-carlo"] = "polar-grid"
    size: int = Field(default=48, ge=1)
    angular: Optional[int] = Field(default=None, ge=1)
    grading: Optional[float] = Field(default=None, gt=0, le=1)


class FactorSpec(Strict):
    alpha: float
    center: List = Field(default_factory=lambda: [0.0])


class WeightSpec(Strict):
    kind: Literal["power-radial", "product", "cell-tabulated", "explicit"] = "power-radial"
    alpha: float = 0.0
    factors: Optional[List[FactorSpec]] = None
    table: Optional[List[float]] = None
    expression: Optional[str] = None
    scale: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _parameters_match_kind(self):
        needs = {"product": "factors", "cell-tabulated": "table", "explicit": "expression"}
        field = needs.get(self.kind)
        if field and getattr(self, field) is None:
            raise ValueError(f"a {self.kind} weight needs '{field}'")
        return self

    def as_dict(self) -> dict:
        return self.model_dump(exclude_none=True)


class YoungSpec(Strict):
    family: Literal["power", "power-log"] = "power"
    r: Optional[float] = Field(default=None, gt=1)
    p: Optional[float] = Field(default=None, ge=1)
    a: float = 0.0

    @model_validator(mode="after")
    def _parameters_match_family(self):
        if self.family == "power" and self.r is None:
            raise ValueError("a power Young function needs 'r'")
        if self.family == "power-log" and self.p is None:
            raise ValueError("a power-log Young function needs 'p'")
        return self

    def as_dict(self) -> dict:
        return self.model_dump(exclude_none=True)


class WeightPair(Strict):
    w: WeightSpec
    sigma: WeightSpec


class ApexSpec(Strict):
    levels: int = Field(default=8, ge=0)
    angular: int = Field(default=8, ge=1)


class Common(Strict):
    d: Literal[1, 2] = 1
    seed: Optional[int] = None
    threads: Optional[int] = Field(default=None, ge=1)


class BallCommon(Common):
    tree: TreeSpec = Field(default_factory=TreeSpec)
    quadrature: QuadratureSpec = Field(default_factory=QuadratureSpec)


class BuildTreeConfig(Common):
    tree: TreeSpec = Field(default_factory=TreeSpec)
    output: str = "tree"


class CharacteristicsConfig(BallCommon):
    pairs: List[WeightPair]
    p: float = Field(default=2.0, gt=1)
    phi: YoungSpec = Field(default_factory=lambda: YoungSpec(r=1.5))
    psi: YoungSpec = Field(default_factory=lambda: YoungSpec(r=1.5))
    apex: ApexSpec = Field(default_factory=ApexSpec)
    output: str = "characteristics"


class VerifyConfig(BallCommon):
    runs: List[Literal["theorem1", "theorem_a", "theorem2", "prop42", "prop42_dual", "prop34", "sawyer"]]
    alphas: List[float] = Field(default_factory=lambda: [-0.5, -0.25, 0.0, 0.25, 0.5])
    young: List[YoungSpec] = Field(default_factory=lambda: [YoungSpec(r=1.5)])
    p_values: List[float] = Field(default_factory=lambda: [2.0])
    norm_quadrature: Optional[QuadratureSpec] = None
    norm_method: Literal["discrete", "modal"] = "discrete"
    output: str = "verify"


class ModelOracleConfig(Common):
    depth: int = Field(default=10, ge=2)
    coarse_depth: int = Field(default=8, ge=1)
    seeds: int = Field(default=50, ge=1)
    spread: int = Field(default=2, ge=1)
    p: float = Field(default=2.0, gt=1)
    phi: YoungSpec = Field(default_factory=lambda: YoungSpec(r=1.5))
    output: str = "model"

    @model_validator(mode="after")
    def _depths_ordered(self):
        if self.coarse_depth >= self.depth:
            raise ValueError("coarse_depth must be below depth")
        return self


class CompareConfig(BallCommon):
    alphas: List[float] = Field(default_factory=lambda: [-0.5, 0.0, 0.5])
    apex: ApexSpec = Field(default_factory=ApexSpec)
    covering_apexes: List[Tuple[float, float]] = Field(default_factory=list)
    output: str = "compare"


COMMANDS = {
    "build-tree": BuildTreeConfig,
    "characteristics": CharacteristicsConfig,
    "verify": VerifyConfig,
    "model-oracle": ModelOracleConfig,
    "compare": CompareConfig,
}


def parse_config(command: str, doc: dict):
    try:
        model = COMMANDS[command]
    except KeyError:
        raise ConfigError(f"unknown command {command!r}") from None
    try:
        return model.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(f"invalid {command} config: {exc}") from exc
