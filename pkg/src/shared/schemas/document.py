"""
Schema of the problem documents consumed by the command line.

Every formula in a document is an expression string in the package grammar (see
``shared.numerics.expressions``); it is parsed while the document validates, so grammar
errors surface as ordinary validation errors with a field path.
"""

from __future__ import annotations

from typing import Annotated, Any, Literal

from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    ValidationInfo,
    field_validator,
    model_validator,
)

from shared.numerics.expressions import GRAMMAR_VERSION, Expression


def _expression_text(value: Any) -> str:
    if isinstance(value, bool):
        raise ValueError("expressions are strings or numbers, not booleans")
    if isinstance(value, (int, float)):
        return repr(float(value))
    if not isinstance(value, str):
        raise ValueError("expressions are strings or numbers")
    Expression.parse(value)
    return value


Expr = Annotated[str, BeforeValidator(_expression_text)]


def _max_index(texts: list[str]) -> int:
    return max((Expression.parse(t).max_index for t in texts), default=0)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ---------------------------------------------------------------------------
# fields and clouds
# ---------------------------------------------------------------------------


class FieldSource(_Section):
    """
    A scalar field in closed form; derivatives are optional expression lists.
    """

    value: Expr
    gradient: list[Expr] | None = None
    hessian: list[list[Expr]] | None = None
    smoothness: Literal["C0", "C1", "C2", "CINF"] | None = None
    label: str | None = None

    @model_validator(mode="before")
    @classmethod
    def _shorthand(cls, data: Any) -> Any:
        if isinstance(data, (str, int, float)) and not isinstance(data, bool):
            return {"value": data}
        return data

    @model_validator(mode="after")
    def _square_hessian(self) -> FieldSource:
        if self.hessian is not None:
            n = len(self.hessian)
            if any(len(row) != n for row in self.hessian):
                raise ValueError("hessian must be a square table of expressions")
            if self.gradient is not None and len(self.gradient) != n:
                raise ValueError("gradient and hessian disagree on the dimension")
        return self

    def texts(self) -> list[str]:
        out = [self.value, *(self.gradient or [])]
        for row in self.hessian or []:
            out.extend(row)
        return out


class GridCloud(_Section):
    kind: Literal["grid"]
    lo: float
    hi: float
    n: int = Field(..., ge=1, le=10_000)

    @model_validator(mode="after")
    def _ordered(self) -> GridCloud:
        if self.hi < self.lo:
            raise ValueError("grid needs lo <= hi")
        return self


class BallCloud(_Section):
    kind: Literal["ball"]
    radius: float = Field(..., gt=0.0)
    count: int = Field(..., ge=1, le=1_000_000)
    seed: int = Field(..., ge=0, description="Every stochastic cloud carries its own seed")
    center: list[float] | None = None


class ExplicitCloud(_Section):
    kind: Literal["explicit"]
    points: list[list[float]] = Field(..., min_length=1)

    @field_validator("points", mode="before")
    @classmethod
    def _as_rows(cls, value):
        if isinstance(value, list) and value and not isinstance(value[0], list):
            return [[v] for v in value]
        return value

    @field_validator("points")
    @classmethod
    def _rectangular(cls, value: list[list[float]]) -> list[list[float]]:
        if len({len(row) for row in value}) != 1:
            raise ValueError("explicit points must share one dimension")
        return value


CloudSource = Annotated[GridCloud | BallCloud | ExplicitCloud, Field(discriminator="kind")]


# ---------------------------------------------------------------------------
# operator tree
# ---------------------------------------------------------------------------


class DriftNode(_Section):
    kind: Literal["drift"]
    b: list[Expr] = Field(..., min_length=1, description="Drift components in x1..xq")
    hconv: Expr | None = Field(None, description="Convex part 𝓗 in p1..pq")
    lipschitz: float | None = Field(None, ge=0.0)
    growth: float | None = Field(None, ge=0.0)
    label: str = "drift"

    @field_validator("b")
    @classmethod
    def _state_only(cls, value: list[str]) -> list[str]:
        for text in value:
            if any(v.startswith("p") for v in Expression.parse(text).variables):
                raise ValueError(f"drift component {text!r} may only use x variables")
        return value

    @field_validator("hconv")
    @classmethod
    def _momentum_only(cls, value: str | None) -> str | None:
        if value is not None and any(
            v.startswith("x") for v in Expression.parse(value).variables
        ):
            raise ValueError("the convex part depends on p1..pq only")
        return value

    def texts(self) -> list[str]:
        return [*self.b, *([self.hconv] if self.hconv else [])]


class DiffusionNode(_Section):
    kind: Literal["diffusion"]
    sigma: list[list[Expr]] = Field(..., min_length=1, description="Rows of Σ(x)")
    label: str = "diffusion"

    def texts(self) -> list[str]:
        return [t for row in self.sigma for t in row]


class AtomSource(_Section):
    z: list[Expr] = Field(..., min_length=1)
    w: Expr = "1"


class JumpNode(_Section):
    """
    Jump measure μ_x: a preset walk, a map-induced atom δ_{η(x)}, or explicit atoms whose
    location and weight may depend on x. Atoms landing on the origin are dropped.
    """

    kind: Literal["jump"]
    measure: Literal["walk", "returning_walk", "map", "atoms"] = "atoms"
    weight: float = Field(1.0, gt=0.0, description="Atom weight of the preset walk")
    atoms: list[AtomSource] = Field(default_factory=list)
    eta: list[Expr] | None = None
    cut_r0: float = Field(0.5, gt=0.0, lt=1.0)
    label: str = "jump"

    @model_validator(mode="after")
    def _measure_inputs(self) -> JumpNode:
        if self.measure == "map" and not self.eta:
            raise ValueError("a map measure needs eta")
        if self.measure == "atoms" and not self.atoms:
            raise ValueError("an atoms measure needs at least one atom")
        return self

    def texts(self) -> list[str]:
        out = list(self.eta or [])
        for atom in self.atoms:
            out.extend([*atom.z, atom.w])
        return out


class SumNode(_Section):
    kind: Literal["sum"]
    terms: list[OperatorNode] = Field(..., min_length=1)
    label: str = "sum"

    def texts(self) -> list[str]:
        return [t for term in self.terms for t in term.texts()]


class IsaacsNode(_Section):
    """
    sup over theta1, inf over theta2; ``cost[i][j] = null`` marks an absent control pair.
    """

    kind: Literal["isaacs"]
    theta1: list[str] = Field(..., min_length=1)
    theta2: list[str] = Field(..., min_length=1)
    components: list[list[OperatorNode]]
    cost: list[list[Expr | None]] | None = None
    label: str = "isaacs"

    @model_validator(mode="after")
    def _shapes(self) -> IsaacsNode:
        n1, n2 = len(self.theta1), len(self.theta2)
        if len(self.components) != n1 or any(len(row) != n2 for row in self.components):
            raise ValueError(f"components must be a {n1}x{n2} table")
        if self.cost is not None and (
            len(self.cost) != n1 or any(len(row) != n2 for row in self.cost)
        ):
            raise ValueError(f"cost must be a {n1}x{n2} table")
        if any(isinstance(node, IsaacsNode) for row in self.components for node in row):
            raise ValueError("Isaacs nodes do not nest")
        return self

    def texts(self) -> list[str]:
        out = [t for row in self.components for node in row for t in node.texts()]
        for row in self.cost or []:
            out.extend(t for t in row if t is not None)
        return out


OperatorNode = Annotated[
    DriftNode | DiffusionNode | JumpNode | SumNode | IsaacsNode, Field(discriminator="kind")
]

SumNode.model_rebuild()
IsaacsNode.model_rebuild()


# ---------------------------------------------------------------------------
# sections
# ---------------------------------------------------------------------------


class CoupledAtomRow(_Section):
    z1: list[float] = Field(..., min_length=1)
    z2: list[float] = Field(..., min_length=1)
    w: float = Field(..., ge=0.0)


class CouplingSection(_Section):
    rule: Literal["synchronous", "independent", "idle", "map", "table"] = "synchronous"
    eta: list[Expr] | None = None
    rows: list[CoupledAtomRow] = Field(default_factory=list)

    @model_validator(mode="after")
    def _rule_inputs(self) -> CouplingSection:
        if self.rule == "map" and not self.eta:
            raise ValueError("the map coupling needs eta")
        if self.rule == "table" and not self.rows:
            raise ValueError("the table coupling needs rows")
        return self


class PenaltySection(_Section):
    collection: Literal[1, 2] = 1
    R: float = Field(3.0, gt=0.0)
    Rp: float = Field(4.0, gt=0.0)
    Rpp: float = Field(5.0, gt=0.0)

    @model_validator(mode="after")
    def _ordered(self) -> PenaltySection:
        if not self.R < self.Rp < self.Rpp:
            raise ValueError("penalty radii need R < Rp < Rpp")
        return self


class ContainmentSection(_Section):
    kind: Literal["log", "field"] = "log"
    field: FieldSource | None = None
    kappa_v: float = Field(1.0, ge=0.0)
    argmin: list[float] | None = None

    @model_validator(mode="after")
    def _field_inputs(self) -> ContainmentSection:
        if self.kind == "field":
            if self.field is None:
                raise ValueError("a field containment needs field")
            if self.field.gradient is None or self.field.hessian is None:
                raise ValueError("the containment field needs gradient and hessian")
        return self


class DoublingSection(_Section):
    eps: float = Field(..., gt=0.0, lt=1.0)
    phi: float = Field(1.0, gt=0.0, le=1.0)
    lam: float = Field(..., gt=0.0, description="λ of f − λℍf = h")
    schedule: list[float] | None = Field(None, min_length=1)
    cloud: CloudSource
    K: CloudSource
    u: Literal["solve"] | FieldSource
    v: Literal["solve"] | FieldSource
    h1: FieldSource
    h2: FieldSource
    c_v: float | None = None
    polish: bool = True
    seed: int | None = Field(None, ge=0)

    @field_validator("schedule")
    @classmethod
    def _increasing(cls, value: list[float] | None) -> list[float] | None:
        if value is None:
            return value
        if any(a <= 1.0 for a in value):
            raise ValueError("every α of the schedule must exceed 1")
        if any(b <= a for a, b in zip(value, value[1:], strict=False)):
            raise ValueError("the α schedule must be strictly increasing")
        return value


class ControlGrid(_Section):
    a_max: float = Field(2.0, gt=0.0)
    per_axis: int = Field(9, ge=2)
    p_max: float = Field(4.0, gt=0.0)
    momenta: int = Field(401, ge=3)


class DiscretizeSection(_Section):
    radius: float = Field(..., gt=0.0)
    mesh: float = Field(..., gt=0.0)
    boundary: Literal["clamp", "leak"] = "clamp"
    controls: ControlGrid | None = None

    @property
    def states_per_axis(self) -> int:
        return int(round(2.0 * self.radius / self.mesh)) + 1


class GeneratorTable(_Section):
    theta: tuple[int, int] = (0, 0)
    rates: list[list[float]] = Field(..., min_length=1)


class ExplicitChain(_Section):
    states: list[list[float]] = Field(..., min_length=1)
    generators: list[GeneratorTable] = Field(..., min_length=1)
    theta1: list[str] = Field(default_factory=lambda: ["-"])
    theta2: list[str] = Field(default_factory=lambda: ["-"])
    cost: list[list[list[float | None]]] | None = Field(
        None, description="Per state a theta1 x theta2 table; null marks an absent control"
    )

    @field_validator("states", mode="before")
    @classmethod
    def _as_rows(cls, value):
        if isinstance(value, list) and value and not isinstance(value[0], list):
            return [[v] for v in value]
        return value

    @model_validator(mode="after")
    def _shapes(self) -> ExplicitChain:
        n = len(self.states)
        keys = {g.theta for g in self.generators}
        for i in range(len(self.theta1)):
            for j in range(len(self.theta2)):
                if (i, j) not in keys:
                    raise ValueError(f"no generator for control pair ({i}, {j})")
        for g in self.generators:
            if len(g.rates) != n or any(len(row) != n for row in g.rates):
                raise ValueError(f"generator {list(g.theta)} must be {n}x{n}")
        if self.cost is not None and len(self.cost) != n:
            raise ValueError(f"cost has {len(self.cost)} state tables for {n} states")
        return self


class ContractionSection(_Section):
    pairs: int = Field(0, ge=0, le=100_000)
    seed: int | None = Field(None, ge=0)
    scale: float = Field(1.0, gt=0.0)


class StrictSection(_Section):
    """
    Localized perturbations: h₁ = h₂ outside the ball of ``perturbation_radius``.
    """

    eps: list[float] = Field(..., min_length=1)
    k_radius: float = Field(..., ge=0.0, description="K = states within this radius")
    perturbation_radius: float = Field(2.0, ge=0.0)
    pairs: int = Field(10, ge=1)
    seed: int | None = Field(None, ge=0)

    @field_validator("eps")
    @classmethod
    def _unit_interval(cls, value: list[float]) -> list[float]:
        if any(not 0.0 < e < 1.0 for e in value):
            raise ValueError("every ε must lie in (0, 1)")
        return value


class ResolventSection(_Section):
    lam: float = Field(..., gt=0.0)
    order: Literal["sup_inf", "inf_sup"] = "sup_inf"
    discretize: DiscretizeSection | None = None
    explicit: ExplicitChain | None = None
    h1: list[float] | FieldSource
    h2: list[float] | FieldSource | None = None
    contraction: ContractionSection = Field(default_factory=ContractionSection)
    strict: StrictSection | None = None
    identity_mu: float | None = Field(None, gt=0.0)

    @model_validator(mode="before")
    @classmethod
    def _one_source(cls, data: Any) -> Any:
        if isinstance(data, dict):
            present = [k for k in ("discretize", "explicit") if data.get(k) is not None]
            if len(present) != 1:
                raise ValueError("give exactly one of discretize or explicit")
        return data

    @field_validator("h1", "h2")
    @classmethod
    def _table_length(cls, value, info: ValidationInfo):
        if not isinstance(value, list):
            return value
        chain = info.data.get("explicit")
        # discretized state counts depend on the document dimension and are checked there
        if chain is not None and len(value) != len(chain.states):
            n = len(chain.states)
            raise ValueError(f"{info.field_name} has {len(value)} entries for {n} states")
        return value

    @model_validator(mode="after")
    def _identity_order(self) -> ResolventSection:
        if self.identity_mu is not None and not self.identity_mu < self.lam:
            raise ValueError("identity_mu must be smaller than lam")
        return self


CheckName = Literal[
    "semi_monotone",
    "isaacs",
    "coupling_identity",
    "controlled_growth",
    "pi_lipschitz",
    "lyapunov",
    "penalty",
    "measure_family",
    "maximum_principle",
    "coupling_max_principle",
    "containment",
    "convolution_laws",
    "containment_jump_bounds",
    "distance_increment_bound",
]


class CheckEntry(_Section):
    name: CheckName
    cloud: CloudSource | None = None
    alphas: list[float] = Field(default_factory=lambda: [2.0, 4.0, 8.0, 16.0], min_length=1)
    tolerance_scale: float = Field(1.0, gt=0.0)
    samples: int = Field(10_000, ge=1)
    seed: int | None = Field(None, ge=0)
    mass_bound: float = Field(1e6, gt=0.0)
    levels: int = Field(4, ge=0, le=12)

    @field_validator("alphas")
    @classmethod
    def _increasing(cls, value: list[float]) -> list[float]:
        if list(value) != sorted(value):
            raise ValueError("alphas must be increasing")
        return value


class OutputSection(_Section):
    dir: str | None = None
    report: str = "report.json"
    trace_csv: str = "trace.csv"
    summary: str = "summary.json"
    solution: str = "solution.csv"


class ProblemDocument(_Section):
    version: Literal[1] = GRAMMAR_VERSION
    name: str = Field(..., min_length=1)
    description: str = ""
    dim: int = Field(1, ge=1, le=6)
    seed: int | None = Field(None, ge=0)
    operator: OperatorNode
    coupling: CouplingSection = Field(default_factory=CouplingSection)
    penalty: PenaltySection = Field(default_factory=PenaltySection)
    containment: ContainmentSection = Field(default_factory=ContainmentSection)
    doubling: DoublingSection | None = None
    resolvent: ResolventSection | None = None
    checks: list[CheckEntry] = Field(default_factory=list)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="before")
    @classmethod
    def _pass_dimension(cls, data: Any) -> Any:
        # h-table lengths of a discretized resolvent depend on the document dimension
        if isinstance(data, dict) and isinstance(data.get("resolvent"), dict):
            resolvent = dict(data["resolvent"])
            grid, dim = resolvent.get("discretize"), data.get("dim", 1)
            if isinstance(grid, dict) and isinstance(dim, int) and dim >= 1:
                try:
                    per_axis = int(round(2.0 * float(grid["radius"]) / float(grid["mesh"]))) + 1
                except (KeyError, TypeError, ValueError, ZeroDivisionError):
                    return data
                n = per_axis**dim
                for key in ("h1", "h2"):
                    table = resolvent.get(key)
                    if isinstance(table, list) and len(table) != n:
                        raise ValueError(
                            f"resolvent.{key} has {len(table)} entries for {n} states"
                        )
        return data

    @model_validator(mode="after")
    def _cross_references(self) -> ProblemDocument:
        texts = list(self.operator.texts()) + list(self.coupling.eta or [])
        if self.containment.field is not None:
            texts.extend(self.containment.field.texts())
        if self.doubling is not None:
            for name in ("u", "v", "h1", "h2"):
                source = getattr(self.doubling, name)
                if isinstance(source, FieldSource):
                    texts.extend(source.texts())
        if self.resolvent is not None:
            for source in (self.resolvent.h1, self.resolvent.h2):
                if isinstance(source, FieldSource):
                    texts.extend(source.texts())
        if _max_index(texts) > self.dim:
            raise ValueError(f"an expression references a coordinate beyond dimension {self.dim}")

        for row in self.coupling.rows:
            if len(row.z1) != self.dim or len(row.z2) != self.dim:
                raise ValueError("coupling rows must have the document dimension")
        if self.doubling is not None and "solve" in (self.doubling.u, self.doubling.v):
            if self.resolvent is None or self.resolvent.discretize is None:
                raise ValueError("u or v = 'solve' needs a resolvent section with discretize")
        if self.resolvent is not None and self.resolvent.explicit is not None:
            widths = {len(s) for s in self.resolvent.explicit.states}
            if widths != {self.dim}:
                raise ValueError("explicit states must have the document dimension")
        if self.operator.kind == "isaacs" and self.coupling.rule != "synchronous":
            raise ValueError("Isaacs operators are coupled per component synchronously only")
        return self

    def seed_or(self, fallback: int) -> int:
        return self.seed if self.seed is not None else fallback
