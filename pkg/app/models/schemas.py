from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Annotated, Any, Dict, List, Literal, Optional, Union
import math

from scipy import constants as const

RB85_MASS = 84.911789738 * const.atomic_mass
# 2pi x 3.86 kHz reproduces kbar = 6.3 at T = 32.5 us
RB85_RECOIL_FREQUENCY = 2.0 * math.pi * 3.86e3
UINT64_MAX = 2**64 - 1


# Physical constants
class PhysicalConstants(BaseModel):
    model_config = ConfigDict(frozen=True)

    recoil_frequency: float = Field(RB85_RECOIL_FREQUENCY, gt=0, description="omega_r in rad/s")
    atom_mass: float = Field(RB85_MASS, gt=0, description="atomic mass in kg")

    @property
    def laser_wavenumber(self) -> float:
        """k_l recovered from omega_r = hbar k_l^2 / (2 m)."""
        return math.sqrt(2.0 * self.atom_mass * self.recoil_frequency / const.hbar)

    @property
    def wavelength(self) -> float:
        return 2.0 * math.pi / self.laser_wavenumber


class KickParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: float = Field(..., ge=0, description="scaled kick strength")
    kbar: float = Field(..., gt=math.pi, description="scaled Planck constant 8 omega_r T")
    kicks: int = Field(..., ge=0)

    @property
    def epsilon(self) -> float:
        from app.models.physics import epsilon_from_kbar

        return epsilon_from_kbar(self.kbar)[0]

    @property
    def ell(self) -> int:
        from app.models.physics import epsilon_from_kbar

        return epsilon_from_kbar(self.kbar)[1]


# Ensemble laws
class PointBeta(BaseModel):
    kind: Literal["point"] = "point"
    value: float = Field(0.0, ge=0, lt=1)


class UniformBeta(BaseModel):
    kind: Literal["uniform"] = "uniform"


class GaussianBeta(BaseModel):
    """Gaussian momentum spread whose fractional part gives beta."""

    kind: Literal["gaussian"] = "gaussian"
    sigma: float = Field(..., gt=0)
    center: float = 0.0


class PointN0(BaseModel):
    kind: Literal["point"] = "point"
    value: int = 0


class GaussianN0(BaseModel):
    """Discrete gaussian: a normal draw rounded to the nearest integer."""

    kind: Literal["gaussian"] = "gaussian"
    sigma: float = Field(..., gt=0)
    center: int = 0


BetaLaw = Annotated[Union[PointBeta, UniformBeta, GaussianBeta], Field(discriminator="kind")]
N0Law = Annotated[Union[PointN0, GaussianN0], Field(discriminator="kind")]


class EnsembleSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    beta_law: BetaLaw = Field(default_factory=UniformBeta)
    n0_law: N0Law = Field(default_factory=PointN0)
    atom_count: int = Field(10_000, gt=0)
    seed: int = Field(20050101, ge=0, le=UINT64_MAX)


class NoiseModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    se_probability: float = Field(0.0, ge=0, le=1, description="per-kick spontaneous emission probability")
    se_kick_width: float = Field(0.5, ge=0, description="half-width of the uniform beta shift")

    @property
    def enabled(self) -> bool:
        return self.se_probability > 0.0


# Scan configuration
Engine = Literal["quantum", "eclassical", "both"]

DEFAULT_GRID_HALF_WIDTH = 0.35
DEFAULT_GRID_STEP = 0.005


def resonance_grid(ell: int = 1, half_width: float = DEFAULT_GRID_HALF_WIDTH,
                   step: float = DEFAULT_GRID_STEP) -> List[float]:
    """Symmetric kbar grid around 2 pi ell that always contains the resonance itself."""
    n = int(round(half_width / step))
    center = 2.0 * math.pi * ell
    return [center + i * step for i in range(-n, n + 1)]


class OutputPaths(BaseModel):
    directory: str = "results"
    scan_file: str = "scan.csv"
    peaks_file: str = "peaks.csv"
    gfunc_file: str = "gfunc.csv"
    figures_file: str = "figures.csv"
    pdist_file: str = "pdist.csv"


class ScanConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    engine: Engine = "eclassical"
    constants: PhysicalConstants = Field(default_factory=PhysicalConstants)
    ensemble: EnsembleSpec = Field(default_factory=EnsembleSpec)
    k: float = Field(4.2, ge=0)
    kicks: List[int] = Field(default_factory=lambda: [12, 14, 16, 18])
    kbar_grid: Optional[List[float]] = None
    period_grid_us: Optional[List[float]] = None
    eclassical_atoms: int = Field(100_000, gt=0)
    trajectories_per_atom: int = Field(1, gt=0)
    noise: NoiseModel = Field(default_factory=NoiseModel)
    x0: float = Field(11.2, gt=0)
    seed: Optional[int] = Field(None, ge=0, le=UINT64_MAX)
    output: OutputPaths = Field(default_factory=OutputPaths)

    @field_validator("kicks")
    @classmethod
    def _kicks_positive(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("at least one kick count is required")
        if any(t <= 0 for t in v):
            raise ValueError("kick counts must be positive")
        return sorted(set(v))

    @model_validator(mode="before")
    @classmethod
    def _expand_range(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("kbar_range") is not None:
            data = dict(data)
            start, stop, step = data.pop("kbar_range")
            if step <= 0 or stop < start:
                raise ValueError("kbar_range must be [start, stop, step] with step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9))
            data["kbar_grid"] = [start + i * step for i in range(n + 1)]
        return data

    @model_validator(mode="after")
    def _check_grid(self) -> "ScanConfig":
        if self.kbar_grid is not None and self.period_grid_us is not None:
            raise ValueError("give exactly one of kbar_grid / period_grid_us")
        grid = self.kbar_grid if self.kbar_grid is not None else self.period_grid_us
        if grid is None:
            object.__setattr__(self, "kbar_grid", resonance_grid())
            grid = self.kbar_grid
        if not grid:
            raise ValueError("scan grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("scan grid must be strictly ascending")
        if any(kb <= math.pi for kb in self.kbar_values()):
            raise ValueError("every grid point must have kbar > pi")
        if self.seed is None:
            object.__setattr__(self, "seed", self.ensemble.seed)
        elif self.seed != self.ensemble.seed:
            object.__setattr__(self, "ensemble", self.ensemble.model_copy(update={"seed": self.seed}))
        return self

    def kbar_values(self) -> List[float]:
        from app.models.physics import kbar_from_period

        if self.kbar_grid is not None:
            return list(self.kbar_grid)
        return [kbar_from_period(p * 1e-6, self.constants) for p in self.period_grid_us]

    def engines(self) -> List[str]:
        return ["eclassical", "quantum"] if self.engine == "both" else [self.engine]

    def physics_dict(self) -> Dict[str, Any]:
        """Everything that influences emitted numbers (output locations excluded)."""
        return self.model_dump(mode="json", exclude={"output"})


# HTTP request/response schemas
class TResResponse(BaseModel):
    t_res: float
    x_per_kick: float


class SidePeakResponse(BaseModel):
    abs_epsilon: float
    kbar_left: float
    kbar_right: float


class GFunctionRequest(BaseModel):
    x: List[float] = Field(..., min_length=1, max_length=2000)
    n_theta: int = Field(100, ge=8, le=800)
    nodes_per_panel: int = Field(16, ge=4, le=64)
    full_form: bool = False


class GFunctionResponse(BaseModel):
    x: List[float]
    g: List[float]
    ratio: List[Optional[float]]


class EnergyRequest(BaseModel):
    engine: Literal["quantum", "eclassical"] = "eclassical"
    kbar: float = Field(..., gt=math.pi)
    k: float = Field(4.2, ge=0)
    kicks: int = Field(..., ge=0, le=200)
    ensemble: EnsembleSpec = Field(default_factory=lambda: EnsembleSpec(atom_count=2000))
    noise: NoiseModel = Field(default_factory=NoiseModel)
    trajectories_per_atom: int = Field(1, gt=0)


class EnergyResponse(BaseModel):
    engine: str
    epsilon: float
    ell: int
    mean_energy: float
    stderr: float
    ratio: Optional[float]


class ScanRowResponse(BaseModel):
    kbar: float
    epsilon: float
    period_us: float
    kicks: int
    engine: str
    mean_energy: float
    ratio: float
    stderr: float
    atoms: int
    seed: int


class ScanResponse(BaseModel):
    config_hash: str
    k: float
    rows: List[ScanRowResponse]
