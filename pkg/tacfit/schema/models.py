"""
Pydantic models for run configuration and machine-readable reports.
"""

from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from ..config import Config
from ..diffusion import ParamQ, SystemTemplate, discretize_pde, single_drink_template
from ..mestim import FitSettings
from ..simkit import MMParams

Matrix = List[List[float]]


class TemplateOverride(BaseModel):
    """Explicit D, E, F, C matrices (nested lists, row-major)."""
    D: Matrix
    E: Matrix
    F: Matrix
    C: Matrix

    @model_validator(mode='after')
    def validate_shapes(self):
        """All four matrices must describe the same state dimension k."""
        k = len(self.D)
        if k < 1:
            raise ValueError("D must have at least one row")
        for name in ("D", "E"):
            rows = getattr(self, name)
            if len(rows) != k or any(len(r) != k for r in rows):
                raise ValueError(f"{name} must be {k}x{k}")
        if len(self.F) != k or any(len(r) != 1 for r in self.F):
            raise ValueError(f"F must be {k}x1")
        if len(self.C) != 1 or len(self.C[0]) != k:
            raise ValueError(f"C must be 1x{k}")
        return self

    @property
    def k(self) -> int:
        return len(self.D)


class MMConfig(BaseModel):
    """Michaelis-Menten BrAC settings for simulation runs."""
    dose_times: List[float] = Field(default_factory=lambda: [0.1], description="Dose times in hours")
    dose_amount: float = Field(1.0, ge=0, description="Standard drinks per dose")
    absorption_rate: float = Field(6.0, gt=0, description="Absorption rate (1/h)")
    vmax: float = Field(0.017, gt=0, description="Maximal elimination rate (%/h)")
    km: float = Field(0.005, gt=0, description="Michaelis constant (%)")
    pct_per_drink: float = Field(0.066, ge=0, description="BrAC of one absorbed drink (%)")

    @field_validator('dose_times')
    @classmethod
    def validate_dose_times(cls, v):
        """Dose times are nonnegative."""
        if any(t < 0 for t in v):
            raise ValueError(f"dose times must be >= 0, got {v}")
        return sorted(v)

    def to_params(self) -> MMParams:
        return MMParams(
            dose_times=tuple(self.dose_times),
            dose_amount=self.dose_amount,
            absorption_rate=self.absorption_rate,
            vmax=self.vmax,
            km=self.km,
            pct_per_drink=self.pct_per_drink,
        )


class RunConfig(BaseModel):
    """Root run configuration shared by every subcommand."""
    version: str = Field("1.0.0", description="Configuration format version")

    # Model
    template_mode: Literal["pde", "single_drink", "explicit"] = "pde"
    discretization_k: int = Field(default_factory=lambda: Config.DISCRETIZATION_K, ge=2)
    template: Optional[TemplateOverride] = None
    brac_subintervals: int = Field(default_factory=lambda: Config.BRAC_SUBINTERVALS, ge=1)

    # Optimizer
    tol: float = Field(default_factory=lambda: Config.SCORE_TOL, gt=0)
    max_iter: int = Field(default_factory=lambda: Config.MAX_ITER, ge=1)
    lower_bounds: List[float] = Field(default_factory=lambda: [1e-8, 1e-8])
    multistart: bool = True
    multistart_range: List[float] = Field(default_factory=lambda: [0.1, 10.0])
    init: List[float] = Field(default_factory=lambda: [1.0, 1.0], description="Fit starting point")

    # Simulation
    q_true: List[float] = Field(default_factory=lambda: [1.0, 1.0], description="Parameter used to synthesize TAC")
    horizon_T: float = Field(1.0, gt=0, description="Simulation horizon in hours")
    m: int = Field(100, ge=1, description="TAC observations per simulated session")
    m_values: List[int] = Field(default_factory=lambda: [20, 60, 100])
    sigma: float = Field(default_factory=lambda: Config.NOISE_SIGMA, ge=0)
    seed: int = Field(default_factory=lambda: Config.RANDOM_SEED)
    replicates: int = Field(default_factory=lambda: Config.REPLICATES, ge=2)
    sessions_per_replicate: int = Field(1, ge=1)
    design: Literal["uniform", "random"] = "uniform"
    quadrature_nodes: int = Field(10_000, ge=1)
    workers: Optional[int] = Field(None, gt=0)
    mm: MMConfig = Field(default_factory=MMConfig)

    @field_validator('version')
    @classmethod
    def validate_version(cls, v):
        """Validate version format."""
        parts = v.split('.')
        if len(parts) != 3 or not all(p.isdigit() for p in parts):
            raise ValueError(f"Version must be in format 'X.Y.Z', got '{v}'")
        return v

    @field_validator('lower_bounds')
    @classmethod
    def validate_lower_bounds(cls, v):
        """Bounds need q1 >= 0 and q2 > 0."""
        if len(v) != 2:
            raise ValueError(f"lower_bounds needs 2 values, got {len(v)}")
        if v[0] < 0 or v[1] <= 0:
            raise ValueError(f"lower_bounds needs q1 >= 0 and q2 > 0, got {v}")
        return v

    @field_validator('multistart_range')
    @classmethod
    def validate_multistart_range(cls, v):
        """Range must be 0 < lo < hi."""
        if len(v) != 2 or not 0 < v[0] < v[1]:
            raise ValueError(f"multistart_range must be [lo, hi] with 0 < lo < hi, got {v}")
        return v

    @field_validator('init', 'q_true')
    @classmethod
    def validate_q(cls, v):
        """Parameters need two components with q2 > 0."""
        if len(v) != 2:
            raise ValueError(f"expected [q1, q2], got {v}")
        if v[1] <= 0:
            raise ValueError(f"q2 must be > 0, got {v[1]}")
        return v

    @field_validator('m_values')
    @classmethod
    def validate_m_values(cls, v):
        """At least one positive observation count."""
        if not v or any(m < 1 for m in v):
            raise ValueError(f"m_values must be a nonempty list of positive integers, got {v}")
        return v

    @model_validator(mode='after')
    def validate_template(self):
        """An explicit template needs matrices, and matrices imply explicit mode."""
        if self.template is not None:
            self.template_mode = "explicit"
        elif self.template_mode == "explicit":
            raise ValueError("template_mode 'explicit' requires a 'template' section with D, E, F, C")
        if any(t > self.horizon_T for t in self.mm.dose_times):
            raise ValueError(f"mm.dose_times must lie in [0, horizon_T={self.horizon_T}]")
        return self

    def with_overrides(self, **updates) -> "RunConfig":
        """Return a validated copy with every non-None update applied."""
        data = self.model_dump()
        data.update({k: v for k, v in updates.items() if v is not None})
        return RunConfig.model_validate(data)

    def build_template(self) -> SystemTemplate:
        if self.template_mode == "explicit":
            t = self.template
            return SystemTemplate(k=t.k, D=t.D, E=t.E, F=t.F, C=t.C, label="explicit")
        if self.template_mode == "single_drink":
            return single_drink_template()
        return discretize_pde(self.discretization_k)

    def fit_settings(self) -> FitSettings:
        return FitSettings(
            tol=self.tol,
            max_iter=self.max_iter,
            lower_bounds=tuple(self.lower_bounds),
            multistart=self.multistart,
            multistart_range=tuple(self.multistart_range),
        )

    def init_q(self) -> ParamQ:
        return ParamQ.from_array(self.init)

    def true_q(self) -> ParamQ:
        return ParamQ.from_array(self.q_true)


class EllipseModel(BaseModel):
    """95% confidence ellipse of q_hat."""
    level: float
    center: List[float]
    semi_axes: List[float]
    angle_rad: float
    chi2_quantile: float


class FitReport(BaseModel):
    """JSON report written by `tacfit estimate`."""
    q_hat: List[float]
    sigma2_hat: float
    gamma_hat: Matrix
    covariance: Optional[Matrix]
    ellipse: Optional[EllipseModel]
    residuals: List[float]
    objective_value: float
    gradient_norm: float
    iterations: int
    converged: bool
    identifiable: bool
    condition_number: Optional[float]
    starts_tried: int
    M: int
    template: str
    brac_subintervals: int
    horizon_T: float
    warnings: List[str] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)


class McRow(BaseModel):
    """One row of the Monte-Carlo table."""
    m: int
    replicates: int
    failures: int
    mean_qhat: List[float]
    sd_qhat: List[float]
    scaled_cov: Matrix
    theoretical_sigma: Matrix
    frobenius_rel_error: Optional[float]
    mahalanobis_ks_pvalue: Optional[float]
    mean_sigma2_hat: float


class McTableReport(BaseModel):
    """JSON report written by `tacfit mc-table`."""
    q0: List[float]
    sigma: float
    seed: int
    template: str
    rows: List[McRow]


class GammaReport(BaseModel):
    """JSON report written by `tacfit gamma`."""
    q0: List[float]
    sigma: float
    quadrature_nodes: int
    gamma: Matrix
    sigma2_gamma_inv: Matrix
    eigenvalues: List[float]
    gamma_n: Optional[Matrix] = None


def matrix(m: np.ndarray) -> Matrix:
    return np.asarray(m, dtype=np.float64).tolist()
