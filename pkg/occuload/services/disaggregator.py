"""
Load disaggregator: maps an occupancy GM proxy and outdoor temperature to
system-level load mixtures.

- plug: affine in the continuous occupancy ratio
- lighting: affine in the binary-collapsed proxy (any occupant lights the space)
- hvac: two gated B-spline energy signatures, the zero level selects the
  unoccupied spline and every other level the occupied one

The per-step functions work on GaussianMixture1D values. DisaggregatorModule
evaluates the same model for whole series at once in torch, which is what
the trainer differentiates.
"""
import logging
from dataclasses import dataclass
import numpy as np
import torch
from torch import nn
from occuload.exceptions import AlignmentError, DataError, DomainError
from occuload.schemas.config import InitConfig, LevelConfig, Scenario, SplineConfig, System
from occuload.schemas.params import DisaggregatorParams
from occuload.schemas.series import BuildingSeries
from occuload.utils.gm import (
    VARIANCE_FLOOR,
    GaussianMixture1D,
    LevelSet,
    gm_affine,
    gm_binary_collapse,
    gm_shift_components,
    gm_sum_aligned,
)
from occuload.utils.splines import bspline_basis

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SystemLoads:
    plug: GaussianMixture1D
    lighting: GaussianMixture1D
    hvac: GaussianMixture1D | None
    total: GaussianMixture1D


# --- Per-step forward model ---
def occupant_forward(
    z: GaussianMixture1D,
    params: DisaggregatorParams,
    system: System | str,
    levels: LevelSet,
) -> GaussianMixture1D:
    if System(system) is System.plug:
        return gm_affine(z, params.plug_dynamic_kw, params.plug_base_kw)
    collapsed = gm_binary_collapse(z, levels)
    return gm_affine(collapsed, params.light_dynamic_kw, params.light_base_kw)


def weather_forward(
    z: GaussianMixture1D,
    temp: float,
    params: DisaggregatorParams,
    cfg: SplineConfig | None = None,
) -> GaussianMixture1D:
    if not np.isfinite(temp):
        raise DomainError(f"temperature must be finite, got {temp}")
    cfg = cfg or params.spline

    basis = bspline_basis(params.normalize_temperature(temp), cfg)
    unoccupied = float(basis @ params.coeffs_unoccupied)
    occupied = float(basis @ params.coeffs_occupied)

    k = z.n_components
    zero = GaussianMixture1D(z.weights, np.zeros(k), np.full(k, VARIANCE_FLOOR))
    shifts = np.full(k, occupied)
    shifts[0] = unoccupied
    return gm_shift_components(zero, shifts)


def total_forward(
    z: GaussianMixture1D,
    temp: float | None,
    params: DisaggregatorParams,
    levels: LevelSet,
    scenario: Scenario | str,
) -> SystemLoads:
    plug = occupant_forward(z, params, System.plug, levels)
    lighting = occupant_forward(z, params, System.lighting, levels)
    parts = [plug, lighting]

    hvac = None
    if Scenario(scenario) is Scenario.lumped:
        if temp is None:
            raise DataError("the lumped scenario needs an outdoor temperature")
        hvac = weather_forward(z, temp, params)
        parts.append(hvac)

    if params.obs_variance > 0:
        k = z.n_components
        parts.append(GaussianMixture1D(z.weights, np.zeros(k), np.full(k, params.obs_variance)))

    try:
        total = gm_sum_aligned(parts)
    except AlignmentError as e:
        raise AlignmentError(f"internal error, system mixtures lost alignment: {e}") from e

    return SystemLoads(plug=plug, lighting=lighting, hvac=hvac, total=total)


def init_params(
    metadata: InitConfig,
    temperature: np.ndarray | None = None,
    load: np.ndarray | None = None,
    spline: SplineConfig = SplineConfig(),
    levels: LevelConfig = LevelConfig(),
    scenario: Scenario = Scenario.separate,
) -> DisaggregatorParams:
    """Initial capacities from floor area times power intensity."""
    if metadata.floor_area <= 0:
        raise DomainError(f"floor area must be positive, got {metadata.floor_area}")

    light_dynamic = metadata.floor_area * metadata.light_intensity / 1000.0
    plug_dynamic = metadata.floor_area * metadata.plug_intensity / 1000.0

    temp_mean, temp_std = 0.0, 1.0
    if temperature is not None and len(temperature):
        temp_mean = float(np.nanmean(temperature))
        temp_std = float(np.nanstd(temperature)) or 1.0

    obs_variance = 0.0
    if load is not None and len(load):
        obs_variance = (metadata.noise_fraction * float(np.nanmax(load))) ** 2

    plug_base = metadata.base_fraction * plug_dynamic
    light_base = metadata.base_fraction * light_dynamic
    # lumped: both gates start at the load left over by the occupant bases in quiet hours
    hvac_floor = 0.0
    if Scenario(scenario) is Scenario.lumped and load is not None and len(load):
        hvac_floor = max(0.0, float(np.nanquantile(load, 0.05)) - plug_base - light_base)

    return DisaggregatorParams(
        plug_dynamic=plug_dynamic,
        plug_base=plug_base,
        light_dynamic=light_dynamic,
        light_base=light_base,
        spline_coeffs_occupied=[hvac_floor] * spline.n_basis,
        spline_coeffs_unoccupied=[hvac_floor] * spline.n_basis,
        temp_mean=temp_mean,
        temp_std=temp_std,
        obs_variance=obs_variance,
        spline=spline,
        levels=levels,
        scenario=scenario,
    )


# --- Expected loads and signatures ---
def gate_splines(params: DisaggregatorParams, temperature) -> tuple[np.ndarray, np.ndarray]:
    """Unoccupied and occupied spline outputs at raw temperatures."""
    basis = bspline_basis(params.normalize_temperature(temperature), params.spline)
    return basis @ params.coeffs_unoccupied, basis @ params.coeffs_occupied


def system_means(
    params: DisaggregatorParams,
    probs: np.ndarray,
    temperature: np.ndarray | None,
    levels: LevelSet,
) -> dict[str, np.ndarray]:
    """Expected system loads for per-step level distributions of shape (steps, levels)."""
    probs = np.asarray(probs, dtype=float)
    result = {
        "plug": probs @ (params.plug_dynamic_kw * levels.component_means) + params.plug_base_kw,
        "lighting": probs @ (params.light_dynamic_kw * levels.collapsed_means()) + params.light_base_kw,
    }
    if params.scenario is Scenario.lumped and temperature is not None:
        unoccupied, occupied = gate_splines(params, temperature)
        result["hvac"] = probs[:, 0] * unoccupied + (1 - probs[:, 0]) * occupied
    result["total"] = np.sum(list(result.values()), axis=0)
    return result


# --- Batched torch model ---
@dataclass(frozen=True)
class LoadDesign:
    """Per-series inputs of the batched model. Loads are divided by load_scale."""

    load: torch.Tensor  # (days, 24)
    basis: torch.Tensor | None  # (days, 24, n_basis), lumped only
    z_means: torch.Tensor
    z_variances: torch.Tensor
    light_means: torch.Tensor
    light_variances: torch.Tensor
    working: np.ndarray  # (days,)
    load_scale: float


def build_design(
    series: BuildingSeries,
    params: DisaggregatorParams,
    levels: LevelSet,
    load_scale: float = 1.0,
) -> LoadDesign:
    as_tensor = lambda values: torch.as_tensor(np.asarray(values, dtype=float), dtype=torch.float64)

    basis = None
    if params.scenario is Scenario.lumped:
        if series.temperature is None:
            raise DataError("the lumped scenario needs an outdoor temperature column")
        x = params.normalize_temperature(series.daily(series.temperature))
        basis = as_tensor(bspline_basis(x, params.spline))

    return LoadDesign(
        load=as_tensor(series.daily(series.load) / load_scale),
        basis=basis,
        z_means=as_tensor(levels.component_means),
        z_variances=as_tensor(levels.component_variances),
        light_means=as_tensor(levels.collapsed_means()),
        light_variances=as_tensor(levels.collapsed_variances()),
        working=series.day_is_working(),
        load_scale=load_scale,
    )


def gate_anchor_basis(params: DisaggregatorParams, temperature, points: int = 101) -> np.ndarray:
    """Basis rows over the observed span of normalized temperatures."""
    x = params.normalize_temperature(np.asarray(temperature, dtype=float))
    x = x[np.isfinite(x)]
    if not x.size:
        raise DataError("need at least one finite temperature to anchor the HVAC gates")
    return bspline_basis(np.linspace(x.min(), x.max(), points), params.spline)


class DisaggregatorModule(nn.Module):
    """
    Trainable copy of DisaggregatorParams. Values are held divided by a
    load scale so one learning rate suits buildings of any size.

    Two optional constraints pin the directions a whole-building meter
    cannot separate:

    - gate_anchor: basis rows over the observed temperatures. The occupied
      curve is the unoccupied one plus an excess that is shifted to have
      its minimum at exactly zero over those rows, so both gates meet at
      the balance point and the lighting capacity is not traded against
      a constant gap between them.
    - base_fraction: occupant base loads follow their dynamic capacities,
      leaving the remaining constant load to the HVAC curves.
    """

    def __init__(
        self,
        params: DisaggregatorParams,
        load_scale: float = 1.0,
        gate_anchor: np.ndarray | None = None,
        base_fraction: float | None = None,
    ):
        super().__init__()
        self.load_scale = float(load_scale)
        self.base_fraction = base_fraction

        def scaled(value):
            return nn.Parameter(
                torch.tensor(np.asarray(value, dtype=float) / self.load_scale, dtype=torch.float64)
            )

        self.plug_dynamic = scaled(params.plug_dynamic)
        self.plug_base = scaled(params.plug_base)
        self.light_dynamic = scaled(params.light_dynamic)
        self.light_base = scaled(params.light_base)
        self.coeffs_occupied = scaled(params.coeffs_occupied)
        self.coeffs_unoccupied = scaled(params.coeffs_unoccupied)
        self.obs_std = scaled(np.sqrt(params.obs_variance))

        anchor = None
        if gate_anchor is not None:
            anchor = torch.as_tensor(np.asarray(gate_anchor, dtype=float), dtype=torch.float64)
        self.register_buffer("gate_anchor", anchor)

    def bases(self) -> tuple[torch.Tensor, torch.Tensor]:
        """Effective plug and lighting base loads."""
        if self.base_fraction is None:
            return torch.relu(self.plug_base), torch.relu(self.light_base)
        return (
            self.base_fraction * torch.relu(self.plug_dynamic),
            self.base_fraction * torch.relu(self.light_dynamic),
        )

    def occupied_coeffs(self) -> torch.Tensor:
        if self.gate_anchor is None:
            return self.coeffs_occupied
        excess = self.coeffs_occupied - self.coeffs_unoccupied
        # B-spline bases sum to one, so a constant shift of the coefficients shifts the curve
        return self.coeffs_occupied - torch.min(self.gate_anchor @ excess)

    def moments(self, design: LoadDesign) -> tuple[torch.Tensor, torch.Tensor]:
        """Component means and variances, each of shape (days, 24, levels)."""
        floor = VARIANCE_FLOOR / self.load_scale**2
        plug_dynamic = torch.relu(self.plug_dynamic)
        light_dynamic = torch.relu(self.light_dynamic)
        plug_base, light_base = self.bases()

        means = plug_dynamic * design.z_means + plug_base + light_dynamic * design.light_means + light_base
        variances = torch.clamp(plug_dynamic**2 * design.z_variances, min=floor) + torch.clamp(
            light_dynamic**2 * design.light_variances, min=floor
        )

        n_days, steps = design.load.shape
        n_levels = means.shape[0]
        means = means.expand(n_days, steps, n_levels)

        if design.basis is not None:
            unoccupied = design.basis @ self.coeffs_unoccupied
            occupied = design.basis @ self.occupied_coeffs()
            hvac = torch.cat(
                [unoccupied[..., None], occupied[..., None].expand(n_days, steps, n_levels - 1)],
                dim=-1,
            )
            means = means + hvac
            variances = variances + floor

        variances = (variances + self.obs_std**2).expand(n_days, steps, n_levels)
        return means, variances

    def to_params(self, template: DisaggregatorParams, trained: bool = True) -> DisaggregatorParams:
        """Writes the effective values back, so the result needs no constraint to evaluate."""
        s = self.load_scale
        as_float = lambda p: float(p.detach()) * s
        as_list = lambda p: (p.detach().numpy() * s).tolist()
        plug_base, light_base = self.bases()
        return template.model_copy(
            update={
                "plug_dynamic": as_float(self.plug_dynamic),
                "plug_base": as_float(plug_base),
                "light_dynamic": as_float(self.light_dynamic),
                "light_base": as_float(light_base),
                "spline_coeffs_occupied": as_list(self.occupied_coeffs()),
                "spline_coeffs_unoccupied": as_list(self.coeffs_unoccupied),
                "obs_variance": as_float(self.obs_std) ** 2,
                "trained": trained,
            }
        )
