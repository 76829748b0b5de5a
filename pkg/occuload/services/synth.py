"""
Seedable synthetic office buildings.

Occupants come from two schedule groups with daily jitter and a lunch dip,
simulated on a 15-minute grid. Lighting switches per zone (on while anyone
in the zone is present, 15 minutes delay off), plugs follow the occupant
count, and HVAC is a piecewise-linear energy signature whose slopes drop to
a setback fraction while the building is unoccupied.
"""
import logging
from dataclasses import dataclass
from datetime import date
import numpy as np
import pandas as pd
from scipy.signal import lfilter
from occuload.schemas.config import Climate, HvacSpec, Scenario, SimBuilding
from occuload.schemas.params import GroundTruth
from occuload.schemas.series import STEPS_PER_DAY, BuildingSeries
from occuload.services.generator import assign_day_types

logger = logging.getLogger(__name__)

QUARTERS_PER_HOUR = 4
SLOTS_PER_DAY = STEPS_PER_DAY * QUARTERS_PER_HOUR

# arrival mean, departure mean, jitter std, all in hours
REGULAR_GROUP = (8.5, 18.25, 0.5)
FLEXIBLE_GROUP = (9.5, 17.0, 1.0)
LUNCH_START = 12.0
LUNCH_MINUTES = 40
LUNCH_SHARE = 0.5
NON_WORKING_SHARE = 0.05

# annual mean, annual amplitude, diurnal amplitude, degC
CLIMATE_PRESETS = {
    Climate.mild: (14.0, 4.0, 4.0),
    Climate.hot: (24.0, 9.0, 7.0),
    Climate.cold: (9.0, 14.0, 5.0),
}
DIURNAL_PEAK_HOUR = 15
ANNUAL_PEAK_DAY = 200


@dataclass(frozen=True)
class OccupancySimulation:
    ratio: np.ndarray  # hourly present share of occupants
    lit_fraction: np.ndarray  # hourly share of lit zones
    occupied: np.ndarray  # hourly building state driving HVAC operation


def hourly_index(start: date, days: int) -> pd.DatetimeIndex:
    return pd.date_range(pd.Timestamp(start), periods=days * STEPS_PER_DAY, freq="h")


def _presence_window(rng, n: int, arrival: float, departure: float, jitter: float):
    arrive = np.clip(rng.normal(arrival, jitter, n), 5.0, 12.0)
    leave = np.clip(rng.normal(departure, jitter, n), 13.0, 23.75)
    return arrive, leave


def simulate_occupancy(
    building: SimBuilding,
    days: int,
    seed: int,
    start: date = date(2023, 1, 2),
    holidays=(),
) -> OccupancySimulation:
    rng = np.random.default_rng(seed)
    timestamps = hourly_index(start, days)
    working_days = assign_day_types(timestamps[::STEPS_PER_DAY], holidays)

    n = building.occupant_count
    n_regular = int(round(building.regular_share * n))
    # each desk lands in a uniformly drawn zone
    zones = rng.integers(0, building.zone_count, n)
    slot_hours = np.arange(SLOTS_PER_DAY) / QUARTERS_PER_HOUR
    lunch = (slot_hours >= LUNCH_START) & (slot_hours < LUNCH_START + LUNCH_MINUTES / 60)

    ratio, lit = [], []
    for is_working in working_days:
        present = np.zeros((n, SLOTS_PER_DAY), dtype=bool)
        if is_working:
            arrive = np.empty(n)
            leave = np.empty(n)
            arrive[:n_regular], leave[:n_regular] = _presence_window(rng, n_regular, *REGULAR_GROUP)
            arrive[n_regular:], leave[n_regular:] = _presence_window(rng, n - n_regular, *FLEXIBLE_GROUP)
            present = (slot_hours[None, :] >= arrive[:, None]) & (slot_hours[None, :] < leave[:, None])
            out_for_lunch = rng.random(n) < LUNCH_SHARE
            present[np.ix_(out_for_lunch, lunch)] = False
        else:
            attendees = rng.choice(n, size=int(round(NON_WORKING_SHARE * n)), replace=False)
            arrive, leave = _presence_window(rng, len(attendees), 9.0, 17.0, 0.5)
            present[attendees] = (slot_hours[None, :] >= arrive[:, None]) & (
                slot_hours[None, :] < leave[:, None]
            )

        zone_occupied = np.zeros((building.zone_count, SLOTS_PER_DAY), dtype=bool)
        np.logical_or.at(zone_occupied, zones, present)
        # 15 minutes delay off: a zone stays lit one quarter after it empties
        zone_lit = zone_occupied.copy()
        zone_lit[:, 1:] |= zone_occupied[:, :-1]

        ratio.append(present.mean(axis=0).reshape(STEPS_PER_DAY, QUARTERS_PER_HOUR).mean(axis=1))
        lit.append(zone_lit.mean(axis=0).reshape(STEPS_PER_DAY, QUARTERS_PER_HOUR).mean(axis=1))

    ratio = np.concatenate(ratio)
    return OccupancySimulation(
        ratio=ratio,
        lit_fraction=np.concatenate(lit),
        occupied=ratio >= building.hvac.occupied_threshold,
    )


def simulate_weather(
    days: int,
    climate: Climate | str,
    seed: int,
    start: date = date(2023, 1, 2),
    rho: float = 0.8,
    noise_std: float = 1.5,
) -> np.ndarray:
    """Annual and diurnal sinusoids plus AR(1) noise, hourly."""
    annual_mean, annual_amp, diurnal_amp = CLIMATE_PRESETS[Climate(climate)]
    timestamps = hourly_index(start, days)
    day_of_year = np.asarray(timestamps.dayofyear)
    hour = np.asarray(timestamps.hour)

    seasonal = annual_mean + annual_amp * np.cos(2 * np.pi * (day_of_year - ANNUAL_PEAK_DAY) / 365.0)
    diurnal = diurnal_amp * np.cos(2 * np.pi * (hour - DIURNAL_PEAK_HOUR) / 24.0)

    rng = np.random.default_rng(seed)
    shocks = rng.normal(0.0, noise_std * np.sqrt(1 - rho**2), len(timestamps))
    # stationary start
    shocks[0] = rng.normal(0.0, noise_std)
    noise = lfilter([1.0], [1.0, -rho], shocks)
    return seasonal + diurnal + noise


def hvac_curve(hvac: HvacSpec, temps, occupied) -> np.ndarray:
    """Noiseless HVAC load; slopes are scaled by the setback factor when unoccupied."""
    temps = np.asarray(temps, dtype=float)
    factor = np.where(np.asarray(occupied, dtype=bool), 1.0, hvac.setback)
    cooling = hvac.cooling_slope * np.maximum(0.0, temps - hvac.breakpoint)
    heating = hvac.heating_slope * np.maximum(0.0, hvac.breakpoint - temps)
    return hvac.base + factor * (cooling + heating)


def simulate_loads(
    building: SimBuilding,
    occupancy: OccupancySimulation,
    temperature: np.ndarray,
    seed: int,
    scenario: Scenario = Scenario.lumped,
    start: date = date(2023, 1, 2),
    holidays=(),
) -> BuildingSeries:
    rng = np.random.default_rng(seed)
    steps = len(occupancy.ratio)
    timestamps = hourly_index(start, steps // STEPS_PER_DAY)
    noise = building.noise_std

    lighting = building.light_dynamic * occupancy.lit_fraction + building.light_base
    plug = building.plug_dynamic * occupancy.ratio + building.plug_base

    hvac_on = occupancy.occupied.copy()
    if building.hvac.always_on_hours:
        hvac_on |= np.isin(np.asarray(timestamps.hour), building.hvac.always_on_hours) & assign_day_types(
            timestamps, holidays
        )
    hvac = hvac_curve(building.hvac, temperature, hvac_on)

    lighting = np.maximum(0.0, lighting + rng.normal(0.0, noise.lighting, steps))
    plug = np.maximum(0.0, plug + rng.normal(0.0, noise.plug, steps))
    hvac = np.maximum(0.0, hvac + rng.normal(0.0, noise.hvac, steps))

    occupant_driven = plug + lighting
    total = occupant_driven + hvac
    return BuildingSeries(
        timestamps=timestamps,
        load=total if Scenario(scenario) is Scenario.lumped else occupant_driven,
        working=assign_day_types(timestamps, holidays),
        temperature=np.asarray(temperature, dtype=float),
        occupancy=occupancy.ratio,
        systems={"plug": plug, "lighting": lighting, "hvac": hvac},
    )


def simulate_building(
    building: SimBuilding,
    days: int,
    seed: int,
    scenario: Scenario = Scenario.lumped,
    start: date = date(2023, 1, 2),
    rho: float = 0.8,
    noise_std: float = 1.5,
    temperature: np.ndarray | None = None,
    holidays=(),
) -> tuple[BuildingSeries, GroundTruth]:
    """
    One building end to end. Occupancy, weather and loads draw from
    independent children of the seed.
    """
    occ_seq, weather_seq, load_seq = np.random.SeedSequence(seed).spawn(3)
    as_int = lambda seq: int(seq.generate_state(1)[0])

    occupancy = simulate_occupancy(building, days, as_int(occ_seq), start, holidays)
    if temperature is None:
        temperature = simulate_weather(days, building.climate, as_int(weather_seq), start, rho, noise_std)
    series = simulate_loads(
        building, occupancy, temperature, as_int(load_seq), scenario, start, holidays
    )

    hvac = building.hvac
    truth = GroundTruth(
        building=building.name,
        scenario=Scenario(scenario),
        seed=seed,
        floor_area=building.floor_area,
        capacities={
            "plug_dynamic": building.plug_dynamic,
            "plug_base": building.plug_base,
            "light_dynamic": building.light_dynamic,
            "light_base": building.light_base,
        },
        hvac={
            "breakpoint": hvac.breakpoint,
            "cooling_slope": hvac.cooling_slope,
            "heating_slope": hvac.heating_slope,
            "base": hvac.base,
            "setback": hvac.setback,
            "occupied_threshold": hvac.occupied_threshold,
            "always_on_hours": list(hvac.always_on_hours),
        },
        occupant_count=building.occupant_count,
        zone_count=building.zone_count,
        regular_share=building.regular_share,
    )
    logger.info("Simulated %s: %d days, scenario %s", building.name, days, Scenario(scenario).value)
    return series, truth
