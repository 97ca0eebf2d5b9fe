use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, CampaignMetrics};
use super::{simulate_and_analyze, AnalysisConfig, SimContext};
use crate::error::{Error, Result};
use crate::fiber_sim::{Event, EventKind, EventScenario};
use crate::io::schema::{BurstReport, ScenarioTruth};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignMix {
    Temperature,
    Vibration,
    Null,
    /// Cycles through: ramp at or above the split rate, ramp below it,
    /// vibration, null.
    Balanced,
}

/// Randomized scenario campaign. Every draw derives from `seed` and the
/// scenario index only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignSpec {
    pub n_scenarios: usize,
    pub seed: Option<u64>,
    pub mix: CampaignMix,
    /// Magnitude range of temperature rates, °C/s; the sign is drawn
    /// (heating or cooling).
    pub rate_range_c_per_s: [f64; 2],
    /// Magnitude range of the sub-split ramps in balanced campaigns.
    pub low_rate_range_c_per_s: [f64; 2],
    pub vib_amplitude_range_rad: [f64; 2],
    pub vib_frequency_range_hz: [f64; 2],
    /// Contiguous sensor segments covered by each event.
    pub segments_per_event: usize,
}

impl Default for CampaignSpec {
    fn default() -> Self {
        CampaignSpec {
            n_scenarios: 200,
            seed: None,
            mix: CampaignMix::Temperature,
            rate_range_c_per_s: [0.1, 0.5],
            low_rate_range_c_per_s: [0.01, 0.1],
            vib_amplitude_range_rad: [1.0, 4.0],
            vib_frequency_range_hz: [48.0, 48.0],
            segments_per_event: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: usize,
    pub fiber_seed: u64,
    pub events: Vec<Event>,
}

fn uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}

fn check_range(field: &str, r: [f64; 2]) -> Result<()> {
    if r[0].is_finite() && r[1].is_finite() && r[0] >= 0.0 && r[0] <= r[1] {
        Ok(())
    } else {
        Err(Error::config(format!("campaign.{field}"), "must be an ordered non-negative pair"))
    }
}

/// Draws the scenarios of a campaign over the sensor segments of `ctx.layout`.
pub fn generate_scenarios(ctx: &SimContext, spec: &CampaignSpec) -> Result<Vec<ScenarioSpec>> {
    let seed = spec
        .seed
        .ok_or_else(|| Error::config("campaign.seed", "campaigns require an explicit seed"))?;
    check_range("rate_range_c_per_s", spec.rate_range_c_per_s)?;
    check_range("low_rate_range_c_per_s", spec.low_rate_range_c_per_s)?;
    check_range("vib_amplitude_range_rad", spec.vib_amplitude_range_rad)?;
    check_range("vib_frequency_range_hz", spec.vib_frequency_range_hz)?;
    let segments = ctx.layout.sensor_segments();
    let span = spec.segments_per_event;
    if span == 0 || span > segments.len() {
        return Err(Error::config(
            "campaign.segments_per_event",
            format!("must be in 1..={}", segments.len()),
        ));
    }
    let horizon = ctx.schedule.horizon();
    let specs = (0..spec.n_scenarios)
        .map(|id| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id as u64);
            let fiber_seed = rng.next_u64();
            let first = rng.random_range(0..=segments.len() - span);
            let range_m = [segments[first][0], segments[first + span - 1][1]];
            let mix = match spec.mix {
                CampaignMix::Balanced => [
                    CampaignMix::Temperature,
                    CampaignMix::Temperature,
                    CampaignMix::Vibration,
                    CampaignMix::Null,
                ][id % 4],
                m => m,
            };
            let kind = match mix {
                CampaignMix::Temperature => {
                    let rates = if spec.mix == CampaignMix::Balanced && id % 4 == 1 {
                        spec.low_rate_range_c_per_s
                    } else {
                        spec.rate_range_c_per_s
                    };
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    Some(EventKind::TemperatureRamp {
                        rate_c_per_s: sign * uniform(&mut rng, rates),
                        start_s: 0.0,
                        stop_s: horizon,
                    })
                }
                CampaignMix::Vibration => Some(EventKind::Vibration {
                    amplitude_rad: uniform(&mut rng, spec.vib_amplitude_range_rad),
                    frequency_hz: uniform(&mut rng, spec.vib_frequency_range_hz),
                    phase_offset_rad: rng.random_range(-PI..PI),
                }),
                CampaignMix::Null | CampaignMix::Balanced => None,
            };
            ScenarioSpec {
                id,
                fiber_seed,
                events: kind.into_iter().map(|kind| Event { range_m, kind }).collect(),
            }
        })
        .collect();
    Ok(specs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub truth: ScenarioTruth,
    pub reports: Vec<BurstReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignOutcome {
    pub scenarios: Vec<ScenarioOutcome>,
    pub metrics: CampaignMetrics,
}

pub fn scenario_truth(ctx: &SimContext, spec: &ScenarioSpec) -> ScenarioTruth {
    let s = &ctx.schedule;
    ScenarioTruth {
        id: spec.id,
        fiber_seed: spec.fiber_seed,
        events: spec.events.clone(),
        bursts: (0..s.n_bursts)
            .map(|b| [s.burst_start(b), s.frame_time(b, s.frames_per_burst() - 1)])
            .collect(),
    }
}

/// Simulates and analyzes one scenario.
pub fn run_scenario(ctx: &SimContext, cfg: &AnalysisConfig, spec: &ScenarioSpec) -> Result<ScenarioOutcome> {
    let scenario = EventScenario {
        events: spec.events.clone(),
        schedule: ctx.schedule,
    };
    scenario.validate(&ctx.layout)?;
    let model = ctx.build_fiber(spec.fiber_seed)?;
    let reports = simulate_and_analyze(ctx, cfg, &model, &scenario, spec.id)?;
    Ok(ScenarioOutcome {
        truth: scenario_truth(ctx, spec),
        reports,
    })
}

/// Runs every scenario (in parallel) and scores the campaign. Results are
/// collected in scenario order, so the outcome does not depend on the
/// thread count.
pub fn run_campaign(ctx: &SimContext, cfg: &AnalysisConfig, spec: &CampaignSpec) -> Result<CampaignOutcome> {
    cfg.validate()?;
    let specs = generate_scenarios(ctx, spec)?;
    let scenarios: Vec<ScenarioOutcome> = specs
        .par_iter()
        .map(|s| run_scenario(ctx, cfg, s))
        .collect::<Result<_>>()?;
    let metrics = evaluate(
        scenarios.iter().map(|s| (&s.truth, s.reports.as_slice())),
        cfg.match_gate_m,
    );
    Ok(CampaignOutcome { scenarios, metrics })
}
