//! Run configuration: a single JSON document whose defaults reproduce the
//! reference acquisition (4095-bit PRBS at 125 MBd, 250 m test fiber,
//! 50 ms bursts every 28 s, 125 bursts).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema::{check_version, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::fiber_sim::{EventScenario, FiberLayout, MeasurementSchedule, DEFAULT_K_T};
use crate::pipeline::{generate_scenarios, AnalysisConfig, CampaignSpec, ScenarioSpec, SimContext, Synthesis};
use crate::probe::{build_probe_frame, generate_prbs, PrbsSpec, ProbeFrame, DEFAULT_POLYNOMIAL_12};

fn default_version() -> String {
    SCHEMA_VERSION.to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub prbs_order: u32,
    /// Feedback polynomial as a bit mask including the `x^order` and `1`
    /// terms. Required unless `prbs_order` is 12.
    pub polynomial: Option<u64>,
    pub prbs_seed: u64,
    pub zero_pad: usize,
    pub symbol_rate_hz: u64,
    pub samples_per_symbol: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            prbs_order: 12,
            polynomial: None,
            prbs_seed: 1,
            zero_pad: 5000,
            symbol_rate_hz: 125_000_000,
            samples_per_symbol: 5,
        }
    }
}

impl ProbeConfig {
    pub fn build(&self) -> Result<ProbeFrame> {
        let polynomial = match (self.polynomial, self.prbs_order) {
            (Some(p), _) => p,
            (None, 12) => DEFAULT_POLYNOMIAL_12,
            (None, _) => {
                return Err(Error::config(
                    "probe.polynomial",
                    "required when prbs_order is not 12",
                ))
            }
        };
        let prbs = generate_prbs(&PrbsSpec {
            order: self.prbs_order,
            polynomial,
            seed: self.prbs_seed,
        })?;
        build_probe_frame(&prbs, self.zero_pad, self.symbol_rate_hz, self.samples_per_symbol)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberConfig {
    pub layout: FiberLayout,
    /// Mean Rayleigh power reflectivity per cell, dB.
    pub backscatter_db: f64,
    /// Thermo-optic phase coefficient, rad/(K·m).
    pub k_t: f64,
}

impl Default for FiberConfig {
    fn default() -> Self {
        FiberConfig {
            layout: FiberLayout::default(),
            backscatter_db: -55.0,
            k_t: DEFAULT_K_T,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Receiver noise power per sample relative to the launched field, dB.
    pub receiver_noise_db: f64,
    pub laser_linewidth_hz: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            receiver_noise_db: -42.0,
            laser_linewidth_hz: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub burst_duration_s: f64,
    pub burst_gap_s: f64,
    pub n_bursts: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            burst_duration_s: 0.05,
            burst_gap_s: 28.0,
            n_bursts: 125,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageFormat {
    #[default]
    Binary,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub format: StorageFormat,
    pub synthesis: Synthesis,
    /// Write one waterfall CSV per analyzed burst.
    pub waterfall_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            format: StorageFormat::Binary,
            synthesis: Synthesis::Fast,
            waterfall_csv: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub schema_version: String,
    /// Fiber seed of a single scenario; campaign seed when the campaign
    /// does not set its own.
    pub seed: Option<u64>,
    pub probe: ProbeConfig,
    pub fiber: FiberConfig,
    pub noise: NoiseConfig,
    pub schedule: ScheduleConfig,
    /// Events of a single scenario. Ignored when `campaign` is set.
    pub events: Vec<crate::fiber_sim::Event>,
    pub campaign: Option<CampaignSpec>,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: default_version(),
            seed: None,
            probe: ProbeConfig::default(),
            fiber: FiberConfig::default(),
            noise: NoiseConfig::default(),
            schedule: ScheduleConfig::default(),
            events: Vec::new(),
            campaign: None,
            analysis: AnalysisConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses and validates a configuration. A missing `schema_version` is
    /// taken as the current one.
    pub fn from_json(path: &Path, text: &str) -> Result<Self> {
        let json_err = |e: serde_json::Error| Error::config(path.display().to_string(), e.to_string());
        let value: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
        if value.get("schema_version").is_some() {
            check_version(path, &value)?;
        }
        let cfg: RunConfig = serde_json::from_value(value).map_err(json_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(path, &text)
    }

    /// Checks every physical parameter and reports the first offending field.
    pub fn validate(&self) -> Result<()> {
        let ctx = self.sim_context()?;
        let finite = |v: f64, f: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(f, "must be finite"))
            }
        };
        finite(self.fiber.backscatter_db, "fiber.backscatter_db")?;
        finite(self.noise.receiver_noise_db, "noise.receiver_noise_db")?;
        if !(self.fiber.k_t.is_finite() && self.fiber.k_t > 0.0) {
            return Err(Error::config("fiber.k_t", "must be positive"));
        }
        if !(self.noise.laser_linewidth_hz.is_finite() && self.noise.laser_linewidth_hz >= 0.0) {
            return Err(Error::config("noise.laser_linewidth_hz", "must be non-negative"));
        }
        self.analysis.validate()?;
        EventScenario {
            events: self.events.clone(),
            schedule: ctx.schedule,
        }
        .validate(&ctx.layout)?;
        if self.output.synthesis == Synthesis::Waveform {
            let n_cells = (ctx.layout.total_length() / ctx.layout.cell_length(ctx.probe.symbol_rate as f64)).ceil();
            if (ctx.probe.zero_pad_len() as f64) < n_cells {
                return Err(Error::config(
                    "probe.zero_pad",
                    format!("must cover the fiber round trip ({n_cells} cells) for waveform synthesis"),
                ));
            }
        }
        if let Some(c) = &self.campaign {
            if c.seed.or(self.seed).is_none() {
                return Err(Error::config("campaign.seed", "campaigns require an explicit seed"));
            }
            generate_scenarios(&ctx, &self.campaign_spec().expect("campaign present"))?;
        }
        Ok(())
    }

    pub fn sim_context(&self) -> Result<SimContext> {
        let probe = self.probe.build()?;
        self.fiber.layout.validate()?;
        let schedule = MeasurementSchedule {
            burst_duration: self.schedule.burst_duration_s,
            burst_gap: self.schedule.burst_gap_s,
            n_bursts: self.schedule.n_bursts,
            frame_period: probe.frame_duration(),
        };
        schedule.validate()?;
        Ok(SimContext {
            probe,
            layout: self.fiber.layout.clone(),
            backscatter_db: self.fiber.backscatter_db,
            k_t: self.fiber.k_t,
            receiver_noise_db: self.noise.receiver_noise_db,
            laser_linewidth_hz: self.noise.laser_linewidth_hz,
            schedule,
            synthesis: self.output.synthesis,
        })
    }

    /// The campaign with its seed resolved against the top-level seed.
    pub fn campaign_spec(&self) -> Option<CampaignSpec> {
        self.campaign.clone().map(|mut c| {
            c.seed = c.seed.or(self.seed);
            c
        })
    }

    /// Scenarios to simulate: the campaign draws, or the single configured
    /// scenario on fiber seed `seed` (0 when unset).
    pub fn scenarios(&self) -> Result<Vec<ScenarioSpec>> {
        match self.campaign_spec() {
            Some(spec) => generate_scenarios(&self.sim_context()?, &spec),
            None => Ok(vec![ScenarioSpec {
                id: 0,
                fiber_seed: self.seed.unwrap_or(0),
                events: self.events.clone(),
            }]),
        }
    }
}
