//! The `ccotdr` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure. `CCOTDR_LOG` sets the log filter (default `warn`).

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characterize::{classify, fit_phase_model, initial_guess, ClassifyConfig, PhaseTrace};
use crate::error::{Error, Result};
use crate::fiber_sim::EventScenario;
use crate::io::config::RunConfig;
use crate::io::schema::{read_json, write_json, BurstReport, FitReport, TruthFile, SCHEMA_VERSION};
use crate::io::store::{burst_stem, read_series, scenario_dir, write_series, Manifest, ManifestScenario};
use crate::io::store::{CALIBRATION_STEM, TRUTH_FILE};
use crate::io::tabular::{read_trace_csv, write_histogram_csv, write_waterfall_csv};
use crate::pipeline::{analyze_burst, calibrate, evaluate, CampaignMetrics, TEMP_RATE_SPLIT};

pub const LOG_ENV: &str = "CCOTDR_LOG";

#[derive(Debug, Parser)]
#[command(name = "ccotdr", version, about = "Coherent correlation OTDR simulator and event analyzer")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a dataset of fingerprint bursts with ground truth.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect and characterize events in a simulated dataset.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score event reports against ground truth.
    Report {
        #[arg(long)]
        reports: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Where to write summary.json and histograms (default: the reports directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the drift-plus-tone model to a `t_s, phase_rad` CSV trace.
    Fit {
        #[arg(long)]
        trace: PathBuf,
        /// Write the report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes a dataset for every scenario of the configuration.
pub fn cmd_simulate(config: &Path, out: &Path) -> Result<Manifest> {
    let cfg = RunConfig::load(config)?;
    let ctx = cfg.sim_context()?;
    let specs = cfg.scenarios()?;
    create_dir(out)?;
    let models = specs
        .iter()
        .map(|s| ctx.build_fiber(s.fiber_seed))
        .collect::<Result<Vec<_>>>()?;
    let scenarios: Vec<EventScenario> = specs
        .iter()
        .map(|s| EventScenario {
            events: s.events.clone(),
            schedule: ctx.schedule,
        })
        .collect();
    for (spec, scenario) in specs.iter().zip(&scenarios) {
        scenario.validate(&ctx.layout)?;
        create_dir(&out.join(scenario_dir(spec.id)))?;
    }
    let jobs: Vec<(usize, Option<usize>)> = (0..specs.len())
        .flat_map(|s| std::iter::once(None).chain((0..ctx.schedule.n_bursts).map(Some)).map(move |b| (s, b)))
        .collect();
    log::info!("simulating {} scenarios, {} bursts each", specs.len(), ctx.schedule.n_bursts);
    jobs.par_iter().try_for_each(|&(s, burst)| -> Result<()> {
        let fps = ctx.simulate_burst(&models[s], &scenarios[s], burst)?;
        let stem = burst.map_or_else(|| CALIBRATION_STEM.to_string(), burst_stem);
        write_series(&out.join(scenario_dir(specs[s].id)), &stem, &fps, cfg.output.format)
    })?;

    let truth = TruthFile {
        schema_version: SCHEMA_VERSION.into(),
        schedule: ctx.schedule,
        scenarios: specs
            .iter()
            .map(|s| crate::pipeline::scenario_truth(&ctx, s))
            .collect(),
    };
    write_json(&out.join(TRUTH_FILE), &truth)?;
    let mut manifest = Manifest::new(&cfg, ctx.schedule.frames_per_burst(), models[0].grid.n_cells, models[0].grid.cell_length);
    manifest.scenarios = specs
        .iter()
        .map(|s| ManifestScenario {
            id: s.id,
            fiber_seed: s.fiber_seed,
            dir: scenario_dir(s.id),
        })
        .collect();
    manifest.write(out)?;
    Ok(manifest)
}

/// Analyzes every burst of a dataset; returns the number of reported events.
pub fn cmd_analyze(input: &Path, config: &Path, out: &Path) -> Result<usize> {
    let manifest = Manifest::read(input)?;
    let cfg = RunConfig::load(config)?;
    create_dir(out)?;
    let mut n_events = 0;
    for sc in &manifest.scenarios {
        let src = input.join(&sc.dir);
        let dst = out.join(&sc.dir);
        create_dir(&dst)?;
        let cal = calibrate(&read_series(&src, CALIBRATION_STEM)?, &cfg.analysis)?;
        let counts = (0..manifest.n_bursts)
            .into_par_iter()
            .map(|b| -> Result<usize> {
                let fps = read_series(&src, &burst_stem(b))?;
                let (waterfall, report) = analyze_burst(&cal, &fps, &cfg.analysis, sc.id, b)?;
                if cfg.output.waterfall_csv {
                    write_waterfall_csv(&dst.join(format!("{}_waterfall.csv", burst_stem(b))), &waterfall)?;
                }
                write_json(&dst.join(format!("{}.json", burst_stem(b))), &report)?;
                Ok(report.events.len())
            })
            .collect::<Result<Vec<_>>>()?;
        n_events += counts.iter().sum::<usize>();
    }
    log::info!("{n_events} events reported");
    Ok(n_events)
}

fn is_report_name(name: &str) -> bool {
    name.starts_with("burst_") && name.ends_with(".json")
}

fn collect_reports(dir: &Path) -> Result<Vec<BurstReport>> {
    let mut paths = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let path = entry.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().and_then(|n| n.to_str()).is_some_and(is_report_name) {
                paths.push(path);
            }
        }
    }
    paths.sort();
    let mut reports: Vec<BurstReport> = paths.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    reports.sort_by_key(|r| (r.scenario, r.burst));
    Ok(reports)
}

/// Report metrics next to the reference figures of merit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub schema_version: String,
    pub mae_m: Option<f64>,
    pub std_m: Option<f64>,
    pub pct_within_5m: Option<f64>,
    pub classification_accuracy: Option<f64>,
    pub temperature_labeling_pct: Option<f64>,
    pub null_false_alarm_pct: Option<f64>,
    pub frequency_error_stats: FrequencyErrorStats,
    pub metrics: CampaignMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyErrorStats {
    pub n: usize,
    pub mean_hz: Option<f64>,
    pub std_hz: Option<f64>,
    pub max_abs_hz: Option<f64>,
    pub pct_within_1hz: Option<f64>,
}

impl ReportSummary {
    pub fn new(metrics: CampaignMetrics) -> Self {
        let loc = metrics.localization.stats.clone();
        let f = &metrics.frequency;
        ReportSummary {
            schema_version: SCHEMA_VERSION.into(),
            mae_m: loc.as_ref().map(|s| s.mae_m),
            std_m: loc.as_ref().map(|s| s.std_m),
            pct_within_5m: loc.as_ref().map(|s| s.pct_within_5m),
            classification_accuracy: metrics.classification.pct,
            temperature_labeling_pct: metrics.temperature_labeling.pct,
            null_false_alarm_pct: metrics.null_false_alarms.pct,
            frequency_error_stats: FrequencyErrorStats {
                n: f.errors_hz.len(),
                mean_hz: f.mean_error_hz,
                std_hz: f.std_error_hz,
                max_abs_hz: f.max_abs_error_hz,
                pct_within_1hz: f.within_1hz.pct,
            },
            metrics,
        }
    }

    /// Plain-text table of the metrics beside the reference values.
    pub fn table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"));
        let rows = [
            ("localization MAE (m)", fmt(self.mae_m), "1.8"),
            ("localization std (m)", fmt(self.std_m), "2.7"),
            ("within 5 m (%)", fmt(self.pct_within_5m), "90"),
            ("temperature labeling, |rate| > 0.1 C/s (%)", fmt(self.temperature_labeling_pct), "95"),
            ("classification accuracy (%)", fmt(self.classification_accuracy), "-"),
            ("null-burst false alarms (%)", fmt(self.null_false_alarm_pct), "-"),
            ("frequency within 1 Hz (%)", fmt(self.frequency_error_stats.pct_within_1hz), "-"),
            ("frequency error mean (Hz)", fmt(self.frequency_error_stats.mean_hz), "-"),
            ("frequency error std (Hz)", fmt(self.frequency_error_stats.std_hz), "-"),
        ];
        let mut s = format!("{:<44}{:>12}{:>12}\n", "metric", "value", "reference");
        for (name, value, reference) in rows {
            s.push_str(&format!("{name:<44}{value:>12}{reference:>12}\n"));
        }
        s.push_str(&format!(
            "{} scenarios, {} bursts, {} detections ({} unmatched, {} truth events missed)\n",
            self.metrics.n_scenarios,
            self.metrics.n_bursts,
            self.metrics.n_detections,
            self.metrics.localization.unmatched_detections,
            self.metrics.localization.missed_truth,
        ));
        s
    }
}

/// Outcome of `report`: `None` when the report set is empty.
pub fn cmd_report(reports_dir: &Path, truth_path: &Path, out: Option<&Path>) -> Result<Option<ReportSummary>> {
    let truth: TruthFile = read_json(truth_path)?;
    let reports = collect_reports(reports_dir)?;
    if reports.is_empty() {
        return Ok(None);
    }
    let truth_keys: BTreeSet<(usize, usize)> = truth
        .scenarios
        .iter()
        .flat_map(|s| (0..s.bursts.len()).map(move |b| (s.id, b)))
        .collect();
    let report_keys: BTreeSet<(usize, usize)> = reports.iter().map(|r| (r.scenario, r.burst)).collect();
    let orphans: Vec<String> = report_keys
        .symmetric_difference(&truth_keys)
        .map(|&(s, b)| {
            let side = if truth_keys.contains(&(s, b)) { "no report for" } else { "no truth for" };
            format!("{side} {}/{}", scenario_dir(s), burst_stem(b))
        })
        .collect();
    if !orphans.is_empty() || report_keys.len() != reports.len() {
        let mut msg = format!("reports and truth do not match ({} orphans)", orphans.len());
        if report_keys.len() != reports.len() {
            msg.push_str("; duplicate burst reports present");
        }
        for o in &orphans {
            msg.push_str("\n  ");
            msg.push_str(o);
        }
        return Err(Error::Data(msg));
    }
    let mut by_scenario: BTreeMap<usize, Vec<BurstReport>> = BTreeMap::new();
    for r in reports {
        by_scenario.entry(r.scenario).or_default().push(r);
    }
    let gate = crate::detect::MATCH_GATE_M;
    let metrics = evaluate(
        truth
            .scenarios
            .iter()
            .map(|s| (s, by_scenario.get(&s.id).map_or(&[][..], |v| v.as_slice()))),
        gate,
    );
    let fitted_freqs: Vec<f64> = by_scenario
        .values()
        .flatten()
        .flat_map(|r| &r.events)
        .filter(|e| e.fit.class.is_some_and(|c| c.has_vibration()))
        .map(|e| e.fit.frequency)
        .collect();
    let summary = ReportSummary::new(metrics);
    let out = out.unwrap_or(reports_dir);
    create_dir(out)?;
    write_json(&out.join("summary.json"), &summary)?;
    write_histogram_csv(
        &out.join("localization_error_histogram.csv"),
        &summary.metrics.localization.errors_m,
        -10.0,
        10.0,
        1.0,
    )?;
    let nyquist = truth.schedule.nyquist();
    write_histogram_csv(&out.join("frequency_histogram.csv"), &fitted_freqs, 0.0, nyquist.ceil(), 1.0)?;
    log::debug!("temperature labeling split at {TEMP_RATE_SPLIT} C/s");
    Ok(Some(summary))
}

/// Fit report of a standalone trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceFitReport {
    pub schema_version: String,
    pub n_samples: usize,
    #[serde(flatten)]
    pub fit: FitReport,
}

/// Fits a CSV trace. Classification uses the default thresholds since a
/// standalone trace carries no calibration.
pub fn cmd_fit(trace_path: &Path, out: Option<&Path>) -> Result<TraceFitReport> {
    let (t, y) = read_trace_csv(trace_path)?;
    let trace = PhaseTrace::new(&t, &y)?;
    let init = initial_guess(&trace)?;
    let fit = fit_phase_model(&trace, &init)?;
    let class = classify(&fit, &ClassifyConfig::default())?;
    let report = TraceFitReport {
        schema_version: SCHEMA_VERSION.into(),
        n_samples: trace.len(),
        fit: FitReport::new(&fit, Some(&class), None),
    };
    if let Some(out) = out {
        write_json(out, &report)?;
    }
    Ok(report)
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out } => {
            let m = cmd_simulate(&config, &out)?;
            println!(
                "wrote {} scenarios x {} bursts ({} frames, {} cells) to {}",
                m.scenarios.len(),
                m.n_bursts,
                m.frames_per_burst,
                m.n_cells,
                out.display()
            );
        }
        Command::Analyze { input, config, out } => {
            let n = cmd_analyze(&input, &config, &out)?;
            println!("{n} events reported in {}", out.display());
        }
        Command::Report { reports, truth, out } => match cmd_report(&reports, &truth, out.as_deref())? {
            None => println!("no events: the report set in {} is empty", reports.display()),
            Some(s) => {
                if s.metrics.n_detections == 0 {
                    println!("no events detected");
                }
                print!("{}", s.table());
            }
        },
        Command::Fit { trace, out } => {
            let r = cmd_fit(&trace, out.as_deref())?;
            let text = serde_json::to_string_pretty(&r).map_err(|source| Error::Json {
                path: trace.clone(),
                source,
            })?;
            println!("{text}");
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
