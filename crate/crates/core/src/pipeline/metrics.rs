use serde::{Deserialize, Serialize};

use crate::characterize::EventKind as ClassKind;
use crate::detect::{match_positions, summarize_errors, LocalizationReport};
use crate::fiber_sim::EventKind;
use crate::io::schema::{BurstReport, EventReport, ScenarioTruth, SCHEMA_VERSION};

/// Temperature rates above this magnitude (°C/s) must be labeled as
/// temperature events.
pub const TEMP_RATE_SPLIT: f64 = 0.1;

/// Combined truth at one event location during one burst.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthLabel {
    pub position_m: f64,
    pub kind: ClassKind,
    pub temp_rate_c_per_s: Option<f64>,
    pub vib_frequency_hz: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurstTruth {
    pub scenario: usize,
    pub burst: usize,
    pub labels: Vec<TruthLabel>,
}

impl BurstTruth {
    /// Events active during `burst`; events sharing a range merge into one
    /// label.
    pub fn from_scenario(truth: &ScenarioTruth, burst: usize) -> Self {
        let [t0, t1] = truth.bursts.get(burst).copied().unwrap_or([0.0, 0.0]);
        let mut labels: Vec<(f64, [f64; 2], Option<f64>, Option<f64>)> = Vec::new();
        for e in truth.events.iter().filter(|e| e.active_during(t0, t1)) {
            let idx = match labels.iter().position(|l| l.1 == e.range_m) {
                Some(i) => i,
                None => {
                    labels.push((e.midpoint(), e.range_m, None, None));
                    labels.len() - 1
                }
            };
            match e.kind {
                EventKind::TemperatureRamp { rate_c_per_s, .. } => labels[idx].2 = Some(rate_c_per_s),
                EventKind::Vibration { frequency_hz, .. } => labels[idx].3 = Some(frequency_hz),
            }
        }
        BurstTruth {
            scenario: truth.id,
            burst,
            labels: labels
                .into_iter()
                .map(|(position_m, _, rate, freq)| TruthLabel {
                    position_m,
                    kind: ClassKind::from_components(rate.is_some(), freq.is_some()),
                    temp_rate_c_per_s: rate,
                    vib_frequency_hz: freq,
                })
                .collect(),
        }
    }
}

/// Hit count over a case count.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub cases: usize,
    pub hits: usize,
    /// `100 · hits / cases`, absent without cases.
    pub pct: Option<f64>,
}

impl Tally {
    fn add(&mut self, hit: bool) {
        self.cases += 1;
        self.hits += hit as usize;
    }

    fn finish(mut self) -> Self {
        self.pct = (self.cases > 0).then(|| 100.0 * self.hits as f64 / self.cases as f64);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyStats {
    /// Bursts with a vibration in the truth.
    pub n_truth: usize,
    /// Signed `fitted - true` frequency for every matched detection, Hz.
    pub errors_hz: Vec<f64>,
    pub mean_error_hz: Option<f64>,
    pub std_error_hz: Option<f64>,
    pub max_abs_error_hz: Option<f64>,
    /// Truth vibrations recovered within 1 Hz; a missed detection counts
    /// as a failure.
    pub within_1hz: Tally,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignMetrics {
    pub schema_version: String,
    pub n_scenarios: usize,
    pub n_bursts: usize,
    pub n_detections: usize,
    /// Detections after merging co-located temperature and vibration flags.
    pub n_located: usize,
    pub localization: LocalizationReport,
    /// Matched truth locations whose predicted label equals the true label.
    pub classification: Tally,
    /// Truth ramps faster than [`TEMP_RATE_SPLIT`] whose matched detection
    /// carries a temperature component.
    pub temperature_labeling: Tally,
    /// Event-free bursts with at least one detection.
    pub null_false_alarms: Tally,
    pub frequency: FrequencyStats,
}

impl CampaignMetrics {
    pub fn classification_accuracy(&self) -> Option<f64> {
        self.classification.pct
    }
}

/// Detections of one burst whose pair ranges overlap, scored as one event.
#[derive(Clone, Debug, PartialEq)]
pub struct LocatedEvent {
    /// Position of the member with the largest statistic-to-threshold ratio.
    pub position_m: f64,
    /// Union of the members' components; `None` if no member was classified.
    pub class: Option<ClassKind>,
    /// Fitted frequency of a converged member, preferring one labeled as a
    /// vibration.
    pub frequency_hz: Option<f64>,
}

/// Merges detections whose pair ranges overlap. The detector reports
/// temperature and vibration flags separately, so one physical event can
/// appear twice at the same place.
pub fn locate(events: &[EventReport]) -> Vec<LocatedEvent> {
    let mut order: Vec<usize> = (0..events.len()).collect();
    order.sort_by_key(|&i| (events[i].detection.pair_range[0], i));
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in order {
        let [lo, hi] = events[i].detection.pair_range;
        match groups.last_mut() {
            Some((end, members)) if lo <= *end => {
                *end = (*end).max(hi);
                members.push(i);
            }
            _ => groups.push((hi, vec![i])),
        }
    }
    groups
        .into_iter()
        .map(|(_, members)| {
            let strength = |i: &usize| events[*i].detection.statistic_value.abs() / events[*i].detection.threshold;
            let lead = *members
                .iter()
                .max_by(|a, b| strength(a).total_cmp(&strength(b)).then(b.cmp(a)))
                .expect("nonempty group");
            let classes: Vec<ClassKind> = members.iter().filter_map(|&i| events[i].fit.class).collect();
            let class = (!classes.is_empty()).then(|| {
                ClassKind::from_components(
                    classes.iter().any(|c| c.has_temperature()),
                    classes.iter().any(|c| c.has_vibration()),
                )
            });
            let converged = || members.iter().map(|&i| &events[i].fit).filter(|f| f.converged);
            let frequency_hz = converged()
                .find(|f| f.class.is_some_and(|c| c.has_vibration()))
                .or_else(|| converged().next())
                .map(|f| f.frequency);
            LocatedEvent {
                position_m: events[lead].detection.position_m,
                class,
                frequency_hz,
            }
        })
        .collect()
}

/// Scores burst reports against the scenario truths they came from.
pub fn evaluate<'a>(
    scenarios: impl IntoIterator<Item = (&'a ScenarioTruth, &'a [BurstReport])>,
    gate_m: f64,
) -> CampaignMetrics {
    let mut n_scenarios = 0;
    let mut n_bursts = 0;
    let mut n_detections = 0;
    let mut n_located = 0;
    let mut errors = Vec::new();
    let mut unmatched = 0;
    let mut missed = 0;
    let mut classification = Tally::default();
    let mut temperature = Tally::default();
    let mut null = Tally::default();
    let mut freq_errors = Vec::new();
    let mut freq_tally = Tally::default();

    for (truth, reports) in scenarios {
        n_scenarios += 1;
        for report in reports {
            n_bursts += 1;
            n_detections += report.events.len();
            n_located += locate(&report.events).len();
            let labels = BurstTruth::from_scenario(truth, report.burst).labels;
            if labels.is_empty() {
                null.add(!report.events.is_empty());
            }
            let located = locate(&report.events);
            let det: Vec<f64> = located.iter().map(|l| l.position_m).collect();
            let pos: Vec<f64> = labels.iter().map(|l| l.position_m).collect();
            let matches = match_positions(&det, &pos, gate_m);
            unmatched += det.len() - matches.len();
            missed += pos.len() - matches.len();
            let mut matched_to: Vec<Option<usize>> = vec![None; labels.len()];
            for &(d, t) in &matches {
                errors.push(det[d] - pos[t]);
                matched_to[t] = Some(d);
            }
            for (label, m) in labels.iter().zip(&matched_to) {
                let event = m.map(|d| &located[d]);
                let class = event.and_then(|e| e.class);
                if event.is_some() {
                    classification.add(class == Some(label.kind));
                }
                if label.temp_rate_c_per_s.is_some_and(|r| r.abs() > TEMP_RATE_SPLIT) {
                    temperature.add(class.is_some_and(|c| c.has_temperature()));
                }
                if let Some(f) = label.vib_frequency_hz {
                    let err = event.and_then(|e| e.frequency_hz).map(|fit| fit - f);
                    if let Some(err) = err {
                        freq_errors.push(err);
                    }
                    freq_tally.add(err.is_some_and(|e| e.abs() <= 1.0));
                }
            }
        }
    }

    let n = freq_errors.len() as f64;
    let mean = (n > 0.0).then(|| freq_errors.iter().sum::<f64>() / n);
    let frequency = FrequencyStats {
        n_truth: freq_tally.cases,
        mean_error_hz: mean,
        std_error_hz: mean.map(|m| (freq_errors.iter().map(|e| (e - m).powi(2)).sum::<f64>() / n).sqrt()),
        max_abs_error_hz: mean.map(|_| freq_errors.iter().fold(0.0, |a: f64, e| a.max(e.abs()))),
        errors_hz: freq_errors,
        within_1hz: freq_tally.finish(),
    };
    CampaignMetrics {
        schema_version: SCHEMA_VERSION.into(),
        n_scenarios,
        n_bursts,
        n_detections,
        n_located,
        localization: LocalizationReport {
            stats: summarize_errors(&errors),
            errors_m: errors,
            unmatched_detections: unmatched,
            missed_truth: missed,
        },
        classification: classification.finish(),
        temperature_labeling: temperature.finish(),
        null_false_alarms: null.finish(),
        frequency,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characterize::EventKind as Class;
    use crate::detect::{DetectedEvent, DetectionKind};
    use crate::fiber_sim::Event;
    use crate::io::schema::FitReport;

    fn truth(events: Vec<Event>) -> ScenarioTruth {
        ScenarioTruth {
            id: 0,
            fiber_seed: 1,
            events,
            bursts: vec![[0.0, 0.05]],
        }
    }

    fn report(position_m: f64, class: Class, f: f64) -> EventReport {
        EventReport {
            detection: DetectedEvent {
                position_m,
                kind: DetectionKind::Temperature,
                statistic_value: 1.0,
                threshold: 0.5,
                pair_index: position_m as usize,
                pair_range: [position_m as usize; 2],
                time_window: [0.0, 0.05],
            },
            span: [position_m as usize; 2],
            fit: FitReport {
                slope: 1.0,
                amplitude: 0.0,
                frequency: f,
                phase_offset: 0.0,
                residual_rms: 0.0,
                converged: true,
                iterations: 3,
                class: Some(class),
                temp_rate: None,
                vib_frequency: None,
                vib_amplitude: None,
                diagnostic: None,
            },
        }
    }

    #[test]
    fn perfect_detections_score_fully() {
        let t = truth(vec![
            Event {
                range_m: [20.0, 25.0],
                kind: EventKind::TemperatureRamp {
                    rate_c_per_s: 0.3,
                    start_s: 0.0,
                    stop_s: 1.0,
                },
            },
            Event {
                range_m: [60.0, 65.0],
                kind: EventKind::Vibration {
                    amplitude_rad: 1.0,
                    frequency_hz: 48.0,
                    phase_offset_rad: 0.0,
                },
            },
        ]);
        let reports = vec![BurstReport::new(
            0,
            0,
            [0.0, 0.05],
            vec![report(22.5, Class::Temperature, 0.0), report(62.5, Class::Vibration, 48.0)],
        )];
        let m = evaluate([(&t, reports.as_slice())], 10.0);
        let stats = m.localization.stats.clone().unwrap();
        assert_eq!(stats.mae_m, 0.0);
        assert_eq!(m.classification_accuracy(), Some(100.0));
        assert_eq!(m.temperature_labeling.pct, Some(100.0));
        assert_eq!(m.frequency.within_1hz.hits, 1);
        assert_eq!(m.null_false_alarms.cases, 0);
    }

    #[test]
    fn null_bursts_count_false_alarms() {
        let t = truth(vec![]);
        let quiet = vec![BurstReport::new(0, 0, [0.0, 0.05], vec![])];
        let noisy = vec![BurstReport::new(0, 0, [0.0, 0.05], vec![report(10.0, Class::Negligible, 0.0)])];
        let m = evaluate([(&t, quiet.as_slice()), (&t, noisy.as_slice())], 10.0);
        assert_eq!(m.null_false_alarms.cases, 2);
        assert_eq!(m.null_false_alarms.hits, 1);
        assert_eq!(m.localization.unmatched_detections, 1);
        assert!(m.localization.stats.is_none());
    }

    #[test]
    fn overlapping_detections_count_once() {
        let mut vib = report(22.0, Class::Vibration, 48.0);
        vib.detection.kind = DetectionKind::Vibration;
        vib.detection.statistic_value = 10.0;
        let events = vec![report(22.5, Class::Temperature, 0.0), vib];
        let located = locate(&events);
        assert_eq!(located.len(), 1);
        assert_eq!(located[0].class, Some(Class::Mixed));
        assert_eq!(located[0].position_m, 22.0);
        assert_eq!(located[0].frequency_hz, Some(48.0));
    }

    #[test]
    fn co_located_events_merge_to_mixed() {
        let range_m = [20.0, 25.0];
        let t = truth(vec![
            Event {
                range_m,
                kind: EventKind::TemperatureRamp {
                    rate_c_per_s: 0.3,
                    start_s: 0.0,
                    stop_s: 1.0,
                },
            },
            Event {
                range_m,
                kind: EventKind::Vibration {
                    amplitude_rad: 1.0,
                    frequency_hz: 48.0,
                    phase_offset_rad: 0.0,
                },
            },
        ]);
        let labels = BurstTruth::from_scenario(&t, 0).labels;
        assert_eq!(labels.len(), 1);
        assert_eq!(labels[0].kind, Class::Mixed);
    }
}
