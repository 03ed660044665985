//! TOML experiment configuration.
//!
//! Angles are degrees and frequencies are Hz in the document; validation
//! converts phase quantities to radians and frequencies to rad/s. Amplitude
//! and offset targets stay in degrees. Unknown keys are rejected.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaits::{GaitRegistry, GaitTables, ParamUpdate, HEXAPOD_JOINTS};
use crate::network::{Integrator, Matrix, NetworkParams, DEFAULT_DT, DEFAULT_GAIN};
use crate::sim::{Event, InitialState, Perturbation, Range, Schedule, Target};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub network: NetworkSection,
    pub gait: GaitSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// One value for every oscillator, or one per oscillator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerOscillator {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerOscillator {
    fn expand(&self, n: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            PerOscillator::Uniform(v) => Ok(vec![*v; n]),
            PerOscillator::Each(v) if v.len() == n => Ok(v.clone()),
            PerOscillator::Each(v) => Err(Error::DimensionMismatch {
                what: what.into(),
                expected: n,
                found: v.len(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default = "default_n")]
    pub n: usize,
    pub frequency_hz: PerOscillator,
    #[serde(default = "default_gain")]
    pub a_r: f64,
    #[serde(default = "default_gain")]
    pub a_x: f64,
}

/// A bundled preset, optionally with table overrides, or explicit tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Matrix>,
    /// Degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub varphi: Option<Matrix>,
    /// Degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_r: Option<Vec<f64>>,
    /// Degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_x: Option<Vec<f64>>,
}

impl GaitSection {
    fn tables(&self) -> GaitTables {
        GaitTables {
            w: self.w.clone(),
            varphi: self.varphi.clone(),
            big_r: self.big_r.clone(),
            big_x: self.big_x.clone(),
        }
    }

    /// Update carrying the preset (if any) followed by the explicit tables.
    fn to_update(&self, registry: &GaitRegistry, n: usize) -> Result<ParamUpdate> {
        let mut update = match &self.preset {
            Some(name) => {
                if n != HEXAPOD_JOINTS {
                    return Err(Error::InvalidParams(format!(
                        "gait preset `{name}` needs n = {HEXAPOD_JOINTS}, network has n = {n}"
                    )));
                }
                registry.get(name)?.as_update()
            }
            None => ParamUpdate::default(),
        };
        let tables = self.tables().to_update();
        update.w = tables.w.or(update.w);
        update.varphi = tables.varphi.or(update.varphi);
        update.big_r = tables.big_r.or(update.big_r);
        update.big_x = tables.big_x.or(update.big_x);
        Ok(update)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialPolicy {
    #[default]
    Rest,
    RandomPhase,
    Locked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub duration_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    /// Required: every run is reproducible from its config.
    pub seed: u64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub initial: InitialPolicy,
    /// Start with zero target amplitude and switch to the gait's amplitude at t = 0.
    #[serde(default = "default_true")]
    pub ramp_in: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EventSection {
    Update {
        time_s: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        preset: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        frequency_hz: Option<PerOscillator>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w: Option<Matrix>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        varphi: Option<Matrix>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        big_r: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        big_x: Option<Vec<f64>>,
    },
    /// Symmetric uniform noise; each value is a half-width.
    Perturb {
        time_s: f64,
        /// One-based oscillator index; all oscillators when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phi_deg: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_deg: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_dot_deg_s: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_deg: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_dot_deg_s: Option<f64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimation: Option<usize>,
    #[serde(default)]
    pub stream: bool,
}

fn default_n() -> usize {
    HEXAPOD_JOINTS
}

fn default_gain() -> f64 {
    DEFAULT_GAIN
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_true() -> bool {
    true
}

/// Command-line replacements applied before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub duration: Option<f64>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    pub integrator: Option<Integrator>,
    pub output: Option<String>,
}

/// Schedule plus output settings, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    pub schedule: Schedule,
    pub output: OutputSection,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn apply_overrides(&mut self, o: &Overrides) {
        if let Some(v) = o.duration {
            self.schedule.duration_s = v;
        }
        if let Some(v) = o.dt {
            self.schedule.dt_s = v;
        }
        if let Some(v) = o.seed {
            self.schedule.seed = v;
        }
        if let Some(v) = o.integrator {
            self.schedule.integrator = v;
        }
        if let Some(v) = &o.output {
            self.output.path = Some(v.clone());
        }
    }

    pub fn validate(&self) -> Result<ValidatedConfig> {
        self.validate_with(GaitRegistry::bundled())
    }

    pub fn validate_with(&self, registry: &GaitRegistry) -> Result<ValidatedConfig> {
        let n = self.network.n;
        if n == 0 {
            return Err(Error::InvalidParams("network.n must be at least 1".into()));
        }
        let omega = hz_to_rad(&self.network.frequency_hz.expand(n, "network.frequency_hz")?);
        let base = NetworkParams {
            a_r: self.network.a_r,
            a_x: self.network.a_x,
            ..NetworkParams::uncoupled(n, 0.0)
        };
        let base = NetworkParams { omega, ..base };
        let gait = self.gait.to_update(registry, n)?;
        if self.gait.preset.is_none() && (gait.w.is_none() || gait.varphi.is_none() || gait.big_r.is_none()) {
            return Err(Error::InvalidParams(
                "gait needs a `preset` or explicit `w`, `varphi` and `big_r` tables".into(),
            ));
        }
        let target = crate::gaits::apply_update(&base, &gait)?;

        let mut params = target.clone();
        let mut events = Vec::new();
        if self.schedule.ramp_in {
            params.big_r = vec![0.0; n];
            let label = match &self.gait.preset {
                Some(name) => format!("ramp-in;preset={name}"),
                None => "ramp-in".to_string(),
            };
            events.push(Event::update(
                0.0,
                ParamUpdate {
                    big_r: Some(target.big_r.clone()),
                    ..Default::default()
                },
                label,
            ));
        }
        for (k, e) in self.schedule.events.iter().enumerate() {
            events.push(event_from_section(e, k, n, registry)?);
        }
        // stable: same-time events keep document order
        events.sort_by(|a, b| a.time.total_cmp(&b.time));

        let initial = match self.schedule.initial {
            InitialPolicy::Rest => InitialState::Rest,
            InitialPolicy::RandomPhase => InitialState::RandomPhase,
            InitialPolicy::Locked => InitialState::Locked,
        };
        let schedule = Schedule {
            duration: self.schedule.duration_s,
            dt: self.schedule.dt_s,
            integrator: self.schedule.integrator,
            params,
            initial,
            seed: self.schedule.seed,
            events,
            decimation: self.output.decimation,
        };
        schedule.validate()?;
        Ok(ValidatedConfig {
            schedule,
            output: self.output.clone(),
        })
    }
}

fn hz_to_rad(hz: &[f64]) -> Vec<f64> {
    hz.iter().map(|f| f * TAU).collect()
}

fn event_from_section(
    e: &EventSection,
    index: usize,
    n: usize,
    registry: &GaitRegistry,
) -> Result<Event> {
    let ctx = |msg: String| Error::InvalidSchedule(format!("schedule.events[{}]: {msg}", index + 1));
    match e {
        EventSection::Update {
            time_s,
            preset,
            frequency_hz,
            w,
            varphi,
            big_r,
            big_x,
        } => {
            let section = GaitSection {
                preset: preset.clone(),
                w: w.clone(),
                varphi: varphi.clone(),
                big_r: big_r.clone(),
                big_x: big_x.clone(),
            };
            let mut update = section.to_update(registry, n)?;
            if let Some(f) = frequency_hz {
                update.omega = Some(hz_to_rad(&f.expand(n, "event frequency_hz")?));
            }
            if update.is_empty() {
                return Err(ctx("update event changes nothing".into()));
            }
            let label = preset.as_ref().map(|p| format!("preset={p}")).unwrap_or_default();
            Ok(Event::update(*time_s, update, label))
        }
        EventSection::Perturb {
            time_s,
            target,
            phi_deg,
            r_deg,
            r_dot_deg_s,
            x_deg,
            x_dot_deg_s,
        } => {
            let target = match target {
                None => Target::All,
                Some(i) if (1..=n).contains(i) => Target::Oscillator(i - 1),
                Some(i) => return Err(ctx(format!("target {i} is not in 1..={n}"))),
            };
            let range = |v: &Option<f64>| v.map(Range::symmetric).unwrap_or(Range::ZERO);
            Ok(Event::perturb(
                *time_s,
                Perturbation {
                    phi: range(&phi_deg.map(f64::to_radians)),
                    r: range(r_deg),
                    r_dot: range(r_dot_deg_s),
                    x: range(x_deg),
                    x_dot: range(x_dot_deg_s),
                    target,
                },
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::EventKind;

    const FORWARD: &str = r#"
[network]
frequency_hz = 1.0

[gait]
preset = "forward"

[schedule]
duration_s = 10.0
seed = 1
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ConfigDocument::parse(FORWARD).unwrap().validate().unwrap();
        let s = &cfg.schedule;
        assert_eq!(s.dt, 0.01);
        assert_eq!(s.params.a_r, 2.0);
        assert_eq!(s.params.omega, vec![TAU; 3]);
        assert_eq!(s.params.big_r, vec![0.0; 3]);
        assert_eq!(s.events.len(), 1);
        match &s.events[0].kind {
            EventKind::Update(u) => assert_eq!(u.big_r, Some(vec![12.0, 40.0, 40.0])),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = FORWARD.replace("seed = 1", "seed = 1\ncolour = \"red\"");
        let err = ConfigDocument::parse(&text).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn missing_seed_is_a_parse_error() {
        let text = FORWARD.replace("seed = 1\n", "");
        let err = ConfigDocument::parse(&text).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn nonzero_diagonal_names_entry() {
        let text = r#"
[network]
frequency_hz = [1.0, 1.0]

[gait]
w = [[0.0, 0.5], [0.5, 0.3]]
varphi = [[0.0, 0.0], [0.0, 0.0]]
big_r = [10.0, 10.0]

[schedule]
duration_s = 1.0
seed = 0
"#;
        let text = text.replace("[network]", "[network]\nn = 2");
        let err = ConfigDocument::parse(&text).unwrap().validate().unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("[2][2]"), "{err}");
    }

    #[test]
    fn degrees_convert_to_radians_for_phases_only() {
        let text = format!(
            "{FORWARD}\n[[schedule.events]]\ntime_s = 2.0\nkind = \"perturb\"\nphi_deg = 90.0\nr_deg = 5.0\ntarget = 2\n"
        );
        let cfg = ConfigDocument::parse(&text).unwrap().validate().unwrap();
        match &cfg.schedule.events[1].kind {
            EventKind::Perturb(p) => {
                assert_eq!(p.phi.hi, std::f64::consts::FRAC_PI_2);
                assert_eq!(p.r.hi, 5.0);
                assert_eq!(p.target, Target::Oscillator(1));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn preset_tables_can_be_lowered() {
        let text = FORWARD.replace("preset = \"forward\"", "preset = \"forward\"\nbig_r = [6.0, 20.0, 20.0]");
        let cfg = ConfigDocument::parse(&text).unwrap().validate().unwrap();
        match &cfg.schedule.events[0].kind {
            EventKind::Update(u) => assert_eq!(u.big_r, Some(vec![6.0, 20.0, 20.0])),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn update_events_and_overrides() {
        let text = format!(
            "{FORWARD}\n[[schedule.events]]\ntime_s = 5.0\nkind = \"update\"\npreset = \"backward\"\n"
        );
        let mut doc = ConfigDocument::parse(&text).unwrap();
        doc.apply_overrides(&Overrides {
            dt: Some(0.05),
            integrator: Some(Integrator::Rk4),
            output: Some("out.csv".into()),
            ..Default::default()
        });
        let cfg = doc.validate().unwrap();
        assert_eq!(cfg.schedule.dt, 0.05);
        assert_eq!(cfg.schedule.integrator, Integrator::Rk4);
        assert_eq!(cfg.output.path.as_deref(), Some("out.csv"));
        assert_eq!(cfg.schedule.events[1].label, "preset=backward");
    }

    #[test]
    fn document_round_trip() {
        let text = format!(
            "{FORWARD}\n[[schedule.events]]\ntime_s = 5.0\nkind = \"update\"\npreset = \"backward\"\n\n[[schedule.events]]\ntime_s = 6.0\nkind = \"perturb\"\nphi_deg = 10.0\n\n[output]\npath = \"x.csv\"\ndecimation = 2\n"
        );
        let doc = ConfigDocument::parse(&text).unwrap();
        let again = ConfigDocument::parse(&doc.to_toml().unwrap()).unwrap();
        assert_eq!(again, doc);
        assert_eq!(again.validate().unwrap(), doc.validate().unwrap());
    }

    #[test]
    fn preset_requires_three_joints() {
        let text = FORWARD.replace("[network]", "[network]\nn = 2");
        assert!(ConfigDocument::parse(&text).unwrap().validate().is_err());
    }
}
