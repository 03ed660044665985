//! Gait presets and live parameter updates.
//!
//! Presets are data: the bundled registry is parsed from `data/gaits.toml`
//! at first use, and extra manifests with the same schema can be loaded at
//! runtime.

use std::fmt::{self, Write as _};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Matrix, NetworkParams, DEFAULT_GAIN};

/// Number of joints the gait tables are written for.
pub const HEXAPOD_JOINTS: usize = 3;

/// Per-joint amplitude ceiling in degrees: middle, left, right.
pub const AMPLITUDE_CEILING_DEG: [f64; HEXAPOD_JOINTS] = [12.0, 40.0, 40.0];

const BUNDLED_MANIFEST: &str = include_str!("../data/gaits.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "paper-verbatim")]
    Verbatim,
    #[serde(rename = "non-paper variant")]
    Variant,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Verbatim => "paper-verbatim",
            Provenance::Variant => "non-paper variant",
        })
    }
}

/// Coupling and target tables as written in manifests and config files.
///
/// Phase biases and angles are in degrees here; [`GaitTables::varphi_radians`]
/// is the single conversion point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitTables {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub varphi: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_r: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_x: Option<Vec<f64>>,
}

impl GaitTables {
    pub fn varphi_radians(&self) -> Option<Matrix> {
        self.varphi.as_ref().map(|m| m.map(f64::to_radians))
    }

    /// Converts the present tables into a parameter update.
    pub fn to_update(&self) -> ParamUpdate {
        ParamUpdate {
            w: self.w.clone(),
            varphi: self.varphi_radians(),
            big_r: self.big_r.clone(),
            big_x: self.big_x.clone(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    name: String,
    provenance: Provenance,
    #[serde(default)]
    notes: String,
    w: Matrix,
    varphi: Matrix,
    big_r: Vec<f64>,
    #[serde(default)]
    big_x: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(default)]
    gait: Vec<ManifestEntry>,
}

/// A complete, named assignment of couplings, biases and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitPreset {
    pub name: String,
    pub provenance: Provenance,
    pub notes: String,
    pub w: Matrix,
    /// Radians.
    pub varphi: Matrix,
    /// Degrees.
    pub big_r: Vec<f64>,
    /// Degrees.
    pub big_x: Vec<f64>,
}

impl GaitPreset {
    fn from_entry(entry: ManifestEntry) -> Result<Self> {
        let big_x = entry.big_x.unwrap_or_else(|| vec![0.0; entry.big_r.len()]);
        let preset = GaitPreset {
            name: entry.name,
            provenance: entry.provenance,
            notes: entry.notes,
            w: entry.w,
            varphi: entry.varphi.map(f64::to_radians),
            big_r: entry.big_r,
            big_x,
        };
        preset.validate()?;
        Ok(preset)
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = |e: Error| match e {
            Error::InvalidParams(msg) => Error::InvalidParams(format!("gait `{}`: {msg}", self.name)),
            other => other,
        };
        if self.w.n() != HEXAPOD_JOINTS {
            return Err(Error::DimensionMismatch {
                what: format!("gait `{}` coupling table", self.name),
                expected: HEXAPOD_JOINTS,
                found: self.w.n(),
            });
        }
        self.params(vec![0.0; HEXAPOD_JOINTS]).validate().map_err(ctx)?;
        for (i, (&r, &ceiling)) in self.big_r.iter().zip(&AMPLITUDE_CEILING_DEG).enumerate() {
            if r.abs() > ceiling {
                return Err(Error::InvalidParams(format!(
                    "gait `{}`: big_r[{}] = {r} deg exceeds the {ceiling} deg ceiling",
                    self.name,
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Network parameters for this gait with the given natural frequencies (rad/s).
    pub fn params(&self, omega: Vec<f64>) -> NetworkParams {
        NetworkParams {
            omega,
            big_r: self.big_r.clone(),
            big_x: self.big_x.clone(),
            a_r: DEFAULT_GAIN,
            a_x: DEFAULT_GAIN,
            w: self.w.clone(),
            varphi: self.varphi.clone(),
        }
    }

    /// Update that switches a running network to this gait.
    pub fn as_update(&self) -> ParamUpdate {
        ParamUpdate {
            w: Some(self.w.clone()),
            varphi: Some(self.varphi.clone()),
            big_r: Some(self.big_r.clone()),
            big_x: Some(self.big_x.clone()),
            omega: None,
        }
    }

    /// Multi-line listing: amplitudes in degrees, biases in radians.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{} [{}]", self.name, self.provenance);
        if !self.notes.is_empty() {
            let _ = write!(out, " - {}", self.notes);
        }
        out.push('\n');
        let fmt_row = |row: &[f64], f: &dyn Fn(f64) -> String| {
            row.iter().map(|&v| f(v)).collect::<Vec<_>>().join(", ")
        };
        let plain = |v: f64| format!("{v:.3}");
        let biased = |v: f64| format_radians(v);
        for (label, m, f) in [
            ("w (1/s)", &self.w, &plain as &dyn Fn(f64) -> String),
            ("varphi (rad)", &self.varphi, &biased),
        ] {
            let _ = writeln!(out, "  {label}:");
            for row in m.rows() {
                let _ = writeln!(out, "    [{}]", fmt_row(&row, f));
            }
        }
        let _ = writeln!(out, "  big_r (deg): [{}]", fmt_row(&self.big_r, &plain));
        let _ = writeln!(out, "  big_x (deg): [{}]", fmt_row(&self.big_x, &plain));
        out
    }
}

/// Renders common multiples of pi symbolically, anything else numerically.
fn format_radians(v: f64) -> String {
    use std::f64::consts::PI;
    const NAMED: [(f64, &str); 7] = [
        (0.0, "0"),
        (0.5, "pi/2"),
        (-0.5, "-pi/2"),
        (1.0, "pi"),
        (-1.0, "-pi"),
        (0.25, "pi/4"),
        (-0.25, "-pi/4"),
    ];
    NAMED
        .iter()
        .find(|(k, _)| (v - k * PI).abs() < 1e-12)
        .map(|(_, s)| s.to_string())
        .unwrap_or_else(|| format!("{v:.6}"))
}

/// Immutable collection of named presets.
#[derive(Debug, Clone)]
pub struct GaitRegistry {
    presets: Vec<GaitPreset>,
}

impl GaitRegistry {
    pub fn from_toml(text: &str) -> Result<Self> {
        let manifest: Manifest = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let presets = manifest
            .gait
            .into_iter()
            .map(GaitPreset::from_entry)
            .collect::<Result<Vec<_>>>()?;
        for (k, p) in presets.iter().enumerate() {
            if presets[..k].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidParams(format!("duplicate gait name `{}`", p.name)));
            }
        }
        Ok(GaitRegistry { presets })
    }

    pub fn bundled() -> &'static GaitRegistry {
        static BUNDLED: OnceLock<GaitRegistry> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            GaitRegistry::from_toml(BUNDLED_MANIFEST).expect("bundled gait manifest is valid")
        })
    }

    /// Bundled presets followed by the ones in `text`; later names shadow earlier ones.
    pub fn bundled_with(text: &str) -> Result<Self> {
        let extra = GaitRegistry::from_toml(text)?;
        let mut presets: Vec<GaitPreset> = GaitRegistry::bundled()
            .presets
            .iter()
            .filter(|p| extra.presets.iter().all(|q| q.name != p.name))
            .cloned()
            .collect();
        presets.extend(extra.presets);
        Ok(GaitRegistry { presets })
    }

    pub fn get(&self, name: &str) -> Result<&GaitPreset> {
        self.presets
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::UnknownPreset {
                name: name.to_string(),
                valid: self.names(),
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.presets.iter().map(|p| p.name.clone()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GaitPreset> {
        self.presets.iter()
    }
}

/// Looks up a bundled preset by name.
pub fn preset(name: &str) -> Result<GaitPreset> {
    GaitRegistry::bundled().get(name).cloned()
}

/// Replacement values for a subset of the network parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamUpdate {
    pub omega: Option<Vec<f64>>,
    pub big_r: Option<Vec<f64>>,
    pub big_x: Option<Vec<f64>>,
    pub w: Option<Matrix>,
    pub varphi: Option<Matrix>,
}

impl ParamUpdate {
    pub fn is_empty(&self) -> bool {
        self.omega.is_none()
            && self.big_r.is_none()
            && self.big_x.is_none()
            && self.w.is_none()
            && self.varphi.is_none()
    }

    /// Names of the fields this update replaces.
    pub fn fields(&self) -> Vec<&'static str> {
        [
            ("omega", self.omega.is_some()),
            ("big_r", self.big_r.is_some()),
            ("big_x", self.big_x.is_some()),
            ("w", self.w.is_some()),
            ("varphi", self.varphi.is_some()),
        ]
        .into_iter()
        .filter_map(|(name, set)| set.then_some(name))
        .collect()
    }
}

/// Returns `params` with the fields in `update` replaced. State is not involved.
pub fn apply_update(params: &NetworkParams, update: &ParamUpdate) -> Result<NetworkParams> {
    let n = params.n();
    let check_len = |what: &str, len: usize| {
        if len == n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                what: format!("update.{what}"),
                expected: n,
                found: len,
            })
        }
    };
    let mut next = params.clone();
    if let Some(v) = &update.omega {
        check_len("omega", v.len())?;
        next.omega = v.clone();
    }
    if let Some(v) = &update.big_r {
        check_len("big_r", v.len())?;
        next.big_r = v.clone();
    }
    if let Some(v) = &update.big_x {
        check_len("big_x", v.len())?;
        next.big_x = v.clone();
    }
    for (what, src, dst) in [
        ("w", &update.w, &mut next.w),
        ("varphi", &update.varphi, &mut next.varphi),
    ] {
        if let Some(m) = src {
            check_len(what, m.n())?;
            if let Some(i) = (0..n).find(|&i| m[(i, i)] != 0.0) {
                return Err(Error::InvalidParams(format!(
                    "update.{what}[{}][{}] = {}: diagonal must be zero",
                    i + 1,
                    i + 1,
                    m[(i, i)]
                )));
            }
            *dst = m.clone();
        }
    }
    next.validate()?;
    Ok(next)
}

/// Smallest update that turns `params` into the gait fields of `preset`.
pub fn diff(params: &NetworkParams, preset: &GaitPreset) -> ParamUpdate {
    ParamUpdate {
        omega: None,
        w: (params.w != preset.w).then(|| preset.w.clone()),
        varphi: (params.varphi != preset.varphi).then(|| preset.varphi.clone()),
        big_r: (params.big_r != preset.big_r).then(|| preset.big_r.clone()),
        big_x: (params.big_x != preset.big_x).then(|| preset.big_x.clone()),
    }
}
