//! Config files: flat TOML with one section per concern, all physical
//! values in units of the decay rate (energies in γ, times in ħ/γ),
//! matching the scenario presets of the library.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use blockade::dynamics::{ModeParams, PulseShape};
use blockade::experiments::{DriveVariant, ScenarioConfig};
use blockade::ode::OdeOptions;
use blockade::presets;
use blockade::Complex64 as C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    TimeTrace,
    OccupationSweep,
    Colormap,
    TwoTime,
    Checks,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::TimeTrace => "time-trace",
            Kind::OccupationSweep => "occupation-sweep",
            Kind::Colormap => "colormap",
            Kind::TwoTime => "two-time",
            Kind::Checks => "checks",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeSection {
    /// Mode energy relative to the drive, units of γ.
    pub energy: f64,
    /// Kerr strength, units of γ.
    pub kerr: f64,
}

fn default_variant() -> String {
    "combined".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriveSection {
    /// Continuous amplitude, units of γ.
    pub p0: f64,
    /// Pulse area, units of γ.
    pub p1: f64,
    /// Pulse repetition period, units of ħ/γ.
    pub period: f64,
    /// "delta" or "gaussian".
    #[serde(default = "default_pulse_shape")]
    pub pulse_shape: String,
    /// Width for gaussian pulses, units of ħ/γ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse_sigma: Option<f64>,
    /// Relative phase of the pulse amplitude, radians (exploratory knob;
    /// rate-law checks require a real drive).
    #[serde(default)]
    pub p1_phase: f64,
    /// "combined", "continuous" or "pulses-only" (time traces only).
    #[serde(default = "default_variant")]
    pub variant: String,
}

fn default_pulse_shape() -> String {
    "delta".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NumericsSection {
    pub dim: usize,
    pub sample_dt: f64,
    pub warmup_periods: u32,
    pub measure_periods: u32,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for NumericsSection {
    fn default() -> Self {
        let ode = OdeOptions::default();
        Self {
            dim: presets::WEAK_DIM,
            sample_dt: 0.02,
            warmup_periods: 2,
            measure_periods: 2,
            rtol: ode.rtol,
            atol: ode.atol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSection {
    pub p0_min: f64,
    pub p0_max: f64,
    pub p0_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kerr_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kerr_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kerr_points: Option<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            p0_min: 0.05,
            p0_max: 1.0,
            p0_points: 20,
            kerr_min: None,
            kerr_max: None,
            kerr_points: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoTimeSection {
    /// Scan half-width around the correlation minimum, units of ħ/γ.
    pub half_width: f64,
    /// Grid spacing of the scan.
    pub grid_dt: f64,
}

impl Default for TwoTimeSection {
    fn default() -> Self {
        Self {
            half_width: 3.0,
            grid_dt: 0.02,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Config {
    pub kind: Kind,
    /// Output file stem.
    pub name: String,
    pub mode: ModeSection,
    pub drive: DriveSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_time: Option<TwoTimeSection>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Stable identity of the parsed configuration (canonical
    /// re-serialization, so whitespace and comments do not matter).
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        format!("sha256:{}", &hex[..16])
    }

    pub fn variant(&self) -> Result<DriveVariant, String> {
        match self.drive.variant.as_str() {
            "combined" => Ok(DriveVariant::Combined),
            "continuous" => Ok(DriveVariant::Continuous),
            "pulses-only" => Ok(DriveVariant::PulsesOnly),
            other => Err(format!(
                "unknown drive variant '{other}' (expected combined, continuous or pulses-only)"
            )),
        }
    }

    fn pulse_shape(&self) -> Result<PulseShape, String> {
        match self.drive.pulse_shape.as_str() {
            "delta" => Ok(PulseShape::Delta),
            "gaussian" => {
                let sigma = self
                    .drive
                    .pulse_sigma
                    .ok_or_else(|| "pulse_shape = \"gaussian\" requires pulse_sigma".to_string())?;
                Ok(PulseShape::Gaussian { sigma })
            }
            other => Err(format!(
                "unknown pulse shape '{other}' (expected delta or gaussian)"
            )),
        }
    }

    /// Build the library scenario, applying an optional dimension
    /// override from the command line.
    pub fn scenario(&self, dim_override: Option<usize>) -> Result<ScenarioConfig, String> {
        let mode = ModeParams::new(self.mode.energy, self.mode.kerr).map_err(|e| e.to_string())?;
        let phase = C64::new(0.0, self.drive.p1_phase).exp();
        Ok(ScenarioConfig {
            mode,
            p0: C64::new(self.drive.p0, 0.0),
            p1: C64::new(self.drive.p1, 0.0) * phase,
            period: self.drive.period,
            shape: self.pulse_shape()?,
            dim: dim_override.unwrap_or(self.numerics.dim),
            warmup_periods: self.numerics.warmup_periods,
            measure_periods: self.numerics.measure_periods,
            sample_dt: self.numerics.sample_dt,
            ode: OdeOptions {
                rtol: self.numerics.rtol,
                atol: self.numerics.atol,
                h_max: f64::INFINITY,
            },
        })
    }

    pub fn p0_grid(&self) -> Result<Vec<f64>, String> {
        let s = self.sweep.clone().unwrap_or_default();
        if s.p0_points == 0 {
            return Err("empty sweep grid (p0_points = 0)".into());
        }
        if s.p0_points == 1 {
            return Ok(vec![s.p0_min]);
        }
        Ok(presets::log_grid(s.p0_min, s.p0_max, s.p0_points))
    }

    pub fn kerr_grid(&self) -> Result<Vec<f64>, String> {
        let s = self.sweep.clone().unwrap_or_default();
        let (min, max, points) = (
            s.kerr_min.unwrap_or(0.02),
            s.kerr_max.unwrap_or(2.0),
            s.kerr_points.unwrap_or(20),
        );
        if points == 0 {
            return Err("empty sweep grid (kerr_points = 0)".into());
        }
        if points == 1 {
            return Ok(vec![min]);
        }
        Ok(presets::log_grid(min, max, points))
    }
}

/// Built-in presets, each a complete config file.
pub const PRESETS: [&str; 9] = [
    "weak-combined",
    "weak-continuous",
    "weak-pulses-only",
    "strong-combined",
    "strong-continuous",
    "weak-sweep",
    "regime-map",
    "two-time-weak",
    "two-time-strong",
];

pub fn preset(name: &str) -> Option<Config> {
    let trace = |cfg: ScenarioConfig, name: &str, variant: &str| Config {
        kind: Kind::TimeTrace,
        name: name.replace('-', "_"),
        mode: ModeSection {
            energy: cfg.mode.energy,
            kerr: cfg.mode.kerr,
        },
        drive: DriveSection {
            p0: cfg.p0.re,
            p1: cfg.p1.re,
            period: cfg.period,
            pulse_shape: "delta".into(),
            pulse_sigma: None,
            p1_phase: 0.0,
            variant: variant.into(),
        },
        numerics: NumericsSection {
            dim: cfg.dim,
            sample_dt: cfg.sample_dt,
            warmup_periods: cfg.warmup_periods,
            measure_periods: cfg.measure_periods,
            rtol: cfg.ode.rtol,
            atol: cfg.ode.atol,
        },
        sweep: None,
        two_time: None,
    };

    match name {
        "weak-combined" => Some(trace(
            presets::weak_drive_comparison(),
            "weak_combined",
            "combined",
        )),
        "weak-continuous" => Some(trace(
            presets::weak_drive_comparison(),
            "weak_continuous",
            "continuous",
        )),
        "weak-pulses-only" => Some(trace(
            presets::weak_drive_comparison(),
            "weak_pulses_only",
            "pulses-only",
        )),
        "strong-combined" => Some(trace(
            presets::strong_enhancement(),
            "strong_combined",
            "combined",
        )),
        "strong-continuous" => Some(trace(
            presets::strong_enhancement(),
            "strong_continuous",
            "continuous",
        )),
        "weak-sweep" => {
            let mut cfg = trace(presets::weak_occupation_base(), "weak_sweep", "combined");
            cfg.kind = Kind::OccupationSweep;
            cfg.sweep = Some(SweepSection::default());
            Some(cfg)
        }
        "regime-map" => {
            let mut cfg = trace(presets::regime_map_base(), "regime_map", "combined");
            cfg.kind = Kind::Colormap;
            cfg.sweep = Some(SweepSection {
                kerr_min: Some(0.02),
                kerr_max: Some(2.0),
                kerr_points: Some(20),
                ..SweepSection::default()
            });
            Some(cfg)
        }
        "two-time-weak" => {
            let mut cfg = trace(presets::weak_occupation_base(), "two_time_weak", "combined");
            cfg.kind = Kind::TwoTime;
            cfg.two_time = Some(TwoTimeSection::default());
            Some(cfg)
        }
        "two-time-strong" => {
            let mut cfg = trace(presets::strong_enhancement(), "two_time_strong", "combined");
            cfg.kind = Kind::TwoTime;
            cfg.two_time = Some(TwoTimeSection::default());
            Some(cfg)
        }
        _ => None,
    }
}

pub fn dump(cfg: &Config) -> String {
    let body = toml::to_string_pretty(cfg).expect("config serializes");
    format!(
        "# blockade scenario configuration\n# energies in units of the decay rate, times in units of the inverse decay rate\n{body}"
    )
}
