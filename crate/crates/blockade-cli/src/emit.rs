//! Deterministic data emission: delimiter-separated tables with a
//! commented header block, plus a JSON manifest per run.
//!
//! Data files carry the config hash but no timestamps, so identical
//! configs produce byte-identical files; wall-clock metadata lives in
//! the manifest only.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use blockade::dynamics::Trajectory;
use blockade::experiments::{SweepResult, TwoTimeScan};
use blockade::observables::ObservableRecord;

use crate::config::Config;

pub struct Emitter {
    outdir: PathBuf,
    config_hash: String,
    files: Vec<String>,
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.12e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) => fmt(v),
        None => "nan".into(),
    }
}

impl Emitter {
    pub fn new(outdir: &Path, config_hash: &str) -> std::io::Result<Self> {
        fs::create_dir_all(outdir)?;
        if !outdir.is_dir() {
            return Err(std::io::Error::other("output path is not a directory"));
        }
        Ok(Self {
            outdir: outdir.to_path_buf(),
            config_hash: config_hash.to_string(),
            files: Vec::new(),
        })
    }

    fn open(&mut self, file_name: &str, columns: &str, units: &str) -> std::io::Result<fs::File> {
        let path = self.outdir.join(file_name);
        let mut f = fs::File::create(path)?;
        writeln!(f, "# config: {}", self.config_hash)?;
        writeln!(f, "# units: {units}")?;
        writeln!(f, "{columns}")?;
        self.files.push(file_name.to_string());
        Ok(f)
    }

    fn trajectory_row(f: &mut fs::File, rec: &ObservableRecord, drive: f64) -> std::io::Result<()> {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            fmt(rec.t),
            fmt(rec.n),
            fmt(rec.psi.re),
            fmt(rec.psi.im),
            fmt_opt(rec.g2),
            fmt_opt(rec.f),
            fmt(drive),
            u8::from(rec.pulse)
        )
    }

    /// Main trajectory table: one row per grid sample (post-pulse values
    /// at pulse times, flagged in the last column).
    pub fn trajectory(&mut self, name: &str, traj: &Trajectory) -> std::io::Result<()> {
        let mut f = self.open(
            &format!("{name}.csv"),
            "t,n,re_psi,im_psi,g2,f,drive,pulse",
            "t in hbar/gamma; energies in gamma; drive is Re P(t) excluding instantaneous pulses",
        )?;
        for rec in traj.records() {
            let drive = traj.schedule().smooth_amplitude(rec.t).re;
            Self::trajectory_row(&mut f, rec, drive)?;
        }

        if !traj.pre_pulse_records().is_empty() {
            let mut g = self.open(
                &format!("{name}_prepulse.csv"),
                "t,n,re_psi,im_psi,g2,f,drive,pulse",
                "states captured just before each instantaneous pulse",
            )?;
            for pre in traj.pre_pulse_records() {
                let drive = traj.schedule().smooth_amplitude(pre.record.t).re;
                Self::trajectory_row(&mut g, &pre.record, drive)?;
            }
        }
        Ok(())
    }

    /// Long-format sweep table: one row per grid point.
    pub fn sweep(&mut self, name: &str, sweep: &SweepResult) -> std::io::Result<()> {
        let mut f = self.open(
            &format!("{name}.csv"),
            "kerr,p0,t_s,n_ts,g2_ts,g0_conventional,n_conventional,converged",
            "kerr and p0 in gamma; t_s in hbar/gamma",
        )?;
        for p in &sweep.points {
            writeln!(
                f,
                "{},{},{},{},{},{},{},{}",
                fmt(p.kerr),
                fmt(p.p0),
                fmt(p.t_s),
                fmt(p.n_ts),
                fmt_opt(p.g2_ts),
                fmt_opt(p.g0_conventional),
                fmt(p.n_conventional),
                u8::from(p.converged)
            )?;
        }
        Ok(())
    }

    /// Two-time scan: combined values and the conventional baseline on
    /// the same grid.
    pub fn two_time(&mut self, name: &str, scan: &TwoTimeScan) -> std::io::Result<()> {
        let mut f = self.open(
            &format!("{name}.csv"),
            "t,delay,g2_combined,g2_conventional",
            "t and delay in hbar/gamma; reference time is the correlation minimum",
        )?;
        let t_s = scan.combined.t_s;
        for (i, &t) in scan.combined.times.iter().enumerate() {
            writeln!(
                f,
                "{},{},{},{}",
                fmt(t),
                fmt(t - t_s),
                fmt_opt(scan.combined.values[i]),
                fmt_opt(scan.conventional.values[i])
            )?;
        }
        Ok(())
    }

    /// Steady-state summary: scalar observables plus level populations.
    pub fn steady(
        &mut self,
        name: &str,
        n: f64,
        psi: blockade::Complex64,
        g2: Option<f64>,
        f_val: Option<f64>,
        populations: &[f64],
    ) -> std::io::Result<()> {
        let mut f = self.open(
            &format!("{name}.csv"),
            "n,re_psi,im_psi,g2,f",
            "steady state of the continuous drive",
        )?;
        writeln!(
            f,
            "{},{},{},{},{}",
            fmt(n),
            fmt(psi.re),
            fmt(psi.im),
            fmt_opt(g2),
            fmt_opt(f_val)
        )?;
        let mut g = self.open(
            &format!("{name}_populations.csv"),
            "level,population",
            "diagonal of the steady-state density matrix",
        )?;
        for (k, p) in populations.iter().enumerate() {
            writeln!(g, "{k},{}", fmt(*p))?;
        }
        Ok(())
    }

    /// Write the manifest referencing every file emitted by this run.
    pub fn manifest(
        &mut self,
        name: &str,
        config: &Config,
        manifest: &Manifest,
    ) -> std::io::Result<()> {
        let path = self.outdir.join(format!("{name}_manifest.json"));
        let mut doc = serde_json::to_value(manifest).expect("manifest serializes");
        doc["kind"] = serde_json::Value::String(config.kind.as_str().to_string());
        doc["files"] = serde_json::to_value(&self.files).unwrap();
        let mut f = fs::File::create(path)?;
        writeln!(f, "{}", serde_json::to_string_pretty(&doc).unwrap())?;
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool_version: &'static str,
    pub config_hash: String,
    pub name: String,
    pub dim: usize,
    pub rtol: f64,
    pub atol: f64,
    pub wall_time_seconds: f64,
    pub truncation_warning: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckLine>,
}

#[derive(Debug, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub details: String,
}
