//! Configuration parsing and experiment orchestration: amplitude sweeps,
//! truncation sweeps, and population runs, each emitting deterministic CSV.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::bath::{effective_coupling, BathModel, QSource, QTable};
use crate::dvr::{dvr_from_spectrum, localized_initial_state};
use crate::gme::{fit_decay_rate, markov_reference, propagate_gme, GmeError, PropagationSpec};
use crate::kernels::{DriveSpec, KernelSet};
use crate::rates::{averaged_rates, decay_rate, higher_order_rates, RateError};
use crate::spectrum::{solve_spectrum, GridSpec, PotentialSpec, SpectrumError};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {reason}")]
    BadValue {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("invalid configuration: `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("spectrum solve failed: {0}")]
    Spectrum(#[from] SpectrumError),
    #[error("DVR construction failed: {0}")]
    Dvr(#[from] crate::dvr::DvrError),
    #[error("bath setup failed: {0}")]
    Bath(#[from] crate::bath::BathError),
    #[error("drive setup failed: {0}")]
    Kernel(#[from] crate::kernels::KernelError),
    #[error("rate evaluation failed: {0}")]
    Rate(#[from] RateError),
    #[error("propagation failed: {0}")]
    Gme(#[from] GmeError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl SweepError {
    /// Process exit code: 1 for validation problems, 2 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            SweepError::Config(_) => 1,
            SweepError::Io(_) => 2,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Gme,
    Markov,
    AvgRates,
    HigherOrder,
    RateVsN,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Gme => "gme",
            Mode::Markov => "markov",
            Mode::AvgRates => "avg-rates",
            Mode::HigherOrder => "higher-order",
            Mode::RateVsN => "rate-vs-n",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gme" => Ok(Mode::Gme),
            "markov" => Ok(Mode::Markov),
            "avg-rates" | "avg_rates" => Ok(Mode::AvgRates),
            "higher-order" | "higher_order" => Ok(Mode::HigherOrder),
            "rate-vs-n" | "rate_vs_N" | "rate_vs_n" => Ok(Mode::RateVsN),
            other => Err(format!(
                "unknown mode `{other}` (expected gme | markov | avg-rates | higher-order | rate-vs-n)"
            )),
        }
    }
}

/// Which reference length defines the reported effective coupling alpha:
/// the minima separation d0 or the harmonic length x0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaRef {
    D0,
    X0,
}

/// One experiment configuration. Units: energies in hbar*omega_0, times in
/// 1/omega_0, temperatures in T0 = hbar*omega_0/k_B, amplitudes in
/// s0 = hbar*omega_0/x0.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub e_b: f64,
    pub gamma: f64,
    pub omega_c: f64,
    pub temperature: f64,
    pub n_levels: usize,
    pub n_list: Vec<usize>,
    pub s_values: Vec<f64>,
    pub omega: f64,
    pub mode: Mode,
    pub grid_extent: Option<f64>,
    pub grid_points: Option<usize>,
    pub step: Option<f64>,
    pub t_end: Option<f64>,
    pub t_mem: Option<f64>,
    pub n_max: usize,
    pub alpha_ref: AlphaRef,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            e_b: 1.4,
            gamma: 0.1,
            omega_c: 10.0,
            temperature: 0.1,
            n_levels: 4,
            n_list: Vec::new(),
            s_values: vec![0.0],
            omega: 0.815,
            mode: Mode::AvgRates,
            grid_extent: None,
            grid_points: None,
            step: None,
            t_end: None,
            t_mem: None,
            n_max: 4,
            alpha_ref: AlphaRef::D0,
            out: None,
        }
    }
}

/// Parse a flat `key = value` configuration with `#` comments.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped.split_once('=').ok_or(ConfigError::Syntax {
            line,
            text: stripped.to_string(),
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |reason: &str| ConfigError::BadValue {
            line,
            key: key.to_string(),
            reason: reason.to_string(),
        };
        match key {
            "e_b" => cfg.e_b = parse_positive(value).map_err(|e| bad(&e))?,
            "gamma" => {
                let v: f64 = value.parse().map_err(|_| bad("not a number"))?;
                if v < 0.0 {
                    return Err(bad("friction must be >= 0"));
                }
                cfg.gamma = v;
            }
            "omega_c" => cfg.omega_c = parse_positive(value).map_err(|e| bad(&e))?,
            "temperature" => cfg.temperature = parse_positive(value).map_err(|e| bad(&e))?,
            "n_levels" => {
                let v: usize = value.parse().map_err(|_| bad("not an integer"))?;
                if v < 2 || v % 2 != 0 {
                    return Err(bad("level count must be even and >= 2"));
                }
                cfg.n_levels = v;
            }
            "n_list" => {
                cfg.n_list = value
                    .split(',')
                    .map(|tok| {
                        let v: usize = tok.trim().parse().map_err(|_| bad("not an integer list"))?;
                        if v < 2 || v % 2 != 0 {
                            return Err(bad("every level count must be even and >= 2"));
                        }
                        Ok(v)
                    })
                    .collect::<Result<_, _>>()?;
            }
            "s" => {
                let v: f64 = value.parse().map_err(|_| bad("not a number"))?;
                if v < 0.0 {
                    return Err(bad("amplitude must be >= 0"));
                }
                cfg.s_values = vec![v];
            }
            "s_list" => cfg.s_values = parse_list(value).map_err(|e| bad(&e))?,
            "omega" => cfg.omega = parse_positive(value).map_err(|e| bad(&e))?,
            "mode" => cfg.mode = value.parse().map_err(|e: String| bad(&e))?,
            "grid_extent" => cfg.grid_extent = Some(parse_positive(value).map_err(|e| bad(&e))?),
            "grid_points" => {
                cfg.grid_points = Some(value.parse().map_err(|_| bad("not an integer"))?)
            }
            "step" => cfg.step = Some(parse_positive(value).map_err(|e| bad(&e))?),
            "t_end" => cfg.t_end = Some(parse_positive(value).map_err(|e| bad(&e))?),
            "t_mem" => cfg.t_mem = Some(parse_positive(value).map_err(|e| bad(&e))?),
            "n_max" => {
                let v: usize = value.parse().map_err(|_| bad("not an integer"))?;
                if v < 2 || v % 2 != 0 {
                    return Err(bad("series order must be even and >= 2"));
                }
                cfg.n_max = v;
            }
            "alpha_ref" => {
                cfg.alpha_ref = match value {
                    "d0" => AlphaRef::D0,
                    "x0" => AlphaRef::X0,
                    _ => return Err(bad("expected d0 or x0")),
                }
            }
            "out" => cfg.out = Some(PathBuf::from(value)),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn parse_positive(value: &str) -> Result<f64, String> {
    let v: f64 = value.parse().map_err(|_| "not a number".to_string())?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err("must be positive".to_string())
    }
}

/// Comma list (`0, 0.5, 1.0`) or linspace (`start:stop:count`).
fn parse_list(value: &str) -> Result<Vec<f64>, String> {
    if value.contains(':') {
        let parts: Vec<&str> = value.split(':').collect();
        if parts.len() != 3 {
            return Err("linspace form is start:stop:count".to_string());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| "bad start".to_string())?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| "bad stop".to_string())?;
        let count: usize = parts[2].trim().parse().map_err(|_| "bad count".to_string())?;
        if count < 2 {
            return Err("count must be >= 2".to_string());
        }
        if start < 0.0 {
            return Err("amplitudes must be >= 0".to_string());
        }
        let h = (stop - start) / (count - 1) as f64;
        return Ok((0..count).map(|i| start + i as f64 * h).collect());
    }
    value
        .split(',')
        .map(|tok| {
            let v: f64 = tok.trim().parse().map_err(|_| "bad list entry".to_string())?;
            if v < 0.0 {
                return Err("amplitudes must be >= 0".to_string());
            }
            Ok(v)
        })
        .collect()
}

fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    if cfg.mode == Mode::RateVsN && cfg.n_list.is_empty() {
        return Err(ConfigError::Invalid {
            key: "n_list".into(),
            reason: "mode rate-vs-n needs a level-count list".into(),
        });
    }
    if cfg.s_values.is_empty() {
        return Err(ConfigError::Invalid {
            key: "s_list".into(),
            reason: "amplitude list is empty".into(),
        });
    }
    if matches!(cfg.mode, Mode::Gme | Mode::Markov) && cfg.s_values.len() != 1 {
        return Err(ConfigError::Invalid {
            key: "s_list".into(),
            reason: "population modes take a single amplitude".into(),
        });
    }
    Ok(())
}

/// Assembled simulation context shared by the sweep points.
struct Context {
    bath: BathModel,
    table: QTable,
}

fn drive_for(cfg: &RunConfig, s: f64) -> Result<DriveSpec, crate::kernels::KernelError> {
    if s == 0.0 {
        Ok(DriveSpec::none())
    } else {
        DriveSpec::sinusoidal(s, cfg.omega)
    }
}

fn kernel_set_for(
    cfg: &RunConfig,
    ctx: &Context,
    n_levels: usize,
    s: f64,
) -> Result<KernelSet, SweepError> {
    let potential = PotentialSpec::new(cfg.e_b)?;
    let mut grid = GridSpec::default_for(&potential);
    if let Some(ext) = cfg.grid_extent {
        grid.extent = ext;
    }
    if let Some(pts) = cfg.grid_points {
        grid.points = pts;
    }
    let spectrum = solve_spectrum(&potential, &grid, n_levels)?;
    let basis = dvr_from_spectrum(&spectrum)?;
    let drive = drive_for(cfg, s)?;
    Ok(KernelSet::new(
        basis,
        drive,
        QSource::Tabulated(ctx.table.clone()),
    ))
}

fn min_xi2_estimate(cfg: &RunConfig) -> Result<f64, SweepError> {
    // smallest charge over the largest truncation requested
    let n_max = cfg
        .n_list
        .iter()
        .copied()
        .chain(std::iter::once(cfg.n_levels))
        .max()
        .unwrap();
    let potential = PotentialSpec::new(cfg.e_b)?;
    let grid = GridSpec::default_for(&potential);
    let spectrum = solve_spectrum(&potential, &grid, n_max)?;
    let basis = dvr_from_spectrum(&spectrum)?;
    let mut best = f64::INFINITY;
    for mu in 0..n_max {
        for nu in 0..n_max {
            if nu != mu {
                let xi2 = (basis.lambda[nu] - basis.lambda[mu]).powi(2);
                if xi2 > 1e-24 {
                    best = best.min(xi2);
                }
            }
        }
    }
    Ok(best)
}

fn header<W: Write>(out: &mut W, cfg: &RunConfig) -> std::io::Result<()> {
    let potential = PotentialSpec::new(cfg.e_b).expect("validated");
    let bath = BathModel::new(cfg.gamma, cfg.omega_c, cfg.temperature).expect("validated");
    let ref_len = match cfg.alpha_ref {
        AlphaRef::D0 => potential.minima_separation,
        AlphaRef::X0 => 1.0,
    };
    let alpha = effective_coupling(ref_len, &bath, ref_len);
    writeln!(out, "# dwell v{ARTIFACT_VERSION}")?;
    writeln!(
        out,
        "# e_b = {} gamma = {} omega_c = {} temperature = {}",
        cfg.e_b, cfg.gamma, cfg.omega_c, cfg.temperature
    )?;
    writeln!(
        out,
        "# n_levels = {} omega = {} mode = {} n_max = {}",
        cfg.n_levels, cfg.omega, cfg.mode, cfg.n_max
    )?;
    writeln!(
        out,
        "# alpha({}) = {:.11e}",
        match cfg.alpha_ref {
            AlphaRef::D0 => "d0",
            AlphaRef::X0 => "x0",
        },
        alpha
    )?;
    Ok(())
}

/// Run the configured experiment, writing CSV files under `out_dir`.
/// Returns the paths written.
pub fn run_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>, SweepError> {
    fs::create_dir_all(out_dir)?;
    let bath = BathModel::new(cfg.gamma, cfg.omega_c, cfg.temperature)?;
    let min_xi2 = min_xi2_estimate(cfg)?;
    let table = if cfg.gamma > 0.0 {
        QTable::auto(&bath, min_xi2)
    } else {
        QTable::build(&bath, 0.01, 10.0)
    };
    let ctx = Context { bath, table };

    match cfg.mode {
        Mode::AvgRates | Mode::HigherOrder => rates_vs_s(cfg, &ctx, out_dir),
        Mode::RateVsN => rate_vs_n(cfg, &ctx, out_dir),
        Mode::Gme | Mode::Markov => population_run(cfg, &ctx, out_dir),
    }
}

fn rates_vs_s(cfg: &RunConfig, ctx: &Context, out_dir: &Path) -> Result<Vec<PathBuf>, SweepError> {
    let path = out_dir.join("rates_vs_s.csv");
    let mut file = fs::File::create(&path)?;
    header(&mut file, cfg)?;
    writeln!(file, "s,Gamma_av")?;
    for &s in &cfg.s_values {
        let result = (|| -> Result<f64, SweepError> {
            let ks = kernel_set_for(cfg, ctx, cfg.n_levels, s)?;
            let rm = match cfg.mode {
                Mode::HigherOrder => {
                    let ks_ht = KernelSet::new(
                        ks.basis.clone(),
                        ks.drive,
                        QSource::HighTemp(ctx.bath),
                    );
                    higher_order_rates(&ks_ht, cfg.n_max)?
                }
                _ => averaged_rates(&ks)?,
            };
            Ok(decay_rate(&rm)?.rate)
        })();
        match result {
            Ok(rate) => writeln!(file, "{:.11e},{:.11e}", s, rate)?,
            Err(e) => {
                writeln!(file, "# INCOMPLETE: {e}")?;
                return Err(e);
            }
        }
    }
    Ok(vec![path])
}

fn rate_vs_n(cfg: &RunConfig, ctx: &Context, out_dir: &Path) -> Result<Vec<PathBuf>, SweepError> {
    let path = out_dir.join("rate_vs_N.csv");
    let mut file = fs::File::create(&path)?;
    header(&mut file, cfg)?;
    writeln!(file, "N,Gamma")?;
    let s = cfg.s_values[0];
    for &n in &cfg.n_list {
        let result = (|| -> Result<f64, SweepError> {
            let ks = kernel_set_for(cfg, ctx, n, s)?;
            Ok(decay_rate(&averaged_rates(&ks)?)?.rate)
        })();
        match result {
            Ok(rate) => writeln!(file, "{},{:.11e}", n, rate)?,
            Err(e) => {
                writeln!(file, "# INCOMPLETE: {e}")?;
                return Err(e);
            }
        }
    }
    Ok(vec![path])
}

fn population_run(
    cfg: &RunConfig,
    ctx: &Context,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, SweepError> {
    let s = cfg.s_values[0];
    let ks = kernel_set_for(cfg, ctx, cfg.n_levels, s)?;
    let init = localized_initial_state(&ks.basis);

    // automatic step and horizon unless overridden
    let step = cfg.step.unwrap_or_else(|| {
        let by_gap = {
            let gap = ks.max_f_diff();
            if gap > 0.0 {
                0.1 / gap
            } else {
                f64::INFINITY
            }
        };
        let by_drive = ks
            .drive
            .period()
            .map_or(f64::INFINITY, |p| p / 50.0);
        by_gap.min(by_drive).min(0.2) * 0.98
    });
    let t_end = match cfg.t_end {
        Some(v) => v,
        None => {
            let rate = decay_rate(&averaged_rates(&ks)?)?.rate;
            (2.5 / rate).min(1e6)
        }
    };
    let mut pspec = PropagationSpec::new(step, t_end);
    if let Some(tm) = cfg.t_mem {
        pspec = pspec.with_memory(tm.min(t_end));
    }

    let traj = match cfg.mode {
        Mode::Gme => propagate_gme(&ks, &init, &pspec)?,
        _ => markov_reference(&ks, &init, &pspec)?,
    };

    let path = out_dir.join("population.csv");
    let mut file = fs::File::create(&path)?;
    header(&mut file, cfg)?;
    writeln!(file, "# s = {} step = {} t_end = {}", s, step, t_end)?;
    if let Ok(fit) = fit_decay_rate(&traj) {
        writeln!(
            file,
            "# fitted_rate = {:.11e} residual = {:.5e} flagged = {}",
            fit.rate, fit.residual, fit.flagged
        )?;
    }
    traj.write_csv(&mut file)?;
    Ok(vec![path])
}
