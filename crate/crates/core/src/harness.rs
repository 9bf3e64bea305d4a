//! Rate-study orchestration and report emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::inference::{GibbsConfig, GibbsSampler, PosteriorAccumulator};
use crate::io::write_atomic;
use crate::model::{normalized_sq_error, sample_adjacency, sample_truth, TruthSpec};
use crate::priors::DirichletWeights;
use crate::rng::derive_seed;

/// `ε_n² = k² ln(n/k) / n² + ln(k) / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSchedule {
    pub n: usize,
    pub k: usize,
    pub eps_sq: f64,
}

impl RateSchedule {
    pub fn eps(&self) -> f64 {
        self.eps_sq.sqrt()
    }
}

pub fn rate_schedule(n: usize, k: usize) -> Result<RateSchedule> {
    if k < 1 || k > n {
        return Err(invalid(format!("rate schedule needs 1 <= k <= n, got n = {n}, k = {k}")));
    }
    let (nf, kf) = (n as f64, k as f64);
    let eps_sq = kf * kf * (nf / kf).ln() / (nf * nf) + kf.ln() / nf;
    Ok(RateSchedule { n, k, eps_sq })
}

fn default_delta() -> f64 {
    crate::model::DEFAULT_DELTA
}
fn default_m() -> f64 {
    10.0
}
fn default_alpha() -> f64 {
    crate::priors::DEFAULT_ALPHA
}
fn default_burnin() -> usize {
    2_000
}
fn default_samples() -> usize {
    10_000
}
fn default_thin() -> usize {
    1
}

/// JSON-configurable rate study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_grid: Vec<usize>,
    pub k: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Tail-mass multiplier `M`.
    #[serde(rename = "M", default = "default_m")]
    pub m: f64,
    pub replicates: usize,
    #[serde(default = "default_burnin")]
    pub burnin: usize,
    /// Retained samples per chain.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    pub master_seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// When false the `wall_time` column is written as 0 so reports are
    /// byte-reproducible.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(invalid("n_grid is empty"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n_grid must be strictly ascending"));
        }
        if self.k == 0 || self.n_grid[0] < self.k {
            return Err(invalid("every n in n_grid must be at least k >= 1"));
        }
        if self.replicates == 0 {
            return Err(invalid("replicates must be at least 1"));
        }
        if !(self.m > 0.0) {
            return Err(invalid("M must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(invalid("delta must lie in (0, 1/2)"));
        }
        if self.samples == 0 || self.thin == 0 {
            return Err(invalid("samples and thin must be at least 1"));
        }
        if !(self.alpha > 0.0) {
            return Err(invalid("alpha must be positive"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn gibbs(&self, seed: u64) -> GibbsConfig {
        GibbsConfig::new(self.burnin + self.samples * self.thin, self.burnin, self.thin, seed)
    }
}

/// One `(n, replicate)` cell of a rate study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudyRow {
    pub n: usize,
    pub k: usize,
    pub replicate: usize,
    pub mse: f64,
    pub mse_over_eps_sq: f64,
    pub tail_mass: f64,
    pub wall_time: f64,
    /// Empty on success; otherwise the failure message.
    pub error: String,
}

impl RateStudyRow {
    pub fn is_ok(&self) -> bool {
        self.error.is_empty()
    }
}

/// Seed of cell `(n, k, replicate)`.
pub fn cell_seed(master: u64, n: usize, k: usize, replicate: usize) -> u64 {
    derive_seed(master, &[n as u64, k as u64, replicate as u64])
}

struct CellOutcome {
    mse: f64,
    tail_mass: f64,
}

fn run_cell(cfg: &ExperimentConfig, n: usize, replicate: usize) -> Result<CellOutcome> {
    let seed = cell_seed(cfg.master_seed, n, cfg.k, replicate);
    let truth = sample_truth(&TruthSpec { n, k: cfg.k, delta: cfg.delta, seed: derive_seed(seed, &[0]) })?;
    let a = sample_adjacency(&truth.theta, derive_seed(seed, &[1]));
    let alpha = DirichletWeights::symmetric(cfg.k, cfg.alpha)?;
    let gibbs = cfg.gibbs(derive_seed(seed, &[2]));
    let mut sampler = GibbsSampler::new(&a, cfg.k, alpha, gibbs.seed)?;
    let mut acc = PosteriorAccumulator::with_truth(truth.theta.clone());
    let mut failure = None;
    sampler.run(&gibbs, |s| {
        if failure.is_none() {
            failure = acc.add(&s.z, &s.q).err();
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let theta_hat = acc.mean()?;
    let schedule = rate_schedule(n, cfg.k)?;
    Ok(CellOutcome {
        mse: normalized_sq_error(&theta_hat, &truth.theta)?,
        tail_mass: acc.tail_mass(cfg.m, schedule.eps())?,
    })
}

/// Runs every `(n, replicate)` cell concurrently; rows come back ordered by
/// `(n, replicate)` and are independent of the thread count.
pub fn run_rate_study(cfg: &ExperimentConfig) -> Result<Vec<RateStudyRow>> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r)))
        .collect();
    let rows = cells
        .into_par_iter()
        .map(|(n, replicate)| {
            let started = Instant::now();
            let outcome = run_cell(cfg, n, replicate);
            let elapsed = started.elapsed().as_secs_f64();
            let wall_time = if cfg.record_wall_time { elapsed } else { 0.0 };
            let eps_sq = rate_schedule(n, cfg.k).map(|s| s.eps_sq).unwrap_or(f64::NAN);
            match outcome {
                Ok(o) => RateStudyRow {
                    n,
                    k: cfg.k,
                    replicate,
                    mse: o.mse,
                    mse_over_eps_sq: o.mse / eps_sq,
                    tail_mass: o.tail_mass,
                    wall_time,
                    error: String::new(),
                },
                Err(e) => RateStudyRow {
                    n,
                    k: cfg.k,
                    replicate,
                    mse: f64::NAN,
                    mse_over_eps_sq: f64::NAN,
                    tail_mass: f64::NAN,
                    wall_time,
                    error: e.to_string(),
                },
            }
        })
        .collect();
    Ok(rows)
}

/// Per-`n` averages over successful replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSummary {
    pub n: usize,
    pub k: usize,
    pub replicates: usize,
    pub mean_mse: f64,
    pub mean_ratio: f64,
    pub mean_tail_mass: f64,
    pub eps_sq: f64,
}

pub fn summarize(rows: &[RateStudyRow]) -> Vec<RateSummary> {
    let mut ns: Vec<(usize, usize)> = rows.iter().map(|r| (r.n, r.k)).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .filter_map(|(n, k)| {
            let ok: Vec<&RateStudyRow> = rows.iter().filter(|r| r.n == n && r.k == k && r.is_ok()).collect();
            if ok.is_empty() {
                return None;
            }
            let c = ok.len() as f64;
            Some(RateSummary {
                n,
                k,
                replicates: ok.len(),
                mean_mse: ok.iter().map(|r| r.mse).sum::<f64>() / c,
                mean_ratio: ok.iter().map(|r| r.mse_over_eps_sq).sum::<f64>() / c,
                mean_tail_mass: ok.iter().map(|r| r.tail_mass).sum::<f64>() / c,
                eps_sq: rate_schedule(n, k).map(|s| s.eps_sq).unwrap_or(f64::NAN),
            })
        })
        .collect()
}

pub fn rows_to_csv(rows: &[RateStudyRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn rows_from_csv(bytes: &[u8]) -> Result<Vec<RateStudyRow>> {
    csv::Reader::from_reader(bytes)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Log-log plot of mean MSE and `M² ε_n²` against `n`.
pub fn rate_curve_svg(rows: &[RateStudyRow], m: f64) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const PAD: f64 = 60.0;
    let summary = summarize(rows);
    let mse: Vec<(f64, f64)> = summary.iter().map(|s| (s.n as f64, s.mean_mse)).collect();
    let rate: Vec<(f64, f64)> = summary.iter().map(|s| (s.n as f64, m * m * s.eps_sq)).collect();
    let positive = |v: &f64| *v > 0.0 && v.is_finite();
    let xs: Vec<f64> = mse.iter().map(|p| p.0).filter(positive).collect();
    let ys: Vec<f64> = mse.iter().chain(&rate).map(|p| p.1).filter(positive).collect();
    let (x_lo, x_hi) = log_range(&xs);
    let (y_lo, y_hi) = log_range(&ys);
    let px = |x: f64| PAD + (x.log10() - x_lo) / (x_hi - x_lo) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y.log10() - y_lo) / (y_hi - y_lo) * (H - 2.0 * PAD);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{PAD}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b}" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    for d in (x_lo.floor() as i32)..=(x_hi.ceil() as i32) {
        let x = 10f64.powi(d);
        if x.log10() >= x_lo && x.log10() <= x_hi {
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">1e{d}</text>"#, px(x), H - PAD + 16.0);
        }
    }
    for d in (y_lo.floor() as i32)..=(y_hi.ceil() as i32) {
        let y = 10f64.powi(d);
        if y.log10() >= y_lo && y.log10() <= y_hi {
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">1e{d}</text>"#, PAD - 6.0, py(y) + 4.0);
        }
    }
    for (series, color, label) in [(&mse, "steelblue", "mean MSE"), (&rate, "firebrick", "M² ε_n²")] {
        let pts: Vec<String> = series
            .iter()
            .filter(|p| positive(&p.0) && positive(&p.1))
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        for p in &pts {
            let (x, y) = p.split_once(',').expect("formatted pair");
            let _ = writeln!(svg, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
        }
        let legend_y = if color == "steelblue" { PAD - 30.0 } else { PAD - 14.0 };
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{legend_y:.2}" font-size="12" fill="{color}">{label}</text>"#, W - PAD - 120.0);
    }
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">n (log scale)</text>"#, W / 2.0, H - 16.0);
    svg.push_str("</svg>\n");
    svg
}

fn log_range(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 1.0);
    }
    let lo = values.iter().map(|v| v.log10()).fold(f64::INFINITY, f64::min);
    let hi = values.iter().map(|v| v.log10()).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub svg: PathBuf,
}

/// Writes `rate_study.csv` and `rate_curve.svg` into `out_dir`.
pub fn emit_report(rows: &[RateStudyRow], m: f64, out_dir: &Path) -> Result<ReportFiles> {
    if rows.is_empty() {
        return Err(Error::Empty("no rate-study rows to report".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let csv = out_dir.join("rate_study.csv");
    let svg = out_dir.join("rate_curve.svg");
    write_atomic(&csv, &rows_to_csv(rows)?)?;
    write_atomic(&svg, rate_curve_svg(rows, m).as_bytes())?;
    Ok(ReportFiles { csv, svg })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        assert!((rate_schedule(2, 2).unwrap().eps_sq - 0.346_573_590_279_972_6).abs() < 1e-12);
        assert!((rate_schedule(10, 1).unwrap().eps_sq - 0.023_025_850_929_940_46).abs() < 1e-12);
        assert!((rate_schedule(100, 2).unwrap().eps_sq - 0.008_496_281_007_770_713).abs() < 1e-12);
        assert_eq!(rate_schedule(1, 1).unwrap().eps_sq, 0.0);
        assert!(rate_schedule(2, 3).is_err());
        assert!(rate_schedule(2, 0).is_err());
    }

    #[test]
    fn schedule_decreasing_once_n_reaches_3k() {
        for k in 1..=8 {
            let mut prev = f64::INFINITY;
            for n in (3 * k).max(2)..=4096 {
                let e = rate_schedule(n, k).unwrap().eps_sq;
                assert!(e < prev, "k={k} n={n}");
                assert!(e > 0.0);
                prev = e;
            }
        }
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            n_grid: vec![8],
            k: 2,
            delta: 0.1,
            m: 10.0,
            replicates: 1,
            burnin: 20,
            samples: 50,
            thin: 1,
            master_seed: 3,
            alpha: 0.5,
            record_wall_time: false,
        }
    }

    #[test]
    fn config_json_defaults_and_validation() {
        let cfg = ExperimentConfig::from_json(r#"{"n_grid":[8,16],"k":2,"replicates":2,"master_seed":1}"#).unwrap();
        assert_eq!(cfg.m, 10.0);
        assert_eq!(cfg.burnin, 2_000);
        assert_eq!(cfg.samples, 10_000);
        assert!(ExperimentConfig::from_json(r#"{"n_grid":[16,8],"k":2,"replicates":2,"master_seed":1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"n_grid":[8],"k":2,"replicates":0,"master_seed":1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"n_grid":[8],"k":2,"replicates":1,"master_seed":1,"M":0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"n_grid":[8],"k":2,"replicates":1,"master_seed":1,"bogus":1}"#).is_err());
    }

    #[test]
    fn single_cell_study() {
        let rows = run_rate_study(&small_config()).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert!(r.is_ok(), "{}", r.error);
        assert!(r.mse >= 0.0 && (0.0..=1.0).contains(&r.tail_mass));
        assert_eq!(r.wall_time, 0.0);
        assert_eq!(rows, run_rate_study(&small_config()).unwrap());
    }

    #[test]
    fn report_files() {
        let rows = run_rate_study(&small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&rows, 10.0, dir.path()).unwrap();
        let text = std::fs::read_to_string(&files.csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n,k,replicate,mse,mse_over_eps_sq,tail_mass,wall_time,error"
        );
        assert_eq!(lines.count(), 1);
        assert!(!text.contains('\r'));
        assert_eq!(rows_from_csv(text.as_bytes()).unwrap(), rows);
        let svg = std::fs::read_to_string(&files.svg).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(emit_report(&[], 10.0, dir.path()).is_err());
    }

    #[test]
    fn error_rows_are_quoted() {
        let row = RateStudyRow {
            n: 4,
            k: 2,
            replicate: 0,
            mse: f64::NAN,
            mse_over_eps_sq: f64::NAN,
            tail_mass: f64::NAN,
            wall_time: 0.0,
            error: "bad, \"quoted\" cell".into(),
        };
        let bytes = rows_to_csv(std::slice::from_ref(&row)).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains(r#""bad, ""quoted"" cell""#));
        let back = rows_from_csv(&bytes).unwrap();
        assert_eq!(back[0].error, row.error);
        assert!(back[0].mse.is_nan());
    }
}
