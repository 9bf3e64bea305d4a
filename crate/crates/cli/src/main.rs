use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use sbm_core::audits;
use sbm_core::geometry::{greedy_packing, AnnulusSpec};
use sbm_core::harness::{emit_report, rate_schedule, run_rate_study, summarize, ExperimentConfig};
use sbm_core::hypothesis::annulus_type1_audit;
use sbm_core::inference::{GibbsConfig, GibbsSampler, PosteriorAccumulator, ScanOrder};
use sbm_core::io::{self, TruthFile};
use sbm_core::model::{normalized_sq_error, sample_adjacency, sample_truth, theta_from_assignment};
use sbm_core::rng::derive_seed;
use sbm_core::{ClusterAssignment, DirichletWeights, EdgeProbabilityMatrix, TruthSpec};

/// Exit status for a failed audit.
const AUDIT_FAILED: u8 = 1;
const USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "sbm", version, about = "Bayesian stochastic block model workbench")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Edgelist,
    Dense,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scan {
    Systematic,
    Random,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a ground truth and one adjacency matrix, write both to files.
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "edgelist")]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the collapsed Gibbs sampler on an adjacency file.
    Fit {
        #[arg(long)]
        adjacency: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 2000)]
        burnin: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        thin: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "systematic")]
        scan: Scan,
        /// Truth file from `simulate`; reports the normalized squared error.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare Gibbs visit frequencies against exact enumeration.
    OracleCheck {
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 100_000)]
        sweeps: usize,
        #[arg(long, default_value_t = 1_000)]
        burnin: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest acceptable total variation (default 0.05 for k = 2, else 0.1).
        #[arg(long)]
        max_tv: Option<f64>,
    },
    /// Posterior contraction study over a grid of n.
    RateStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Containment, distance-identity, volume and packing audits.
    GeometryCheck {
        /// Random containment configurations.
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 10_000)]
        attempts: usize,
    },
    /// Monte-Carlo error rates of the point and annulus tests.
    TestPower {
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Prior normalization and prior-ratio constant table.
    PriorCheck {
        #[arg(long, default_value_t = 8)]
        max_n: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Gate on the ratio constant ln(ratio) / (n ln k).
        #[arg(long, default_value_t = 2.0)]
        max_constant: f64,
    },
    /// Evidence lower-bound satisfaction frequency.
    EvidenceCheck {
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 2.0)]
        c: f64,
        #[arg(long, default_value_t = 100)]
        replicates: usize,
        #[arg(long, default_value_t = 20_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.9)]
        min_frequency: f64,
    },
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn simulate(n: usize, k: usize, delta: f64, seed: u64, format: Format, out: PathBuf) -> Result<bool> {
    let spec = TruthSpec { n, k, delta, seed };
    let truth = sample_truth(&spec)?;
    let a = sample_adjacency(&truth.theta, derive_seed(seed, &[1]));
    fs::create_dir_all(&out)?;
    let (name, text) = match format {
        Format::Edgelist => ("adjacency.txt", io::write_edge_list(&a)),
        Format::Dense => ("adjacency.dense.txt", io::write_dense(&a)),
    };
    io::write_atomic(&out.join(name), text.as_bytes())?;
    let file = TruthFile {
        n,
        k,
        delta,
        seed,
        z: truth.assignment.one_based(),
        q: truth.connectivity.rows(),
    };
    io::write_atomic(&out.join("truth.json"), serde_json::to_string_pretty(&file)?.as_bytes())?;
    io::write_atomic(&out.join("theta.txt"), io::write_theta(&truth.theta).as_bytes())?;
    println!("wrote {} ({} edges), truth.json, theta.txt to {}", name, a.edge_count(), out.display());
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn fit(
    adjacency: PathBuf,
    k: usize,
    alpha: f64,
    burnin: usize,
    samples: usize,
    thin: usize,
    seed: u64,
    scan: Scan,
    truth: Option<PathBuf>,
    out: PathBuf,
) -> Result<bool> {
    let a = io::read_adjacency(&adjacency).with_context(|| format!("reading {}", adjacency.display()))?;
    let weights = DirichletWeights::symmetric(k, alpha)?;
    let mut cfg = GibbsConfig::new(burnin + samples * thin, burnin, thin, seed);
    cfg.scan = match scan {
        Scan::Systematic => ScanOrder::Systematic,
        Scan::Random => ScanOrder::Random,
    };
    let truth = truth
        .map(|p| -> Result<EdgeProbabilityMatrix> {
            let f: TruthFile = serde_json::from_str(&fs::read_to_string(&p)?)?;
            Ok(theta_from_assignment(&f.assignment()?, &f.connectivity()?)?)
        })
        .transpose()?;

    fs::create_dir_all(&out)?;
    let posterior_path = out.join("posterior.csv");
    let tmp = out.join(".posterior.csv.tmp");
    let mut writer = csv_writer(&tmp)?;
    let mut acc = match &truth {
        Some(t) => PosteriorAccumulator::with_truth(t.clone()),
        None => PosteriorAccumulator::new(a.n()),
    };
    let mut sampler = GibbsSampler::new(&a, k, weights, seed)?;
    let mut header_written = false;
    let mut failure: Option<anyhow::Error> = None;
    sampler.run(&cfg, |s| {
        if failure.is_some() {
            return;
        }
        let mut step = || -> Result<()> {
            if !header_written {
                writer.write_record(io::posterior_header(s.z.n(), s.z.k()))?;
                header_written = true;
            }
            let mut rec = vec![s.sweep.to_string()];
            rec.extend(s.z.one_based().iter().map(usize::to_string));
            rec.extend(s.q.entries().iter().map(f64::to_string));
            rec.push(s.log_post.to_string());
            writer.write_record(&rec)?;
            acc.add(&s.z, &s.q)?;
            Ok(())
        };
        failure = step().err();
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    writer.flush()?;
    drop(writer);
    fs::rename(&tmp, &posterior_path)?;
    let theta_hat = acc.mean()?;
    io::write_atomic(&out.join("theta_hat.txt"), io::write_theta(&theta_hat).as_bytes())?;
    println!("retained {} samples -> {}", acc.count(), posterior_path.display());
    if let Some(t) = truth {
        let schedule = rate_schedule(a.n(), k)?;
        let mse = normalized_sq_error(&theta_hat, &t)?;
        println!("mse = {mse:.6e}  eps_n^2 = {:.6e}  mse/eps_n^2 = {:.4}", schedule.eps_sq, mse / schedule.eps_sq);
    }
    Ok(true)
}

fn csv_writer(path: &std::path::Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

fn oracle_check(n: usize, k: usize, sweeps: usize, burnin: usize, seed: u64, max_tv: Option<f64>) -> Result<bool> {
    let limit = max_tv.unwrap_or(if k <= 2 { 0.05 } else { 0.1 });
    let cmp = audits::gibbs_vs_oracle(n, k, sweeps, burnin, seed)?;
    let tv_ok = cmp.total_variation <= limit;
    let cond_ok = cmp.max_conditional_error <= 1e-10;
    println!("n={} k={} sweeps={}", cmp.n, cmp.k, cmp.sweeps);
    println!("total variation      {:.5}  (limit {limit})  {}", cmp.total_variation, verdict(tv_ok));
    println!("max conditional err  {:.3e}  (limit 1e-10)  {}", cmp.max_conditional_error, verdict(cond_ok));
    Ok(tv_ok && cond_ok)
}

fn rate_study(config: PathBuf, out: PathBuf) -> Result<bool> {
    let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let rows = run_rate_study(&cfg)?;
    let files = emit_report(&rows, cfg.m, &out)?;
    println!("{:>6} {:>4} {:>12} {:>12} {:>12} {:>10}", "n", "reps", "mean_mse", "eps_sq", "mse/eps_sq", "tail_mass");
    for s in summarize(&rows) {
        println!(
            "{:>6} {:>4} {:>12.4e} {:>12.4e} {:>12.4} {:>10.4}",
            s.n, s.replicates, s.mean_mse, s.eps_sq, s.mean_ratio, s.mean_tail_mass
        );
    }
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        eprintln!("{failed} cell(s) failed; see the error column");
    }
    println!("wrote {} and {}", files.csv.display(), files.svg.display());
    Ok(failed == 0)
}

fn geometry_check(trials: usize, seed: u64, mc_samples: usize, attempts: usize) -> Result<bool> {
    let mut ok = true;
    let ids = audits::distance_identities(1000, 12, 4, derive_seed(seed, &[0]))?;
    let ids_ok = ids.max_block_error <= 1e-12 && ids.max_decomposition_error <= 1e-10 && ids.min_residual >= -1e-12;
    println!(
        "distance identities: block err {:.2e}, decomposition err/n^2 {:.2e}, min residual {:.2e}  {}",
        ids.max_block_error, ids.max_decomposition_error, ids.min_residual, verdict(ids_ok)
    );
    ok &= ids_ok;

    let cont = audits::containment_audit(trials, 100, 10, 3, derive_seed(seed, &[1]))?;
    println!(
        "containment: {} configurations, {} samples inside ball, {} violations  {}",
        cont.configurations, cont.samples_inside_ball, cont.violations, verdict(cont.violations == 0)
    );
    ok &= cont.violations == 0;

    for row in audits::volume_checks(mc_samples, derive_seed(seed, &[2]))? {
        let pass = row.relative_error <= 0.02;
        println!(
            "volume d={} W={:?}: analytic {:.5} mc {:.5} (rel err {:.4})  {}",
            row.d, row.weights, row.analytic, row.monte_carlo, row.relative_error, verdict(pass)
        );
        ok &= pass;
    }

    for row in audits::packing_table(10, &[1, 2, 3, 4], &[1, 2, 3], attempts, derive_seed(seed, &[3]))? {
        let pass = row.size as f64 <= row.bound;
        println!(
            "packing k={} l={} shell [{:.3}, {:.3}): {} points (bound {:.4e})  {}",
            row.k, row.shell, row.inner, row.outer, row.size, row.bound, verdict(pass)
        );
        ok &= pass;
    }
    Ok(ok)
}

fn test_power(trials: usize, seed: u64) -> Result<bool> {
    let mut ok = true;
    println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "|D|^2", "type1", "type2", "bound", "stderr");
    for row in audits::power_table(trials, derive_seed(seed, &[0]))? {
        println!(
            "{:>8.2} {:>10.5} {:>10.5} {:>10.5} {:>10.2e}  {}",
            row.separation_sq, row.rates.type1, row.rates.type2, row.bound, row.rates.mc_stderr(), verdict(row.within_bound())
        );
        ok &= row.within_bound();
    }

    // Composite test over a greedy net in one shell.
    let n = 10;
    let theta0 = EdgeProbabilityMatrix::constant(n, 0.5)?;
    let z = ClusterAssignment::new(vec![0; n], 1)?;
    let n_eps = n as f64 * rate_schedule(n, 1)?.eps();
    let annulus = AnnulusSpec::shell(theta0.clone(), 1, n_eps)?;
    let net: Vec<EdgeProbabilityMatrix> = greedy_packing(&z, &annulus, 2000, derive_seed(seed, &[1]))?
        .iter()
        .map(|q| theta_from_assignment(&z, q))
        .collect::<Result<_, _>>()?;
    let audit = annulus_type1_audit(&theta0, &net, trials.min(20_000), derive_seed(seed, &[2]))?;
    println!(
        "annulus net of {} points: composite type1 {:.5} <= sum of members {:.5}  {}",
        net.len(), audit.composite, audit.member_sum(), verdict(audit.holds())
    );
    ok &= audit.holds();
    Ok(ok)
}

fn prior_check(max_n: usize, alpha: f64, max_constant: f64) -> Result<bool> {
    let mut ok = true;
    let norm = audits::prior_normalization(max_n, 3, 10_000, alpha)?;
    let worst = norm.iter().map(|r| r.error).fold(0.0, f64::max);
    println!("normalization over {} (n, k) pairs: max |sum - 1| = {worst:.2e}  {}", norm.len(), verdict(worst <= 1e-10));
    ok &= worst <= 1e-10;
    let ns: Vec<usize> = (4..=max_n).collect();
    println!("{:>3} {:>3} {:>8} {:>10}  worst z_ref", "n", "k", "z_refs", "C_emp");
    for row in audits::prior_ratio_table(&ns, &[2, 3], alpha)? {
        let pass = row.worst_constant <= max_constant;
        println!(
            "{:>3} {:>3} {:>8} {:>10.6}  {:?}  {}",
            row.n, row.k, row.references, row.worst_constant, row.worst_reference, verdict(pass)
        );
        ok &= pass;
    }
    Ok(ok)
}

fn evidence_check(n: usize, k: usize, c: f64, replicates: usize, mc_samples: usize, seed: u64, min_frequency: f64) -> Result<bool> {
    let s = audits::evidence_table(n, k, c, replicates, mc_samples, seed)?;
    let pass = s.frequency() >= min_frequency;
    println!(
        "n={} k={} C={}: satisfied {}/{} ({:.3}), mean ln D_n {:.4}, mean ln bound {:.4}  {}",
        s.n, s.k, s.c, s.satisfied, s.replicates, s.frequency(), s.mean_log_dn, s.mean_log_bound, verdict(pass)
    );
    Ok(pass)
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match cli.command {
        Command::Simulate { n, k, delta, seed, format, out } => simulate(n, k, delta, seed, format, out),
        Command::Fit { adjacency, k, alpha, burnin, samples, thin, seed, scan, truth, out } => {
            fit(adjacency, k, alpha, burnin, samples, thin, seed, scan, truth, out)
        }
        Command::OracleCheck { n, k, sweeps, burnin, seed, max_tv } => oracle_check(n, k, sweeps, burnin, seed, max_tv),
        Command::RateStudy { config, out } => rate_study(config, out),
        Command::GeometryCheck { trials, seed, mc_samples, attempts } => geometry_check(trials, seed, mc_samples, attempts),
        Command::TestPower { trials, seed } => test_power(trials, seed),
        Command::PriorCheck { max_n, alpha, max_constant } => prior_check(max_n, alpha, max_constant),
        Command::EvidenceCheck { n, k, c, replicates, mc_samples, seed, min_frequency } => {
            evidence_check(n, k, c, replicates, mc_samples, seed, min_frequency)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(AUDIT_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(AUDIT_FAILED)
        }
    }
}
