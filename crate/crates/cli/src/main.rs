//! `steinitz-lab`: command-line front end for the rearrangement laboratory.
//!
//! Subcommands ingest JSON specs, run the library analyses and write
//! machine-readable reports: JSON for structured results, CSV for plot
//! tables, line-oriented text for permutation streams. Outputs embed the
//! tool version, the seed and a config echo, so identical invocations
//! produce byte-identical files.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use steinitz_core::counterexample::{
    ladder_certificate, verify_nonconvexity, BadSeriesCertificate, NonconvexityVerdict,
};
use steinitz_core::domain::{domain_of_sums, gamma, AffineSubspace, GammaReport};
use steinitz_core::hilbert::{
    singular_values, volume_number_bruteforce, volume_number_from_singular_values, LinearMap,
    WeightedHilbert,
};
use steinitz_core::koethe::{build_hs_scale, nuclearity_test, KoetheMatrix, NuclearityVerdict};
use steinitz_core::rearrange::{rearrange_to_target, RearrangeOptions};
use steinitz_core::series::{Component, SeriesSpec};
use steinitz_core::Error as CoreError;

const TOOL: &str = "steinitz-lab";
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = TOOL, version, about = "Rearrangement and nuclearity laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute Gamma and the domain of sums of a series spec
    Analyze {
        /// series spec JSON file
        #[arg(long)]
        input: PathBuf,
        /// report destination (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
        /// certified accuracy of the offset
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Rearrange a series to a target point in its domain of sums
    Rearrange {
        /// series spec JSON file
        #[arg(long)]
        input: PathBuf,
        /// target vector, comma-separated
        #[arg(long)]
        target: String,
        /// stream destination (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
        /// number of certified stages (bounds 1/2 .. 1/(stages+1))
        #[arg(long, default_value_t = 4)]
        stages: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// s-number / volume-number table for a map, or nuclearity verdict
    /// plus disc-embedding table for a Koethe grid
    Diagnose {
        /// map spec or Koethe grid JSON file
        #[arg(long)]
        input: PathBuf,
        /// CSV destination (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
        /// exponent of the n^epsilon * v_n column
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// largest witness index tried by the nuclearity test
        #[arg(long, default_value_t = 12)]
        mmax: usize,
        /// Monte Carlo cross-check trials per volume number (0 = off)
        #[arg(long, default_value_t = 0)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build the ladder counterexample certificate, or replay one
    Counterexample {
        /// existing certificate JSON to replay instead of building
        #[arg(long)]
        input: Option<PathBuf>,
        /// destination (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// deepest tail index replayed (defaults to the level count)
        #[arg(long)]
        mmax: Option<usize>,
        /// extra series indices per enumerated subset-sum window
        #[arg(long, default_value_t = 16)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze { input, output, tol, seed } => cmd_analyze(&input, output.as_deref(), tol, seed),
        Command::Rearrange { input, target, output, stages, seed } => {
            cmd_rearrange(&input, &target, output.as_deref(), stages, seed)
        }
        Command::Diagnose { input, output, epsilon, mmax, trials, seed } => {
            cmd_diagnose(&input, output.as_deref(), epsilon, mmax, trials, seed)
        }
        Command::Counterexample { input, output, dim, levels, mmax, horizon, seed } => {
            cmd_counterexample(input.as_deref(), output.as_deref(), dim, levels, mmax, horizon, seed)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn parse(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<CoreError> for Failure {
    fn from(err: CoreError) -> Self {
        let code = match &err {
            CoreError::InvalidSpec(_)
            | CoreError::DimensionMismatch { .. }
            | CoreError::RepresentationInvalid(_)
            | CoreError::IndexOutOfRange { .. } => 2,
            CoreError::DivergentSeries(_) => 3,
            CoreError::NotInDomain { .. } => 4,
            CoreError::UndecidableFamily => 5,
            CoreError::CertificateReplayFailed(_) => 6,
            _ => 1,
        };
        Failure { code, message: err.to_string() }
    }
}

fn read_input(path: &std::path::Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::parse(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: Option<&std::path::Path>, content: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| Failure {
            code: 1,
            message: format!("cannot write {}: {e}", p.display()),
        }),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Mirror of the series spec file so that validation failures keep their
/// typed error (serde would flatten them into a parse message).
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesFile {
    dimension: usize,
    components: Vec<Component<f64>>,
}

fn load_series(path: &std::path::Path) -> Result<SeriesSpec<f64>, Failure> {
    let text = read_input(path)?;
    let raw: SeriesFile = serde_json::from_str(&text)
        .map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?;
    Ok(SeriesSpec::new(raw.dimension, raw.components)?)
}

#[derive(Serialize)]
struct AnalyzeOutput {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    config: AnalyzeConfig,
    gamma: GammaReport<f64>,
    domain: AffineSubspace<f64>,
}

#[derive(Serialize)]
struct AnalyzeConfig {
    command: &'static str,
    input: String,
    tol: f64,
}

fn cmd_analyze(
    input: &std::path::Path,
    output: Option<&std::path::Path>,
    tol: f64,
    seed: u64,
) -> Result<(), Failure> {
    let spec = load_series(input)?;
    let report = gamma(&spec);
    let domain = domain_of_sums(&spec, tol)?;
    let out = AnalyzeOutput {
        tool: TOOL,
        version: VERSION,
        seed,
        config: AnalyzeConfig {
            command: "analyze",
            input: input.display().to_string(),
            tol,
        },
        gamma: report,
        domain,
    };
    let mut text = serde_json::to_string_pretty(&out).expect("report serializes");
    text.push('\n');
    write_output(output, &text)
}

fn parse_target(raw: &str) -> Result<Vec<f64>, Failure> {
    raw.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| Failure::parse(format!("bad target coordinate {f:?}")))
        })
        .collect()
}

fn cmd_rearrange(
    input: &std::path::Path,
    target: &str,
    output: Option<&std::path::Path>,
    stages: usize,
    seed: u64,
) -> Result<(), Failure> {
    let spec = load_series(input)?;
    let target = parse_target(target)?;
    if target.len() != spec.dimension() {
        return Err(CoreError::DimensionMismatch {
            expected: spec.dimension(),
            got: target.len(),
        }
        .into());
    }
    let levels = 4;
    let scale = build_hs_scale(&KoetheMatrix::Power, spec.dimension(), levels)?;
    let options = RearrangeOptions {
        stage_width: steinitz_core::rearrange::DEFAULT_STAGE_WIDTH,
        seed,
    };
    let stream = rearrange_to_target(&spec, &target, &scale, stages, options)?;
    let mut text = String::new();
    let _ = writeln!(text, "## {TOOL} {VERSION}");
    let _ = writeln!(text, "## seed {seed}");
    let _ = writeln!(
        text,
        "## config command=rearrange input={} target={} stages={} stage_width={}",
        input.display(),
        target
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(","),
        stages,
        options.stage_width,
    );
    text.push_str(&stream.to_text());
    write_output(output, &text)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DiagnoseInput {
    Koethe(KoetheMatrix<f64>),
    Map(MapSpec),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MapSpec {
    matrix: Vec<Vec<f64>>,
    #[serde(default)]
    domain_weights: Option<Vec<f64>>,
    #[serde(default)]
    codomain_weights: Option<Vec<f64>>,
}

fn csv_header(text: &mut String, config: &str, seed: u64) {
    let _ = writeln!(text, "# {TOOL} {VERSION}");
    let _ = writeln!(text, "# seed {seed}");
    let _ = writeln!(text, "# config {config}");
    text.push_str("n,delta_n,v_n,n_eps_v_n\n");
}

fn csv_rows(text: &mut String, sv: &[f64], epsilon: f64) {
    for n in 1..=sv.len() {
        let vn = volume_number_from_singular_values(sv, n);
        let _ = writeln!(
            text,
            "{n},{},{},{}",
            sv[n - 1],
            vn,
            (n as f64).powf(epsilon) * vn
        );
    }
}

fn worker_cap() -> usize {
    std::env::var("STEINITZ_LAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Seeded Monte Carlo cross-check of the v_n column, fanned out over a
/// worker pool capped by STEINITZ_LAB_THREADS; results are merged in index
/// order, so the output does not depend on the pool size.
fn bruteforce_checks(map: &LinearMap<f64>, count: usize, trials: usize, seed: u64) -> Vec<f64> {
    let workers = worker_cap().min(count.max(1));
    let mut results = vec![0.0; count];
    std::thread::scope(|scope| {
        for (w, chunk) in results.chunks_mut(count.div_ceil(workers)).enumerate() {
            let base = w * count.div_ceil(workers);
            scope.spawn(move || {
                for (off, slot) in chunk.iter_mut().enumerate() {
                    let n = base + off + 1;
                    *slot = volume_number_bruteforce(map, n, trials, seed.wrapping_add(n as u64))
                        .unwrap_or(0.0);
                }
            });
        }
    });
    results
}

fn cmd_diagnose(
    input: &std::path::Path,
    output: Option<&std::path::Path>,
    epsilon: f64,
    mmax: usize,
    trials: usize,
    seed: u64,
) -> Result<(), Failure> {
    let text_in = read_input(input)?;
    let parsed: DiagnoseInput = serde_json::from_str(&text_in)
        .map_err(|e| Failure::parse(format!("{}: {e}", input.display())))?;
    let config = format!(
        "command=diagnose input={} epsilon={epsilon} mmax={mmax} trials={trials}",
        input.display()
    );
    let mut text = String::new();
    match parsed {
        DiagnoseInput::Map(spec) => {
            let rows = spec.matrix.len();
            let cols = spec.matrix.first().map_or(0, |r| r.len());
            let domain = match spec.domain_weights {
                Some(w) => WeightedHilbert::new(w)?,
                None => WeightedHilbert::standard(cols),
            };
            let codomain = match spec.codomain_weights {
                Some(w) => WeightedHilbert::new(w)?,
                None => WeightedHilbert::standard(rows),
            };
            let map = LinearMap::new(spec.matrix, domain, codomain)?;
            let sv = singular_values(&map);
            csv_header(&mut text, &config, seed);
            csv_rows(&mut text, &sv, epsilon);
            if trials > 0 {
                for (i, mc) in bruteforce_checks(&map, sv.len(), trials, seed)
                    .into_iter()
                    .enumerate()
                {
                    let exact = volume_number_from_singular_values(&sv, i + 1);
                    let _ = writeln!(text, "# check n={} exact={exact} montecarlo={mc}", i + 1);
                }
            }
        }
        DiagnoseInput::Koethe(grid) => {
            let n_max = 6.min(mmax.saturating_sub(1)).max(1);
            let verdict = nuclearity_test(&grid, n_max, mmax, 1e-9)?;
            // plot table: the first disc embedding of a scale built from
            // the grid itself
            let dim = match &grid {
                KoetheMatrix::Table { grid } => grid.first().map_or(1, |r| r.len()).min(8),
                _ => 8,
            };
            let levels = match &grid {
                KoetheMatrix::Geometric { ratios } => ratios.len().min(3),
                KoetheMatrix::Table { grid } => grid.len().min(3),
                _ => 3,
            };
            let scale = build_hs_scale(&grid, dim, levels)?;
            let embed = LinearMap::identity_embedding(scale.disc(1).clone(), scale.disc(2).clone())?;
            let sv = singular_values(&embed);
            csv_header(&mut text, &config, seed);
            csv_rows(&mut text, &sv, epsilon);
            match verdict {
                NuclearityVerdict::Nuclear { witness } => {
                    let pairs: Vec<String> =
                        witness.iter().map(|w| format!("{}->{}", w.n, w.m)).collect();
                    let _ = writeln!(text, "# verdict nuclear witness {}", pairs.join(" "));
                }
                NuclearityVerdict::NotNuclearWithin { n_max, m_max, failing_n } => {
                    let _ = writeln!(
                        text,
                        "# verdict notNuclearWithin({n_max},{m_max}) failing_n={failing_n}"
                    );
                }
            }
        }
    }
    write_output(output, &text)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CounterexampleOutput {
    tool: String,
    version: String,
    seed: u64,
    config: CounterexampleConfig,
    certificate: BadSeriesCertificate<f64>,
    verdict: NonconvexityVerdict<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CounterexampleConfig {
    command: String,
    mode: String,
    dim: usize,
    levels: usize,
    mmax: usize,
    horizon: usize,
}

fn cmd_counterexample(
    input: Option<&std::path::Path>,
    output: Option<&std::path::Path>,
    dim: usize,
    levels: usize,
    mmax: Option<usize>,
    horizon: usize,
    seed: u64,
) -> Result<(), Failure> {
    let (mode, cert, dim, levels) = match input {
        None => {
            let cert = ladder_certificate::<f64>(dim, levels)?;
            ("build", cert, dim, levels)
        }
        Some(path) => {
            let text = read_input(path)?;
            // accept both a bare certificate and a previous full output
            let cert = match serde_json::from_str::<CounterexampleOutput>(&text) {
                Ok(prev) => prev.certificate,
                Err(_) => serde_json::from_str::<BadSeriesCertificate<f64>>(&text)
                    .map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?,
            };
            let dim = cert.a.len();
            let levels = cert.representations.len();
            ("replay", cert, dim, levels)
        }
    };
    let m_max = mmax.unwrap_or(levels);
    let verdict = verify_nonconvexity(&cert, m_max, horizon)?;
    let out = CounterexampleOutput {
        tool: TOOL.into(),
        version: VERSION.into(),
        seed,
        config: CounterexampleConfig {
            command: "counterexample".into(),
            mode: mode.into(),
            dim,
            levels,
            mmax: m_max,
            horizon,
        },
        certificate: cert,
        verdict,
    };
    let mut text = serde_json::to_string_pretty(&out).expect("report serializes");
    text.push('\n');
    write_output(output, &text)
}
