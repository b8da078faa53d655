mod word;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tomita_fock::bimodule::{Bimodule, BimoduleVector};
use tomita_fock::classify::{classify, classify_with_successor};
use tomita_fock::fock::{
    bar_closure, compressed_spectrum, enumerate_fock_basis_over, gamma_matrix, reachable_basis,
    word_moment_matrix,
};
use tomita_fock::fusion::{FusionData, LambdaSpec};
use tomita_fock::oracle::{gamma_star_gamma_moments, moment_nc_vectors};
use tomita_fock::suites::run_all;
use tomita_fock::Error;

const THREADS_ENV: &str = "TOMITA_FOCK_THREADS";

/// Fock-space realizations of Tomita bimodules over fusion-category data.
///
/// Exit codes: 0 success, 1 tolerance failure, 2 input error.
/// Set TOMITA_FOCK_THREADS to cap the worker threads.
#[derive(Parser)]
#[command(name = "tomita-fock", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args, Clone)]
struct Source {
    /// Catalog name (trivial, fib, ising, zmod:N, zwindow:N) or a JSON file.
    #[arg(long, short)]
    category: String,
    /// λ assignment: uniform:x, power:μ, or label=value,... (unlisted labels get 1).
    #[arg(long, short, default_value = "uniform:1")]
    lambda: String,
}

#[derive(clap::Args)]
struct Output {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write to a file instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate fusion data and print the dimensions.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// Compare matrix-model and pairing-formula moments of words.
    ///
    /// Words are products written left to right (the rightmost factor acts
    /// first). `g` is Γ(ξ) for --xi, `g:src,dst,letter,idx` an explicit basis
    /// vector, a trailing `s` the adjoint (so `gsg` is Γ*Γ), `s(...)` the
    /// adjoint of a product, `(...)^k` repetition. Barred letters are `t~`.
    Moments {
        #[command(flatten)]
        source: Source,
        /// Words to evaluate.
        #[arg(long, short, required = true)]
        word: Vec<String>,
        /// Generator for `g`, as src,dst,letter,idx.
        #[arg(long)]
        xi: Option<String>,
        /// Fock depth; must be at least the word length.
        #[arg(long, short, default_value_t = 6)]
        depth: usize,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Γ*Γ moments against the Marchenko–Pastur law, plus an approximate
    /// eigenvalue histogram of the truncated operator.
    Spectrum {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        xi: String,
        /// Number of moments.
        #[arg(long, short = 'k', default_value_t = 6)]
        order: usize,
        /// Depth of the truncated Fock space used for the histogram.
        #[arg(long, short, default_value_t = 8)]
        depth: usize,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        /// Write the histogram as CSV here.
        #[arg(long)]
        histogram: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Decide semifiniteness and factor type.
    Classify {
        #[command(flatten)]
        source: Source,
    },
    /// Run every invariant suite over the default catalog.
    Proptest {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Dump the sparse matrix of Γ(ξ) on the Fock space of {ξ, ξ̄}.
    Gamma {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        xi: String,
        #[arg(long, short, default_value_t = 4)]
        depth: usize,
        #[command(flatten)]
        out: Output,
    },
}

enum Failure {
    Input(String),
    Tolerance(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Integration { .. } => Failure::Tolerance(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<String> for Failure {
    fn from(e: String) -> Self {
        Failure::Input(e)
    }
}

type Outcome = Result<(), Failure>;

fn load_category(source: &str) -> Result<FusionData, Failure> {
    let path = Path::new(source);
    if path.extension().is_some_and(|e| e == "json") || path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{source}: {e}")))?;
        return Ok(FusionData::from_json(&text)?);
    }
    Ok(FusionData::catalog(source)?)
}

fn load(source: &Source) -> Result<Bimodule, Failure> {
    let f = load_category(&source.category)?;
    let l = source.lambda.parse::<LambdaSpec>()?.resolve(&f)?;
    Ok(Bimodule::new(f, l)?)
}

fn emit(out: &Output, json: &impl Serialize, csv: impl FnOnce() -> String) -> Outcome {
    let text = match out.format {
        Format::Json => serde_json::to_string_pretty(json).expect("serializable") + "\n",
        Format::Csv => csv(),
    };
    match &out.output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => print_out(&text),
    }
}

// A closed pipe (`| head`) is not an error.
fn print_out(text: &str) -> Outcome {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Input(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct ValidateReport {
    ok: bool,
    labels: Vec<String>,
    dims: Vec<f64>,
    truncated: bool,
    basis_size: usize,
}

fn cmd_validate(source: &Source) -> Outcome {
    let m = load(source)?;
    let f = m.fusion();
    let report = ValidateReport {
        ok: true,
        labels: f.labels().to_vec(),
        dims: f.dims().to_vec(),
        truncated: f.truncated(),
        basis_size: m.basis().len(),
    };
    print_out(&(serde_json::to_string_pretty(&report).expect("serializable") + "\n"))
}

#[derive(Serialize)]
struct MomentRow {
    word: String,
    length: usize,
    matrix_re: f64,
    matrix_im: f64,
    oracle_re: f64,
    oracle_im: f64,
    difference: f64,
}

fn xi_vector(m: &Bimodule, xi: Option<&str>) -> Result<Option<BimoduleVector>, Failure> {
    xi.map(|x| word::parse_xi(x, m).map(BimoduleVector::basis))
        .transpose()
        .map_err(Failure::Input)
}

fn cmd_moments(
    source: &Source,
    words: &[String],
    xi: Option<&str>,
    depth: usize,
    tolerance: f64,
    out: &Output,
) -> Outcome {
    let m = load(source)?;
    let xi = xi_vector(&m, xi)?;
    let mut rows = Vec::new();
    for text in words {
        let w = word::parse_word(text, &m, xi.as_ref()).map_err(|e| Failure::Input(format!("word `{text}`: {e}")))?;
        if depth < w.len() {
            return Err(Error::DepthTooSmall {
                depth,
                length: w.len(),
            }
            .into());
        }
        let basis = reachable_basis(&m, &w, depth)?;
        let a = word_moment_matrix(&m, &w, &basis)?;
        let b = moment_nc_vectors(&m, &w)?;
        rows.push(MomentRow {
            word: text.clone(),
            length: w.len(),
            matrix_re: clean(a.re),
            matrix_im: clean(a.im),
            oracle_re: clean(b.re),
            oracle_im: clean(b.im),
            difference: (a - b).norm(),
        });
    }
    emit(out, &rows, || {
        let mut s = String::from("word,length,matrix_re,matrix_im,oracle_re,oracle_im,difference\n");
        for r in &rows {
            s += &format!(
                "\"{}\",{},{},{},{},{},{:e}\n",
                r.word, r.length, r.matrix_re, r.matrix_im, r.oracle_re, r.oracle_im, r.difference
            );
        }
        s
    })?;
    let worst = rows.iter().map(|r| r.difference).fold(0.0, f64::max);
    if worst > tolerance {
        return Err(Failure::Tolerance(format!("moment difference {worst:e} exceeds {tolerance:e}")));
    }
    Ok(())
}

/// Maps -0.0 and subnormals to 0.0 so output is stable.
fn clean(x: f64) -> f64 {
    if x.abs() < 1e-300 {
        0.0
    } else {
        x
    }
}

#[derive(Serialize)]
struct MomentPair {
    k: usize,
    fock: f64,
    marchenko_pastur: f64,
    difference: f64,
}

#[derive(Serialize)]
struct Bin {
    lo: f64,
    hi: f64,
    mass: f64,
}

#[derive(Serialize)]
struct Histogram {
    label: &'static str,
    depth: usize,
    support_max: f64,
    bound: f64,
    within_bound: bool,
    bins: Vec<Bin>,
}

#[derive(Serialize)]
struct SpectrumReport {
    generator: String,
    swapped: bool,
    lambda: f64,
    moments: Vec<MomentPair>,
    histogram: Histogram,
}

fn histogram_csv(h: &Histogram) -> String {
    let mut s = format!(
        "# {}: eigenvalues of the depth-{} truncation weighted by the vacuum state\nlo,hi,mass\n",
        h.label, h.depth
    );
    for b in &h.bins {
        s += &format!("{},{},{}\n", b.lo, b.hi, b.mass);
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn cmd_spectrum(
    source: &Source,
    xi: &str,
    order: usize,
    depth: usize,
    bins: usize,
    histogram: Option<&Path>,
    tolerance: f64,
    out: &Output,
) -> Outcome {
    let m = load(source)?;
    let xi = word::parse_xi(xi, &m)?;
    let r = gamma_star_gamma_moments(&m, xi, order)?;
    let generator = m
        .basis()
        .iter()
        .copied()
        .find(|b| b.display(m.fusion()) == r.generator)
        .expect("generator comes from the basis");
    let moments: Vec<MomentPair> = r
        .moments
        .iter()
        .zip(&r.mp)
        .enumerate()
        .map(|(k, (a, b))| MomentPair {
            k: k + 1,
            fock: *a,
            marchenko_pastur: *b,
            difference: (a - b).abs(),
        })
        .collect();

    let spec = compressed_spectrum(&m, generator, depth)?;
    let bound = (1.0 + r.lambda.sqrt()).powi(2);
    let margin = 1e-9;
    let support_max = spec
        .eigenvalues
        .iter()
        .zip(&spec.vacuum_weights)
        .filter(|(_, w)| **w > 1e-14)
        .map(|(e, _)| *e)
        .fold(0.0, f64::max);
    let top = bound + margin;
    let width = top / bins.max(1) as f64;
    let mut hist: Vec<Bin> = (0..bins.max(1))
        .map(|i| Bin {
            lo: i as f64 * width,
            hi: (i + 1) as f64 * width,
            mass: 0.0,
        })
        .collect();
    for (e, w) in spec.eigenvalues.iter().zip(&spec.vacuum_weights) {
        let i = ((e.max(0.0) / width) as usize).min(hist.len() - 1);
        hist[i].mass += w;
    }
    let report = SpectrumReport {
        generator: r.generator.clone(),
        swapped: r.swapped,
        lambda: r.lambda,
        moments,
        histogram: Histogram {
            label: "APPROXIMATE",
            depth,
            support_max,
            bound,
            within_bound: support_max <= top,
            bins: hist,
        },
    };
    if let Some(p) = histogram {
        fs::write(p, histogram_csv(&report.histogram))
            .map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
    }
    emit(out, &report, || {
        let mut s = String::from("k,fock,marchenko_pastur,difference\n");
        for p in &report.moments {
            s += &format!("{},{},{},{:e}\n", p.k, p.fock, p.marchenko_pastur, p.difference);
        }
        s
    })?;
    let worst = report.moments.iter().map(|p| p.difference).fold(0.0, f64::max);
    if worst > tolerance {
        return Err(Failure::Tolerance(format!("moment difference {worst:e} exceeds {tolerance:e}")));
    }
    Ok(())
}

/// `zwindow:n` has a natural successor window for the stabilization check.
fn successor(category: &str) -> Option<String> {
    let n: usize = category.strip_prefix("zwindow:")?.parse().ok()?;
    Some(format!("zwindow:{}", n + 1))
}

fn cmd_classify(source: &Source) -> Outcome {
    let m = load(source)?;
    let report = match successor(&source.category) {
        Some(next) => {
            let n = load(&Source {
                category: next,
                lambda: source.lambda.clone(),
            })?;
            classify_with_successor(m.fusion(), m.lambdas(), Some((n.fusion(), n.lambdas())))
        }
        None => classify(m.fusion(), m.lambdas()),
    };
    print_out(&(serde_json::to_string_pretty(&report).expect("serializable") + "\n"))
}

fn cmd_proptest(seed: u64, out: &Output) -> Outcome {
    let results = run_all(seed)?;
    emit(out, &results, || {
        let mut s = String::from("suite,config,cases,max_residual,tolerance,passed\n");
        for r in &results {
            s += &format!(
                "{},{},{},{:e},{:e},{}\n",
                r.suite, r.config, r.cases, r.max_residual, r.tolerance, r.passed
            );
        }
        s
    })?;
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{} [{}] {:e}", r.suite, r.config, r.max_residual))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Tolerance(format!("failing suites: {}", failed.join("; "))))
    }
}

fn cmd_gamma(source: &Source, xi: &str, depth: usize, out: &Output) -> Outcome {
    let m = load(source)?;
    let xi = word::parse_xi(xi, &m)?;
    let basis = enumerate_fock_basis_over(&m, depth, &bar_closure(&m, [xi]), 2_000_000)?;
    let g = gamma_matrix(&m, &BimoduleVector::basis(xi), &basis)?;
    let dump = g.to_coo(&m, &basis);
    emit(out, &dump, || g.to_csv())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .map_err(|_| Failure::Input(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global()
        .map_err(|e| Failure::Input(e.to_string()))
}

fn run(cli: Cli) -> Outcome {
    configure_threads()?;
    match &cli.command {
        Command::Validate { source } => cmd_validate(source),
        Command::Moments {
            source,
            word,
            xi,
            depth,
            tolerance,
            out,
        } => cmd_moments(source, word, xi.as_deref(), *depth, *tolerance, out),
        Command::Spectrum {
            source,
            xi,
            order,
            depth,
            bins,
            histogram,
            tolerance,
            out,
        } => cmd_spectrum(source, xi, *order, *depth, *bins, histogram.as_deref(), *tolerance, out),
        Command::Classify { source } => cmd_classify(source),
        Command::Proptest { seed, out } => cmd_proptest(*seed, out),
        Command::Gamma {
            source,
            xi,
            depth,
            out,
        } => cmd_gamma(source, xi, *depth, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Tolerance(msg)) => {
            eprintln!("tolerance failure: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
