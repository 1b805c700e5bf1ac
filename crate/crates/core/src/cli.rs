//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 impossible (`classify` only),
//! 3 construction, search or verification failure. Errors go to stderr as a
//! JSON object `{"error": kind, "message": text}`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::classify::{classify, Classification, ClassifyConfig, MinFactors, DEFAULT_TOL};
use crate::construct::{factor_one, factor_three, factor_two, verify_factorization, ConstructConfig, FactorList};
use crate::error::Error;
use crate::io::{parse_factors, parse_matrix};
use crate::linalg::{c, CMatrix};
use crate::numrange::{range_profile, RangeConfig};
use crate::sample;
use crate::search::{search_factors, SearchConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IMPOSSIBLE: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

/// Relative residual and PSD tolerance used by `verify` unless `--tol` is given.
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(name = "psdfactor", version, about = "Minimal PSD factor counts and verified factorizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimal number of PSD factors of a matrix.
    Classify {
        matrix: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        range_samples: Option<usize>,
        /// Print the full certificate instead of the summary.
        #[arg(long)]
        json: bool,
    },
    /// Construct PSD factors.
    Factor {
        matrix: PathBuf,
        /// Number of factors (defaults to the classified count).
        #[arg(long)]
        k: Option<u8>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        range_samples: Option<usize>,
    },
    /// Check a factor list against a matrix.
    Verify {
        matrix: PathBuf,
        #[arg(long)]
        factors: PathBuf,
        #[arg(long, default_value_t = VERIFY_TOL)]
        tol: f64,
    },
    /// Support function and boundary points of the numerical range.
    Range {
        matrix: PathBuf,
        #[arg(long, default_value_t = RangeConfig::default().samples)]
        samples: usize,
        /// Output file; `.csv` selects CSV, anything else JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in fixture suite.
    Selftest {
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
}

struct Failure {
    code: i32,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INVALID, kind: "InvalidInput", message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::NotSquare { .. } => (EXIT_INVALID, "NotSquare"),
            Error::NonFinite => (EXIT_INVALID, "NonFinite"),
            Error::Empty => (EXIT_INVALID, "Empty"),
            Error::DimensionMismatch(_) => (EXIT_INVALID, "DimensionMismatch"),
            Error::InvalidInput(_) => (EXIT_INVALID, "InvalidInput"),
            Error::NotHermitian { .. } => (EXIT_FAILURE, "NotHermitian"),
            Error::Singular => (EXIT_FAILURE, "Singular"),
            Error::ConvergenceFailure(_) => (EXIT_FAILURE, "ConvergenceFailure"),
            Error::NotInvertible => (EXIT_FAILURE, "NotInvertible"),
            Error::NotPsd { .. } => (EXIT_FAILURE, "NotPsd"),
            Error::NotDiagonalizableNonneg => (EXIT_FAILURE, "NotDiagonalizableNonneg"),
            Error::NotInvertibleFactor { .. } => (EXIT_FAILURE, "NotInvertibleFactor"),
            Error::NotInvertibleCore => (EXIT_FAILURE, "NotInvertibleCore"),
            Error::ShiftFailure(_) => (EXIT_FAILURE, "ShiftFailure"),
            Error::ConstructionFailure { .. } => (EXIT_FAILURE, "ConstructionFailure"),
            Error::Precondition(_) => (EXIT_FAILURE, "Precondition"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

type Outcome = std::result::Result<i32, Failure>;

/// Runs one command. `argv[0]` is the program name.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            report(err, &Failure::invalid(e.to_string().trim_end()));
            return EXIT_INVALID;
        }
    };
    let result = match cli.command {
        Command::Classify { matrix, tol, range_samples, json } => {
            cmd_classify(&matrix, tol, range_samples, json, out)
        }
        Command::Factor { matrix, k, out: path, seed, tol, range_samples } => {
            cmd_factor(&matrix, k, path.as_deref(), seed, tol, range_samples, out, err)
        }
        Command::Verify { matrix, factors, tol } => cmd_verify(&matrix, &factors, tol, out),
        Command::Range { matrix, samples, out: path } => cmd_range(&matrix, samples, path.as_deref(), out),
        Command::Selftest { tol } => cmd_selftest(tol, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            report(err, &f);
            f.code
        }
    }
}

fn report(err: &mut dyn Write, f: &Failure) {
    let _ = writeln!(err, "{}", json!({"error": f.kind, "message": f.message}));
}

fn emit(out: &mut dyn Write, value: &impl Serialize) -> std::result::Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::invalid(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| Failure { code: EXIT_FAILURE, kind: "Io", message: e.to_string() })
}

fn write_file(path: &Path, text: &str) -> std::result::Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure {
        code: EXIT_FAILURE,
        kind: "Io",
        message: format!("{}: {e}", path.display()),
    })
}

fn read_matrix(path: &Path) -> std::result::Result<CMatrix, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    Ok(parse_matrix(&text)?)
}

fn check_tol(tol: f64) -> std::result::Result<(), Failure> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Failure::invalid(format!("--tol must be positive, got {tol}")))
    }
}

fn range_config(samples: Option<usize>) -> std::result::Result<RangeConfig, Failure> {
    let mut range = RangeConfig::default();
    if let Some(s) = samples {
        if s < 16 {
            return Err(Failure::invalid(format!("--range-samples must be at least 16, got {s}")));
        }
        range.samples = s;
    }
    Ok(range)
}

/// `{"k", "rule", "borderline"}` plus the deciding margins when borderline.
fn summary(cls: &Classification) -> Value {
    let mut v = json!({ "k": cls.k, "rule": cls.rule, "borderline": cls.borderline });
    if cls.borderline {
        let cert = &cls.certificate;
        let mut margins = serde_json::Map::new();
        if let Some(d) = &cert.zero_interior {
            margins.insert("zeroInterior".into(), json!(d.margin));
        }
        if let Some(d) = &cert.positive_axis {
            margins.insert("positiveAxis".into(), json!(d.margin));
        }
        if let Some(s) = cert.core_spectral.as_ref().or(cert.spectral.as_ref()) {
            margins.insert("argumentSum".into(), json!(s.argument_sum));
        }
        if let Some(d) = &cert.determinant {
            margins.insert("smallestSingularValue".into(), json!(d.smallest_singular_value));
        }
        v["margins"] = Value::Object(margins);
    }
    v
}

fn cmd_classify(path: &Path, tol: f64, samples: Option<usize>, full: bool, out: &mut dyn Write) -> Outcome {
    check_tol(tol)?;
    let cfg = ClassifyConfig { tol, range: range_config(samples)? };
    let a = read_matrix(path)?;
    let cls = classify(&a, &cfg)?;
    if full {
        emit(out, &cls)?;
    } else {
        emit(out, &summary(&cls))?;
    }
    Ok(if cls.k == MinFactors::Impossible { EXIT_IMPOSSIBLE } else { EXIT_OK })
}

#[allow(clippy::too_many_arguments)]
fn cmd_factor(
    path: &Path,
    k: Option<u8>,
    out_path: Option<&Path>,
    seed: u64,
    tol: f64,
    samples: Option<usize>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Outcome {
    check_tol(tol)?;
    if let Some(k) = k {
        if !(1..=5).contains(&k) {
            return Err(Failure::invalid(format!("--k must be in 1..=5, got {k}")));
        }
    }
    let cfg = ConstructConfig { tol, range: range_config(samples)?, seed, ..ConstructConfig::default() };
    let a = read_matrix(path)?;
    let cls = classify(&a, &cfg.classify_config())?;
    let Some(min_k) = cls.k.count() else {
        return Err(Failure {
            code: EXIT_FAILURE,
            kind: "Impossible",
            message: "matrix is not a product of PSD matrices".into(),
        });
    };
    let k = k.unwrap_or(min_k);
    if k < min_k {
        return Err(Failure {
            code: EXIT_FAILURE,
            kind: "NoFactorization",
            message: format!("matrix needs at least {min_k} PSD factors, asked for {k}"),
        });
    }
    let list = if k >= 4 {
        let _ = writeln!(
            err,
            "{}",
            json!({"warning": format!("k = {k}: no constructive method, running best-effort search")})
        );
        let mut scfg = SearchConfig::new(k as usize);
        scfg.seed = seed;
        let res = search_factors(&a, &scfg)?;
        match res.factors {
            Some(list) if res.found => list,
            _ => {
                return Err(Failure {
                    code: EXIT_FAILURE,
                    kind: "SearchFailure",
                    message: format!("no {k}-factor product found (best residual {:e})", res.best_residual),
                })
            }
        }
    } else {
        let base = match min_k {
            1 => factor_one(&a, tol)?,
            2 => factor_two(&a, tol)?,
            _ => factor_three(&a, &cfg)?,
        };
        pad_with_identity(&a, base, k as usize)
    };
    let doc = list.to_document();
    match out_path {
        Some(p) => {
            let text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::invalid(e.to_string()))?;
            write_file(p, &(text + "\n"))?;
            emit(out, &json!({"k": k, "method": list.method, "residual": list.product_residual, "out": p.display().to_string()}))?;
        }
        None => emit(out, &doc)?,
    }
    Ok(EXIT_OK)
}

/// Appends identity factors up to `k`.
fn pad_with_identity(a: &CMatrix, list: FactorList, k: usize) -> FactorList {
    if list.factors.len() >= k {
        return list;
    }
    let mut factors = list.factors;
    let method = format!("{}+identity", list.method);
    factors.resize(k, CMatrix::identity(a.n()));
    FactorList::measured(a, factors, method)
}

fn cmd_verify(path: &Path, factors: &Path, tol: f64, out: &mut dyn Write) -> Outcome {
    check_tol(tol)?;
    let a = read_matrix(path)?;
    let text = std::fs::read_to_string(factors).map_err(|e| Failure::invalid(format!("{}: {e}", factors.display())))?;
    let fs = parse_factors(&text)?;
    let report = verify_factorization(&a, &fs, tol)?;
    emit(out, &report)?;
    Ok(if report.verdict { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_range(path: &Path, samples: usize, out_path: Option<&Path>, out: &mut dyn Write) -> Outcome {
    let a = read_matrix(path)?;
    let profile = range_profile(&a, samples)?;
    match out_path {
        Some(p) => {
            let csv = p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
            let text = if csv {
                profile.to_csv()
            } else {
                serde_json::to_string_pretty(&profile).map_err(|e| Failure::invalid(e.to_string()))? + "\n"
            };
            write_file(p, &text)?;
            emit(out, &json!({"samples": samples, "out": p.display().to_string()}))?;
        }
        None => emit(out, &profile)?,
    }
    Ok(EXIT_OK)
}

/// A compiled-in matrix with its expected classification.
pub struct Fixture {
    pub name: &'static str,
    pub matrix: CMatrix,
    pub expected: MinFactors,
}

fn real(n: usize, data: &[f64]) -> CMatrix {
    CMatrix::from_real(n, data).expect("fixture data is square and finite")
}

/// The self-test fixtures.
pub fn fixtures() -> Vec<Fixture> {
    let neg9 = real(2, &[-9., 0., 0., -9.]);
    let mut list = vec![
        Fixture { name: "example1", matrix: real(2, &[-9., -9., 0., 0.]), expected: MinFactors::Count(3) },
        Fixture { name: "minus_identity_2", matrix: real(2, &[-1., 0., 0., -1.]), expected: MinFactors::Count(5) },
        Fixture { name: "minus9_direct_sum_zero", matrix: neg9.direct_sum(&CMatrix::zeros(2)), expected: MinFactors::Count(4) },
        Fixture {
            name: "example1_kron_identity",
            matrix: real(2, &[-9., -9., 0., 0.]).kron_identity(2),
            expected: MinFactors::Count(3),
        },
        Fixture { name: "jordan_nilpotent", matrix: real(2, &[0., 1., 0., 0.]), expected: MinFactors::Count(3) },
        Fixture { name: "diag_i_minus_i", matrix: CMatrix::diag(&[c(0., 1.), c(0., -1.)]), expected: MinFactors::Count(4) },
        Fixture { name: "upper_triangular_1_2", matrix: real(2, &[1., 1., 0., 2.]), expected: MinFactors::Count(2) },
        Fixture { name: "negative_scalar", matrix: real(1, &[-9.]), expected: MinFactors::Impossible },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (i, (n, rank)) in [(2, 2), (3, 1), (4, 3)].into_iter().enumerate() {
        list.push(Fixture {
            name: ["psd_sample_1", "psd_sample_2", "psd_sample_3"][i],
            matrix: sample::psd(&mut rng, n, rank),
            expected: MinFactors::Count(1),
        });
    }
    list
}

/// Factors of the two-by-two fixture `[[-9, -9], [0, 0]]` with integer entries.
pub fn example1_triple() -> Vec<CMatrix> {
    vec![
        real(2, &[9., 3., 3., 2.]),
        real(2, &[13., -15., -15., 18.]),
        real(2, &[1., 1., 1., 1.]),
    ]
}

fn cmd_selftest(tol: f64, out: &mut dyn Write) -> Outcome {
    check_tol(tol)?;
    let cfg = ClassifyConfig { tol, ..ClassifyConfig::default() };
    let mut failed = 0;
    let io_err = |e: std::io::Error| Failure { code: EXIT_FAILURE, kind: "Io", message: e.to_string() };
    for fx in fixtures() {
        let line = match classify(&fx.matrix, &cfg) {
            Ok(cls) if cls.k == fx.expected => format!("pass {}: k = {}", fx.name, cls.k),
            Ok(cls) => {
                failed += 1;
                format!("FAIL {}: expected k = {}, got {} via {}", fx.name, fx.expected, cls.k, cls.rule.name())
            }
            Err(e) => {
                failed += 1;
                format!("FAIL {}: {e}", fx.name)
            }
        };
        writeln!(out, "{line}").map_err(io_err)?;
    }
    let a = real(2, &[-9., -9., 0., 0.]);
    let line = match verify_factorization(&a, &example1_triple(), tol) {
        Ok(r) if r.verdict && r.product_residual == 0.0 => "pass example1_triple: residual 0".to_string(),
        Ok(r) => {
            failed += 1;
            format!("FAIL example1_triple: verdict {} residual {:e}", r.verdict, r.product_residual)
        }
        Err(e) => {
            failed += 1;
            format!("FAIL example1_triple: {e}")
        }
    };
    writeln!(out, "{line}").map_err(io_err)?;
    writeln!(out, "{}", if failed == 0 { "all fixtures passed".to_string() } else { format!("{failed} fixture(s) failed") })
        .map_err(io_err)?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}
