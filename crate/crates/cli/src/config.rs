use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use symtensor::bcss::MAX_SYM_ORDER;

/// Default cap on dense elements allocated for oracle and baseline runs.
pub const DEFAULT_MAX_DENSE_ELEMS: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Cross-check every algorithm against the naive oracle.
    Verify,
    /// Time the algorithms and report instrumented counts as CSV.
    Bench,
    /// Emit cost-model rows as CSV.
    Model,
    /// Storage with meta-data for every block dimension dividing n.
    Storage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoChoice {
    Naive,
    Scalar,
    Dense,
    Bcss,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sweep {
    /// Fixed block dimension (--ba), n stepping in multiples of it up to --n.
    Block,
    /// Fixed number of blocks per mode (--nbar), n stepping up to --n.
    Grid,
    /// The single point given by --m --n --p --ba --bc.
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Naive,
    Scalar,
    Dense,
    Bcss,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Naive => "naive",
            Algo::Scalar => "scalar",
            Algo::Dense => "dense",
            Algo::Bcss => "bcss",
        }
    }
}

impl AlgoChoice {
    pub fn expand(self) -> Vec<Algo> {
        match self {
            AlgoChoice::Naive => vec![Algo::Naive],
            AlgoChoice::Scalar => vec![Algo::Scalar],
            AlgoChoice::Dense => vec![Algo::Dense],
            AlgoChoice::Bcss => vec![Algo::Bcss],
            AlgoChoice::All => vec![Algo::Naive, Algo::Scalar, Algo::Dense, Algo::Bcss],
        }
    }
}

/// Symmetric tensor kernels: verification, benchmarks and cost model.
#[derive(Debug, Parser)]
#[command(name = "symtensor", version)]
pub struct RunConfig {
    #[arg(long, value_enum)]
    pub cmd: Command,
    /// Tensor order.
    #[arg(long)]
    pub m: Option<usize>,
    /// Extent of the input tensor (columns of X).
    #[arg(long)]
    pub n: Option<usize>,
    /// Extent of the output tensor (rows of X); defaults to n.
    #[arg(long)]
    pub p: Option<usize>,
    /// Block dimension of the input.
    #[arg(long)]
    pub ba: Option<usize>,
    /// Block dimension of the output; defaults to --ba.
    #[arg(long)]
    pub bc: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Timed repetitions per algorithm (median reported, at least 3).
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t = AlgoChoice::All)]
    pub algo: AlgoChoice,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV output for verify and storage (bench and model always emit CSV).
    #[arg(long)]
    pub csv: bool,
    /// Sweep used by the model command.
    #[arg(long, value_enum, default_value_t = Sweep::Block)]
    pub sweep: Sweep,
    /// Blocks per mode for the grid sweep.
    #[arg(long)]
    pub nbar: Option<usize>,
    /// Fault injection for verify: perturb the stored input block with this
    /// comma-separated canonical block index.
    #[arg(long, value_name = "I,J,...")]
    pub corrupt_block: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or parameters; exit code 2.
    Usage(String),
    /// A check failed; exit code 1.
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Verification(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(s) => write!(f, "usage error: {s}"),
            CliError::Verification(s) => write!(f, "verification failed: {s}"),
        }
    }
}

impl From<symtensor::Error> for CliError {
    fn from(e: symtensor::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Usage(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(format!("csv: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// One `(m, n, p, b_A, b_C)` point, validated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub ba: usize,
    pub bc: usize,
}

impl Shape {
    pub fn new(m: usize, n: usize, p: usize, ba: usize, bc: usize) -> CliResult<Self> {
        if m < 2 {
            return usage(format!("order m must be at least 2, got {m}"));
        }
        if m > MAX_SYM_ORDER {
            return usage(format!("order m must be at most {MAX_SYM_ORDER}, got {m}"));
        }
        if n == 0 || p == 0 {
            return usage("n and p must be positive");
        }
        if ba == 0 || !n.is_multiple_of(ba) {
            return usage(format!("--ba {ba} must divide n = {n}"));
        }
        if bc == 0 || !p.is_multiple_of(bc) {
            return usage(format!("--bc {bc} must divide p = {p}"));
        }
        Ok(Self { m, n, p, ba, bc })
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "m={} n={} p={} b_A={} b_C={}",
            self.m, self.n, self.p, self.ba, self.bc
        )
    }
}

/// `SYMTENSOR_MAX_DENSE_ELEMS`, or the default when unset.
pub fn max_dense_elems() -> CliResult<u128> {
    match std::env::var("SYMTENSOR_MAX_DENSE_ELEMS") {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Usage(format!("SYMTENSOR_MAX_DENSE_ELEMS={v:?} is not an integer"))
        }),
        Err(_) => Ok(DEFAULT_MAX_DENSE_ELEMS),
    }
}

/// `base^exp`, saturating.
pub fn pow_sat(base: usize, exp: usize) -> u128 {
    (base as u128).saturating_pow(exp as u32)
}

impl RunConfig {
    pub fn sink(&self) -> CliResult<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| {
                CliError::Usage(format!("cannot create {}: {e}", path.display()))
            })?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    pub fn corrupt_key(&self, m: usize) -> CliResult<Option<Vec<usize>>> {
        let Some(spec) = &self.corrupt_block else {
            return Ok(None);
        };
        let key = spec
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| {
                CliError::Usage(format!(
                    "--corrupt-block {spec:?} is not a list of integers"
                ))
            })?;
        if key.len() != m {
            return usage(format!(
                "--corrupt-block needs {m} indices, got {}",
                key.len()
            ));
        }
        Ok(Some(key))
    }
}
