use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "wkserver", version, about = "Memoryless weighted k-server: constants, potentials, ratios, checks and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format.
    #[arg(long = "out", value_enum, default_value_t = Output::Json, global = true)]
    pub out: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Output {
    Json,
    Csv,
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Direct,
    Gs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// The integer constants C_S and alpha_1..alpha_k.
    ///
    /// CSV columns: mask,C.
    Constants {
        #[arg(long)]
        k: usize,
    },
    /// Solve for the potentials phi_S and the level unknowns f_S.
    ///
    /// CSV columns: mask,f,phi.
    Potentials {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        solver: Solver,
    },
    /// Evaluate the upper-bound functional and the lower bound.
    ///
    /// CSV columns: server,beta,p,per_server, then a row alpha_tilde,arg_t,lower_bound,s.
    Ratio {
        #[command(flatten)]
        input: Input,
    },
    /// Run every structural check on random non-increasing rates with both
    /// backends.
    ///
    /// CSV columns: trial,checks,failures,max_defect.
    Verify {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Gauss-Seidel tolerance.
        #[arg(long, default_value_t = wkserver::potential::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = wkserver::report::DEFAULT_SLACK)]
        slack: f64,
    },
    /// Play the adversary against the memoryless algorithm.
    ///
    /// CSV columns: trial,alg,adv,adv_evict,ratio,ratio_t,ratio_adjusted,audit_failures.
    Simulate {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 100_000)]
        steps: u64,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip the per-step potential audit.
        #[arg(long)]
        no_audit: bool,
        /// Write the move-by-move CSV of trial 0 to this file.
        #[arg(long)]
        transcript: Option<std::path::PathBuf>,
    },
    /// Geometric weights beta_i = r^(i-1) with the optimal rates: the
    /// functional against a perturbation grid, and the exact current gaps.
    ///
    /// CSV columns: r,alpha_at_optimal,grid_min,grid_advantage,max_gap.
    Sweep {
        #[arg(long)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [10.0, 1e2, 1e4, 1e6])]
        r: Vec<f64>,
        /// Bound on the largest gap C_S - I at the last r.
        #[arg(long, default_value_t = 1e-3)]
        threshold: f64,
        /// Bound on how much the grid may beat the optimal rates at the last r.
        #[arg(long, default_value_t = 1e-3)]
        near_optimal: f64,
    },
}

/// Weights and rates. Rates given with `--p` follow the order of `--beta`.
#[derive(Debug, Args)]
pub struct Input {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', group = "rates")]
    pub p: Option<Vec<f64>>,
    /// p_i proportional to C_{[k]\{i}} / beta_i.
    #[arg(long, group = "rates")]
    pub optimal: bool,
    /// p_i proportional to 1 / beta_i.
    #[arg(long, group = "rates")]
    pub harmonic: bool,
}

#[derive(Debug, Args)]
pub struct Solver {
    #[arg(long, value_enum, default_value_t = BackendArg::Direct)]
    pub backend: BackendArg,
    #[arg(long, default_value_t = wkserver::potential::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = wkserver::potential::DEFAULT_MAX_SWEEPS)]
    pub max_sweeps: usize,
}
