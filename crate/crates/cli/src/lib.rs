//! End-to-end driver: run configuration, the solve pipeline, parameter
//! sweeps and JSON reports.
//!
//! A run reads a matrix, forms `b = A e`, scales, reorders (optionally with
//! overlapping), factorizes the preconditioner and solves with right- or
//! left-preconditioned restarted GMRES from a zero initial guess. The
//! solution is mapped back to the original unknowns before it is checked.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use ames_core::gallery;
use ames_core::krylov::{gmres, make_rhs, GmresConfig, KrylovError, Side};
use ames_core::local::{LocalConfig, LocalKind};
use ames_core::mltree::{build_tree, build_tree_with_partition, TreeConfig, TreeError};
use ames_core::overlap::{build_overlapped, overlap_stats, restrict_solution, OverlapError};
use ames_core::partition::{build_adjacency, partition_from_vector, partition_graph, read_partition_file, PartitionError};
use ames_core::precond::{density_ratio, factorize, FactorizeConfig, PrecondError};
use ames_core::sparse::{read_matrix_market, scale_system, unscale_solution, MatrixMarketError, ScaleError, SparseError};
use ames_core::CsrMatrix;
use clap::{Parser, ValueEnum};
use serde::Serialize;
use thiserror::Error;

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error("read phase: {0}")]
    Read(#[from] SourceError),
    #[error("scale phase: {0}")]
    Scale(#[from] ScaleError),
    #[error("preorder phase: {0}")]
    Partition(#[from] PartitionError),
    #[error("analysis phase: {0}")]
    Tree(#[from] TreeError),
    #[error("overlap phase: {0}")]
    Overlap(#[from] OverlapError),
    #[error("factorization phase: {0}")]
    Factorize(#[from] PrecondError),
    #[error("solve phase: {0}")]
    Solve(#[from] KrylovError),
    #[error("permutation: {0}")]
    Sparse(#[from] SparseError),
}

#[derive(Debug, Error)]
pub enum SourceError {
    #[error(transparent)]
    MatrixMarket(#[from] MatrixMarketError),
    #[error("bad gallery spec '{0}'")]
    Gallery(String),
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalSolver {
    Ilu,
    Fsai,
    Ainv,
    Exact,
}

impl From<LocalSolver> for LocalKind {
    fn from(s: LocalSolver) -> Self {
        match s {
            LocalSolver::Ilu => LocalKind::Ilu,
            LocalSolver::Fsai => LocalKind::Fsai,
            LocalSolver::Ainv => LocalKind::Ainv,
            LocalSolver::Exact => LocalKind::Exact,
        }
    }
}

impl FromStr for LocalSolver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

/// Parameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// Matrix Market path or `gallery:` spec.
    pub matrix: String,
    /// Parts per split.
    pub p: usize,
    pub n_lev: usize,
    /// Dissection levels inside the first-level Schur complement.
    pub n_lev_as: usize,
    pub local: LocalSolver,
    /// Drop tolerance of the local solvers.
    pub droptol: f64,
    /// Drop tolerance of assembled Schur complements.
    pub droptol_schur: f64,
    /// Pattern power for FSAI.
    pub fsai_power: usize,
    pub overlap: bool,
    pub restart: usize,
    pub max_matvecs: usize,
    pub rtol: f64,
    pub left: bool,
    pub seed: u64,
    pub min_block: usize,
    /// Parts per split inside the Schur complement tree.
    pub schur_p: usize,
    /// External first-level partition, one part id per row.
    pub partition_file: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = GmresConfig::default();
        Self {
            matrix: String::new(),
            p: 4,
            n_lev: 1,
            n_lev_as: 0,
            local: LocalSolver::Ilu,
            droptol: 0.01,
            droptol_schur: 0.01,
            fsai_power: 1,
            overlap: false,
            restart: g.restart,
            max_matvecs: g.max_matvecs,
            rtol: g.rtol,
            left: false,
            seed: 0,
            min_block: 8,
            schur_p: 4,
            partition_file: None,
        }
    }
}

impl RunConfig {
    pub fn gmres(&self) -> GmresConfig {
        GmresConfig {
            restart: self.restart,
            max_matvecs: self.max_matvecs,
            rtol: self.rtol,
            side: if self.left { Side::Left } else { Side::Right },
        }
    }

    pub fn tree(&self) -> TreeConfig {
        TreeConfig {
            p: self.p,
            n_lev: self.n_lev,
            min_block_size: self.min_block,
        }
    }

    pub fn factorize(&self) -> FactorizeConfig {
        let mut local = LocalConfig::new(self.local.into(), self.droptol);
        local.fsai_power = self.fsai_power;
        FactorizeConfig {
            local,
            droptol_schur: self.droptol_schur,
            n_lev_as: self.n_lev_as,
            schur_p: self.schur_p,
            schur_min_block: self.min_block,
            seed: self.seed,
        }
    }

    /// Sets one parameter from its command-line name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), RunError> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, RunError> {
            value
                .parse()
                .map_err(|_| RunError::Config(format!("bad value '{value}' for {key}")))
        }
        match key {
            "matrix" => self.matrix = value.to_string(),
            "p" => self.p = parse(key, value)?,
            "nlev" => self.n_lev = parse(key, value)?,
            "nlevas" => self.n_lev_as = parse(key, value)?,
            "local" => self.local = value.parse().map_err(RunError::Config)?,
            "droptol" => self.droptol = parse(key, value)?,
            "droptol-schur" => self.droptol_schur = parse(key, value)?,
            "fsai-power" => self.fsai_power = parse(key, value)?,
            "overlap" => self.overlap = parse(key, value)?,
            "restart" => self.restart = parse(key, value)?,
            "maxmv" => self.max_matvecs = parse(key, value)?,
            "rtol" => self.rtol = parse(key, value)?,
            "left" => self.left = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "min-block" => self.min_block = parse(key, value)?,
            "ps" => self.schur_p = parse(key, value)?,
            _ => return Err(RunError::Config(format!("unknown parameter '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), RunError> {
        self.gmres().validate()?;
        self.tree().validate()?;
        if !(self.droptol >= 0.0 && self.droptol_schur >= 0.0) {
            return Err(RunError::Config("drop tolerances must be non-negative".into()));
        }
        if self.fsai_power == 0 {
            return Err(RunError::Config("fsai-power must be at least 1".into()));
        }
        if self.overlap && (self.n_lev == 0 || self.p < 2) {
            return Err(RunError::Config("overlap needs nlev >= 1 and p >= 2".into()));
        }
        Ok(())
    }
}

/// Loads a Matrix Market file or builds a test matrix from a spec such as
/// `gallery:poisson2d:30`. Known generators: `identity:n`, `poisson2d:m`,
/// `convdiff:m:peclet`, `brusselator:m`, `random_grid:m:band:extra:seed`,
/// `random:n:density:seed`, `example5`.
pub fn load_matrix(spec: &str) -> Result<CsrMatrix, SourceError> {
    let a = match spec.strip_prefix("gallery:") {
        Some(g) => gallery_matrix(g).ok_or_else(|| SourceError::Gallery(g.to_string()))?,
        None => read_matrix_market(spec)?,
    };
    if !a.is_square() {
        return Err(SourceError::NotSquare(a.n_rows(), a.n_cols()));
    }
    Ok(a)
}

fn gallery_matrix(spec: &str) -> Option<CsrMatrix> {
    let mut it = spec.split(':');
    let name = it.next()?;
    let args: Vec<&str> = it.collect();
    let int = |i: usize| args.get(i).and_then(|s| s.parse::<usize>().ok());
    let real = |i: usize| args.get(i).and_then(|s| s.parse::<f64>().ok());
    let a = match (name, args.len()) {
        ("identity", 1) => CsrMatrix::identity(int(0)?),
        ("poisson2d", 1) => gallery::poisson2d(int(0)?),
        ("convdiff", 2) => gallery::convection_diffusion2d(int(0)?, real(1)?),
        ("brusselator", 1) => gallery::brusselator2d(int(0)?),
        ("random_grid", 4) => gallery::random_grid(int(0)?, int(1)?, int(2)?, int(3)? as u64),
        ("random", 3) => gallery::random_sparse(int(0)?, real(1)?, int(2)? as u64),
        ("example5", 0) => gallery::example5_matrix(),
        _ => return None,
    };
    (a.n_rows() > 0).then_some(a)
}

/// Caps the global rayon pool from `AMES_THREADS`, if set.
pub fn configure_threads() -> Result<(), RunError> {
    if let Ok(v) = std::env::var("AMES_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| RunError::Config(format!("AMES_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Config(e.to_string()))?;
    }
    Ok(())
}

/// Fixed parts of the experimental protocol.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Protocol {
    /// Right-hand side construction.
    pub rhs: &'static str,
    pub x0: &'static str,
    pub rtol: f64,
    pub restart: usize,
    pub max_matvecs: usize,
    pub side: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixInfo {
    pub source: String,
    pub n: usize,
    pub nnz: usize,
    pub structurally_symmetric: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub t_p: f64,
    pub t_f: f64,
    pub t_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapReport {
    pub size_ratio: f64,
    pub nnz_ratio: f64,
    pub separator_before: usize,
    pub separator_after: usize,
    pub sp_f_before: f64,
    pub sp_f_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub config: RunConfig,
    pub protocol: Protocol,
    pub matrix: MatrixInfo,
    pub iterations: usize,
    pub converged: bool,
    /// True relative residual of the preconditioned system actually solved.
    pub final_relative_residual: f64,
    pub residual_history: Vec<f64>,
    pub cycle_starts: Vec<usize>,
    pub matvecs: usize,
    pub precond_applies: usize,
    pub timings: PhaseTimes,
    /// Stored preconditioner nonzeros over `nnz(A)`.
    pub density_ratio: f64,
    pub stored_nnz: usize,
    /// Order of the system handed to GMRES (larger than `n` with overlap).
    pub system_n: usize,
    pub system_nnz: usize,
    /// Mean size of the first-level diagonal blocks.
    pub size_b: f64,
    pub size_schur: usize,
    /// `size_b / size_schur`, absent without a separator.
    pub size_b_over_schur: Option<f64>,
    pub repairs: usize,
    pub overlap: Option<OverlapReport>,
    /// `‖b − A x‖ / ‖b‖` on the original unscaled system.
    pub original_relative_residual: f64,
    /// `max_i |x_i − 1|`.
    pub max_error: f64,
    /// One line per node of the preconditioner tree.
    pub tree: Vec<String>,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Runs the full pipeline. Non-convergence is reported, not an error.
pub fn run(cfg: &RunConfig) -> Result<RunReport, RunError> {
    cfg.validate()?;
    let a = load_matrix(&cfg.matrix)?;
    let b = make_rhs(&a);
    let (s, bs, pair) = scale_system(&a, &b)?;

    let clock = Instant::now();
    let tree_cfg = cfg.tree();
    let first = if cfg.overlap || cfg.partition_file.is_some() {
        let g = build_adjacency(&s, true)?;
        Some(match &cfg.partition_file {
            Some(path) => {
                let part_of = read_partition_file(path)?;
                partition_from_vector(&g, part_of)?
            }
            None => partition_graph(&g, cfg.p, cfg.seed)?,
        })
    } else {
        None
    };
    let (system, rhs, ov, ov_stats) = match &first {
        Some(pr) if cfg.overlap => {
            let ov = build_overlapped(&s, &bs, pr)?;
            let st = overlap_stats(&s, pr, &ov);
            (ov.a.clone(), ov.b.clone(), Some(ov), Some(st))
        }
        _ => (s.clone(), bs.clone(), None, None),
    };
    let (tree, perm) = match (&ov, &first) {
        (Some(ov), _) => build_tree_with_partition(&system, &ov.partition()?, &tree_cfg, cfg.seed)?,
        (None, Some(pr)) => build_tree_with_partition(&system, pr, &tree_cfg, cfg.seed)?,
        (None, None) => build_tree(&system, &tree_cfg, cfg.seed)?,
    };
    let sp = system.permute(&perm)?;
    let rhs_p = perm.permute_vec(&rhs);
    let t_p = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let m = factorize(&tree, &cfg.factorize())?;
    let t_f = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let gcfg = cfg.gmres();
    let (yp, rep) = gmres(&sp, &rhs_p, Some(&m), &gcfg, None)?;
    let t_s = clock.elapsed().as_secs_f64();

    let y = perm.unpermute_vec(&yp);
    let y = match &ov {
        Some(ov) => restrict_solution(&y, &ov.map)?,
        None => y,
    };
    let x = unscale_solution(&y, &pair)?;
    let ax = a.spmv(&x)?;
    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let bn = norm(&b);
    let original_relative_residual = if bn > 0.0 { norm(&r) / bn } else { norm(&r) };
    let max_error = x.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);

    let children = m.children();
    let size_b = if children.is_empty() {
        m.n() as f64
    } else {
        children.iter().map(|c| c.n()).sum::<usize>() as f64 / children.len() as f64
    };
    let size_schur = m.schur_size();

    Ok(RunReport {
        schema: SCHEMA_VERSION,
        config: cfg.clone(),
        protocol: Protocol {
            rhs: "A*e",
            x0: "zero",
            rtol: gcfg.rtol,
            restart: gcfg.restart,
            max_matvecs: gcfg.max_matvecs,
            side: match gcfg.side {
                Side::Left => "left",
                Side::Right => "right",
            },
        },
        matrix: MatrixInfo {
            source: cfg.matrix.clone(),
            n: a.n_rows(),
            nnz: a.nnz(),
            structurally_symmetric: a.is_structurally_symmetric(),
        },
        iterations: rep.iterations,
        converged: rep.converged,
        final_relative_residual: rep.final_relative_residual,
        residual_history: rep.residual_history,
        cycle_starts: rep.cycle_starts,
        matvecs: rep.matvecs,
        precond_applies: rep.precond_applies,
        timings: PhaseTimes { t_p, t_f, t_s },
        density_ratio: density_ratio(&m, &a),
        stored_nnz: m.stored_nnz(),
        system_n: sp.n_rows(),
        system_nnz: sp.nnz(),
        size_b,
        size_schur,
        size_b_over_schur: (size_schur > 0).then(|| size_b / size_schur as f64),
        repairs: m.repairs(),
        overlap: ov_stats.map(|st| OverlapReport {
            size_ratio: st.size_ratio,
            nnz_ratio: st.nnz_ratio,
            separator_before: st.separator_before,
            separator_after: st.separator_after,
            sp_f_before: st.sp_f_before,
            sp_f_after: st.sp_f_after,
        }),
        original_relative_residual,
        max_error,
        tree: m.stats().lines().map(str::to_string).collect(),
    })
}

/// One parameter and the values it takes in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl FromStr for SweepAxis {
    type Err = String;

    /// Parses `key=v1,v2,...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (key, values) = s
            .split_once('=')
            .ok_or_else(|| format!("expected KEY=V1,V2,... got '{s}'"))?;
        let values: Vec<String> = values.split(',').filter(|v| !v.is_empty()).map(str::to_string).collect();
        if key.is_empty() || values.is_empty() {
            return Err(format!("empty sweep axis '{s}'"));
        }
        Ok(Self {
            key: key.to_string(),
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    /// Parameter assignments of this point, in axis order.
    pub params: Vec<(String, String)>,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub schema: u32,
    pub points: Vec<SweepPoint>,
}

/// Runs the cartesian product of `axes` over `template`. Failing points are
/// recorded and the sweep continues.
pub fn sweep(template: &RunConfig, axes: &[SweepAxis]) -> Result<SweepReport, RunError> {
    if axes.is_empty() {
        return Err(RunError::Config("sweep grid is empty".into()));
    }
    let mut grid: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for axis in axes {
        grid = grid
            .into_iter()
            .flat_map(|point| {
                axis.values.iter().map(move |v| {
                    let mut p = point.clone();
                    p.push((axis.key.clone(), v.clone()));
                    p
                })
            })
            .collect();
    }
    let mut points = Vec::with_capacity(grid.len());
    for params in grid {
        let mut cfg = template.clone();
        let outcome = params
            .iter()
            .try_for_each(|(k, v)| cfg.set(k, v))
            .and_then(|_| run(&cfg));
        let (report, error) = match outcome {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        points.push(SweepPoint { params, report, error });
    }
    Ok(SweepReport {
        schema: SCHEMA_VERSION,
        points,
    })
}

/// Aligned plain-text table of a sweep: parameters, Its, density and the
/// phase times.
pub fn sweep_table(sw: &SweepReport) -> String {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let Some(first) = sw.points.first() else {
        return String::new();
    };
    let mut header: Vec<String> = first.params.iter().map(|(k, _)| k.clone()).collect();
    header.extend(["Its", "density", "sizeB/sizeS", "t_p", "t_f", "t_s"].map(String::from));
    rows.push(header);
    for pt in &sw.points {
        let mut row: Vec<String> = pt.params.iter().map(|(_, v)| v.clone()).collect();
        match (&pt.report, &pt.error) {
            (Some(r), _) => {
                row.push(if r.converged {
                    r.iterations.to_string()
                } else {
                    format!("{}+", r.iterations)
                });
                row.push(format!("{:.2}", r.density_ratio));
                row.push(r.size_b_over_schur.map_or("-".into(), |v| format!("{v:.2}")));
                row.push(format!("{:.3}", r.timings.t_p));
                row.push(format!("{:.3}", r.timings.t_f));
                row.push(format!("{:.3}", r.timings.t_s));
            }
            (None, e) => row.push(format!("error: {}", e.as_deref().unwrap_or("unknown"))),
        }
        rows.push(row);
    }
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell:>w$}"))
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

/// Solve a sparse system with the AMES preconditioner and restarted GMRES.
#[derive(Debug, Parser)]
#[command(name = "ames", version)]
pub struct Cli {
    /// Matrix Market file or gallery spec (e.g. gallery:poisson2d:40).
    #[arg(long)]
    pub matrix: String,
    /// Parts per split.
    #[arg(long, default_value_t = 4)]
    pub p: usize,
    /// Dissection levels.
    #[arg(long, default_value_t = 1)]
    pub nlev: usize,
    /// Dissection levels inside the first-level Schur complement.
    #[arg(long, default_value_t = 0)]
    pub nlevas: usize,
    #[arg(long, value_enum, default_value_t = LocalSolver::Ilu)]
    pub local: LocalSolver,
    #[arg(long, default_value_t = 0.01)]
    pub droptol: f64,
    /// Defaults to --droptol.
    #[arg(long)]
    pub droptol_schur: Option<f64>,
    /// Pattern power for FSAI.
    #[arg(long, default_value_t = 1)]
    pub fsai_power: usize,
    /// Apply the overlapping transformation before factorizing.
    #[arg(long)]
    pub overlap: bool,
    #[arg(long, default_value_t = 500)]
    pub restart: usize,
    /// Budget of matrix-vector products.
    #[arg(long, default_value_t = 5000)]
    pub maxmv: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub rtol: f64,
    /// Left instead of right preconditioning.
    #[arg(long)]
    pub left: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Blocks of at most this size are not split.
    #[arg(long, default_value_t = 8)]
    pub min_block: usize,
    /// Parts per split inside the Schur complement tree.
    #[arg(long, default_value_t = 4)]
    pub ps: usize,
    /// First-level partition, one part id per row.
    #[arg(long)]
    pub partition_file: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit 0 whenever the report was written.
    #[arg(long)]
    pub no_fail_on_diverge: bool,
    /// Sweep axis KEY=V1,V2,...; repeat for a grid.
    #[arg(long, value_name = "KEY=VALUES")]
    pub sweep: Vec<SweepAxis>,
}

impl Cli {
    pub fn config(&self) -> RunConfig {
        RunConfig {
            matrix: self.matrix.clone(),
            p: self.p,
            n_lev: self.nlev,
            n_lev_as: self.nlevas,
            local: self.local,
            droptol: self.droptol,
            droptol_schur: self.droptol_schur.unwrap_or(self.droptol),
            fsai_power: self.fsai_power,
            overlap: self.overlap,
            restart: self.restart,
            max_matvecs: self.maxmv,
            rtol: self.rtol,
            left: self.left,
            seed: self.seed,
            min_block: self.min_block,
            schur_p: self.ps,
            partition_file: self.partition_file.clone(),
        }
    }
}
