//! Command-line front end: one binary exposing every lab capability, with
//! JSON config files, explicit seeds, a worker-count knob that never changes
//! results, and machine-readable artifacts (JSON for structured results,
//! CSV for series; both carry a schema version).
//!
//! Precedence: built-in defaults, then command-line flags, then the config
//! file. The fully resolved config is echoed into every artifact, and
//! re-running from that echo reproduces the outputs byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::cf_grid::CfGrid;
use crate::convergence_lab::{
    run_relaxation, ConvergenceError, EquilibriumSpec, RelaxationConfig, RelaxationReport,
};
use crate::initial_data::{build_appendix_b, InitialLaw};
use crate::kernels::KernelModel;
use crate::prescribed_trees::{build_plan, step1_split};
use crate::stable_laws::{attraction_params, invert_cf_to_cdf, StableParams};
use crate::stats::{compensated_mean, quantile};
use crate::tree_engine::{sample_m_infinity, sample_velocities};
use crate::wild_solver::wild_cf;

pub const SCHEMA_VERSION: u32 = 1;
pub const WORKERS_ENV: &str = "KINETIC_LAB_WORKERS";

#[derive(Debug)]
enum CliError {
    /// Bad invocation or unparseable spec; exits 1.
    Usage(String),
    /// A hypothesis gate declined the run; exits 2.
    Refused(String),
    /// Everything else; exits 1.
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Refused(_) => 2,
            _ => 1,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Refused(m) | CliError::Other(m) => m,
        }
    }
}

impl From<ConvergenceError> for CliError {
    fn from(e: ConvergenceError) -> Self {
        match e {
            ConvergenceError::HypothesisRefused { .. } => CliError::Refused(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

macro_rules! other_errors {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self { CliError::Other(e.to_string()) }
        }
    )*};
}
other_errors!(
    crate::kernels::KernelError,
    crate::initial_data::InitialError,
    crate::stable_laws::StableError,
    crate::prescribed_trees::PrescribedError,
    crate::wild_solver::WildError,
    crate::cf_grid::GridError,
    std::io::Error,
    serde_json::Error,
    csv::Error
);

/// Attraction parameters for the `equilibrium` regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractionArgs {
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub m01: Option<f64>,
    pub m02: Option<f64>,
}

/// Oscillating-tail law parameters for the `appendix-b` regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppendixBArgs {
    pub low: f64,
    pub high: f64,
    pub k: f64,
    pub s1: f64,
    pub alpha: f64,
    pub m_max: usize,
}

/// Prescribed-tree parameters: a full plan (`y`, `eps`) or one split
/// (`c`, `x`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeArgs {
    pub y: Option<Vec<f64>>,
    pub eps: Option<f64>,
    pub c: Option<f64>,
    pub x: Option<f64>,
    pub alpha: f64,
}

/// Fully resolved run configuration; echoed into every artifact. `workers`
/// and `out` describe execution resources, not results, so they are left out
/// of the echo: artifacts stay byte-identical across worker counts and
/// output locations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub regime: String,
    pub kernel: String,
    pub initial: String,
    pub alpha: Option<f64>,
    pub schedule: Vec<f64>,
    pub replicates: u64,
    pub m_ensemble_size: u64,
    pub n_big: usize,
    pub seed: u64,
    pub xi_max: f64,
    pub grid_m: u32,
    pub quad_nodes: usize,
    pub n_trunc: Option<usize>,
    pub ks_points: usize,
    pub p_max: f64,
    pub tol: f64,
    pub classify_tol: f64,
    pub chi: Option<f64>,
    pub override_hypotheses: bool,
    pub emit_samples: bool,
    pub equilibrium_kernel: Option<String>,
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub attraction: Option<AttractionArgs>,
    pub appendix_b: Option<AppendixBArgs>,
    pub tree: Option<TreeArgs>,
}

impl RunConfig {
    fn defaults(regime: &str) -> Self {
        RunConfig {
            regime: regime.to_string(),
            kernel: "kac".into(),
            initial: "gaussian:0,1".into(),
            alpha: None,
            schedule: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            replicates: 100_000,
            m_ensemble_size: 10_000,
            n_big: 1 << 10,
            seed: 0x1ab,
            xi_max: 48.0,
            grid_m: 14,
            quad_nodes: 48,
            n_trunc: None,
            ks_points: 2001,
            p_max: 8.0,
            tol: 1e-10,
            classify_tol: 0.05,
            chi: None,
            override_hypotheses: false,
            emit_samples: false,
            equilibrium_kernel: None,
            workers: None,
            out: None,
            attraction: None,
            appendix_b: None,
            tree: None,
        }
    }
}

/// Sparse overlay: flags and config files set only the fields they mention.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PartialConfig {
    regime: Option<String>,
    kernel: Option<String>,
    initial: Option<String>,
    alpha: Option<f64>,
    schedule: Option<Vec<f64>>,
    replicates: Option<u64>,
    m_ensemble_size: Option<u64>,
    n_big: Option<usize>,
    seed: Option<u64>,
    xi_max: Option<f64>,
    grid_m: Option<u32>,
    quad_nodes: Option<usize>,
    n_trunc: Option<usize>,
    ks_points: Option<usize>,
    p_max: Option<f64>,
    tol: Option<f64>,
    classify_tol: Option<f64>,
    chi: Option<f64>,
    override_hypotheses: Option<bool>,
    emit_samples: Option<bool>,
    equilibrium_kernel: Option<String>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    attraction: Option<AttractionArgs>,
    appendix_b: Option<AppendixBArgs>,
    tree: Option<TreeArgs>,
}

fn overlay(cfg: &mut RunConfig, p: PartialConfig) -> Result<(), CliError> {
    if let Some(r) = p.regime {
        if r != cfg.regime {
            return Err(CliError::Usage(format!(
                "config regime '{r}' conflicts with subcommand '{}'",
                cfg.regime
            )));
        }
    }
    macro_rules! take {
        ($($f:ident),*) => {$( if let Some(v) = p.$f { cfg.$f = v; } )*};
    }
    take!(
        kernel,
        initial,
        schedule,
        replicates,
        m_ensemble_size,
        n_big,
        seed,
        xi_max,
        grid_m,
        quad_nodes,
        ks_points,
        p_max,
        tol,
        classify_tol,
        override_hypotheses,
        emit_samples
    );
    macro_rules! take_opt {
        ($($f:ident),*) => {$( if p.$f.is_some() { cfg.$f = p.$f; } )*};
    }
    take_opt!(
        alpha,
        n_trunc,
        chi,
        equilibrium_kernel,
        workers,
        out,
        attraction,
        appendix_b,
        tree
    );
    Ok(())
}

#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// JSON config file; its values take precedence over flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: KINETIC_LAB_WORKERS, then all cores).
    /// Results never depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for artifacts; created if missing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug)]
struct FindAlphaCmd {
    /// Collision kernel spec.
    #[arg(long)]
    kernel: Option<String>,
    /// Upper end of the exponent scan.
    #[arg(long)]
    p_max: Option<f64>,
    /// Bisection tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone, Debug)]
struct ClassifyCmd {
    /// Initial law spec.
    #[arg(long)]
    initial: Option<String>,
    /// Attraction exponent to classify at.
    #[arg(long)]
    alpha: Option<f64>,
    /// Stabilization tolerance for the numeric fallback.
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone, Debug)]
struct AppendixBCmd {
    /// Tail liminf I.
    #[arg(long)]
    low: Option<f64>,
    /// Tail limsup S.
    #[arg(long)]
    high: Option<f64>,
    /// Wave slope constant, in (high, high+low).
    #[arg(long)]
    k: Option<f64>,
    /// First wave start.
    #[arg(long)]
    s1: Option<f64>,
    /// Tail exponent.
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of waves to report.
    #[arg(long)]
    m_max: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone, Debug)]
struct PrescribeTreeCmd {
    /// Comma-separated level targets for a full plan.
    #[arg(long, value_delimiter = ',')]
    y: Option<Vec<f64>>,
    /// Remainder-mass bound for the plan.
    #[arg(long)]
    eps: Option<f64>,
    /// Parent scale for a single split.
    #[arg(long)]
    c: Option<f64>,
    /// Split target for a single split.
    #[arg(long)]
    x: Option<f64>,
    /// Weight exponent.
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone, Debug)]
struct SimulateCmd {
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    initial: Option<String>,
    /// Comma-separated times.
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    #[arg(long)]
    replicates: Option<u64>,
    /// Exponent for the tail functional (default: the kernel's root).
    #[arg(long)]
    alpha: Option<f64>,
    /// Also write the raw velocity samples.
    #[arg(long)]
    emit_samples: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone, Debug)]
struct WildCmd {
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    initial: Option<String>,
    /// Evaluation time.
    #[arg(long)]
    t: Option<f64>,
    /// Series truncation order (default: weight-mass driven).
    #[arg(long)]
    n_trunc: Option<usize>,
    #[arg(long)]
    xi_max: Option<f64>,
    /// Grid has 2^(grid_m - 1) + 1 nonnegative nodes.
    #[arg(long)]
    grid_m: Option<u32>,
    /// Quadrature nodes per collision average.
    #[arg(long)]
    quad: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone, Debug)]
struct EquilibriumCmd {
    /// Stability index.
    #[arg(long)]
    alpha: Option<f64>,
    /// Lower tail constant.
    #[arg(long)]
    c1: Option<f64>,
    /// Upper tail constant.
    #[arg(long)]
    c2: Option<f64>,
    /// First moment (index 2 only).
    #[arg(long)]
    m01: Option<f64>,
    /// Second moment (index 2 only).
    #[arg(long)]
    m02: Option<f64>,
    /// Location (required at index 1 with c1 != c2).
    #[arg(long)]
    chi: Option<f64>,
    /// Kernel whose limit mass mixes the stable law (default: unit mass).
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    n_big: Option<usize>,
    #[arg(long)]
    m_ensemble: Option<u64>,
    #[arg(long)]
    xi_max: Option<f64>,
    #[arg(long)]
    grid_m: Option<u32>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone, Debug)]
struct ReportCmd {
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    initial: Option<String>,
    /// Comma-separated time schedule.
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    m_ensemble: Option<u64>,
    #[arg(long)]
    n_big: Option<usize>,
    #[arg(long)]
    xi_max: Option<f64>,
    #[arg(long)]
    grid_m: Option<u32>,
    #[arg(long)]
    ks_points: Option<usize>,
    /// Location for asymmetric index-1 limits.
    #[arg(long)]
    chi: Option<f64>,
    /// Keep going when a hypothesis gate fails; the report is annotated.
    #[arg(long)]
    override_hypotheses: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Clone, Debug)]
enum Cmd {
    /// Smallest positive root of the kernel's moment functional.
    FindAlpha(FindAlphaCmd),
    /// Stable-attraction classification of an initial law.
    Classify(ClassifyCmd),
    /// Oscillating-tail law: wave sequences and exact tail identities.
    AppendixB(AppendixBCmd),
    /// Deterministic comb splits and level plans with exact invariants.
    PrescribeTree(PrescribeTreeCmd),
    /// Monte Carlo velocity samples over a time schedule.
    Simulate(SimulateCmd),
    /// Series solution of the collision dynamics on a frequency grid.
    Wild(WildCmd),
    /// Scaled stable limit law: CF table and inverted CDF.
    Equilibrium(EquilibriumCmd),
    /// Full relaxation experiment with hypothesis gates and distances.
    Report(ReportCmd),
}

#[derive(Parser, Clone, Debug)]
#[command(
    name = "kinetic-lab",
    version,
    about = "Monte Carlo and spectral laboratory for one-dimensional inelastic collision models"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

// The spec-parse errors already spell out the valid grammar.
fn parse_kernel(spec: &str) -> Result<KernelModel, CliError> {
    KernelModel::parse_spec(spec).map_err(|e| CliError::Usage(e.to_string()))
}

fn parse_initial(spec: &str) -> Result<InitialLaw, CliError> {
    InitialLaw::parse_spec(spec).map_err(|e| CliError::Usage(e.to_string()))
}

fn load_config(path: &Path) -> Result<PartialConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

/// defaults -> flags -> config file; config wins.
fn resolve(regime: &str, common: &Common, flags: PartialConfig) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::defaults(regime);
    let base = PartialConfig {
        seed: common.seed,
        workers: common.workers,
        out: common.out.clone(),
        ..PartialConfig::default()
    };
    overlay(&mut cfg, base)?;
    overlay(&mut cfg, flags)?;
    if let Some(path) = &common.config {
        overlay(&mut cfg, load_config(path)?)?;
    }
    if cfg.workers.is_none() {
        if let Ok(v) = std::env::var(WORKERS_ENV) {
            cfg.workers = Some(v.parse().map_err(|_| {
                CliError::Usage(format!("{WORKERS_ENV} must be a worker count, got '{v}'"))
            })?);
        }
    }
    Ok(cfg)
}

fn apply_workers(cfg: &RunConfig) {
    if let Some(w) = cfg.workers {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global();
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec!["schema_version".to_string()];
    head.extend(header.iter().map(|s| s.to_string()));
    w.write_record(&head)?;
    for row in rows {
        let mut rec = vec![SCHEMA_VERSION.to_string()];
        rec.extend(row);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn out_dir(cfg: &RunConfig) -> Result<Option<PathBuf>, CliError> {
    match &cfg.out {
        Some(d) => {
            fs::create_dir_all(d)?;
            Ok(Some(d.clone()))
        }
        None => Ok(None),
    }
}

/// Wrap a payload with the schema version and the resolved config echo.
fn document(cfg: &RunConfig, payload: serde_json::Value) -> serde_json::Value {
    serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "config": cfg,
        "result": payload,
    })
}

fn emit(cfg: &RunConfig, file: &str, payload: serde_json::Value) -> Result<String, CliError> {
    let doc = document(cfg, payload);
    let text = serde_json::to_string_pretty(&doc)?;
    if let Some(dir) = out_dir(cfg)? {
        fs::write(dir.join(file), format!("{text}\n"))?;
    }
    Ok(text)
}

fn do_find_alpha(cfg: &RunConfig) -> Result<String, CliError> {
    let kernel = parse_kernel(&cfg.kernel)?;
    let alpha = kernel.find_alpha(cfg.p_max, cfg.tol)?;
    emit(
        cfg,
        "find_alpha.json",
        serde_json::json!({ "kernel": cfg.kernel, "alpha": alpha }),
    )?;
    // The root alone on stdout; artifacts carry the full document.
    Ok(fmt_f64(alpha))
}

fn do_classify(cfg: &RunConfig) -> Result<String, CliError> {
    let initial = parse_initial(&cfg.initial)?;
    let alpha = cfg
        .alpha
        .ok_or_else(|| CliError::Usage("classify needs --alpha".into()))?;
    let class = initial.classify_sda(alpha, cfg.classify_tol);
    emit(
        cfg,
        "classify.json",
        serde_json::json!({
            "initial": cfg.initial,
            "alpha": alpha,
            "membership": format!("{:?}", class.membership),
            "c1": class.c1,
            "c2": class.c2,
            "basis": format!("{:?}", class.basis),
        }),
    )
}

fn do_appendix_b(cfg: &RunConfig) -> Result<String, CliError> {
    let a = cfg
        .appendix_b
        .as_ref()
        .ok_or_else(|| CliError::Usage("appendix-b needs --low --high --k --s1 --alpha".into()))?;
    // The tail identities live outside (-s1, s1), so they are checked on
    // the law itself; the distribution wrapper additionally needs a proper
    // bridge and is not required here.
    let law = build_appendix_b(a.low, a.high, a.k, a.s1, a.alpha, a.m_max)?;
    let m_report = a.m_max.min(law.i_seq.len());

    let mut err_i = 0.0f64;
    let mut err_s = 0.0f64;
    for m in 0..m_report {
        let i_m = law.i_seq[m];
        let s_m = law.s_seq[m];
        err_i = err_i.max((i_m.powf(a.alpha) * law.sf(i_m) - a.low).abs());
        err_s = err_s.max((s_m.powf(a.alpha) * law.sf(s_m) - a.high).abs());
    }
    // Dyadic grid from the carrier start to the last reported wave end;
    // there the symmetrized two-sided functional is the constant 2c.
    let x_top = law.i_seq[m_report - 1];
    let mut err_sym = 0.0f64;
    let mut tail_rows = Vec::new();
    let mut x = (2.0f64).powi(law.s1.log2().ceil() as i32);
    while x <= x_top {
        let up = x.powf(a.alpha) * law.sf(x);
        let lo = x.powf(a.alpha) * law.cdf(-x);
        err_sym = err_sym.max((up + lo - 2.0 * law.c).abs());
        tail_rows.push(vec![fmt_f64(x), fmt_f64(up), fmt_f64(lo), fmt_f64(up + lo)]);
        x *= 2.0;
    }
    if let Some(dir) = out_dir(cfg)? {
        write_csv(
            &dir.join("tails.csv"),
            &["x", "upper", "lower", "two_sided"],
            tail_rows,
        )?;
    }
    emit(
        cfg,
        "appendix_b.json",
        serde_json::json!({
            "law": a,
            "c": law.c,
            "proper_bridge": law.proper_bridge,
            "zero_at_s1": law.zero_at_s1,
            "s_seq": &law.s_seq[..m_report],
            "i_seq": &law.i_seq[..m_report],
            "max_err_wave_end": err_i,
            "max_err_wave_start": err_s,
            "max_err_symmetrized": err_sym,
        }),
    )
}

fn do_prescribe_tree(cfg: &RunConfig) -> Result<String, CliError> {
    let t = cfg
        .tree
        .as_ref()
        .ok_or_else(|| CliError::Usage("prescribe-tree needs --y/--eps or --c/--x".into()))?;
    match (&t.y, t.c, t.x) {
        (Some(y), None, None) => {
            let eps = t
                .eps
                .ok_or_else(|| CliError::Usage("plan mode needs --eps".into()))?;
            let plan = build_plan(y, eps, t.alpha)?;
            // level_weights and r_sets are per target level; n_seq also
            // carries the root.
            let remainder_mass: Vec<f64> = (0..y.len())
                .map(|lvl| {
                    plan.r_sets[lvl]
                        .iter()
                        .map(|&i| plan.level_weights[lvl][i].powf(t.alpha))
                        .sum()
                })
                .collect();
            if let Some(dir) = out_dir(cfg)? {
                let mut rows = Vec::new();
                for (lvl, weights) in plan.level_weights.iter().enumerate() {
                    for (i, w) in weights.iter().enumerate() {
                        let rem = plan.r_sets[lvl].contains(&i);
                        rows.push(vec![
                            (lvl + 1).to_string(),
                            i.to_string(),
                            fmt_f64(*w),
                            rem.to_string(),
                        ]);
                    }
                }
                write_csv(
                    &dir.join("levels.csv"),
                    &["level", "index", "weight", "remainder"],
                    rows,
                )?;
            }
            emit(
                cfg,
                "tree.json",
                serde_json::json!({
                    "y": y,
                    "eps": eps,
                    "alpha": t.alpha,
                    "n_seq": &plan.n_seq[1..],
                    "remainder_counts": plan.r_sets.iter().map(Vec::len).collect::<Vec<_>>(),
                    "remainder_mass": remainder_mass,
                }),
            )
        }
        (None, Some(c), Some(x)) => {
            let split = step1_split(c, x, t.alpha)?;
            let mass: f64 = split.leaf_weights.iter().map(|w| w.powf(t.alpha)).sum();
            if let Some(dir) = out_dir(cfg)? {
                let rows = split
                    .leaf_weights
                    .iter()
                    .enumerate()
                    .map(|(i, w)| vec![i.to_string(), fmt_f64(*w)])
                    .collect();
                write_csv(&dir.join("leaves.csv"), &["index", "weight"], rows)?;
            }
            emit(
                cfg,
                "split.json",
                serde_json::json!({
                    "c": c,
                    "x": x,
                    "alpha": t.alpha,
                    "n": split.n,
                    "pairs": split.pairs,
                    "deep_leaf": split.leaf_weights.last(),
                    "mass_alpha": mass,
                    "mass_alpha_target": c.powf(-t.alpha),
                }),
            )
        }
        _ => Err(CliError::Usage(
            "prescribe-tree takes either --y with --eps, or --c with --x".into(),
        )),
    }
}

fn do_simulate(cfg: &RunConfig) -> Result<String, CliError> {
    let kernel = parse_kernel(&cfg.kernel)?;
    let initial = parse_initial(&cfg.initial)?;
    let alpha = match cfg.alpha {
        Some(a) => Some(a),
        None => kernel.find_alpha(cfg.p_max, cfg.tol).ok(),
    };
    let dir = out_dir(cfg)?;
    let mut per_t = Vec::new();
    for (i, &t) in cfg.schedule.iter().enumerate() {
        let seed = cfg.seed ^ (0x7600_0000u64 + i as u64);
        let mut vs = sample_velocities(t, &kernel, &initial, cfg.replicates, seed);
        if cfg.emit_samples {
            if let Some(d) = &dir {
                let rows = vs.iter().map(|v| vec![fmt_f64(t), fmt_f64(*v)]).collect();
                write_csv(&d.join(format!("samples_t{i}.csv")), &["t", "v"], rows)?;
            }
        }
        let mean = compensated_mean(&vs);
        let m2 = compensated_mean(&vs.iter().map(|v| v * v).collect::<Vec<_>>());
        vs.sort_by(f64::total_cmp);
        let qs: Vec<(f64, f64)> = [0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99]
            .iter()
            .map(|&q| (q, quantile(&vs, q)))
            .collect();
        let tails: Vec<(f64, f64, f64)> = match alpha {
            Some(a) => (0..=12)
                .map(|e| {
                    let x = (1u64 << e) as f64;
                    let above = vs.len() - vs.partition_point(|&v| v <= x);
                    let below = vs.partition_point(|&v| v < -x);
                    let w = x.powf(a) / vs.len() as f64;
                    (x, w * above as f64, w * below as f64)
                })
                .collect(),
            None => Vec::new(),
        };
        per_t.push(serde_json::json!({
            "t": t,
            "seed": seed,
            "mean": mean,
            "second_moment": m2,
            "quantiles": qs,
            "tail_functional": tails,
        }));
    }
    if let Some(d) = &dir {
        let rows = cfg
            .schedule
            .iter()
            .zip(&per_t)
            .map(|(t, p)| {
                vec![
                    fmt_f64(*t),
                    fmt_f64(p["mean"].as_f64().unwrap()),
                    fmt_f64(p["second_moment"].as_f64().unwrap()),
                ]
            })
            .collect();
        write_csv(
            &d.join("moments.csv"),
            &["t", "mean", "second_moment"],
            rows,
        )?;
    }
    emit(
        cfg,
        "simulate.json",
        serde_json::json!({
            "kernel": cfg.kernel,
            "initial": cfg.initial,
            "alpha": alpha,
            "replicates": cfg.replicates,
            "per_t": per_t,
        }),
    )
}

fn do_wild(cfg: &RunConfig) -> Result<String, CliError> {
    let kernel = parse_kernel(&cfg.kernel)?;
    let initial = parse_initial(&cfg.initial)?;
    let t = cfg.schedule[0];
    let phi0 = CfGrid::from_fn(cfg.xi_max, cfg.grid_m, |xi| initial.cf(xi))?;
    let wild = wild_cf(t, &phi0, &kernel, cfg.n_trunc, cfg.quad_nodes)?;
    if let Some(dir) = out_dir(cfg)? {
        let rows = (0..wild.grid.half_len())
            .map(|i| {
                let (xi, v) = wild.grid.node(i);
                vec![fmt_f64(xi), fmt_f64(v.re), fmt_f64(v.im)]
            })
            .collect();
        write_csv(&dir.join("wild_cf.csv"), &["xi", "re", "im"], rows)?;
    }
    emit(
        cfg,
        "wild.json",
        serde_json::json!({
            "kernel": cfg.kernel,
            "initial": cfg.initial,
            "t": t,
            "n_trunc": wild.n_trunc,
            "truncation_bound": wild.truncation_bound,
            "xi_max": cfg.xi_max,
            "grid_m": cfg.grid_m,
            "quad_nodes": cfg.quad_nodes,
        }),
    )
}

fn do_equilibrium(cfg: &RunConfig) -> Result<String, CliError> {
    let a = cfg
        .attraction
        .as_ref()
        .ok_or_else(|| CliError::Usage("equilibrium needs --alpha --c1 --c2".into()))?;
    let params: StableParams = attraction_params(
        a.alpha,
        a.c1,
        a.c2,
        a.m01.unwrap_or(0.0),
        a.m02.unwrap_or(f64::INFINITY),
        cfg.chi,
    )?;
    let ensemble = match &cfg.equilibrium_kernel {
        Some(spec) => {
            let kernel = parse_kernel(spec)?;
            sample_m_infinity(
                &kernel,
                a.alpha,
                cfg.n_big,
                cfg.m_ensemble_size,
                cfg.seed ^ 0x4D45_4E53,
            )
        }
        None => vec![1.0],
    };
    let ens_mean = compensated_mean(&ensemble);
    let mut sorted = ensemble.clone();
    sorted.sort_by(f64::total_cmp);
    let ens_quartiles = [0.25, 0.5, 0.75].map(|q| quantile(&sorted, q));
    let spec = EquilibriumSpec::new(a.alpha, params, ensemble)?;
    let grid = spec.cf_grid(cfg.xi_max, cfg.grid_m)?;
    let x_trust = 0.45 / grid.step();
    let xs: Vec<f64> = (0..=400)
        .map(|i| -x_trust + 2.0 * x_trust * i as f64 / 400.0)
        .collect();
    let inv = invert_cf_to_cdf(&grid, &xs);
    if let Some(dir) = out_dir(cfg)? {
        let rows = (0..grid.half_len())
            .map(|i| {
                let (xi, v) = grid.node(i);
                vec![fmt_f64(xi), fmt_f64(v.re), fmt_f64(v.im)]
            })
            .collect();
        write_csv(&dir.join("cf.csv"), &["xi", "re", "im"], rows)?;
        let rows = xs
            .iter()
            .zip(&inv.cdf)
            .map(|(x, f)| vec![fmt_f64(*x), fmt_f64(*f)])
            .collect();
        write_csv(&dir.join("cdf.csv"), &["x", "cdf"], rows)?;
    }
    emit(
        cfg,
        "equilibrium.json",
        serde_json::json!({
            "attraction": a,
            "chi": cfg.chi,
            "stable": params,
            "degenerate": crate::stable_laws::is_degenerate(&params),
            "ensemble_kernel": cfg.equilibrium_kernel,
            "ensemble_size": spec.m_ensemble.len(),
            "ensemble_mean": ens_mean,
            "ensemble_quartiles": ens_quartiles,
            "inversion_budget": inv.error_budget,
            "decay_warning": inv.decay_warning,
        }),
    )
}

fn relaxation_config(cfg: &RunConfig) -> Result<RelaxationConfig, CliError> {
    let kernel = parse_kernel(&cfg.kernel)?;
    let initial = parse_initial(&cfg.initial)?;
    let mut rc = RelaxationConfig::new(kernel, initial);
    rc.schedule = cfg.schedule.clone();
    rc.replicates = cfg.replicates;
    rc.m_ensemble_size = cfg.m_ensemble_size;
    rc.n_big = cfg.n_big;
    rc.master_seed = cfg.seed;
    rc.xi_max = cfg.xi_max;
    rc.grid_m = cfg.grid_m;
    rc.p_max = cfg.p_max;
    rc.alpha_tol = cfg.tol;
    rc.classify_tol = cfg.classify_tol;
    rc.ks_points = cfg.ks_points;
    rc.chi = cfg.chi;
    rc.override_hypotheses = cfg.override_hypotheses;
    Ok(rc)
}

fn write_report_artifacts(cfg: &RunConfig, report: &RelaxationReport) -> Result<(), CliError> {
    let Some(dir) = out_dir(cfg)? else {
        return Ok(());
    };
    let rows = report
        .points
        .iter()
        .map(|p| {
            vec![
                fmt_f64(p.t),
                p.seed.to_string(),
                fmt_f64(p.mean),
                fmt_f64(p.second_moment),
                fmt_opt(p.ks),
                fmt_opt(p.ks_critical_001),
                fmt_opt(p.ks_resolution),
                fmt_opt(p.inversion_budget),
                fmt_opt(p.cf_dist),
                fmt_opt(p.cf_budget),
            ]
        })
        .collect();
    write_csv(
        &dir.join("points.csv"),
        &[
            "t",
            "seed",
            "mean",
            "second_moment",
            "ks",
            "ks_critical_001",
            "ks_resolution",
            "inversion_budget",
            "cf_dist",
            "cf_budget",
        ],
        rows,
    )?;
    let mut rows = Vec::new();
    for p in &report.points {
        for &(x, v) in &p.tail_upper {
            rows.push(vec![fmt_f64(p.t), "upper".into(), fmt_f64(x), fmt_f64(v)]);
        }
        for &(x, v) in &p.tail_lower {
            rows.push(vec![fmt_f64(p.t), "lower".into(), fmt_f64(x), fmt_f64(v)]);
        }
    }
    write_csv(&dir.join("tails.csv"), &["t", "side", "x", "value"], rows)?;
    Ok(())
}

fn do_report(cfg: &RunConfig) -> Result<String, CliError> {
    let rc = relaxation_config(cfg)?;
    let report = run_relaxation(&rc)?;
    write_report_artifacts(cfg, &report)?;
    emit(cfg, "report.json", serde_json::to_value(&report)?)
}

fn dispatch(cfg: &RunConfig) -> Result<String, CliError> {
    apply_workers(cfg);
    match cfg.regime.as_str() {
        "find-alpha" => do_find_alpha(cfg),
        "classify" => do_classify(cfg),
        "appendix-b" => do_appendix_b(cfg),
        "prescribe-tree" => do_prescribe_tree(cfg),
        "simulate" => do_simulate(cfg),
        "wild" => do_wild(cfg),
        "equilibrium" => do_equilibrium(cfg),
        "report" => do_report(cfg),
        other => Err(CliError::Usage(format!("unknown regime '{other}'"))),
    }
}

fn build_config(cmd: &Cmd) -> Result<RunConfig, CliError> {
    match cmd {
        Cmd::FindAlpha(c) => resolve(
            "find-alpha",
            &c.common,
            PartialConfig {
                kernel: c.kernel.clone(),
                p_max: c.p_max,
                tol: c.tol,
                ..Default::default()
            },
        ),
        Cmd::Classify(c) => resolve(
            "classify",
            &c.common,
            PartialConfig {
                initial: c.initial.clone(),
                alpha: c.alpha,
                classify_tol: c.tol,
                ..Default::default()
            },
        ),
        Cmd::AppendixB(c) => {
            let section = match (c.low, c.high, c.k, c.s1, c.alpha) {
                (Some(low), Some(high), Some(k), Some(s1), Some(alpha)) => Some(AppendixBArgs {
                    low,
                    high,
                    k,
                    s1,
                    alpha,
                    m_max: c.m_max.unwrap_or(20),
                }),
                _ => None,
            };
            resolve(
                "appendix-b",
                &c.common,
                PartialConfig {
                    appendix_b: section,
                    ..Default::default()
                },
            )
        }
        Cmd::PrescribeTree(c) => {
            let section = c.alpha.map(|alpha| TreeArgs {
                y: c.y.clone(),
                eps: c.eps,
                c: c.c,
                x: c.x,
                alpha,
            });
            resolve(
                "prescribe-tree",
                &c.common,
                PartialConfig {
                    tree: section,
                    ..Default::default()
                },
            )
        }
        Cmd::Simulate(c) => resolve(
            "simulate",
            &c.common,
            PartialConfig {
                kernel: c.kernel.clone(),
                initial: c.initial.clone(),
                schedule: c.t.clone(),
                replicates: c.replicates,
                alpha: c.alpha,
                emit_samples: if c.emit_samples { Some(true) } else { None },
                ..Default::default()
            },
        ),
        Cmd::Wild(c) => resolve(
            "wild",
            &c.common,
            PartialConfig {
                kernel: c.kernel.clone(),
                initial: c.initial.clone(),
                schedule: c.t.map(|t| vec![t]),
                n_trunc: c.n_trunc,
                xi_max: c.xi_max,
                grid_m: c.grid_m,
                quad_nodes: c.quad,
                ..Default::default()
            },
        ),
        Cmd::Equilibrium(c) => {
            let section = match (c.alpha, c.c1, c.c2) {
                (Some(alpha), Some(c1), Some(c2)) => Some(AttractionArgs {
                    alpha,
                    c1,
                    c2,
                    m01: c.m01,
                    m02: c.m02,
                }),
                _ => None,
            };
            resolve(
                "equilibrium",
                &c.common,
                PartialConfig {
                    attraction: section,
                    chi: c.chi,
                    equilibrium_kernel: c.kernel.clone(),
                    n_big: c.n_big,
                    m_ensemble_size: c.m_ensemble,
                    xi_max: c.xi_max,
                    grid_m: c.grid_m,
                    ..Default::default()
                },
            )
        }
        Cmd::Report(c) => resolve(
            "report",
            &c.common,
            PartialConfig {
                kernel: c.kernel.clone(),
                initial: c.initial.clone(),
                schedule: c.t.clone(),
                replicates: c.replicates,
                m_ensemble_size: c.m_ensemble,
                n_big: c.n_big,
                xi_max: c.xi_max,
                grid_m: c.grid_m,
                ks_points: c.ks_points,
                chi: c.chi,
                override_hypotheses: if c.override_hypotheses {
                    Some(true)
                } else {
                    None
                },
                ..Default::default()
            },
        ),
    }
}

/// Parse the process arguments, run the selected regime, print the result,
/// and return the exit status (0 ok, 2 hypothesis refusal, 1 any error).
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let out = build_config(&cli.cmd).and_then(|cfg| dispatch(&cfg));
    match out {
        Ok(text) => {
            println!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
