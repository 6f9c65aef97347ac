//! Command-line interface.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qvar_core::circuit::{Circuit, Environment, GateAssignment, NamedGate, ObservableKind};
use qvar_core::haar::{derive_seed, SeededStream};
use qvar_core::riemannian::{optimize, OptimizerConfig, Retraction};
use qvar_core::sampling::SampleMap;
use qvar_core::stats::{combined_se, Estimate};
use qvar_core::variance_lab::{
    law_of_total_variance_check, plateau_scan, single_gate_variance_mc, theorem2_report,
    two_gate_decomposition_check, AnsatzFamily, EstimatorConfig, LayersRule, VarianceReport, EQUIVALENCE_TOL,
};
use qvar_core::weingarten::{check_moments, SingleGateMoments};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::format::{read_circuit, save_circuit};
use crate::parallel::Parallel;
use crate::report::{num, Check, Report, Table};

/// Environment variable that supplies the default `--seed`.
pub const SEED_ENV: &str = "QVAR_SEED";

#[derive(Debug, Parser)]
#[command(name = "qvar", version, about = "Haar-averaged cost and gradient variances of parameterized quantum circuits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare sampled first and second Haar moment operators with their closed forms.
    Moments(MomentsArgs),
    /// Sample one gate's cost and gradient variance at fixed other gates and compare with exact values.
    SingleGate(SingleGateArgs),
    /// Check Var E = ½ Var g exactly on random environments.
    Theorem1(Theorem1Args),
    /// Estimate every averaged single-gate variance and check the bounds on the total variance.
    Theorem2(Theorem2Args),
    /// Total-variance scaling with system size, with a log-linear fit.
    PlateauScan(ScanArgs),
    /// Riemannian gradient descent with Armijo backtracking.
    Optimize(OptimizeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Moments(_) => "moments",
            Command::SingleGate(_) => "single-gate",
            Command::Theorem1(_) => "theorem1",
            Command::Theorem2(_) => "theorem2",
            Command::PlateauScan(_) => "plateau-scan",
            Command::Optimize(_) => "optimize",
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Command::Moments(a) => &a.common,
            Command::SingleGate(a) => &a.common,
            Command::Theorem1(a) => &a.common,
            Command::Theorem2(a) => &a.common,
            Command::PlateauScan(a) => &a.common,
            Command::Optimize(a) => &a.common,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Args, Serialize)]
pub struct CommonArgs {
    /// Master seed; every random stream of the run derives from it.
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// JSON report path (standard output when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// CSV table path (standard output when absent).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Worker threads; results do not depend on this value.
    #[arg(long, default_value_t = default_workers())]
    #[serde(skip)]
    pub workers: usize,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    HardwareEfficient,
    ProductCost,
}

impl From<FamilyArg> for AnsatzFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::HardwareEfficient => AnsatzFamily::HardwareEfficient,
            FamilyArg::ProductCost => AnsatzFamily::ProductCost,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservableArg {
    /// σ_z on every qubit
    GlobalZ,
    /// σ_z on the first qubit
    LocalZ,
    Identity,
}

impl From<ObservableArg> for ObservableKind {
    fn from(o: ObservableArg) -> Self {
        match o {
            ObservableArg::GlobalZ => ObservableKind::GlobalZ,
            ObservableArg::LocalZ => ObservableKind::LocalZ,
            ObservableArg::Identity => ObservableKind::Identity,
        }
    }
}

/// Circuit file or built-in ansatz.
#[derive(Debug, Args, Serialize)]
pub struct CircuitArgs {
    /// Circuit description file; overrides the built-in ansatz options.
    #[arg(long, conflicts_with_all = ["ansatz", "qubits", "layers", "observable"])]
    pub circuit: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FamilyArg::HardwareEfficient)]
    pub ansatz: FamilyArg,
    #[arg(long, default_value_t = 2)]
    pub qubits: usize,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long, value_enum, default_value_t = ObservableArg::GlobalZ)]
    pub observable: ObservableArg,
}

impl CircuitArgs {
    fn load(&self) -> Result<Circuit, CliError> {
        match &self.circuit {
            Some(path) => read_circuit(path),
            None => Ok(AnsatzFamily::from(self.ansatz).build(self.qubits, self.layers, self.observable.into())?),
        }
    }
}

/// Inclusive range `a..b`, comma-separated list, or single value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct SizeList(pub Vec<usize>);

impl FromStr for SizeList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
        let values = if let Some((a, b)) = s.split_once("..") {
            let (a, b) = (parse(a)?, parse(b)?);
            if a > b {
                return Err(format!("empty range {a}..{b}"));
            }
            (a..=b).collect()
        } else {
            s.split(',').map(parse).collect::<Result<Vec<_>, _>>()?
        };
        if values.is_empty() {
            return Err("no values".into());
        }
        Ok(SizeList(values))
    }
}

/// Layer count of a scan: a number, or `n` for as many layers as qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayersArg(pub LayersRule);

impl FromStr for LayersArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "n" {
            return Ok(LayersArg(LayersRule::EqualToQubits));
        }
        s.parse::<usize>().map(|l| LayersArg(LayersRule::Fixed(l))).map_err(|e| format!("`{s}`: {e}"))
    }
}

impl Serialize for LayersArg {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            LayersRule::EqualToQubits => s.serialize_str("n"),
            LayersRule::Fixed(l) => s.serialize_u64(l as u64),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitArg {
    Identity,
    Haar,
    /// Hadamard on every two-dimensional gate, identity elsewhere.
    Hadamard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetractionArg {
    Polar,
    Exponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedArg {
    Identity,
    Haar,
}

#[derive(Debug, Args, Serialize)]
pub struct MomentsArgs {
    /// Gate dimensions to test (range `a..b` or list).
    #[arg(long, default_value = "2")]
    pub dim: SizeList,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SingleGateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub circuit: CircuitArgs,
    /// Variable slot, counted from 0 among variable slots.
    #[arg(long, default_value_t = 0)]
    pub slot: usize,
    /// Values of the other variable gates.
    #[arg(long, value_enum, default_value_t = FixedArg::Haar)]
    pub fixed: FixedArg,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 5.0)]
    pub sigmas: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct Theorem1Args {
    #[arg(long, default_value = "2,3,4")]
    pub n_values: SizeList,
    #[arg(long, default_value = "1,2,4,8")]
    pub m_values: SizeList,
    /// Number of random environments, spread round-robin over the (N, M) grid.
    #[arg(long, default_value_t = 200)]
    pub envs: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct Theorem2Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub circuit: CircuitArgs,
    /// Joint Haar draws of all variable gates.
    #[arg(long, default_value_t = 200)]
    pub outer_samples: usize,
    #[arg(long, default_value_t = 5.0)]
    pub sigmas: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ScanArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::HardwareEfficient)]
    pub ansatz: FamilyArg,
    /// Qubit counts (range `a..b` or list).
    #[arg(long, default_value = "2..8")]
    pub n: SizeList,
    /// Layers per circuit: a number, or `n` for as many layers as qubits.
    #[arg(long, default_value = "n")]
    pub layers: LayersArg,
    #[arg(long, value_enum, default_value_t = ObservableArg::GlobalZ)]
    pub observable: ObservableArg,
    /// Joint Haar draws per system size.
    #[arg(long, default_value_t = 200)]
    pub outer_samples: usize,
    #[arg(long, default_value_t = 5.0)]
    pub sigmas: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct OptimizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub circuit: CircuitArgs,
    #[arg(long, value_enum, default_value_t = InitArg::Haar)]
    pub init: InitArg,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    /// Stop once the gradient norm falls to this value.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value_t = RetractionArg::Polar)]
    pub retraction: RetractionArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
}

/// Report and optional CSV table of one run.
pub struct Outcome {
    pub report: Report,
    pub table: Table,
}

const TAG_FIXED: u64 = 11;
const TAG_INNER: u64 = 12;
const TAG_ENVS: u64 = 13;
const TAG_INIT: u64 = 14;

/// Resolved configuration as recorded in the report.
fn config_value<T: Serialize>(command: &str, args: &T, circuit: Option<&Circuit>) -> Value {
    let mut v = serde_json::to_value(args).expect("arguments serialize");
    let obj = v.as_object_mut().expect("arguments are a struct");
    obj.insert("command".into(), json!(command));
    if let Some(c) = circuit {
        let resolved: Value = serde_json::from_str(&save_circuit(c)).expect("circuit files are JSON");
        obj.insert("resolved_circuit".into(), resolved);
    }
    v
}

fn estimate(e: &Estimate) -> Value {
    json!({"value": e.value, "se": e.se})
}

pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    let runner = Parallel::new(command.common().workers)?;
    match command {
        Command::Moments(a) => moments(a, &runner),
        Command::SingleGate(a) => single_gate(a, &runner),
        Command::Theorem1(a) => theorem1(a, &runner),
        Command::Theorem2(a) => theorem2(a, &runner),
        Command::PlateauScan(a) => scan(a, &runner),
        Command::Optimize(a) => run_optimize(a, &runner),
    }
}

fn moments<S: SampleMap>(a: &MomentsArgs, runner: &S) -> Result<Outcome, CliError> {
    let mut results = Vec::new();
    let mut checks = Vec::new();
    let mut table = Table::new(&["order", "N", "samples", "distance", "tolerance"]);
    for &n in &a.dim.0 {
        for m in check_moments(n, a.samples, derive_seed(a.common.seed, n as u64), runner)? {
            results.push(json!({
                "order": m.order, "N": n, "samples": m.samples, "distance": m.distance, "tolerance": m.tolerance,
            }));
            table.push(vec![m.order.to_string(), n.to_string(), m.samples.to_string(), num(m.distance), num(m.tolerance)]);
            checks.push(Check::less_eq(
                format!("moment {} at N={n}: Frobenius distance to closed form", m.order),
                m.distance,
                m.tolerance,
                0.0,
            ));
        }
    }
    let report = Report::new("moments", config_value("moments", a, None), json!({"moments": results}), checks);
    Ok(Outcome { report, table })
}

fn moments_json(m: &SingleGateMoments) -> Value {
    json!({"avg_e": m.avg_e, "avg_e2": m.avg_e2, "var_e": m.var_e, "var_g": m.var_g})
}

fn single_gate<S: SampleMap>(a: &SingleGateArgs, runner: &S) -> Result<Outcome, CliError> {
    let circuit = a.circuit.load()?;
    circuit.variable_slot(a.slot)?;
    let fixed = match a.fixed {
        FixedArg::Identity => GateAssignment::identity(&circuit),
        FixedArg::Haar => {
            GateAssignment::haar(&circuit, &mut SeededStream::new(derive_seed(a.common.seed, TAG_FIXED), 0).rng())
        }
    };
    let inner_seed = derive_seed(a.common.seed, TAG_INNER);
    let mc = single_gate_variance_mc(&circuit, a.slot, &fixed, a.samples, inner_seed, runner)?;
    let exact = mc.analytic;
    let tol = |e: &Estimate| a.sigmas * e.se;
    let checks = vec![
        Check::equal("sampled Avg E vs exact", mc.avg_e.value, exact.avg_e, tol(&mc.avg_e)),
        Check::equal("sampled Var E vs exact", mc.var_e.value, exact.var_e, tol(&mc.var_e)),
        Check::equal("sampled Var g vs exact", mc.var_g.value, exact.var_g, tol(&mc.var_g)),
        Check::equal(
            "exact Var E = Var g / 2",
            exact.var_e,
            exact.var_g / 2.0,
            EQUIVALENCE_TOL * exact.var_e.max(1.0),
        ),
    ];
    let mut table = Table::new(&["quantity", "exact", "sampled", "sampled_se"]);
    for (name, x, e) in [("avg_e", exact.avg_e, mc.avg_e), ("var_e", exact.var_e, mc.var_e), ("var_g", exact.var_g, mc.var_g)] {
        table.push(vec![name.into(), num(x), num(e.value), num(e.se)]);
    }
    let results = json!({
        "slot": a.slot,
        "gate_dim": circuit.variable_dims()[a.slot],
        "samples": mc.samples,
        "exact": moments_json(&exact),
        "sampled": {"avg_e": estimate(&mc.avg_e), "var_e": estimate(&mc.var_e), "var_g": estimate(&mc.var_g)},
    });
    let report = Report::new("single-gate", config_value("single-gate", a, Some(&circuit)), results, checks);
    Ok(Outcome { report, table })
}

fn theorem1<S: SampleMap>(a: &Theorem1Args, runner: &S) -> Result<Outcome, CliError> {
    let grid: Vec<(usize, usize)> =
        a.n_values.0.iter().flat_map(|&n| a.m_values.0.iter().map(move |&m| (n, m))).collect();
    if let Some(&(n, m)) = grid.iter().find(|&&(n, m)| n < 2 || m < 1) {
        return Err(CliError::Input(format!("environment (N={n}, M={m}) needs N >= 2 and M >= 1")));
    }
    if let Some(&(n, m)) = grid.iter().find(|&&(n, m)| n * m > qvar_core::circuit::DIMENSION_LIMIT) {
        return Err(qvar_core::Error::DimensionLimit { dim: n * m, limit: qvar_core::circuit::DIMENSION_LIMIT }.into());
    }
    let seed = derive_seed(a.common.seed, TAG_ENVS);
    let per_env = runner
        .map_indexed(a.envs, |e| {
            let (n, m) = grid[e as usize % grid.len()];
            let env = Environment::random(n, m, &mut SeededStream::new(seed, e).rng())?;
            SingleGateMoments::from_env(&env).map(|mom| (n, m, mom))
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let mut groups = Vec::new();
    let mut checks = Vec::new();
    let mut table = Table::new(&["N", "M", "envs", "max_abs_residual", "max_rel_residual"]);
    for &(n, m) in &grid {
        let members: Vec<&SingleGateMoments> =
            per_env.iter().filter(|(gn, gm, _)| (*gn, *gm) == (n, m)).map(|(_, _, mom)| mom).collect();
        if members.is_empty() {
            continue;
        }
        let abs = members.iter().map(|x| (x.var_e - x.var_g / 2.0).abs()).fold(0.0, f64::max);
        let rel = members.iter().map(|x| (x.var_e - x.var_g / 2.0).abs() / x.var_e.max(1.0)).fold(0.0, f64::max);
        groups.push(json!({"N": n, "M": m, "envs": members.len(), "max_abs_residual": abs, "max_rel_residual": rel}));
        table.push(vec![n.to_string(), m.to_string(), members.len().to_string(), num(abs), num(rel)]);
        checks.push(Check::less_eq(
            format!("N={n} M={m}: max |Var E - Var g / 2| / max(1, Var E)"),
            rel,
            EQUIVALENCE_TOL,
            0.0,
        ));
    }
    let overall = per_env.iter().map(|(_, _, x)| (x.var_e - x.var_g / 2.0).abs()).fold(0.0, f64::max);
    let results = json!({"envs": per_env.len(), "max_abs_residual": overall, "groups": groups});
    let report = Report::new("theorem1", config_value("theorem1", a, None), results, checks);
    Ok(Outcome { report, table })
}

const SCAN_COLUMNS: [&str; 15] = [
    "n",
    "K",
    "slot",
    "V_i",
    "V_i_se",
    "total_var_E",
    "total_var_E_se",
    "total_var_g",
    "total_var_g_se",
    "lower_gap",
    "lower_tol",
    "upper_gap",
    "upper_tol",
    "identity_residual",
    "identity_tol",
];

/// One CSV row per slot. Gaps are `Var E − V_i` and `Σ V − Var E`
/// (non-negative when the bound holds); the identity residual is
/// `(K/2) Var g − Σ V`. Tolerances are sigmas times the combined SE.
fn push_scan_rows(table: &mut Table, n: usize, r: &VarianceReport, sigmas: f64) {
    let k = r.per_slot.len();
    let kf = k as f64;
    let (e, g, s) = (r.total_var_e, r.total_var_g, r.sum_v);
    let upper_gap = s.value - e.value;
    let upper_tol = sigmas * combined_se(&[e.se, s.se]);
    let id_res = kf / 2.0 * g.value - s.value;
    let id_tol = sigmas * combined_se(&[kf / 2.0 * g.se, s.se]);
    for (i, v) in r.per_slot.iter().enumerate() {
        table.push(vec![
            n.to_string(),
            k.to_string(),
            i.to_string(),
            num(v.value),
            num(v.se),
            num(e.value),
            num(e.se),
            num(g.value),
            num(g.se),
            num(e.value - v.value),
            num(sigmas * combined_se(&[v.se, e.se])),
            num(upper_gap),
            num(upper_tol),
            num(id_res),
            num(id_tol),
        ]);
    }
}

fn variance_json(r: &VarianceReport) -> Value {
    let slots: Vec<Value> = r
        .per_slot
        .iter()
        .zip(&r.per_slot_grad)
        .enumerate()
        .map(|(i, (v, g))| json!({"slot": i, "v": estimate(v), "v_grad": estimate(g)}))
        .collect();
    json!({
        "K": r.per_slot.len(),
        "outer_samples": r.outer_samples,
        "master_seed": r.master_seed,
        "per_slot": slots,
        "total_var_e": estimate(&r.total_var_e),
        "total_var_g": estimate(&r.total_var_g),
        "sum_v": estimate(&r.sum_v),
        "upper_ratio": r.upper_ratio(),
        "max_equivalence_residual": r.max_equivalence_residual,
    })
}

fn estimator(outer: usize, seed: u64, sigmas: f64) -> EstimatorConfig {
    EstimatorConfig { outer_samples: outer, inner_samples: 0, master_seed: seed, confidence_sigmas: sigmas }
}

fn theorem2<S: SampleMap>(a: &Theorem2Args, runner: &S) -> Result<Outcome, CliError> {
    let circuit = a.circuit.load()?;
    let config = estimator(a.outer_samples, a.common.seed, a.sigmas);
    let report = theorem2_report(&circuit, &config, runner)?;
    let mut checks: Vec<Check> = report.bound_checks.iter().map(|b| Check::from_bound(b, "")).collect();
    checks.push(Check::less_eq(
        "per-draw |Var E - Var g / 2|",
        report.max_equivalence_residual,
        EQUIVALENCE_TOL,
        0.0,
    ));
    let mut results = variance_json(&report);
    let k = circuit.num_variable();
    if k == 2 {
        let d = two_gate_decomposition_check(&circuit, &config, runner)?;
        checks.push(Check::from_bound(&d.check, ""));
        results["decomposition"] = json!({
            "avg2_var1": estimate(&d.avg2_var1),
            "avg1_var2": estimate(&d.avg1_var2),
            "var12": estimate(&d.var12),
            "correction": estimate(&d.correction),
        });
    }
    if k >= 2 {
        let l = law_of_total_variance_check(&circuit, 0, &config, runner)?;
        checks.push(Check::from_bound(&l.check, " (slot 0)"));
        results["total_variance"] = json!({
            "slot": 0,
            "total": estimate(&l.total),
            "avg_var": estimate(&l.avg_var),
            "var_avg": estimate(&l.var_avg),
        });
    }
    let mut table = Table::new(&SCAN_COLUMNS);
    push_scan_rows(&mut table, circuit.num_qudits(), &report, a.sigmas);
    let report = Report::new("theorem2", config_value("theorem2", a, Some(&circuit)), results, checks);
    Ok(Outcome { report, table })
}

fn scan<S: SampleMap>(a: &ScanArgs, runner: &S) -> Result<Outcome, CliError> {
    let config = estimator(a.outer_samples, a.common.seed, a.sigmas);
    let observable: ObservableKind = a.observable.into();
    let table_data = plateau_scan(a.ansatz.into(), &a.n.0, a.layers.0, observable, &config, runner)?;
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let mut table = Table::new(&SCAN_COLUMNS);
    for row in &table_data.rows {
        let suffix = format!(" (n={})", row.n);
        checks.extend(row.report.bound_checks.iter().map(|b| Check::from_bound(b, &suffix)));
        let mut v = variance_json(&row.report);
        v["n"] = json!(row.n);
        v["layers"] = json!(row.layers);
        rows.push(v);
        push_scan_rows(&mut table, row.n, &row.report, a.sigmas);
    }
    // decay is expected for the global observable only
    if observable == ObservableKind::GlobalZ && table_data.rows.len() >= 2 {
        match table_data.slope() {
            Some(slope) => checks.push(Check::less("fitted slope of ln Var E against n", slope, 0.0)),
            None => checks.push(Check::less("fitted slope of ln Var E against n", f64::NAN, 0.0)),
        }
    }
    let fit = table_data.fit.map(|(slope, intercept)| json!({"slope": slope, "intercept": intercept}));
    let results = json!({"rows": rows, "fit": fit});
    let report = Report::new("plateau-scan", config_value("plateau-scan", a, None), results, checks);
    Ok(Outcome { report, table })
}

fn run_optimize<S: SampleMap>(a: &OptimizeArgs, _runner: &S) -> Result<Outcome, CliError> {
    let circuit = a.circuit.load()?;
    let init = match a.init {
        InitArg::Identity => GateAssignment::identity(&circuit),
        InitArg::Haar => {
            GateAssignment::haar(&circuit, &mut SeededStream::new(derive_seed(a.common.seed, TAG_INIT), 0).rng())
        }
        InitArg::Hadamard => GateAssignment::new(
            circuit
                .variable_dims()
                .into_iter()
                .map(|d| if d == 2 { NamedGate::H.matrix() } else { qvar_core::ComplexMatrix::identity(d) })
                .collect(),
        ),
    };
    let config = OptimizerConfig {
        max_iters: a.max_iters,
        tolerance: a.tolerance,
        retraction: match a.retraction {
            RetractionArg::Polar => Retraction::Polar,
            RetractionArg::Exponential => Retraction::Exponential,
        },
        ..OptimizerConfig::default()
    };
    let result = optimize(&circuit, &init, &config)?;
    let scale = result.costs.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let rise = result.costs.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let rise = if rise.is_finite() { rise } else { 0.0 };
    let checks = vec![Check::less_eq("largest cost increase between iterations", rise, 0.0, 1e-12 * scale)];
    let mut table = Table::new(&["iteration", "cost", "gradient_norm"]);
    for (i, (c, g)) in result.costs.iter().zip(&result.gradient_norms).enumerate() {
        table.push(vec![i.to_string(), num(*c), num(*g)]);
    }
    let results = json!({
        "iterations": result.iterations,
        "converged": result.converged,
        "final_cost": result.costs.last(),
        "costs": result.costs,
        "gradient_norms": result.gradient_norms,
    });
    let report = Report::new("optimize", config_value("optimize", a, Some(&circuit)), results, checks);
    Ok(Outcome { report, table })
}

fn write_to(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Output(format!("{}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Output(e.to_string()))
        }
    }
}

/// Executes a parsed command line and writes its outputs. Returns the
/// process exit code: 0 when every check passed, 1 on a failed check,
/// 2 on an input error.
pub fn run(cli: &Cli) -> i32 {
    let common = cli.command.common();
    if common.format == OutputFormat::Both && common.output.is_none() && common.csv.is_none() {
        eprintln!("error: --format both needs --output or --csv");
        return 2;
    }
    let outcome = match execute(&cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let emit = || -> Result<(), CliError> {
        if matches!(common.format, OutputFormat::Json | OutputFormat::Both) {
            write_to(common.output.as_ref(), &outcome.report.to_json())?;
        }
        if matches!(common.format, OutputFormat::Csv | OutputFormat::Both) {
            write_to(common.csv.as_ref(), &outcome.table.to_csv())?;
        }
        Ok(())
    };
    if let Err(e) = emit() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    for c in outcome.report.failures() {
        eprintln!("FAILED {}: lhs {:e} {} rhs {:e} (tolerance {:e})", c.name, c.lhs, c.relation, c.rhs, c.tolerance);
    }
    if outcome.report.passed {
        0
    } else {
        1
    }
}
