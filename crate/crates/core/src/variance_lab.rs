//! Multi-gate Haar variances and the bounds that tie them together.
//!
//! All estimators draw every variable gate of the circuit independently from
//! the Haar measure. Per-slot conditional moments (`Var_{U_i} E`,
//! `Avg_{U_i} E`, `Var_{U_i} ĝ_i`) are evaluated exactly from the slot's
//! environment, so only the outer average over the remaining gates is
//! sampled. Standard errors are jackknife estimates over outer samples, and
//! statistical comparisons allow `confidence_sigmas` combined standard
//! errors (added in quadrature).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::circuit::{Circuit, GateAssignment, GateSlot, ObservableKind, ReferenceState, DIMENSION_LIMIT};
use crate::error::{Error, Result};
use crate::haar::{derive_seed, haar_unitary, SeededStream};
use crate::riemannian::{gradient_sq_norm, riemannian_gradient};
use crate::sampling::SampleMap;
use crate::stats::{combined_se, linear_fit, mean_estimate, variance_estimate, Estimate};
use crate::weingarten::SingleGateMoments;

/// Minimum sample count for any estimator that backs an assertion.
pub const MIN_SAMPLES: usize = 100;

/// Relative tolerance of the exact per-draw check `Var E = ½ Var ĝ`.
pub const EQUIVALENCE_TOL: f64 = 1e-10;

const TAG_JOINT: u64 = 1;
const TAG_SLOT: u64 = 2;
const TAG_INNER: u64 = 3;
const TAG_SCAN: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    /// Haar draws of the gates that are averaged over.
    pub outer_samples: usize,
    /// Haar draws of the varied gate where it is sampled rather than integrated.
    pub inner_samples: usize,
    pub master_seed: u64,
    pub confidence_sigmas: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { outer_samples: 200, inner_samples: 100_000, master_seed: 0, confidence_sigmas: 5.0 }
    }
}

impl EstimatorConfig {
    fn require_outer(&self) -> Result<()> {
        require_samples(self.outer_samples)
    }
}

fn require_samples(found: usize) -> Result<()> {
    if found < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { required: MIN_SAMPLES, found });
    }
    Ok(())
}

fn check_equivalence(m: &SingleGateMoments) -> Result<()> {
    let residual = m.equivalence_residual();
    if residual > EQUIVALENCE_TOL * m.var_e.max(1.0) {
        return Err(Error::Violation(format!(
            "single-gate variance equivalence: Var g = {:e}, 2 Var E = {:e}",
            m.var_g,
            2.0 * m.var_e
        )));
    }
    Ok(())
}

/// Exact per-slot quantities for one joint Haar draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotSample {
    pub moments: SingleGateMoments,
    /// `(1/N_i) Tr(ĝ_i† ĝ_i)` at the drawn gates
    pub grad_sq_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointSample {
    pub cost: f64,
    pub slots: Vec<SlotSample>,
    pub max_equivalence_residual: f64,
}

/// Draws all variable gates from `stream` and evaluates the cost together
/// with every slot's conditional moments and gradient.
pub fn joint_sample(circuit: &Circuit, stream: SeededStream) -> Result<JointSample> {
    let a = GateAssignment::haar(circuit, &mut stream.rng());
    let mut slots = Vec::with_capacity(circuit.num_variable());
    let mut cost = None;
    let mut max_residual: f64 = 0.0;
    circuit.for_each_environment(&a, |i, env| {
        let u = &a.unitaries[i];
        if cost.is_none() {
            cost = Some(env.cost(u)?);
        }
        let moments = SingleGateMoments::from_env(&env)?;
        check_equivalence(&moments)?;
        max_residual = max_residual.max(moments.equivalence_residual());
        let g = riemannian_gradient(&env, u)?;
        slots.push(SlotSample { moments, grad_sq_norm: gradient_sq_norm(&g) });
        Ok(())
    })?;
    let cost = match cost {
        Some(c) => c,
        None => circuit.cost(&a)?,
    };
    if !cost.is_finite() {
        return Err(Error::NonFiniteCost);
    }
    Ok(JointSample { cost, slots, max_equivalence_residual: max_residual })
}

fn joint_samples<S: SampleMap>(circuit: &Circuit, seed: u64, count: usize, runner: &S) -> Result<Vec<JointSample>> {
    let seed = derive_seed(seed, TAG_JOINT);
    runner
        .map_indexed(count, |idx| joint_sample(circuit, SeededStream::new(seed, idx)))
        .into_iter()
        .collect()
}

/// Conditional single-gate statistics sampled over `U_i` alone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingleGateMc {
    pub avg_e: Estimate,
    pub var_e: Estimate,
    /// Monte-Carlo `Avg_{U_i} (1/N) Tr(ĝ_i† ĝ_i)`
    pub var_g: Estimate,
    /// exact values for the same environment
    pub analytic: SingleGateMoments,
    pub samples: usize,
}

impl SingleGateMc {
    /// Whether all three sampled quantities agree with the exact moments.
    pub fn agrees(&self, sigmas: f64) -> bool {
        self.avg_e.agrees_with(self.analytic.avg_e, sigmas)
            && self.var_e.agrees_with(self.analytic.var_e, sigmas)
            && self.var_g.agrees_with(self.analytic.var_g, sigmas)
    }
}

/// Samples `Var_{U_i} E` and `Var_{U_i} ĝ_i` with the other gates held at
/// `fixed`.
pub fn single_gate_variance_mc<S: SampleMap>(
    circuit: &Circuit,
    i: usize,
    fixed: &GateAssignment,
    samples: usize,
    seed: u64,
    runner: &S,
) -> Result<SingleGateMc> {
    require_samples(samples)?;
    let env = circuit.environment(fixed, i)?;
    let analytic = SingleGateMoments::from_env(&env)?;
    let n = env.n();
    let seed = derive_seed(seed, TAG_INNER);
    let draws: Vec<(f64, f64)> = runner
        .map_indexed(samples, |idx| {
            let u = haar_unitary(n, &mut SeededStream::new(seed, idx).rng());
            let e = env.cost(&u)?;
            let g = riemannian_gradient(&env, &u)?;
            Ok((e, gradient_sq_norm(&g)))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let costs: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let norms: Vec<f64> = draws.iter().map(|d| d.1).collect();
    Ok(SingleGateMc {
        avg_e: mean_estimate(&costs),
        var_e: variance_estimate(&costs),
        var_g: mean_estimate(&norms),
        analytic,
        samples,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AveragedVariance {
    pub slot: usize,
    /// `V_i = Avg_{U_{j≠i}} Var_{U_i} E`
    pub v: Estimate,
    /// `Avg_{U_{j≠i}} Var_{U_i} ĝ_i`, which equals `2 V_i`
    pub v_grad: Estimate,
    pub max_equivalence_residual: f64,
    pub samples: usize,
}

/// `V_i` by outer Haar sampling of the other gates and exact inner
/// evaluation. Every outer draw is checked for `Var E = ½ Var ĝ`.
pub fn averaged_single_gate_variance<S: SampleMap>(
    circuit: &Circuit,
    i: usize,
    config: &EstimatorConfig,
    runner: &S,
) -> Result<AveragedVariance> {
    circuit.variable_slot(i)?;
    let k = circuit.num_variable();
    // with no other gates there is nothing to average over
    let count = if k == 1 { 1 } else {
        config.require_outer()?;
        config.outer_samples
    };
    let seed = derive_seed(derive_seed(config.master_seed, TAG_SLOT), i as u64);
    let per_draw: Vec<SingleGateMoments> = runner
        .map_indexed(count, |idx| {
            let a = GateAssignment::haar(circuit, &mut SeededStream::new(seed, idx).rng());
            let env = circuit.environment(&a, i)?;
            let m = SingleGateMoments::from_env(&env)?;
            check_equivalence(&m)?;
            Ok(m)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let var_e: Vec<f64> = per_draw.iter().map(|m| m.var_e).collect();
    let var_g: Vec<f64> = per_draw.iter().map(|m| m.var_g).collect();
    Ok(AveragedVariance {
        slot: i,
        v: mean_estimate(&var_e),
        v_grad: mean_estimate(&var_g),
        max_equivalence_residual: per_draw.iter().map(|m| m.equivalence_residual()).fold(0.0, f64::max),
        samples: count,
    })
}

/// `Var_{U_1…U_K} E` over joint Haar draws.
pub fn total_cost_variance_mc<S: SampleMap>(circuit: &Circuit, config: &EstimatorConfig, runner: &S) -> Result<Estimate> {
    config.require_outer()?;
    let seed = derive_seed(config.master_seed, TAG_JOINT);
    let costs: Vec<f64> = runner
        .map_indexed(config.outer_samples, |idx| {
            let a = GateAssignment::haar(circuit, &mut SeededStream::new(seed, idx).rng());
            circuit.cost(&a)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(variance_estimate(&costs))
}

/// `Var ĝ_full = (1/K) Σ_i Avg (1/N_i) Tr(ĝ_i† ĝ_i)` over joint Haar draws.
pub fn total_gradient_variance<S: SampleMap>(circuit: &Circuit, config: &EstimatorConfig, runner: &S) -> Result<Estimate> {
    config.require_outer()?;
    let k = circuit.num_variable();
    if k == 0 {
        return Err(Error::SlotCount { expected: 1, found: 0 });
    }
    let seed = derive_seed(config.master_seed, TAG_JOINT);
    let per_draw: Vec<f64> = runner
        .map_indexed(config.outer_samples, |idx| {
            let a = GateAssignment::haar(circuit, &mut SeededStream::new(seed, idx).rng());
            let mut total = 0.0;
            circuit.for_each_environment(&a, |i, env| {
                total += gradient_sq_norm(&riemannian_gradient(&env, &a.unitaries[i])?);
                Ok(())
            })?;
            Ok(total / k as f64)
        })
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(mean_estimate(&per_draw))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    LessEq,
    Equal,
}

/// One statistical comparison `lhs ≤ rhs` or `lhs = rhs`, allowing
/// `margin` (confidence sigmas times the combined standard error).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

impl BoundCheck {
    pub fn new(name: &str, relation: Relation, lhs: f64, rhs: f64, margin: f64) -> Self {
        // absolute floor so that exactly vanishing quantities compare equal
        let slack = margin + 1e-12;
        let pass = match relation {
            Relation::LessEq => lhs <= rhs + slack,
            Relation::Equal => (lhs - rhs).abs() <= slack,
        };
        Self { name: name.into(), relation, lhs, rhs, margin, pass }
    }

    /// Signed distance from violation: `rhs − lhs` for inequalities,
    /// `−|lhs − rhs|` for equalities.
    pub fn gap(&self) -> f64 {
        match self.relation {
            Relation::LessEq => self.rhs - self.lhs,
            Relation::Equal => -(self.lhs - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarianceReport {
    /// `V_i` per variable slot
    pub per_slot: Vec<Estimate>,
    /// `Avg_{U_{j≠i}} Var_{U_i} ĝ_i` per variable slot
    pub per_slot_grad: Vec<Estimate>,
    pub total_var_e: Estimate,
    pub total_var_g: Estimate,
    pub sum_v: Estimate,
    pub bound_checks: Vec<BoundCheck>,
    pub max_equivalence_residual: f64,
    pub master_seed: u64,
    pub outer_samples: usize,
}

impl VarianceReport {
    pub fn passed(&self) -> bool {
        self.bound_checks.iter().all(|c| c.pass)
    }

    /// Observed `Var E / Σ V_i`, or `None` when every `V_i` vanishes.
    pub fn upper_ratio(&self) -> Option<f64> {
        (self.sum_v.value > 0.0).then(|| self.total_var_e.value / self.sum_v.value)
    }
}

fn summarize(samples: &[JointSample], k: usize, sigmas: f64, seed: u64) -> VarianceReport {
    let per_slot: Vec<Estimate> = (0..k)
        .map(|i| mean_estimate(&samples.iter().map(|s| s.slots[i].moments.var_e).collect::<Vec<_>>()))
        .collect();
    let per_slot_grad: Vec<Estimate> = (0..k)
        .map(|i| mean_estimate(&samples.iter().map(|s| s.slots[i].moments.var_g).collect::<Vec<_>>()))
        .collect();
    let costs: Vec<f64> = samples.iter().map(|s| s.cost).collect();
    let total_var_e = variance_estimate(&costs);
    let kf = k.max(1) as f64;
    let total_var_g = mean_estimate(
        &samples.iter().map(|s| s.slots.iter().map(|x| x.grad_sq_norm).sum::<f64>() / kf).collect::<Vec<_>>(),
    );
    let sum_v = mean_estimate(
        &samples.iter().map(|s| s.slots.iter().map(|x| x.moments.var_e).sum::<f64>()).collect::<Vec<_>>(),
    );

    let mut checks = Vec::new();
    if k > 0 {
        // V_j ≤ Var E for every j; record the tightest one
        let mut lower: Option<BoundCheck> = None;
        for v in &per_slot {
            let margin = sigmas * combined_se(&[v.se, total_var_e.se]);
            let c = BoundCheck::new("lower: V_j <= Var E", Relation::LessEq, v.value, total_var_e.value, margin);
            let worse = match &lower {
                None => true,
                Some(l) => (!c.pass && l.pass) || (c.pass == l.pass && c.gap() + c.margin < l.gap() + l.margin),
            };
            if worse {
                lower = Some(c);
            }
        }
        checks.extend(lower);
        checks.push(BoundCheck::new(
            "upper: Var E <= sum V_i",
            Relation::LessEq,
            total_var_e.value,
            sum_v.value,
            sigmas * combined_se(&[total_var_e.se, sum_v.se]),
        ));
        checks.push(BoundCheck::new(
            "gradient: (K/2) Var g_full = sum V_i",
            Relation::Equal,
            kf / 2.0 * total_var_g.value,
            sum_v.value,
            sigmas * combined_se(&[kf / 2.0 * total_var_g.se, sum_v.se]),
        ));
    }
    VarianceReport {
        per_slot,
        per_slot_grad,
        total_var_e,
        total_var_g,
        sum_v,
        bound_checks: checks,
        max_equivalence_residual: samples.iter().map(|s| s.max_equivalence_residual).fold(0.0, f64::max),
        master_seed: seed,
        outer_samples: samples.len(),
    }
}

/// Estimates every `V_i`, both total variances and the sandwich
/// `max_j V_j ≤ Var E ≤ Σ V_i` together with `(K/2) Var ĝ_full = Σ V_i`.
/// Violations are recorded in the report, not raised.
pub fn theorem2_report<S: SampleMap>(circuit: &Circuit, config: &EstimatorConfig, runner: &S) -> Result<VarianceReport> {
    config.require_outer()?;
    let k = circuit.num_variable();
    if k == 0 {
        return Err(Error::SlotCount { expected: 1, found: 0 });
    }
    let samples = joint_samples(circuit, config.master_seed, config.outer_samples, runner)?;
    Ok(summarize(&samples, k, config.confidence_sigmas, config.master_seed))
}

/// Like [`theorem2_report`], but any check that fails beyond its margin is
/// an error: the bounds are exact, so a failure indicates a defect.
pub fn check_theorem2<S: SampleMap>(circuit: &Circuit, config: &EstimatorConfig, runner: &S) -> Result<VarianceReport> {
    let report = theorem2_report(circuit, config, runner)?;
    if let Some(c) = report.bound_checks.iter().find(|c| !c.pass) {
        return Err(Error::Violation(format!("{}: lhs {:e}, rhs {:e}, margin {:e}", c.name, c.lhs, c.rhs, c.margin)));
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionReport {
    /// `Avg_2 Var_1 E`
    pub avg2_var1: Estimate,
    /// `Avg_1 Var_2 E`
    pub avg1_var2: Estimate,
    /// `Var_{1,2} E`
    pub var12: Estimate,
    /// `Avg_2 Var_1 E + Avg_1 Var_2 E − Var_{1,2} E`, the covariance trace
    pub correction: Estimate,
    pub check: BoundCheck,
}

/// Two-gate split `Var_{1,2} E = Avg_2 Var_1 E + Avg_1 Var_2 E − Σ Cov·Cov`
/// with a non-negative correction.
pub fn two_gate_decomposition_check<S: SampleMap>(
    circuit: &Circuit,
    config: &EstimatorConfig,
    runner: &S,
) -> Result<DecompositionReport> {
    let k = circuit.num_variable();
    if k != 2 {
        return Err(Error::SlotCount { expected: 2, found: k });
    }
    config.require_outer()?;
    let samples = joint_samples(circuit, config.master_seed, config.outer_samples, runner)?;
    let slot = |i: usize| mean_estimate(&samples.iter().map(|s| s.slots[i].moments.var_e).collect::<Vec<_>>());
    let avg2_var1 = slot(0);
    let avg1_var2 = slot(1);
    let var12 = variance_estimate(&samples.iter().map(|s| s.cost).collect::<Vec<_>>());
    let se = combined_se(&[avg2_var1.se, avg1_var2.se, var12.se]);
    let correction = Estimate { value: avg2_var1.value + avg1_var2.value - var12.value, se };
    let check = BoundCheck::new(
        "decomposition: covariance correction >= 0",
        Relation::LessEq,
        0.0,
        correction.value,
        config.confidence_sigmas * se,
    );
    Ok(DecompositionReport { avg2_var1, avg1_var2, var12, correction, check })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TotalVarianceReport {
    pub slot: usize,
    pub total: Estimate,
    /// `Avg_{j≠i} Var_i E = V_i`
    pub avg_var: Estimate,
    /// `Var_{j≠i} Avg_i E`
    pub var_avg: Estimate,
    pub check: BoundCheck,
}

/// `Var E = Avg_{j≠i} Var_i E + Var_{j≠i} Avg_i E` with exact inner moments.
pub fn law_of_total_variance_check<S: SampleMap>(
    circuit: &Circuit,
    i: usize,
    config: &EstimatorConfig,
    runner: &S,
) -> Result<TotalVarianceReport> {
    circuit.variable_slot(i)?;
    config.require_outer()?;
    let samples = joint_samples(circuit, config.master_seed, config.outer_samples, runner)?;
    let total = variance_estimate(&samples.iter().map(|s| s.cost).collect::<Vec<_>>());
    let avg_var = mean_estimate(&samples.iter().map(|s| s.slots[i].moments.var_e).collect::<Vec<_>>());
    let var_avg = variance_estimate(&samples.iter().map(|s| s.slots[i].moments.avg_e).collect::<Vec<_>>());
    let se = combined_se(&[total.se, avg_var.se, var_avg.se]);
    let check = BoundCheck::new(
        "total variance: Var E = Avg Var_i E + Var Avg_i E",
        Relation::Equal,
        total.value,
        avg_var.value + var_avg.value,
        config.confidence_sigmas * se,
    );
    Ok(TotalVarianceReport { slot: i, total, avg_var, var_avg, check })
}

/// Circuit families available to scans.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnsatzFamily {
    /// Layers of single-qubit gates followed by a CNOT ladder.
    HardwareEfficient,
    /// One single-qubit gate per qubit, no entanglers; layers are ignored.
    ProductCost,
}

impl AnsatzFamily {
    pub const ALL: [AnsatzFamily; 2] = [AnsatzFamily::HardwareEfficient, AnsatzFamily::ProductCost];

    pub fn name(self) -> &'static str {
        match self {
            AnsatzFamily::HardwareEfficient => "hardware-efficient",
            AnsatzFamily::ProductCost => "product-cost",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn build(self, n: usize, layers: usize, observable: ObservableKind) -> Result<Circuit> {
        if n >= usize::BITS as usize || (1usize << n) > DIMENSION_LIMIT {
            return Err(Error::DimensionLimit { dim: 1usize.checked_shl(n as u32).unwrap_or(usize::MAX), limit: DIMENSION_LIMIT });
        }
        match self {
            AnsatzFamily::HardwareEfficient => crate::circuit::hardware_efficient(n, layers, observable),
            AnsatzFamily::ProductCost => Circuit::new(
                alloc::vec![2; n],
                (0..n).map(|q| GateSlot::variable(&[q])).collect(),
                ReferenceState::Basis(alloc::vec![0; n]),
                observable.observable(n),
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayersRule {
    Fixed(usize),
    /// `L = n`
    EqualToQubits,
}

impl LayersRule {
    pub fn layers(self, n: usize) -> usize {
        match self {
            LayersRule::Fixed(l) => l,
            LayersRule::EqualToQubits => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub n: usize,
    pub layers: usize,
    pub report: VarianceReport,
}

impl ScanRow {
    pub fn k(&self) -> usize {
        self.report.per_slot.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanTable {
    pub family: AnsatzFamily,
    pub observable: ObservableKind,
    pub rows: Vec<ScanRow>,
    /// least-squares fit of `ln Var E` against `n` over rows with positive
    /// variance: `(slope, intercept)`
    pub fit: Option<(f64, f64)>,
}

impl ScanTable {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.0)
    }

    pub fn bounds_hold(&self) -> bool {
        self.rows.iter().all(|r| r.report.passed())
    }
}

/// Variance report for every system size in `ns`, plus the log-linear fit
/// of the total cost variance.
pub fn plateau_scan<S: SampleMap>(
    family: AnsatzFamily,
    ns: &[usize],
    layers: LayersRule,
    observable: ObservableKind,
    config: &EstimatorConfig,
    runner: &S,
) -> Result<ScanTable> {
    // validate every size before spending time on any of them
    let circuits = ns
        .iter()
        .map(|&n| family.build(n, layers.layers(n), observable).map(|c| (n, c)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(circuits.len());
    for (n, circuit) in circuits {
        let row_config = EstimatorConfig {
            master_seed: derive_seed(derive_seed(config.master_seed, TAG_SCAN), n as u64),
            ..*config
        };
        let report = theorem2_report(&circuit, &row_config, runner)?;
        rows.push(ScanRow { n, layers: layers.layers(n), report });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.report.total_var_e.value > 0.0)
        .map(|r| (r.n as f64, libm::log(r.report.total_var_e.value)))
        .unzip();
    Ok(ScanTable { family, observable, rows, fit: linear_fit(&xs, &ys) })
}
