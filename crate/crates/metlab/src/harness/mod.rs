//! Scenario descriptions, experiment orchestration, and report emission.
//!
//! A scenario is a JSON-serializable description of a cocycle plus an
//! experiment to run on it; running one produces a report whose numeric
//! payload is a pure function of the scenario. Reference answers live in
//! [`oracles`], named constructions in [`catalog`].

pub mod catalog;
pub mod oracles;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cocycle::{BaseSystem, Cocycle, CocycleSystem, Generator};
use crate::error::{Error, Result};
use crate::grassmannian::{hausdorff_distance, Subspace};
use crate::kingman::{self, LogOperatorNorm, Mode, SubadditiveEstimate};
use crate::linalg;
use crate::normed::{NormSpec, Operator};
use crate::opstats::{self, Budgets, CheckReport};
use crate::oseledets::{self, DecompositionConfig, Selection};

/// Version tag of the scenario and report JSON layouts.
pub const SCHEMA_VERSION: u32 = 1;

/// Dense matrix in row-major JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push(m[(r, c)]);
            }
        }
        MatrixJson { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::ScenarioInvalid("matrix with a zero dimension".into()));
        }
        if self.data.len() != self.rows * self.cols {
            return Err(Error::ScenarioInvalid(format!(
                "matrix data length {} does not match {} x {}",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::ScenarioInvalid("matrix entry is not finite".into()));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

/// Base dynamics in JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseJson {
    Rotation { alpha_num: u64 },
    ToralAutomorphism,
    Shift { alphabet: u32 },
}

impl BaseJson {
    pub fn to_system(&self) -> Result<BaseSystem> {
        Ok(match *self {
            BaseJson::Rotation { alpha_num } => BaseSystem::Rotation { alpha_num },
            BaseJson::ToralAutomorphism => BaseSystem::ToralAutomorphism,
            BaseJson::Shift { alphabet } => {
                if alphabet == 0 {
                    return Err(Error::ScenarioInvalid("empty shift alphabet".into()));
                }
                BaseSystem::Shift { alphabet }
            }
        })
    }
}

/// One circular arc of a piecewise generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcJson {
    pub start: u64,
    pub matrix: MatrixJson,
}

/// Generator family in JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorJson {
    Constant { matrix: MatrixJson },
    Alphabet { matrices: Vec<MatrixJson> },
    Arcs { arcs: Vec<ArcJson> },
}

impl GeneratorJson {
    pub fn to_generator(&self) -> Result<Generator> {
        Ok(match self {
            GeneratorJson::Constant { matrix } => Generator::Constant(matrix.to_matrix()?),
            GeneratorJson::Alphabet { matrices } => Generator::Alphabet(
                matrices.iter().map(|m| m.to_matrix()).collect::<Result<_>>()?,
            ),
            GeneratorJson::Arcs { arcs } => Generator::Arcs(
                arcs.iter()
                    .map(|a| Ok((a.start, a.matrix.to_matrix()?)))
                    .collect::<Result<_>>()?,
            ),
        })
    }
}

/// Which experiment a scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Spectrum,
    Decompose,
    KingmanCompare,
    VerifyLemmas,
}

/// Horizons, thresholds, and sampling knobs of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Parameters {
    /// Estimator horizon.
    pub n_max: u64,
    /// Growth statistics per spectrum run; 0 means the ambient dimension.
    pub k_max: usize,
    /// Fixed resolution margin for the decomposition (default: a tenth of
    /// the measured gap).
    pub epsilon: Option<f64>,
    /// Estimator placements to run and compare.
    pub modes: Vec<Mode>,
    /// Decomposition levels to split off.
    pub levels: usize,
    /// Exponent clustering threshold.
    pub gap_threshold: f64,
    /// Agreement tolerance for ground-truth and cross-mode checks.
    pub tolerance: f64,
    /// Instance count for the lemma verification sweep.
    pub instances: usize,
    /// Fast-space selection window half-width.
    pub n_fast: u64,
    /// Slow-translate window length.
    pub n_slow: u64,
    /// Horizon of the projection-norm profile (0 skips it).
    pub temperedness_horizon: u64,
    /// Worker threads for independent sub-tasks; 0 uses the machine width.
    pub threads: usize,
}

impl Default for Parameters {
    fn default() -> Self {
        Parameters {
            n_max: 400,
            k_max: 0,
            epsilon: None,
            modes: Mode::ALL.to_vec(),
            levels: 1,
            gap_threshold: 0.1,
            tolerance: 0.05,
            instances: 50,
            n_fast: 48,
            n_slow: 64,
            temperedness_horizon: 0,
            threads: 0,
        }
    }
}

/// Reference answers attached to a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Exponents, largest first; `None` encodes negative infinity.
    pub lambda: Vec<Option<f64>>,
    /// Multiplicities of the resolvable levels.
    pub multiplicities: Vec<usize>,
    /// Per-level space bases, where closed-form.
    pub spaces: Vec<Option<MatrixJson>>,
    /// Slow-projection matrix after the first level, where closed-form.
    pub projection: Option<MatrixJson>,
    /// Per-entry, per-symbol log diagonal values for strong-law scenarios;
    /// `None` marks a symbol that kills the entry outright.
    pub symbol_logs: Option<Vec<Vec<Option<f64>>>>,
}

/// A complete experiment description: cocycle, experiment, knobs, truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub schema: u32,
    pub name: Option<String>,
    pub base: BaseJson,
    pub generator: GeneratorJson,
    pub norm: NormSpec,
    pub seed: u64,
    pub experiment: Experiment,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default)]
    pub ground_truth: Option<GroundTruth>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::ScenarioInvalid(format!(
                "schema {} not supported (expected {})",
                self.schema, SCHEMA_VERSION
            )));
        }
        if self.parameters.modes.is_empty() {
            return Err(Error::ScenarioInvalid("no estimator modes listed".into()));
        }
        if !(self.parameters.tolerance > 0.0) {
            return Err(Error::ScenarioInvalid("tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Builds the runnable cocycle the scenario describes.
    pub fn to_system(&self) -> Result<CocycleSystem> {
        CocycleSystem::new(
            self.base.to_system()?,
            self.generator.to_generator()?,
            self.norm.clone(),
        )
    }
}

fn opt_log(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Spectrum results in JSON form; `None` encodes negative infinity.
#[derive(Debug, Serialize)]
pub struct SpectrumJson {
    pub mu: Vec<Option<f64>>,
    pub lambda: Vec<Option<f64>>,
    pub multiplicities: Vec<usize>,
    pub nu_hat: Option<f64>,
    pub tracked_levels: usize,
}

/// One decomposition level in JSON form.
#[derive(Debug, Serialize)]
pub struct LevelJson {
    pub lambda: Option<f64>,
    pub multiplicity: usize,
    pub basis: MatrixJson,
    pub slow_matrix: MatrixJson,
    pub equivariance_residual: f64,
    pub fast_decay_slope: Option<f64>,
    pub slow_decay_slope: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct FailureJson {
    pub level: usize,
    pub reason: String,
}

/// Decomposition results in JSON form.
#[derive(Debug, Serialize)]
pub struct DecompositionJson {
    pub levels: Vec<LevelJson>,
    pub slow_matrix: MatrixJson,
    pub slow_rank: usize,
    pub dimension_audit_pass: bool,
    pub slow_growth_rates: Vec<Option<f64>>,
    pub slow_growth_threshold: Option<f64>,
    pub failure: Option<FailureJson>,
}

/// Aggregate of a lemma verification sweep; only failing reports are kept
/// verbatim.
#[derive(Debug, Serialize)]
pub struct LemmaSummary {
    pub instances: usize,
    pub reports_total: usize,
    pub failures: Vec<CheckReport>,
}

/// The output of running one scenario.
#[derive(Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    pub scenario_digest: String,
    pub name: Option<String>,
    pub experiment: Experiment,
    pub seed: u64,
    pub version: String,
    pub checks: Vec<CheckReport>,
    pub spectrum: Option<SpectrumJson>,
    pub kingman: Option<Vec<SubadditiveEstimate>>,
    pub decomposition: Option<DecompositionJson>,
    pub lemmas: Option<LemmaSummary>,
    /// Named `(n, value)` traces for plot-data emission.
    pub traces: BTreeMap<String, Vec<(u64, f64)>>,
    pub runtime_ms: u128,
}

impl Report {
    /// True when every recorded check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// The report JSON with the runtime field removed: the part of the
    /// output that is a pure function of the scenario.
    pub fn payload_json(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let Some(map) = value.as_object_mut() {
            map.remove("runtime_ms");
        }
        Ok(value.to_string())
    }
}

fn scenario_digest(spec: &ScenarioSpec) -> Result<String> {
    use sha2::{Digest, Sha256};
    let json = serde_json::to_string(spec)?;
    let bytes = Sha256::digest(json.as_bytes());
    Ok(bytes.iter().map(|b| format!("{b:02x}")).collect())
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Forward => "forward",
        Mode::Backward => "backward",
        Mode::Window => "window",
        Mode::Balanced => "balanced",
    }
}

/// Difference of two log-scale values where negative infinity is a valid
/// point: equal infinities are distance zero, mixed pairs are infinitely
/// far apart.
fn log_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else if a.is_finite() && b.is_finite() {
        (a - b).abs()
    } else {
        f64::INFINITY
    }
}

fn flag(name: &str, digest: &str, ok: bool) -> CheckReport {
    CheckReport::compare(name, digest.into(), if ok { 0.0 } else { 1.0 }, 0.0, 0.5)
}

/// Runs the scenario's experiment and assembles the report.
pub fn run(spec: &ScenarioSpec) -> Result<Report> {
    spec.validate()?;
    let start = Instant::now();
    let digest = scenario_digest(spec)?;
    let mut report = Report {
        schema: SCHEMA_VERSION,
        scenario_digest: digest,
        name: spec.name.clone(),
        experiment: spec.experiment,
        seed: spec.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        checks: Vec::new(),
        spectrum: None,
        kingman: None,
        decomposition: None,
        lemmas: None,
        traces: BTreeMap::new(),
        runtime_ms: 0,
    };
    match spec.experiment {
        Experiment::Spectrum => run_spectrum(spec, &mut report)?,
        Experiment::KingmanCompare => run_kingman(spec, &mut report)?,
        Experiment::Decompose => run_decompose(spec, &mut report)?,
        Experiment::VerifyLemmas => run_verify(spec, &mut report)?,
    }
    report.runtime_ms = start.elapsed().as_millis();
    Ok(report)
}

fn effective_k(k_max: usize, d: usize) -> usize {
    if k_max == 0 {
        d
    } else {
        k_max.min(d)
    }
}

fn run_spectrum(spec: &ScenarioSpec, report: &mut Report) -> Result<()> {
    let system = spec.to_system()?;
    let point = system.sample_point(spec.seed);
    let p = &spec.parameters;
    let mode = p.modes.first().copied().unwrap_or(Mode::Balanced);
    let budgets = Budgets::default();
    let sr = kingman::lyapunov_spectrum(
        &system,
        &point,
        effective_k(p.k_max, system.ambient_dim()),
        p.n_max,
        mode,
        p.gap_threshold,
        &budgets,
    )?;
    let dg = report.scenario_digest.clone();

    let mut worst = 0.0_f64;
    for w in sr.mu.windows(2) {
        let v = if w[1] == f64::NEG_INFINITY {
            0.0
        } else if w[0] == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            (w[1] - w[0]).max(0.0)
        };
        worst = worst.max(v);
    }
    report.checks.push(CheckReport::compare("mu-monotone", dg.clone(), worst, 0.0, 2e-7));

    let proc = LogOperatorNorm::new(&system);
    report.checks.push(kingman::check_subadditivity(&proc, 60, spec.seed)?);

    if let Some(truth) = &spec.ground_truth {
        for (i, t) in truth.lambda.iter().enumerate() {
            let est = sr.lambda.get(i).copied();
            let lhs = match (est, t) {
                (Some(e), Some(v)) => log_diff(e, *v),
                (Some(e), None) => log_diff(e, f64::NEG_INFINITY),
                (None, _) => f64::INFINITY,
            };
            report.checks.push(CheckReport::compare(
                &format!("exponent-truth-{}", i + 1),
                dg.clone(),
                lhs,
                0.0,
                p.tolerance,
            ));
        }
        let mult_ok = truth
            .multiplicities
            .iter()
            .enumerate()
            .all(|(i, &m)| sr.multiplicities.get(i) == Some(&m));
        report.checks.push(flag("multiplicity-truth", &dg, mult_ok));
        if let Some(mc) = catalog::strong_law_exponents(spec, 200_000)? {
            for (i, &o) in mc.iter().enumerate() {
                let Some(&e) = sr.lambda.get(i) else { break };
                report.checks.push(CheckReport::compare(
                    &format!("strong-law-exponent-{}", i + 1),
                    dg.clone(),
                    log_diff(e, o),
                    0.0,
                    p.tolerance,
                ));
            }
        }
    }

    for (i, est) in sr.estimates.iter().enumerate() {
        report.traces.insert(
            format!("mu-{}", i + 1),
            est.trace.iter().map(|t| (t.n, t.value)).collect(),
        );
    }
    report.spectrum = Some(SpectrumJson {
        mu: sr.mu.iter().copied().map(opt_log).collect(),
        lambda: sr.lambda.iter().copied().map(opt_log).collect(),
        multiplicities: sr.multiplicities.clone(),
        nu_hat: opt_log(sr.nu_hat),
        tracked_levels: sr.tracked_levels,
    });
    Ok(())
}

fn run_kingman(spec: &ScenarioSpec, report: &mut Report) -> Result<()> {
    let system = spec.to_system()?;
    let p = &spec.parameters;
    let proc = LogOperatorNorm::new(&system);
    let dg = report.scenario_digest.clone();
    let mut estimates = Vec::new();
    for &mode in &p.modes {
        estimates.push(kingman::estimate(&proc, spec.seed, mode, p.n_max)?);
    }
    for i in 0..estimates.len() {
        for j in i + 1..estimates.len() {
            report.checks.push(CheckReport::compare(
                &format!(
                    "mode-agreement-{}-{}",
                    mode_name(estimates[i].mode),
                    mode_name(estimates[j].mode)
                ),
                dg.clone(),
                log_diff(estimates[i].c_hat, estimates[j].c_hat),
                0.0,
                p.tolerance,
            ));
        }
    }
    let oracle = match catalog::strong_law_exponents(spec, 200_000)? {
        Some(mc) => mc.first().copied(),
        None => spec.ground_truth.as_ref().and_then(|t| {
            t.lambda.iter().filter_map(|v| *v).fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| a.max(v)))
            })
        }),
    };
    if let Some(o) = oracle {
        for est in &estimates {
            report.checks.push(CheckReport::compare(
                &format!("strong-law-oracle-{}", mode_name(est.mode)),
                dg.clone(),
                log_diff(est.c_hat, o),
                0.0,
                p.tolerance,
            ));
        }
    }
    for est in &estimates {
        report.traces.insert(
            format!("kingman-{}", mode_name(est.mode)),
            est.trace.iter().map(|t| (t.n, t.value)).collect(),
        );
    }
    report.kingman = Some(estimates);
    Ok(())
}

fn run_decompose(spec: &ScenarioSpec, report: &mut Report) -> Result<()> {
    let system = spec.to_system()?;
    let point = system.sample_point(spec.seed);
    let p = &spec.parameters;
    let dg = report.scenario_digest.clone();
    let config = DecompositionConfig {
        levels: p.levels.max(1),
        k_max: p.k_max,
        n_spectrum: p.n_max.max(8),
        mode: p.modes.first().copied().unwrap_or(Mode::Balanced),
        gap_threshold: p.gap_threshold,
        epsilon_override: p.epsilon,
        n_fast: p.n_fast,
        n_slow: p.n_slow,
        check_horizon: p.n_fast,
        selection: Selection::Optimized,
        budgets: Budgets::default(),
        temperedness_horizon: p.temperedness_horizon,
        ..DecompositionConfig::default()
    };
    let dec = oseledets::full_decomposition(&system, &point, &config)?;

    report.checks.push(flag("dimension-audit", &dg, dec.residuals.dimension_audit_pass));
    let decreasing = dec.levels.windows(2).all(|w| w[1].lambda < w[0].lambda);
    report.checks.push(flag("exponents-decreasing", &dg, decreasing));
    for (l, level) in dec.levels.iter().enumerate() {
        report.checks.push(CheckReport::compare(
            &format!("equivariance-level-{}", l + 1),
            dg.clone(),
            level.equivariance_residual,
            0.0,
            1e-3,
        ));
    }
    report.checks.extend(dec.residuals.fast_sum_checks.iter().cloned());

    for (l, level) in dec.levels.iter().enumerate() {
        let m = &level.slow_matrix;
        let scale = linalg::frobenius(m).max(1.0);
        report.checks.push(CheckReport::compare(
            &format!("slow-idempotency-level-{}", l + 1),
            dg.clone(),
            linalg::frobenius(&(m * m - m)),
            0.0,
            1e-8 * scale * scale,
        ));
    }
    let m = &dec.slow_matrix;
    if dec.residuals.slow_rank > 0 {
        let scale = linalg::frobenius(m).max(1.0);
        report.checks.push(CheckReport::compare(
            "slow-idempotency",
            dg.clone(),
            linalg::frobenius(&(m * m - m)),
            0.0,
            1e-8 * scale * scale,
        ));
    } else if !dec.levels.is_empty() {
        // Every direction was consumed, so the composite must vanish, up to
        // per-level estimation error amplified through the projection chain.
        let junk_scale: f64 = dec
            .levels
            .iter()
            .map(|l| linalg::frobenius(&l.slow_matrix).max(1.0))
            .product();
        report.checks.push(CheckReport::compare(
            "slow-composite-null",
            dg.clone(),
            linalg::frobenius(m),
            0.0,
            1e-4 * junk_scale,
        ));
    }

    // A truncated floor gives the probes nothing finite to sit under:
    // round-off contamination in the probe directions dominates long before
    // any fixed-precision rate could certify an unbounded decay.
    if dec.residuals.slow_growth_threshold.is_finite() {
        for (i, &rate) in dec.residuals.slow_growth_rates.iter().enumerate() {
            report.checks.push(CheckReport::compare(
                &format!("slow-growth-below-floor-{}", i + 1),
                dg.clone(),
                rate,
                dec.residuals.slow_growth_threshold,
                p.tolerance,
            ));
        }
    }

    if let Some(truth) = &spec.ground_truth {
        // A level whose exponent the truth leaves open (a genuinely
        // bottomless one) never resolves above the truncation floor, so
        // only the stated exponents are owed.
        let resolvable = truth.lambda.iter().filter(|l| l.is_some()).count();
        report.checks.push(CheckReport::compare(
            "levels-resolved",
            dg.clone(),
            (dec.levels.len() as f64 - resolvable as f64).abs(),
            0.0,
            0.0,
        ));
        for (i, level) in dec.levels.iter().enumerate() {
            if let Some(Some(t)) = truth.lambda.get(i) {
                report.checks.push(CheckReport::compare(
                    &format!("exponent-truth-{}", i + 1),
                    dg.clone(),
                    log_diff(level.lambda, *t),
                    0.0,
                    p.tolerance,
                ));
            }
            if let Some(Some(basis)) = truth.spaces.get(i) {
                let space = Subspace::from_span(&basis.to_matrix()?)?;
                report.checks.push(CheckReport::compare(
                    &format!("space-truth-{}", i + 1),
                    dg.clone(),
                    hausdorff_distance(&level.space, &space, system.norm())?,
                    0.0,
                    1e-3,
                ));
            }
        }
        if let (Some(pi), Some(first)) = (&truth.projection, dec.levels.first()) {
            report.checks.push(CheckReport::compare(
                "projection-truth",
                dg.clone(),
                linalg::max_abs(&(&first.slow_matrix - pi.to_matrix()?)),
                0.0,
                1e-6,
            ));
        }
    }

    for (l, level) in dec.levels.iter().enumerate() {
        report
            .traces
            .insert(format!("fast-gap-level-{}", l + 1), level.fast_gaps.clone());
        report
            .traces
            .insert(format!("slow-gap-level-{}", l + 1), level.slow_gaps.clone());
    }
    if let Some(profile) = &dec.residuals.temperedness {
        report.traces.insert("temperedness".into(), profile.samples.clone());
        report.checks.push(CheckReport::compare(
            "temperedness-final",
            dg.clone(),
            profile.final_value.abs(),
            0.0,
            0.02,
        ));
    }

    report.decomposition = Some(DecompositionJson {
        levels: dec
            .levels
            .iter()
            .map(|level| LevelJson {
                lambda: opt_log(level.lambda),
                multiplicity: level.multiplicity,
                basis: MatrixJson::from_matrix(level.space.basis()),
                slow_matrix: MatrixJson::from_matrix(&level.slow_matrix),
                equivariance_residual: level.equivariance_residual,
                fast_decay_slope: level.fast_decay_slope,
                slow_decay_slope: level.slow_decay_slope,
            })
            .collect(),
        slow_matrix: MatrixJson::from_matrix(&dec.slow_matrix),
        slow_rank: dec.residuals.slow_rank,
        dimension_audit_pass: dec.residuals.dimension_audit_pass,
        slow_growth_rates: dec
            .residuals
            .slow_growth_rates
            .iter()
            .copied()
            .map(opt_log)
            .collect(),
        slow_growth_threshold: opt_log(dec.residuals.slow_growth_threshold),
        failure: dec
            .failure
            .map(|f| FailureJson { level: f.level, reason: f.reason }),
    });
    Ok(())
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit_interval(state: &mut u64) -> f64 {
    (splitmix(state) >> 11) as f64 / (1u64 << 53) as f64
}

fn random_matrix(state: &mut u64, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| 2.0 * unit_interval(state) - 1.0)
}

fn cycle_norm(i: usize) -> NormSpec {
    match i % 3 {
        0 => NormSpec::L1,
        1 => NormSpec::L2,
        _ => NormSpec::Linf,
    }
}

/// One instance of the lemma sweep: random operators and subspaces for the
/// growth chains, a well-separated operator for the contraction estimate,
/// and a diagonal pair for the projection sandwich.
fn verify_instance(seed: u64, index: usize, budgets: &Budgets) -> Result<Vec<CheckReport>> {
    let mut state = seed ^ (index as u64).wrapping_mul(0xD134_2543_DE82_EF95);
    let d = 2 + (splitmix(&mut state) % 3) as usize;
    let norm = cycle_norm(index);
    let k = 1 + (splitmix(&mut state) as usize) % 3.min(d - 1).max(1);

    let mut reports = Vec::new();
    let t = Operator::endomorphism(random_matrix(&mut state, d, d), norm.clone())?;
    let s = Operator::endomorphism(random_matrix(&mut state, d, d), norm.clone())?;
    let v = Subspace::from_span(&random_matrix(&mut state, d, k))?;
    reports.extend(opstats::check_growth_inequalities(&s, &t, &v, budgets)?);
    reports.extend(opstats::check_bernstein_chain(&s, &t, k, budgets)?);
    reports.extend(opstats::check_snumber_chain(&t, 3.min(d), budgets)?);

    // A strongly separated operator keeps the contraction preconditions
    // comfortably satisfiable: growth on the perturbed top space stays far
    // above the next Bernstein number.
    let mut logs: Vec<f64> = (0..d)
        .map(|i| 1.5 - 1.2 * i as f64 + 0.2 * (unit_interval(&mut state) - 0.5))
        .collect();
    logs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let diag = DMatrix::from_fn(d, d, |r, c| if r == c { logs[r].exp() } else { 0.0 });
    let q1 = rotation_product(&mut state, d);
    let q2 = rotation_product(&mut state, d);
    let sep = Operator::endomorphism(&q1 * &diag * &q2, norm.clone())?;
    let top = q2.transpose().columns(0, k).into_owned();
    let v2 = Subspace::from_span(&(&top + random_matrix(&mut state, d, k) * 0.02))?;
    let w2 = Subspace::from_span(&(&top + random_matrix(&mut state, d, k) * 0.02))?;
    match opstats::check_contraction(&sep, &v2, &w2, budgets) {
        Ok(more) => reports.extend(more),
        Err(Error::PreconditionViolation(_)) => {}
        Err(e) => return Err(e),
    }

    // Diagonal operator with coordinate projections: the projections
    // intertwine it exactly, kernel directions dominate the range.
    let pi_matrix = DMatrix::from_fn(d, d, |r, c| {
        if r == c && r >= k {
            1.0
        } else {
            0.0
        }
    });
    let range: Vec<usize> = (k..d).collect();
    let kernel: Vec<usize> = (0..k).collect();
    let pi = crate::grassmannian::Projection::from_parts(
        pi_matrix,
        Subspace::coordinate(d, &range)?,
        Subspace::coordinate(d, &kernel)?,
        1e-12,
    )?;
    let t3 = Operator::endomorphism(diag, norm)?;
    reports.extend(opstats::check_sandwich(&t3, &pi, &pi, 1, budgets)?);
    Ok(reports)
}

fn rotation_product(state: &mut u64, d: usize) -> DMatrix<f64> {
    let mut q = DMatrix::identity(d, d);
    for i in 0..d {
        for j in i + 1..d {
            let theta = 2.0 * std::f64::consts::PI * unit_interval(state);
            let mut g = DMatrix::identity(d, d);
            g[(i, i)] = theta.cos();
            g[(j, j)] = theta.cos();
            g[(i, j)] = -theta.sin();
            g[(j, i)] = theta.sin();
            q = q * g;
        }
    }
    q
}

fn effective_threads(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
}

/// Runs `f` over `0..count` on up to `threads` workers, returning results
/// in index order regardless of scheduling.
fn parallel_map<T, F>(count: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = threads.clamp(1, count.max(1));
    if threads == 1 {
        return (0..count).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..count).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let value = f(i);
                *slots[i].lock().expect("result slot poisoned") = Some(value);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner().expect("result slot poisoned").expect("worker skipped a slot")
        })
        .collect()
}

fn run_verify(spec: &ScenarioSpec, report: &mut Report) -> Result<()> {
    let p = &spec.parameters;
    let instances = p.instances.max(1);
    let budgets = Budgets::default();
    let results = parallel_map(instances, effective_threads(p.threads), |i| {
        verify_instance(spec.seed, i, &budgets)
    });
    let mut total = 0usize;
    let mut failures = Vec::new();
    for r in results {
        let reports = r?;
        total += reports.len();
        failures.extend(reports.into_iter().filter(|c| !c.pass));
    }
    let dg = report.scenario_digest.clone();
    report.checks.push(CheckReport::compare(
        "lemma-suite",
        dg,
        failures.len() as f64,
        0.0,
        0.5,
    ));
    report.lemmas = Some(LemmaSummary { instances, reports_total: total, failures });
    Ok(())
}

/// Renders one named trace as two-column CSV with a header row.
pub fn emit_plotdata(report: &Report, trace: &str) -> Result<String> {
    let rows = report
        .traces
        .get(trace)
        .ok_or_else(|| Error::UnknownTrace(trace.into()))?;
    let mut out = String::from("n,value\n");
    for &(n, v) in rows {
        out.push_str(&format!("{n},{v:.16e}\n"));
    }
    Ok(out)
}

/// Writes `report.json` and one CSV per trace into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    std::fs::write(dir.join("report.json"), json)?;
    for name in report.traces.keys() {
        std::fs::write(dir.join(format!("{name}.csv")), emit_plotdata(report, name)?)?;
    }
    Ok(())
}
