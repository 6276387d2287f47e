//! Subadditive processes over a cocycle and their limit estimators.
//!
//! A stationary subadditive process assigns a value to every time interval
//! of every orbit, splitting no worse than the sum of its parts. Its
//! normalized values converge to a constant, which four different interval
//! placements estimate: growing from the time origin, ending at it, sliding
//! ahead of it, or growing symmetrically around it (the balanced variant,
//! which converges without ever inverting anything). The spectral content
//! of a cocycle is recovered by running these estimators on the log
//! Bernstein numbers of interval products and clustering the limits.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cocycle::{BasePoint, Cocycle};
use crate::error::{Error, Result};
use crate::normed::ExtremizeBudget;
use crate::opstats::{Budgets, CheckReport, InputDigest};

/// Numerical slack allowed when verifying the splitting inequality.
pub const SPLIT_TOL: f64 = 1e-8;

/// A stationary family of interval values `f_{a -> b}` along orbits.
///
/// Implementations must be stationary by construction (the value depends
/// only on the orbit stretch, not on where indexing starts); processes
/// derived from [`Cocycle`] intervals inherit this exactly.
pub trait SubadditiveProcess: Send + Sync {
    /// The value over `[a, b)` based at `p`. Extended-real: `-inf` allowed.
    fn eval(&self, p: &BasePoint, a: i64, b: i64) -> Result<f64>;
    /// Short provenance tag for reports (e.g. `log-operator-norm`).
    fn tag(&self) -> String;
    /// Deterministic base point from a seed.
    fn sample_point(&self, seed: u64) -> BasePoint;
}

/// `log ‖L_{a -> b}‖`: subadditive because operator norms are
/// submultiplicative.
pub struct LogOperatorNorm<'a> {
    system: &'a dyn Cocycle,
    budget: ExtremizeBudget,
}

impl<'a> LogOperatorNorm<'a> {
    pub fn new(system: &'a dyn Cocycle) -> Self {
        LogOperatorNorm { system, budget: ExtremizeBudget::default() }
    }

    pub fn with_budget(system: &'a dyn Cocycle, budget: ExtremizeBudget) -> Self {
        LogOperatorNorm { system, budget }
    }
}

impl SubadditiveProcess for LogOperatorNorm<'_> {
    fn eval(&self, p: &BasePoint, a: i64, b: i64) -> Result<f64> {
        self.system.interval(p, a, b).log_norm(self.system.norm(), &self.budget)
    }

    fn tag(&self) -> String {
        "log-operator-norm".into()
    }

    fn sample_point(&self, seed: u64) -> BasePoint {
        self.system.sample_point(seed)
    }
}

/// Window length up to which `log ρ_k` is evaluated directly on the
/// assembled interval product. Past this the lower singular values of the
/// product sit beyond the arithmetic's resolution relative to the top one,
/// so longer windows switch to the orthogonalized sweep.
const DIRECT_WINDOW_MAX: i64 = 48;

/// Per-step relative floor below which a squeezed direction counts as
/// annihilated by that step rather than carried as round-off residue.
const STEP_RANK_FLOOR: f64 = 1e-13;

/// `log ρ_k(L_{a -> b})`. For `k = 1` this is the operator norm process;
/// for `k >= 2` the normalized values still converge, but the splitting
/// inequality itself can fail pointwise (a rotation between two factors can
/// realign the contracted directions and push `ρ_k` of the product above
/// the product of the `ρ_k`), so only `k = 1` is expected to pass
/// [`check_subadditivity`].
///
/// Long windows with `k >= 2` are evaluated by a per-step orthogonalized
/// accumulation rather than one factorization of the assembled product: a
/// single decomposition cannot separate singular values spread beyond the
/// arithmetic's resolution (the lower ones saturate at round-off relative
/// to the top one and then regrow at the top rate, faking finite
/// exponents). The sweep's per-direction sums converge to the same limits.
pub struct LogBernstein<'a> {
    system: &'a dyn Cocycle,
    k: usize,
    budgets: Budgets,
}

impl<'a> LogBernstein<'a> {
    pub fn new(system: &'a dyn Cocycle, k: usize) -> Self {
        LogBernstein { system, k, budgets: Budgets::default() }
    }

    pub fn with_budgets(system: &'a dyn Cocycle, k: usize, budgets: Budgets) -> Self {
        LogBernstein { system, k, budgets }
    }
}

impl LogBernstein<'_> {
    /// Walks `[a, b)` with an orthonormal frame, multiplying each step into
    /// the frame and re-orthogonalizing, so every direction's log stretch
    /// accumulates within the arithmetic's resolution. A direction squeezed
    /// to the round-off floor by a single step is annihilated for the rest
    /// of the window; carrying its residue would let it regrow at the top
    /// rate. The sorted per-direction sums estimate `log s_1 >= log s_2
    /// >= ...` of the window product, up to an alignment transient that
    /// washes out of the normalized values.
    fn sweep(&self, p: &BasePoint, a: i64, b: i64) -> Result<f64> {
        let d = self.system.ambient_dim();
        let mut frame = DMatrix::<f64>::identity(d, d);
        let mut totals = vec![0.0f64; d];
        for t in a..b {
            let q = self.system.orbit(p, t);
            let step = self.system.step_matrix(&q);
            let image = &step * &frame;
            let qr = image.qr();
            let r = qr.r();
            let floor = STEP_RANK_FLOOR * step.norm();
            for (i, total) in totals.iter_mut().enumerate() {
                if *total == f64::NEG_INFINITY {
                    continue;
                }
                let stretch = r[(i, i)].abs();
                if stretch <= floor {
                    *total = f64::NEG_INFINITY;
                } else {
                    *total += stretch.ln();
                }
            }
            frame = qr.q();
        }
        totals.sort_by(|x, y| y.partial_cmp(x).unwrap());
        Ok(totals[self.k - 1])
    }
}

impl SubadditiveProcess for LogBernstein<'_> {
    fn eval(&self, p: &BasePoint, a: i64, b: i64) -> Result<f64> {
        if self.k >= 2 && b - a > DIRECT_WINDOW_MAX {
            return self.sweep(p, a, b);
        }
        self.system
            .interval(p, a, b)
            .log_bernstein(self.system.norm(), self.k, &self.budgets)
    }

    fn tag(&self) -> String {
        format!("log-bernstein-{}", self.k)
    }

    fn sample_point(&self, seed: u64) -> BasePoint {
        self.system.sample_point(seed)
    }
}

/// The additive process summing `log ‖L_x‖` one step at a time: splitting
/// holds with equality, so it calibrates the estimators and the checker.
pub struct AdditiveStepLogNorm<'a> {
    system: &'a dyn Cocycle,
    budget: ExtremizeBudget,
}

impl<'a> AdditiveStepLogNorm<'a> {
    pub fn new(system: &'a dyn Cocycle) -> Self {
        AdditiveStepLogNorm { system, budget: ExtremizeBudget::light() }
    }
}

impl SubadditiveProcess for AdditiveStepLogNorm<'_> {
    fn eval(&self, p: &BasePoint, a: i64, b: i64) -> Result<f64> {
        if a > b {
            return Err(Error::InvalidArgument(format!(
                "interval endpoints out of order: [{a}, {b})"
            )));
        }
        let mut total = 0.0;
        for j in a..b {
            let q = self.system.orbit(p, j);
            let step = self.system.interval(&q, 0, 1);
            let v = step.log_norm(self.system.norm(), &self.budget)?;
            if v == f64::NEG_INFINITY {
                return Ok(f64::NEG_INFINITY);
            }
            total += v;
        }
        Ok(total)
    }

    fn tag(&self) -> String {
        "additive-step-log-norm".into()
    }

    fn sample_point(&self, seed: u64) -> BasePoint {
        self.system.sample_point(seed)
    }
}

/// Interval placement used by an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `f_{0 -> n} / n`.
    Forward,
    /// `f_{-n -> 0} / n`.
    Backward,
    /// `f_{n -> 2n} / n`.
    Window,
    /// `f_{-n -> n} / (2n)`, symmetric around the time origin.
    Balanced,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Forward, Mode::Backward, Mode::Window, Mode::Balanced];

    fn value(
        &self,
        proc: &dyn SubadditiveProcess,
        p: &BasePoint,
        n: u64,
    ) -> Result<f64> {
        let n_i = n as i64;
        let (a, b, denom) = match self {
            Mode::Forward => (0, n_i, n as f64),
            Mode::Backward => (-n_i, 0, n as f64),
            Mode::Window => (n_i, 2 * n_i, n as f64),
            Mode::Balanced => (-n_i, n_i, 2.0 * n as f64),
        };
        Ok(proc.eval(p, a, b)? / denom)
    }
}

/// One point of a convergence trace.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TracePoint {
    pub n: u64,
    pub value: f64,
}

/// A limit estimate with its convergence trace.
#[derive(Debug, Clone, Serialize)]
pub struct SubadditiveEstimate {
    pub mode: Mode,
    pub c_hat: f64,
    pub trace: Vec<TracePoint>,
    pub n_max: u64,
    /// Seed the base point was sampled from, when it was.
    pub seed: Option<u64>,
    pub tag: String,
}

/// All interval lengths up to 64, then a 15% geometric progression, always
/// ending at `n_max`.
pub(crate) fn trace_grid(n_max: u64) -> Vec<u64> {
    let mut grid: Vec<u64> = (1..=n_max.min(64)).collect();
    let mut next = 64.0_f64;
    while {
        next *= 1.15;
        (next.round() as u64) < n_max
    } {
        let n = next.round() as u64;
        if *grid.last().unwrap() < n {
            grid.push(n);
        }
    }
    if *grid.last().unwrap() < n_max {
        grid.push(n_max);
    }
    grid
}

/// Runs one estimator at `point`. The estimate's constant is the median of
/// the last quarter of the trace; any `-inf` in that tail makes it `-inf`.
pub fn estimate_at(
    proc: &dyn SubadditiveProcess,
    point: &BasePoint,
    mode: Mode,
    n_max: u64,
) -> Result<SubadditiveEstimate> {
    if n_max < 8 {
        return Err(Error::InvalidArgument(format!(
            "estimator horizon {n_max} too short (need at least 8)"
        )));
    }
    let mut trace = Vec::new();
    for n in trace_grid(n_max) {
        let value = mode.value(proc, point, n)?;
        if value.is_nan() || value == f64::INFINITY {
            return Err(Error::NonFinite("subadditive trace value"));
        }
        trace.push(TracePoint { n, value });
    }
    let c_hat = tail_median(&trace);
    Ok(SubadditiveEstimate { mode, c_hat, trace, n_max, seed: None, tag: proc.tag() })
}

/// [`estimate_at`] after sampling the base point from `seed`.
pub fn estimate(
    proc: &dyn SubadditiveProcess,
    seed: u64,
    mode: Mode,
    n_max: u64,
) -> Result<SubadditiveEstimate> {
    let point = proc.sample_point(seed);
    let mut est = estimate_at(proc, &point, mode, n_max)?;
    est.seed = Some(seed);
    Ok(est)
}

pub(crate) fn tail_median(trace: &[TracePoint]) -> f64 {
    let tail_len = trace.len().div_ceil(4).max(1);
    let tail = &trace[trace.len() - tail_len..];
    if tail.iter().any(|t| t.value == f64::NEG_INFINITY) {
        return f64::NEG_INFINITY;
    }
    let mut values: Vec<f64> = tail.iter().map(|t| t.value).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Samples random interval splittings and verifies
/// `f_{a -> b} <= f_{a -> c} + f_{c -> b}` up to [`SPLIT_TOL`]. The report
/// carries the worst violation found (as `lhs`, against `rhs = 0`).
pub fn check_subadditivity(
    proc: &dyn SubadditiveProcess,
    samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    let mut worst = f64::NEG_INFINITY;
    let mut state = seed ^ 0x6A09_E667_F3BC_C908;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    for _ in 0..samples.max(1) {
        let p = proc.sample_point(next());
        let a = (next() % 41) as i64 - 20;
        let len1 = (next() % 24 + 1) as i64;
        let len2 = (next() % 24 + 1) as i64;
        let c = a + len1;
        let b = c + len2;
        let whole = proc.eval(&p, a, b)?;
        let left = proc.eval(&p, a, c)?;
        let right = proc.eval(&p, c, b)?;
        let split = left + right;
        // -inf parts absorb: the inequality is vacuous unless the whole is
        // finite while the split is not.
        let violation = if whole == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else if split == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            whole - split
        };
        if violation > worst {
            worst = violation;
        }
    }
    let digest = InputDigest::new("subadditive-splitting")
        .number(seed)
        .number(samples as u64)
        .finish();
    Ok(CheckReport::compare(
        "subadditive-splitting",
        digest,
        worst,
        0.0,
        SPLIT_TOL,
    ))
}

/// The asymptotic growth ladder of a cocycle.
///
/// `mu[k-1]` estimates the exponent of the `k`-th Bernstein number of the
/// interval products. Consecutive `mu` values closer than `gap_threshold`
/// merge into one level with a multiplicity; `lambda` lists each level once
/// (`lambda[i] = mu[M_{i-1} + 1]` in 1-based terms). `nu_hat` is the bottom
/// `mu`, the finite-dimensional stand-in for the tail rate; levels above
/// `nu_hat + gap_threshold` are the ones resolved against it, counted by
/// `tracked_levels`.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub nu_hat: f64,
    pub gap_threshold: f64,
    pub tracked_levels: usize,
    pub estimates: Vec<SubadditiveEstimate>,
}

impl SpectrumReport {
    /// Sum of multiplicities across the tracked levels: equals the number
    /// of `mu` entries strictly above `nu_hat + gap_threshold`.
    pub fn tracked_dimension(&self) -> usize {
        self.multiplicities.iter().take(self.tracked_levels).sum()
    }
}

/// Tolerance on the `mu` ladder ordering before an optimizer failure is
/// declared (twice the sphere optimizer tolerance).
const MU_ORDER_TOL: f64 = 2e-7;

/// Estimates `mu_1..mu_k_max` for `system` at `point` and clusters them
/// into exponent levels.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_spectrum(
    system: &dyn Cocycle,
    point: &BasePoint,
    k_max: usize,
    n_max: u64,
    mode: Mode,
    gap_threshold: f64,
    budgets: &Budgets,
) -> Result<SpectrumReport> {
    if k_max == 0 {
        return Err(Error::ZeroDimensional("spectrum order"));
    }
    if k_max > system.ambient_dim() {
        return Err(Error::DimensionMismatch {
            context: "spectrum order",
            expected: system.ambient_dim(),
            got: k_max,
        });
    }
    if !(gap_threshold > 0.0 && gap_threshold.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gap threshold must be positive and finite, got {gap_threshold}"
        )));
    }
    let mut estimates = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let proc = LogBernstein::with_budgets(system, k, budgets.clone());
        estimates.push(estimate_at(&proc, point, mode, n_max)?);
    }
    let mut mu: Vec<f64> = estimates.iter().map(|e| e.c_hat).collect();
    for k in 1..mu.len() {
        if mu[k] > mu[k - 1] + MU_ORDER_TOL {
            return Err(Error::NonMonotoneSpectrum {
                index: k + 1,
                value: mu[k],
                prev: mu[k - 1],
            });
        }
        // Small inversions are optimizer noise; publish a monotone ladder.
        if mu[k] > mu[k - 1] {
            mu[k] = mu[k - 1];
        }
    }

    let mut lambda = Vec::new();
    let mut multiplicities: Vec<usize> = Vec::new();
    for (i, &m) in mu.iter().enumerate() {
        let same_level = match lambda.last() {
            None => false,
            Some(&prev) => {
                if prev == f64::NEG_INFINITY {
                    m == f64::NEG_INFINITY
                } else {
                    m != f64::NEG_INFINITY && mu[i - 1] - m < gap_threshold
                }
            }
        };
        if same_level {
            *multiplicities.last_mut().unwrap() += 1;
        } else {
            lambda.push(m);
            multiplicities.push(1);
        }
    }
    let nu_hat = *mu.last().unwrap();
    let floor = nu_hat + gap_threshold;
    let tracked_levels = lambda.iter().filter(|&&l| l > floor).count();
    Ok(SpectrumReport {
        mu,
        lambda,
        multiplicities,
        nu_hat,
        gap_threshold,
        tracked_levels,
        estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::{BaseSystem, CocycleSystem, Generator};
    use crate::normed::NormSpec;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, DMatrix};

    struct Linear(f64);

    impl SubadditiveProcess for Linear {
        fn eval(&self, _p: &BasePoint, a: i64, b: i64) -> Result<f64> {
            Ok(self.0 * (b - a) as f64)
        }
        fn tag(&self) -> String {
            "linear".into()
        }
        fn sample_point(&self, _seed: u64) -> BasePoint {
            BasePoint::Circle(0)
        }
    }

    /// Superlinear in the interval length, hence strictly superadditive.
    struct QuadraticLength;

    impl SubadditiveProcess for QuadraticLength {
        fn eval(&self, _p: &BasePoint, a: i64, b: i64) -> Result<f64> {
            Ok(((b - a) as f64).powi(2))
        }
        fn tag(&self) -> String {
            "quadratic-length".into()
        }
        fn sample_point(&self, _seed: u64) -> BasePoint {
            BasePoint::Circle(0)
        }
    }

    fn constant_system(m: DMatrix<f64>) -> CocycleSystem {
        CocycleSystem::new(
            BaseSystem::Rotation { alpha_num: 0x9E37_79B9_7F4A_7C15 },
            Generator::Constant(m),
            NormSpec::L2,
        )
        .unwrap()
    }

    #[test]
    fn linear_process_is_recovered_exactly_by_every_mode() {
        let proc = Linear(0.37);
        for mode in Mode::ALL {
            let est = estimate(&proc, 7, mode, 32).unwrap();
            assert_relative_eq!(est.c_hat, 0.37, epsilon = 1e-15);
            for t in &est.trace {
                assert_relative_eq!(t.value, 0.37, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn constant_diagonal_norm_process_converges_at_once() {
        let sys = constant_system(dmatrix![2.0, 0.0; 0.0, 0.5]);
        let proc = LogOperatorNorm::new(&sys);
        for mode in Mode::ALL {
            let est = estimate(&proc, 3, mode, 64).unwrap();
            assert!(
                (est.c_hat - 2.0_f64.ln()).abs() < 1e-6,
                "{:?} off: {}",
                mode,
                est.c_hat
            );
        }
    }

    #[test]
    fn trace_grid_is_dense_then_geometric() {
        let g = trace_grid(2000);
        assert_eq!(g[0], 1);
        assert!(g.contains(&64));
        assert_eq!(*g.last().unwrap(), 2000);
        let dense: Vec<u64> = (1..=64).collect();
        assert_eq!(&g[..64], &dense[..]);
        for w in g.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert_eq!(trace_grid(10), (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn additive_process_from_iid_symbols_matches_the_strong_law() {
        // 1x1 matrices: the additive step process sums log |a_s| over the
        // symbol stream; its mean is known in closed form.
        let values = [1.0, 2.0, 0.5, 1.5];
        let ms: Vec<DMatrix<f64>> =
            values.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect();
        let sys = CocycleSystem::new(
            BaseSystem::Shift { alphabet: 4 },
            Generator::Alphabet(ms),
            NormSpec::L2,
        )
        .unwrap();
        let proc = AdditiveStepLogNorm::new(&sys);
        let mean: f64 = values.iter().map(|v| v.ln()).sum::<f64>() / 4.0;
        let var: f64 =
            values.iter().map(|v| (v.ln() - mean).powi(2)).sum::<f64>() / 4.0;
        let n_max = 1500u64;
        let est = estimate(&proc, 12, Mode::Balanced, n_max).unwrap();
        let stderr3 = 3.0 * (var / (2.0 * n_max as f64)).sqrt();
        assert!(
            (est.c_hat - mean).abs() < stderr3,
            "estimate {} vs mean {} (3 se = {})",
            est.c_hat,
            mean,
            stderr3
        );
    }

    #[test]
    fn subadditivity_check_passes_for_norms_and_additive_processes() {
        let ms: Vec<DMatrix<f64>> = vec![
            dmatrix![1.2, 0.4; 0.0, 0.6],
            dmatrix![0.9, -0.2; 0.3, 1.1],
            dmatrix![1.0, 0.0; 0.5, 0.8],
        ];
        let sys = CocycleSystem::new(
            BaseSystem::Shift { alphabet: 3 },
            Generator::Alphabet(ms),
            NormSpec::L2,
        )
        .unwrap();
        let report = check_subadditivity(&LogOperatorNorm::new(&sys), 120, 5).unwrap();
        assert!(report.pass, "worst violation {}", report.lhs);
        let report = check_subadditivity(&AdditiveStepLogNorm::new(&sys), 60, 5).unwrap();
        assert!(report.pass, "worst violation {}", report.lhs);
        assert!(report.lhs.abs() < 1e-9, "additive splitting should be exact");
    }

    #[test]
    fn subadditivity_check_rejects_a_superadditive_process() {
        let report = check_subadditivity(&QuadraticLength, 40, 1).unwrap();
        assert!(!report.pass);
        assert!(report.lhs > 1.0);
    }

    #[test]
    fn second_bernstein_process_violates_pointwise_splitting() {
        // Alternating pair: a rotation between two squeezes realigns the
        // contracted direction, so rho_2 of the two-step product exceeds
        // the product of the one-step rho_2 values. The limit still exists;
        // only the pointwise splitting fails.
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let squeeze = dmatrix![10.0, 0.0; 0.0, 1.0];
        let rotated = dmatrix![c, -c; c, c] * &squeeze;
        let arcs = vec![(0u64, rotated), (1u64 << 63, squeeze)];
        // Half-turn rotation: the two arcs alternate exactly.
        let sys = CocycleSystem::new(
            BaseSystem::Rotation { alpha_num: 1u64 << 63 },
            Generator::Arcs(arcs),
            NormSpec::L2,
        )
        .unwrap();
        let proc = LogBernstein::new(&sys, 2);
        let p = BasePoint::Circle(0);
        let whole = proc.eval(&p, 0, 2).unwrap();
        let parts = proc.eval(&p, 0, 1).unwrap() + proc.eval(&p, 1, 2).unwrap();
        assert!(
            whole > parts + 0.3,
            "junction triple should violate splitting macroscopically: {whole} vs {parts}"
        );
        let report = check_subadditivity(&proc, 200, 9).unwrap();
        assert!(!report.pass, "expected a splitting violation, worst {}", report.lhs);
    }

    #[test]
    fn spectrum_of_a_constant_diagonal() {
        let sys = constant_system(dmatrix![3.0, 0.0, 0.0; 0.0, 2.0, 0.0; 0.0, 0.0, 1.0]);
        let p = sys.sample_point(0);
        let report =
            lyapunov_spectrum(&sys, &p, 3, 64, Mode::Balanced, 0.1, &Budgets::default())
                .unwrap();
        let expect = [3.0_f64.ln(), 2.0_f64.ln(), 0.0];
        for (got, want) in report.mu.iter().zip(expect.iter()) {
            assert_relative_eq!(got, want, epsilon = 1e-9);
        }
        assert_eq!(report.lambda.len(), 3);
        assert_eq!(report.multiplicities, vec![1, 1, 1]);
        assert_relative_eq!(report.nu_hat, 0.0, epsilon = 1e-9);
        // The bottom level sits at nu_hat, so only the upper two resolve.
        assert_eq!(report.tracked_levels, 2);
        assert_eq!(report.tracked_dimension(), 2);
    }

    #[test]
    fn spectrum_merges_equal_exponents() {
        let sys = constant_system(dmatrix![2.0, 0.0, 0.0; 0.0, 2.0, 0.0; 0.0, 0.0, 1.0]);
        let p = sys.sample_point(0);
        let report =
            lyapunov_spectrum(&sys, &p, 3, 64, Mode::Balanced, 0.1, &Budgets::default())
                .unwrap();
        assert_eq!(report.lambda.len(), 2);
        assert_eq!(report.multiplicities, vec![2, 1]);
        assert_relative_eq!(report.lambda[0], 2.0_f64.ln(), epsilon = 1e-9);
        assert_eq!(report.tracked_levels, 1);
        assert_eq!(report.tracked_dimension(), 2);
    }

    #[test]
    fn rank_deficiency_reports_bottomless_levels() {
        let sys = constant_system(dmatrix![1.0, 0.0; 0.0, 0.0]);
        let p = sys.sample_point(0);
        let report =
            lyapunov_spectrum(&sys, &p, 2, 32, Mode::Forward, 0.1, &Budgets::default())
                .unwrap();
        assert_relative_eq!(report.mu[0], 0.0, epsilon = 1e-12);
        assert_eq!(report.mu[1], f64::NEG_INFINITY);
        assert_eq!(report.lambda.len(), 2);
        assert_eq!(report.nu_hat, f64::NEG_INFINITY);
        assert_eq!(report.tracked_levels, 1);
    }

    #[test]
    fn long_window_second_exponent_survives_extreme_conditioning() {
        // Dense constant matrix with rate gap 0.8: by n = 400 the second
        // singular value of the assembled product sits e^{-320} below the
        // top one, far beyond direct resolution. The sweep recovers it.
        let (c, s) = (0.6_f64.cos(), 0.6_f64.sin());
        let rot = dmatrix![c, -s; s, c];
        let m = &rot * dmatrix![0.9_f64.exp(), 0.0; 0.0, 0.1_f64.exp()] * rot.transpose();
        let sys = constant_system(m);
        let p = sys.sample_point(3);
        let report =
            lyapunov_spectrum(&sys, &p, 2, 400, Mode::Forward, 0.1, &Budgets::default())
                .unwrap();
        assert_relative_eq!(report.mu[0], 0.9, epsilon = 1e-9);
        // The sweep carries an O(1) alignment transient, so the normalized
        // tail sits within O(1/n) of the true rate.
        assert!((report.mu[1] - 0.1).abs() < 5e-3, "mu_2 = {}", report.mu[1]);
    }

    #[test]
    fn annihilated_direction_does_not_regrow_as_a_fake_exponent() {
        // One symbol maps through a rank-two matrix assembled from dense
        // factors: its kernel direction is gone in exact arithmetic, but
        // the assembled entries only vanish to round-off. Over a long
        // window that residue regrows at the top rate unless the per-step
        // floor retires the direction.
        let (c, s) = (0.4_f64.cos(), 0.4_f64.sin());
        let r1 = dmatrix![c, -s, 0.0; s, c, 0.0; 0.0, 0.0, 1.0];
        let r2 = dmatrix![1.0, 0.0, 0.0; 0.0, c, -s; 0.0, s, c];
        let killer = &r1 * dmatrix![1.2, 0.0, 0.0; 0.0, 0.8, 0.0; 0.0, 0.0, 0.0] * &r2;
        let full = dmatrix![1.1, 0.3, 0.0; 0.0, 0.9, -0.2; 0.1, 0.0, 1.0];
        let sys = CocycleSystem::new(
            BaseSystem::Shift { alphabet: 2 },
            Generator::Alphabet(vec![killer, full]),
            NormSpec::L2,
        )
        .unwrap();
        let p = sys.sample_point(11);
        let report =
            lyapunov_spectrum(&sys, &p, 3, 400, Mode::Forward, 0.1, &Budgets::default())
                .unwrap();
        assert_eq!(report.mu[2], f64::NEG_INFINITY, "ladder: {:?}", report.mu);
        assert!(report.mu[1].is_finite(), "ladder: {:?}", report.mu);
        assert!(report.mu[0] > report.mu[1]);
    }

    #[test]
    fn doubling_the_generator_shifts_the_whole_ladder() {
        let sys = constant_system(dmatrix![3.0, 0.0; 0.0, 0.5]);
        let doubled = sys.with_mapped_generator(|m| m * 2.0).unwrap();
        let p = sys.sample_point(4);
        let a = lyapunov_spectrum(&sys, &p, 2, 48, Mode::Balanced, 0.1, &Budgets::default())
            .unwrap();
        let b =
            lyapunov_spectrum(&doubled, &p, 2, 48, Mode::Balanced, 0.1, &Budgets::default())
                .unwrap();
        for (x, y) in a.mu.iter().zip(b.mu.iter()) {
            assert_relative_eq!(y - x, 2.0_f64.ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn horizon_below_eight_is_rejected() {
        let proc = Linear(1.0);
        assert!(matches!(
            estimate(&proc, 0, Mode::Forward, 7),
            Err(Error::InvalidArgument(_))
        ));
    }
}
