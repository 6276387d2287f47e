//! Norms, operators between normed spaces, and sphere extremization.
//!
//! The ambient space is always `R^d`, but the norm it carries is
//! configuration: every quantity downstream (growth numbers, subspace
//! metrics, projections) is computed relative to a [`NormSpec`] rather than
//! assuming the Euclidean structure. Operator norms use closed forms where
//! they exist and fall back to [`sphere_extremize`], the deterministic
//! multi-start optimizer that also powers the growth statistics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grassmannian::Subspace;
use crate::linalg;

pub type Vector = DVector<f64>;

/// The norm carried by a copy of `R^d`.
///
/// `WeightedLp` requires `p >= 1` and strictly positive finite weights; the
/// weight vector also pins the dimension the norm applies to. The unit
/// variants apply in any dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum NormSpec {
    L1,
    L2,
    Linf,
    WeightedLp { p: f64, weights: Vec<f64> },
}

impl NormSpec {
    /// Checks the internal consistency of the spec itself.
    pub fn validate(&self) -> Result<()> {
        match self {
            NormSpec::L1 | NormSpec::L2 | NormSpec::Linf => Ok(()),
            NormSpec::WeightedLp { p, weights } => {
                if !p.is_finite() || *p < 1.0 {
                    return Err(Error::InvalidNorm(format!(
                        "WeightedLp needs finite p >= 1, got {p}"
                    )));
                }
                if weights.is_empty() {
                    return Err(Error::InvalidNorm("WeightedLp needs nonempty weights".into()));
                }
                if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
                    return Err(Error::InvalidNorm(
                        "WeightedLp weights must be finite and strictly positive".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Dimension this norm is pinned to, if any.
    pub fn pinned_dim(&self) -> Option<usize> {
        match self {
            NormSpec::WeightedLp { weights, .. } => Some(weights.len()),
            _ => None,
        }
    }

    pub fn is_l2(&self) -> bool {
        matches!(self, NormSpec::L2)
    }

    /// Norm evaluation without spec/dimension re-validation. Callers on hot
    /// paths validate once up front.
    pub(crate) fn eval_unchecked(&self, x: &DVector<f64>) -> f64 {
        match self {
            NormSpec::L1 => x.iter().map(|v| v.abs()).sum(),
            NormSpec::L2 => x.norm(),
            NormSpec::Linf => x.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())),
            NormSpec::WeightedLp { p, weights } => {
                let s: f64 = x
                    .iter()
                    .zip(weights.iter())
                    .map(|(v, w)| w * v.abs().powf(*p))
                    .sum();
                s.powf(1.0 / p)
            }
        }
    }
}

/// `‖x‖` under `spec`. Errors on invalid specs, dimension mismatch against a
/// pinned dimension, and non-finite coordinates.
pub fn norm(x: &Vector, spec: &NormSpec) -> Result<f64> {
    spec.validate()?;
    if let Some(d) = spec.pinned_dim() {
        if d != x.len() {
            return Err(Error::DimensionMismatch {
                context: "norm: weight vector vs point",
                expected: d,
                got: x.len(),
            });
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("norm argument"));
    }
    Ok(spec.eval_unchecked(x))
}

/// A linear map between two normed copies of `R^d` (rectangular shapes are
/// allowed; rows live in the codomain, columns in the domain).
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: DMatrix<f64>,
    domain: NormSpec,
    codomain: NormSpec,
}

impl Operator {
    pub fn new(matrix: DMatrix<f64>, domain: NormSpec, codomain: NormSpec) -> Result<Self> {
        domain.validate()?;
        codomain.validate()?;
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("operator entries"));
        }
        if let Some(d) = domain.pinned_dim() {
            if d != matrix.ncols() {
                return Err(Error::DimensionMismatch {
                    context: "operator domain",
                    expected: d,
                    got: matrix.ncols(),
                });
            }
        }
        if let Some(d) = codomain.pinned_dim() {
            if d != matrix.nrows() {
                return Err(Error::DimensionMismatch {
                    context: "operator codomain",
                    expected: d,
                    got: matrix.nrows(),
                });
            }
        }
        Ok(Operator { matrix, domain, codomain })
    }

    /// Square operator acting on a single normed space.
    pub fn endomorphism(matrix: DMatrix<f64>, ambient: NormSpec) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                context: "endomorphism must be square",
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        Operator::new(matrix, ambient.clone(), ambient)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn domain(&self) -> &NormSpec {
        &self.domain
    }

    pub fn codomain(&self) -> &NormSpec {
        &self.codomain
    }

    pub fn domain_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn codomain_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.matrix.ncols() {
            return Err(Error::DimensionMismatch {
                context: "operator application",
                expected: self.matrix.ncols(),
                got: x.len(),
            });
        }
        Ok(&self.matrix * x)
    }

    /// `self ∘ inner`: apply `inner` first. The inner codomain must match the
    /// outer domain (same norm, same dimension).
    pub fn compose(&self, inner: &Operator) -> Result<Operator> {
        if inner.matrix.nrows() != self.matrix.ncols() {
            return Err(Error::DimensionMismatch {
                context: "composition shape",
                expected: self.matrix.ncols(),
                got: inner.matrix.nrows(),
            });
        }
        if inner.codomain != self.domain {
            return Err(Error::InvalidArgument(
                "composition: inner codomain norm differs from outer domain norm".into(),
            ));
        }
        Operator::new(
            &self.matrix * &inner.matrix,
            inner.domain.clone(),
            self.codomain.clone(),
        )
    }

    pub fn scale(&self, c: f64) -> Result<Operator> {
        Operator::new(&self.matrix * c, self.domain.clone(), self.codomain.clone())
    }

    /// `sup_{‖x‖_dom = 1} ‖Tx‖_cod`.
    ///
    /// Closed forms: an `L1` domain takes the max over columns of the codomain
    /// norm (the `L1` unit ball is the convex hull of `±e_j`); `Linf → Linf`
    /// is the max absolute row sum; `L2 → L2` is the largest singular value.
    /// Everything else goes through [`sphere_extremize`].
    pub fn operator_norm(&self) -> Result<f64> {
        self.operator_norm_with(&ExtremizeBudget::default())
    }

    pub fn operator_norm_with(&self, budget: &ExtremizeBudget) -> Result<f64> {
        match (&self.domain, &self.codomain) {
            (NormSpec::L1, cod) => {
                let mut best = 0.0_f64;
                for j in 0..self.matrix.ncols() {
                    let col = self.matrix.column(j).into_owned();
                    best = best.max(cod.eval_unchecked(&col));
                }
                Ok(best)
            }
            (NormSpec::Linf, NormSpec::Linf) => {
                let mut best = 0.0_f64;
                for i in 0..self.matrix.nrows() {
                    let s: f64 = self.matrix.row(i).iter().map(|v| v.abs()).sum();
                    best = best.max(s);
                }
                Ok(best)
            }
            (NormSpec::L2, NormSpec::L2) => Ok(linalg::singular_value(&self.matrix, 1)),
            _ => {
                let full = Subspace::full(self.matrix.ncols())?;
                let cod = self.codomain.clone();
                let m = self.matrix.clone();
                let ext = sphere_extremize(
                    move |x| cod.eval_unchecked(&(&m * x)),
                    &full,
                    &self.domain,
                    ExtremizeMode::Max,
                    budget,
                )?;
                Ok(ext.value)
            }
        }
    }
}

/// Whether [`sphere_extremize`] minimizes or maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremizeMode {
    Min,
    Max,
}

/// Budget knobs for the sphere optimizer. All defaults are deterministic;
/// there is no randomness anywhere in the search.
#[derive(Debug, Clone)]
pub struct ExtremizeBudget {
    /// Low-discrepancy seeds per sphere dimension (total `seeds_per_dim * k`).
    pub seeds_per_dim: usize,
    /// How many of the best seeds get local refinement.
    pub refine_starts: usize,
    /// Coordinate-descent sweeps per refinement start.
    pub max_sweeps: usize,
    /// Coarse scan points on each great-circle arc before golden section.
    pub coarse_scan: usize,
    /// Golden-section iterations per line search.
    pub golden_iters: usize,
    /// Convergence tolerance on the objective.
    pub tol: f64,
}

impl Default for ExtremizeBudget {
    fn default() -> Self {
        ExtremizeBudget {
            seeds_per_dim: 64,
            refine_starts: 3,
            max_sweeps: 8,
            coarse_scan: 9,
            golden_iters: 24,
            tol: 1e-7,
        }
    }
}

impl ExtremizeBudget {
    /// Reduced budget for inner loops of nested optimizations.
    pub fn light() -> Self {
        ExtremizeBudget {
            seeds_per_dim: 16,
            refine_starts: 2,
            max_sweeps: 4,
            coarse_scan: 7,
            golden_iters: 18,
            tol: 1e-6,
        }
    }
}

/// Result of a sphere extremization.
#[derive(Debug, Clone)]
pub struct Extremum {
    pub value: f64,
    /// Point on the unit sphere of the searched subspace (ambient norm).
    pub argpoint: Vector,
    /// Certified slack: the true extremum over the searched sphere is within
    /// `gap_estimate` of `value` under the local model (last sweep progress
    /// plus tolerance); it is not a global certificate.
    pub gap_estimate: f64,
}

/// Extremizes a continuous scalar function over the unit sphere of `v` in the
/// ambient norm.
///
/// The sphere is parametrized as `x = B·u / ‖B·u‖` for `u` on the Euclidean
/// unit sphere of `R^k` (`B` an orthonormal basis of `v`), searched by
/// deterministic low-discrepancy seeding followed by great-circle coordinate
/// descent. Flat stretches keep the first attained argpoint in seeding order.
pub fn sphere_extremize<F>(
    f: F,
    v: &Subspace,
    ambient: &NormSpec,
    mode: ExtremizeMode,
    budget: &ExtremizeBudget,
) -> Result<Extremum>
where
    F: Fn(&Vector) -> f64,
{
    sphere_extremize_with_starts(f, v, ambient, mode, budget, &[])
}

/// [`sphere_extremize`] with caller-provided warm starts (ambient vectors,
/// projected into the search subspace; useless starts are skipped).
pub fn sphere_extremize_with_starts<F>(
    f: F,
    v: &Subspace,
    ambient: &NormSpec,
    mode: ExtremizeMode,
    budget: &ExtremizeBudget,
    starts: &[Vector],
) -> Result<Extremum>
where
    F: Fn(&Vector) -> f64,
{
    ambient.validate()?;
    let k = v.dim();
    if k == 0 {
        return Err(Error::ZeroDimensional("sphere_extremize search subspace"));
    }
    if let Some(d) = ambient.pinned_dim() {
        if d != v.ambient_dim() {
            return Err(Error::DimensionMismatch {
                context: "sphere_extremize ambient norm",
                expected: d,
                got: v.ambient_dim(),
            });
        }
    }
    let basis = v.basis().clone();
    let sign = match mode {
        ExtremizeMode::Min => 1.0,
        ExtremizeMode::Max => -1.0,
    };

    // Objective in chart coordinates; +inf means "reject".
    let eval = |u: &DVector<f64>| -> (f64, Vector) {
        let y = &basis * u;
        let n = ambient.eval_unchecked(&y);
        if !(n.is_finite() && n > 1e-300) {
            return (f64::INFINITY, y);
        }
        let x = y / n;
        let raw = f(&x);
        if raw.is_finite() || raw == f64::NEG_INFINITY {
            (sign * raw, x)
        } else {
            (f64::INFINITY, x)
        }
    };

    let mut best_g = f64::INFINITY;
    let mut best_u = DVector::zeros(k);
    let mut best_x = DVector::zeros(v.ambient_dim());
    let mut seed_pool: Vec<(f64, DVector<f64>)> = Vec::new();
    let consider = |u: DVector<f64>,
                        best_g: &mut f64,
                        best_u: &mut DVector<f64>,
                        best_x: &mut Vector,
                        pool: &mut Vec<(f64, DVector<f64>)>| {
        let (g, x) = eval(&u);
        if g < *best_g {
            *best_g = g;
            *best_u = u.clone();
            *best_x = x;
        }
        pool.push((g, u));
    };

    if k == 1 {
        for s in [1.0, -1.0] {
            let u = DVector::from_vec(vec![s]);
            let (g, x) = eval(&u);
            if g < best_g {
                best_g = g;
                best_x = x;
            }
        }
        return Ok(Extremum { value: sign * best_g, argpoint: best_x, gap_estimate: 0.0 });
    }

    // Seeding order: coordinate directions, caller starts, Weyl sequence.
    for j in 0..k {
        for s in [1.0, -1.0] {
            let mut u = DVector::zeros(k);
            u[j] = s;
            consider(u, &mut best_g, &mut best_u, &mut best_x, &mut seed_pool);
        }
    }
    for st in starts {
        if st.len() != v.ambient_dim() {
            continue;
        }
        let u = basis.transpose() * st;
        if let Some(un) = linalg::unit(&u) {
            consider(un, &mut best_g, &mut best_u, &mut best_x, &mut seed_pool);
        }
    }
    for i in 0..budget.seeds_per_dim.saturating_mul(k) {
        if let Some(u) = weyl_direction(i, k) {
            consider(u, &mut best_g, &mut best_u, &mut best_x, &mut seed_pool);
        }
    }

    if !best_g.is_finite() && best_g != f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(
            "sphere_extremize: objective not evaluable at any seed".into(),
        ));
    }

    // Pick refinement starts: best seeds, deduplicated by direction.
    let mut order: Vec<usize> = (0..seed_pool.len()).collect();
    order.sort_by(|&a, &b| {
        seed_pool[a]
            .0
            .partial_cmp(&seed_pool[b].0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut starts_u: Vec<DVector<f64>> = Vec::new();
    for &idx in &order {
        if starts_u.len() >= budget.refine_starts {
            break;
        }
        let cand = &seed_pool[idx].1;
        if !seed_pool[idx].0.is_finite() && seed_pool[idx].0 != f64::NEG_INFINITY {
            continue;
        }
        if starts_u.iter().all(|u| (u.dot(cand)).abs() < 0.95) {
            starts_u.push(cand.clone());
        }
    }
    if starts_u.is_empty() {
        starts_u.push(best_u.clone());
    }

    let mut last_progress = 0.0_f64;
    for start in starts_u {
        let (mut cur_g, mut cur_x) = eval(&start);
        let mut u = start;
        for _ in 0..budget.max_sweeps {
            let sweep_before = cur_g;
            for j in 0..k {
                let mut w = DVector::zeros(k);
                w[j] = 1.0;
                let proj = u.dot(&w);
                w -= &u * proj;
                let nw = w.norm();
                if nw < 1e-9 {
                    continue;
                }
                w /= nw;
                let arc = |phi: f64| -> f64 {
                    let cand = &u * phi.cos() + &w * phi.sin();
                    eval(&cand).0
                };
                // Coarse bracket, then golden section inside the best cell.
                let m = budget.coarse_scan.max(3);
                let h = std::f64::consts::PI / (m as f64 - 1.0);
                let mut best_phi = 0.0;
                let mut best_val = cur_g;
                for t in 0..m {
                    let phi = -std::f64::consts::FRAC_PI_2 + h * t as f64;
                    let val = arc(phi);
                    if val < best_val {
                        best_val = val;
                        best_phi = phi;
                    }
                }
                let (phi_loc, val_loc) =
                    golden_min(&arc, best_phi - h, best_phi + h, budget.golden_iters);
                let (phi_new, val_new) = if val_loc < best_val {
                    (phi_loc, val_loc)
                } else {
                    (best_phi, best_val)
                };
                if val_new < cur_g {
                    let cand = &u * phi_new.cos() + &w * phi_new.sin();
                    if let Some(cn) = linalg::unit(&cand) {
                        u = cn;
                        let (g, x) = eval(&u);
                        cur_g = g;
                        cur_x = x;
                    }
                }
            }
            let progress = sweep_before - cur_g;
            last_progress = progress.max(0.0);
            if !(progress > budget.tol * (1.0 + cur_g.abs())) {
                break;
            }
        }
        if cur_g < best_g {
            best_g = cur_g;
            best_x = cur_x;
        }
    }

    Ok(Extremum {
        value: sign * best_g,
        argpoint: best_x,
        gap_estimate: last_progress + budget.tol * (1.0 + best_g.abs()),
    })
}

/// Minimizes `g` along an unbounded line through `center` with characteristic
/// `scale`, compactified via `t = center + scale * tan(phi)`. Coarse scan plus
/// golden section; returns `(argmin, min)`. Exact for unimodal `g`, a solid
/// heuristic otherwise.
pub(crate) fn line_min_tan<F: Fn(f64) -> f64>(
    g: &F,
    center: f64,
    scale: f64,
    coarse: usize,
    golden: usize,
) -> (f64, f64) {
    const PHI_MAX: f64 = 1.47;
    let m = coarse.max(3);
    let h = 2.0 * PHI_MAX / (m as f64 - 1.0);
    let eval = |phi: f64| g(center + scale * phi.tan());
    let mut best_phi = 0.0;
    let mut best_val = eval(0.0);
    for t in 0..m {
        let phi = -PHI_MAX + h * t as f64;
        let val = eval(phi);
        if val < best_val {
            best_val = val;
            best_phi = phi;
        }
    }
    let (phi_loc, val_loc) = golden_min(&eval, best_phi - h, best_phi + h, golden);
    if val_loc < best_val {
        (center + scale * phi_loc.tan(), val_loc)
    } else {
        (center + scale * best_phi.tan(), best_val)
    }
}

/// Coordinate descent over `R^m` for a scalar objective, each coordinate line
/// handled by [`line_min_tan`]. Returns `(argmin, min)`.
pub(crate) fn coordinate_min_unbounded<F: Fn(&DVector<f64>) -> f64>(
    g: &F,
    start: &DVector<f64>,
    sweeps: usize,
    coarse: usize,
    golden: usize,
    tol: f64,
) -> (DVector<f64>, f64) {
    let mut c = start.clone();
    let mut val = g(&c);
    for _ in 0..sweeps {
        let before = val;
        for i in 0..c.len() {
            let ci = c[i];
            let scale = 0.5 + ci.abs();
            let line = |t: f64| {
                let mut cand = c.clone();
                cand[i] = t;
                g(&cand)
            };
            let (arg, v) = line_min_tan(&line, ci, scale, coarse, golden);
            if v < val {
                c[i] = arg;
                val = v;
            }
        }
        if !(before - val > tol * (1.0 + val.abs())) {
            break;
        }
    }
    (c, val)
}

/// Golden-section minimization on `[a, b]`; returns `(argmin, min)`.
fn golden_min<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, iters: usize) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut x1 = hi - INVPHI * (hi - lo);
    let mut x2 = lo + INVPHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INVPHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INVPHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    if f1 <= f2 && f1 <= fm {
        (x1, f1)
    } else if f2 <= fm {
        (x2, f2)
    } else {
        (mid, fm)
    }
}

/// `i`-th direction of a deterministic low-discrepancy sequence on the
/// Euclidean `(k-1)`-sphere: Weyl (Kronecker) points mapped through
/// Box-Muller and normalized.
fn weyl_direction(i: usize, k: usize) -> Option<DVector<f64>> {
    const GAMMAS: [f64; 24] = [
        1.414_213_562_373_095_1,
        1.732_050_807_568_877_2,
        2.236_067_977_499_79,
        2.645_751_311_064_590_7,
        3.316_624_790_355_399_7,
        3.605_551_275_463_989,
        4.123_105_625_617_661,
        4.358_898_943_540_674,
        4.795_831_523_312_719_5,
        5.385_164_807_134_504,
        5.567_764_362_830_022,
        6.082_762_530_298_219_5,
        6.403_124_237_432_849,
        6.557_438_524_302,
        6.855_654_600_401_044,
        7.280_109_889_280_518,
        7.681_145_747_868_608,
        7.810_249_675_906_654,
        8.185_352_771_872_45,
        8.426_149_773_176_359,
        8.544_003_745_317_531,
        8.888_194_417_315_589,
        9.110_433_579_144_299,
        9.433_981_132_056_604,
    ];
    let t = (i + 1) as f64;
    let pairs = k.div_ceil(2);
    let mut z = DVector::zeros(k);
    for pi in 0..pairs {
        let ga = GAMMAS[(2 * pi) % GAMMAS.len()];
        let gb = GAMMAS[(2 * pi + 1) % GAMMAS.len()];
        let a = (t * ga).fract().max(1e-12);
        let b = (t * gb).fract();
        let r = (-2.0 * a.ln()).sqrt();
        let ang = 2.0 * std::f64::consts::PI * b;
        z[2 * pi] = r * ang.cos();
        if 2 * pi + 1 < k {
            z[2 * pi + 1] = r * ang.sin();
        }
    }
    linalg::unit(&z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector, DMatrix};

    #[test]
    fn norms_on_a_reference_point() {
        let x = dvector![3.0, -4.0];
        assert_relative_eq!(norm(&x, &NormSpec::L1).unwrap(), 7.0);
        assert_relative_eq!(norm(&x, &NormSpec::L2).unwrap(), 5.0);
        assert_relative_eq!(norm(&x, &NormSpec::Linf).unwrap(), 4.0);
    }

    #[test]
    fn weighted_lp_on_a_reference_point() {
        // (1*|1|^1.5 + 2*|2|^1.5)^(1/1.5) computed independently.
        let x = dvector![1.0, 2.0];
        let spec = NormSpec::WeightedLp { p: 1.5, weights: vec![1.0, 2.0] };
        let expect = (1.0_f64 + 2.0 * 2.0_f64.powf(1.5)).powf(1.0 / 1.5);
        assert_relative_eq!(norm(&x, &spec).unwrap(), expect, max_relative = 1e-14);
    }

    #[test]
    fn weighted_lp_rejects_bad_parameters() {
        let x = dvector![1.0, 2.0];
        let bad_p = NormSpec::WeightedLp { p: 0.5, weights: vec![1.0, 1.0] };
        assert!(matches!(norm(&x, &bad_p), Err(Error::InvalidNorm(_))));
        let bad_w = NormSpec::WeightedLp { p: 2.0, weights: vec![1.0, -1.0] };
        assert!(matches!(norm(&x, &bad_w), Err(Error::InvalidNorm(_))));
        let bad_dim = NormSpec::WeightedLp { p: 2.0, weights: vec![1.0] };
        assert!(matches!(norm(&x, &bad_dim), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn operator_norm_closed_forms() {
        // L2 -> L2 for diag(2, -3) is 3 (largest singular value).
        let t = Operator::endomorphism(dmatrix![2.0, 0.0; 0.0, -3.0], NormSpec::L2).unwrap();
        assert_relative_eq!(t.operator_norm().unwrap(), 3.0, max_relative = 1e-12);

        // L1 -> L1: max column absolute sum.
        let t = Operator::endomorphism(dmatrix![1.0, -4.0; 2.0, 1.0], NormSpec::L1).unwrap();
        assert_relative_eq!(t.operator_norm().unwrap(), 5.0);

        // Linf -> Linf: max row absolute sum.
        let t = Operator::endomorphism(dmatrix![1.0, -4.0; 2.0, 1.0], NormSpec::Linf).unwrap();
        assert_relative_eq!(t.operator_norm().unwrap(), 5.0);
    }

    #[test]
    fn operator_norm_optimizer_agrees_with_sampling_oracle() {
        // Mixed-norm case with no closed form: L2 domain, Linf codomain.
        let m = dmatrix![1.0, 2.0; -0.5, 1.5];
        let t = Operator::new(m.clone(), NormSpec::L2, NormSpec::Linf).unwrap();
        let got = t.operator_norm().unwrap();
        // Dense sampling oracle over the L2 unit circle.
        let mut oracle = 0.0_f64;
        for i in 0..20000 {
            let a = 2.0 * std::f64::consts::PI * (i as f64) / 20000.0;
            let x = dvector![a.cos(), a.sin()];
            let y = &m * x;
            oracle = oracle.max(y[0].abs().max(y[1].abs()));
        }
        assert_relative_eq!(got, oracle, max_relative = 1e-5);
    }

    #[test]
    fn sphere_extremize_constant_returns_first_seed() {
        let v = Subspace::full(3).unwrap();
        let ext = sphere_extremize(
            |_| 7.0,
            &v,
            &NormSpec::L2,
            ExtremizeMode::Max,
            &ExtremizeBudget::default(),
        )
        .unwrap();
        assert_eq!(ext.value, 7.0);
        // First seed in seeding order is +e_1.
        assert_relative_eq!(ext.argpoint[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(ext.argpoint[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sphere_extremize_linear_functional_on_l2() {
        // max of x[0] over the Euclidean sphere is 1 at e_1.
        let v = Subspace::full(4).unwrap();
        let ext = sphere_extremize(
            |x| x[0],
            &v,
            &NormSpec::L2,
            ExtremizeMode::Max,
            &ExtremizeBudget::default(),
        )
        .unwrap();
        assert_relative_eq!(ext.value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn sphere_extremize_min_on_line_checks_both_signs() {
        let v = Subspace::line(&dvector![1.0, 1.0]).unwrap();
        let ext = sphere_extremize(
            |x| x[0],
            &v,
            &NormSpec::L1,
            ExtremizeMode::Min,
            &ExtremizeBudget::default(),
        )
        .unwrap();
        // On the L1 sphere of span{(1,1)}, points are ±(0.5, 0.5).
        assert_relative_eq!(ext.value, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn zero_dimensional_search_is_an_error() {
        let empty = Subspace::from_span(&DMatrix::<f64>::zeros(2, 0));
        assert!(empty.is_err());
    }

    #[test]
    fn homogeneity_holds_to_machine_precision() {
        // 1000 deterministic (c, x) pairs across all norm kinds.
        let specs = [
            NormSpec::L1,
            NormSpec::L2,
            NormSpec::Linf,
            NormSpec::WeightedLp { p: 1.5, weights: vec![0.5, 2.0, 1.0] },
        ];
        let mut state = 0x9E37_79B9_7F4A_7C15_u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for trial in 0..1000 {
            let x = dvector![next() - 0.5, next() - 0.5, next() - 0.5];
            let c = 4.0 * (next() - 0.5);
            let spec = &specs[trial % specs.len()];
            let lhs = norm(&(&x * c), spec).unwrap();
            let rhs = c.abs() * norm(&x, spec).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12, epsilon = 1e-300);
        }
    }

    #[test]
    fn triangle_inequality_on_random_pairs() {
        let specs = [
            NormSpec::L1,
            NormSpec::L2,
            NormSpec::Linf,
            NormSpec::WeightedLp { p: 2.5, weights: vec![1.0, 0.25, 3.0] },
        ];
        let mut state = 0xDEAD_BEEF_u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for trial in 0..500 {
            let x = dvector![next(), next(), next()];
            let y = dvector![next(), next(), next()];
            let spec = &specs[trial % specs.len()];
            let lhs = norm(&(&x + &y), spec).unwrap();
            let rhs = norm(&x, spec).unwrap() + norm(&y, spec).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15, "triangle violated: {lhs} > {rhs}");
        }
    }

    #[test]
    fn norm_spec_round_trips_through_json() {
        let spec = NormSpec::WeightedLp { p: 1.5, weights: vec![1.0, 2.0] };
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(s, r#"{"kind":"WeightedLp","p":1.5,"weights":[1.0,2.0]}"#);
        let back: NormSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        let l2: NormSpec = serde_json::from_str(r#"{"kind":"L2"}"#).unwrap();
        assert_eq!(l2, NormSpec::L2);
    }
}
