//! Matrix cocycles over exactly-computed base dynamics.
//!
//! Base orbits live on integer state spaces (the circle and torus as u64
//! fixed-point fractions, symbol sequences as a keyed generator), so
//! advancing a point is exact in both time directions and two routes to the
//! same time agree bitwise. Products of generator matrices along an orbit
//! are evaluated by a balanced splitting whose shape depends only on the
//! interval length; combined with the exact base, the same stretch of orbit
//! always produces the same floating-point operator, no matter where the
//! evaluation started. Every partial product is rescaled by a power of two,
//! which keeps thousands of steps inside `f64` range without perturbing the
//! mantissas.
//!
//! Nothing in this module inverts a matrix. The one inverting entry point,
//! [`CocycleSystem::inverse_interval`], exists to let callers prove they
//! never needed it: it counts its uses on an atomic counter that the
//! decomposition pipeline asserts to be zero.

use std::sync::atomic::{AtomicU64, Ordering};

use dashmap::DashMap;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grassmannian::{push_forward_matrix, Subspace};
use crate::linalg;
use crate::normed::{ExtremizeBudget, NormSpec, Operator};
use crate::opstats::{self, Budgets};

/// Largest number of cached interval products per system; beyond this the
/// evaluator simply recomputes (results are identical either way).
const MEMO_CAP: usize = 300_000;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A point of the base space. All coordinates are exact integers: circle and
/// torus coordinates are binary fractions over `2^64`, sequence points name
/// a keyed symbol stream and a position in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasePoint {
    Circle(u64),
    Torus(u64, u64),
    Sequence { key: u64, position: i64 },
}

/// The driving dynamical system, acting exactly on [`BasePoint`]s.
#[derive(Debug, Clone)]
pub enum BaseSystem {
    /// Rotation of the circle by `alpha_num / 2^64`. An odd numerator gives
    /// a full period of `2^64`, a faithful stand-in for an irrational
    /// rotation at machine resolution.
    Rotation { alpha_num: u64 },
    /// The hyperbolic toral automorphism `(x, y) -> (2x + y, x + y)`,
    /// computed with wrapping arithmetic (so exactly, modulo `2^64`).
    ToralAutomorphism,
    /// The two-sided full shift on `alphabet` symbols. Symbols are produced
    /// by a keyed mixing function of the position, so a point carries its
    /// whole bi-infinite itinerary.
    Shift { alphabet: u32 },
}

impl BaseSystem {
    /// Advances `p` by `steps` (negative steps walk backwards). Exact: for
    /// every `a`, `advance(advance(p, a), -a) == p` bitwise.
    pub fn advance(&self, p: &BasePoint, steps: i64) -> BasePoint {
        match (self, p) {
            (BaseSystem::Rotation { alpha_num }, BasePoint::Circle(x)) => {
                BasePoint::Circle(x.wrapping_add((steps as u64).wrapping_mul(*alpha_num)))
            }
            (BaseSystem::ToralAutomorphism, BasePoint::Torus(x, y)) => {
                let (a, b, c, d) = toral_power(steps);
                BasePoint::Torus(
                    a.wrapping_mul(*x).wrapping_add(b.wrapping_mul(*y)),
                    c.wrapping_mul(*x).wrapping_add(d.wrapping_mul(*y)),
                )
            }
            (BaseSystem::Shift { .. }, BasePoint::Sequence { key, position }) => {
                BasePoint::Sequence { key: *key, position: position.wrapping_add(steps) }
            }
            _ => panic!("base point does not belong to this base system"),
        }
    }

    /// The symbol of `p` read by alphabet-indexed generators.
    pub fn symbol(&self, p: &BasePoint) -> u32 {
        match (self, p) {
            (BaseSystem::Shift { alphabet }, BasePoint::Sequence { key, position }) => {
                let mixed = splitmix64(splitmix64(*key ^ (*position as u64)) ^ *key);
                // Multiply-shift reduction onto the alphabet.
                ((mixed as u128 * *alphabet as u128) >> 64) as u32
            }
            _ => panic!("symbols are only defined for shift systems"),
        }
    }

    /// Deterministic point from a seed (used to sample the base measure).
    pub fn point_from_seed(&self, seed: u64) -> BasePoint {
        match self {
            BaseSystem::Rotation { .. } => BasePoint::Circle(splitmix64(seed)),
            BaseSystem::ToralAutomorphism => {
                BasePoint::Torus(splitmix64(seed), splitmix64(seed ^ 0x5DEE_CE66_D1CE_4E5B))
            }
            BaseSystem::Shift { .. } => {
                BasePoint::Sequence { key: splitmix64(seed), position: 0 }
            }
        }
    }
}

/// The matrix `[[2,1],[1,1]]^steps` modulo `2^64`, entries `(a b; c d)`.
/// Negative powers use the exact inverse `[[1,-1],[-1,2]]` (mod `2^64`).
fn toral_power(steps: i64) -> (u64, u64, u64, u64) {
    let (mut base, mut n) = if steps >= 0 {
        ((2u64, 1u64, 1u64, 1u64), steps as u64)
    } else {
        ((1u64, 1u64.wrapping_neg(), 1u64.wrapping_neg(), 2u64), steps.unsigned_abs())
    };
    let mut acc = (1u64, 0u64, 0u64, 1u64);
    while n > 0 {
        if n & 1 == 1 {
            acc = mat2_mul(acc, base);
        }
        base = mat2_mul(base, base);
        n >>= 1;
    }
    acc
}

fn mat2_mul(l: (u64, u64, u64, u64), r: (u64, u64, u64, u64)) -> (u64, u64, u64, u64) {
    (
        l.0.wrapping_mul(r.0).wrapping_add(l.1.wrapping_mul(r.2)),
        l.0.wrapping_mul(r.1).wrapping_add(l.1.wrapping_mul(r.3)),
        l.2.wrapping_mul(r.0).wrapping_add(l.3.wrapping_mul(r.2)),
        l.2.wrapping_mul(r.1).wrapping_add(l.3.wrapping_mul(r.3)),
    )
}

/// How the one-step matrix is chosen from the current base point.
#[derive(Debug, Clone)]
pub enum Generator {
    /// The same matrix at every point.
    Constant(DMatrix<f64>),
    /// One matrix per shift symbol.
    Alphabet(Vec<DMatrix<f64>>),
    /// One matrix per circular arc: `(start, matrix)` with strictly
    /// increasing starts; a point below the first start wraps to the last
    /// arc. Keyed on the circle coordinate (first coordinate on the torus).
    Arcs(Vec<(u64, DMatrix<f64>)>),
}

impl Generator {
    fn matrices(&self) -> Vec<&DMatrix<f64>> {
        match self {
            Generator::Constant(m) => vec![m],
            Generator::Alphabet(ms) => ms.iter().collect(),
            Generator::Arcs(arcs) => arcs.iter().map(|(_, m)| m).collect(),
        }
    }

    /// The same selection structure with every matrix replaced.
    pub fn map_matrices(&self, mut f: impl FnMut(&DMatrix<f64>) -> DMatrix<f64>) -> Generator {
        match self {
            Generator::Constant(m) => Generator::Constant(f(m)),
            Generator::Alphabet(ms) => Generator::Alphabet(ms.iter().map(f).collect()),
            Generator::Arcs(arcs) => {
                Generator::Arcs(arcs.iter().map(|(s, m)| (*s, f(m))).collect())
            }
        }
    }
}

/// A matrix carried together with a power-of-two scale: the represented
/// operator is `2^exp2 * matrix`. Normalization divides out the leading
/// binary magnitude, an exact operation on `f64`, so mantissa entries are
/// unaffected by rescaling and stay in range over arbitrarily long products.
#[derive(Debug, Clone)]
pub struct ScaledOperator {
    matrix: DMatrix<f64>,
    exp2: i64,
}

impl ScaledOperator {
    pub fn identity(dim: usize) -> Self {
        ScaledOperator { matrix: DMatrix::identity(dim, dim), exp2: 0 }
    }

    /// Wraps and normalizes: afterwards the largest entry magnitude lies in
    /// `[1, 2)` (zero matrices keep scale 0).
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        let mut op = ScaledOperator { matrix, exp2: 0 };
        op.normalize();
        op
    }

    fn normalize(&mut self) {
        let m = linalg::max_abs(&self.matrix);
        if m == 0.0 || !m.is_finite() {
            self.exp2 = 0;
            return;
        }
        let e = m.log2().floor() as i32;
        if e != 0 {
            // Scaling by 2^-e is exact for every finite f64.
            let factor = (2.0_f64).powi(-e);
            self.matrix *= factor;
            self.exp2 += e as i64;
        }
    }

    /// Mantissa matrix (the represented operator divided by `2^exp2`).
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn exp2(&self) -> i64 {
        self.exp2
    }

    /// Natural log of the scale factor `2^exp2`.
    pub fn log_scale(&self) -> f64 {
        self.exp2 as f64 * std::f64::consts::LN_2
    }

    /// `self ∘ inner` (apply `inner` first), renormalized.
    pub fn compose(&self, inner: &ScaledOperator) -> ScaledOperator {
        let mut op = ScaledOperator {
            matrix: &self.matrix * &inner.matrix,
            exp2: self.exp2 + inner.exp2,
        };
        op.normalize();
        op
    }

    fn mantissa_operator(&self, norm: &NormSpec) -> Result<Operator> {
        Operator::endomorphism(self.matrix.clone(), norm.clone())
    }

    /// `log ‖2^exp2 M‖` in the given norm; negative infinity for the zero
    /// operator.
    pub fn log_norm(&self, norm: &NormSpec, budget: &ExtremizeBudget) -> Result<f64> {
        let v = self.mantissa_operator(norm)?.operator_norm_with(budget)?;
        Ok(log_or_neg_inf(v) + self.log_scale())
    }

    /// Log of the `k`-th Bernstein number of the represented operator.
    pub fn log_bernstein(&self, norm: &NormSpec, k: usize, budgets: &Budgets) -> Result<f64> {
        let op = self.mantissa_operator(norm)?;
        let report = opstats::bernstein_with(&op, k, budgets)?;
        Ok(log_or_neg_inf(report.value) + self.log_scale())
    }

    /// Log of the minimal growth on `v` of the represented operator.
    pub fn log_min_growth(
        &self,
        norm: &NormSpec,
        v: &Subspace,
        budget: &ExtremizeBudget,
    ) -> Result<f64> {
        let op = self.mantissa_operator(norm)?;
        let g = opstats::min_growth_with(&op, v, budget)?;
        Ok(log_or_neg_inf(g.value) + self.log_scale())
    }

    /// Log of the restriction norm on `v` of the represented operator.
    pub fn log_restricted_norm(
        &self,
        norm: &NormSpec,
        v: &Subspace,
        budget: &ExtremizeBudget,
    ) -> Result<f64> {
        let op = self.mantissa_operator(norm)?;
        let g = opstats::restricted_norm_with(&op, v, budget)?;
        Ok(log_or_neg_inf(g.value) + self.log_scale())
    }

    /// Image of `v` under the represented operator (scale-independent).
    pub fn push_forward(&self, v: &Subspace) -> Result<Subspace> {
        push_forward_matrix(&self.matrix, v)
    }
}

fn log_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// The operations the spectral pipeline needs from a cocycle. Implemented
/// by [`CocycleSystem`] and by the deflated systems layered on top of it.
pub trait Cocycle: Send + Sync {
    fn ambient_dim(&self) -> usize;
    fn norm(&self) -> &NormSpec;
    /// Advance a base point (negative steps walk backwards, exactly).
    fn orbit(&self, p: &BasePoint, steps: i64) -> BasePoint;
    /// The one-step matrix at `p`.
    fn step_matrix(&self, p: &BasePoint) -> DMatrix<f64>;
    /// The product of step matrices over the time interval `[a, b)` based
    /// at `p`: steps at times `a, a+1, ..., b-1`, later times composed on
    /// the left. `a == b` gives the identity. Requires `a <= b`.
    fn interval(&self, p: &BasePoint, a: i64, b: i64) -> ScaledOperator;
    /// Deterministic sample of the base measure.
    fn sample_point(&self, seed: u64) -> BasePoint;
    /// How many times an inverse has been taken through this system.
    fn inversions(&self) -> u64;
}

impl<T: Cocycle + ?Sized> Cocycle for &T {
    fn ambient_dim(&self) -> usize {
        (**self).ambient_dim()
    }
    fn norm(&self) -> &NormSpec {
        (**self).norm()
    }
    fn orbit(&self, p: &BasePoint, steps: i64) -> BasePoint {
        (**self).orbit(p, steps)
    }
    fn step_matrix(&self, p: &BasePoint) -> DMatrix<f64> {
        (**self).step_matrix(p)
    }
    fn interval(&self, p: &BasePoint, a: i64, b: i64) -> ScaledOperator {
        (**self).interval(p, a, b)
    }
    fn sample_point(&self, seed: u64) -> BasePoint {
        (**self).sample_point(seed)
    }
    fn inversions(&self) -> u64 {
        (**self).inversions()
    }
}

/// A concrete cocycle: a base system, a generator selection, and the norm
/// the growth statistics are measured in.
#[derive(Debug)]
pub struct CocycleSystem {
    base: BaseSystem,
    generator: Generator,
    norm: NormSpec,
    dim: usize,
    memo: DashMap<(BasePoint, u32), ScaledOperator>,
    inversions: AtomicU64,
}

impl CocycleSystem {
    pub fn new(base: BaseSystem, generator: Generator, norm: NormSpec) -> Result<Self> {
        norm.validate()?;
        let mats = generator.matrices();
        let dim = match mats.first() {
            None => return Err(Error::ScenarioInvalid("generator has no matrices".into())),
            Some(m) => m.nrows(),
        };
        if dim == 0 {
            return Err(Error::ZeroDimensional("cocycle dimension"));
        }
        for m in &mats {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::ScenarioInvalid(format!(
                    "generator matrices must all be {dim}x{dim}"
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("generator matrix"));
            }
        }
        if let Some(d) = norm.pinned_dim() {
            if d != dim {
                return Err(Error::DimensionMismatch {
                    context: "cocycle norm dimension",
                    expected: dim,
                    got: d,
                });
            }
        }
        match (&base, &generator) {
            (BaseSystem::Shift { alphabet }, Generator::Alphabet(ms)) => {
                if ms.len() != *alphabet as usize {
                    return Err(Error::ScenarioInvalid(format!(
                        "alphabet size {} does not match {} generator matrices",
                        alphabet,
                        ms.len()
                    )));
                }
            }
            (BaseSystem::Rotation { .. } | BaseSystem::ToralAutomorphism, Generator::Arcs(arcs)) => {
                if arcs.is_empty() {
                    return Err(Error::ScenarioInvalid("no arcs".into()));
                }
                if !arcs.windows(2).all(|w| w[0].0 < w[1].0) {
                    return Err(Error::ScenarioInvalid(
                        "arc starts must be strictly increasing".into(),
                    ));
                }
            }
            (_, Generator::Constant(_)) => {}
            _ => {
                return Err(Error::ScenarioInvalid(
                    "generator selection does not fit the base system".into(),
                ));
            }
        }
        Ok(CocycleSystem {
            base,
            generator,
            norm,
            dim,
            memo: DashMap::new(),
            inversions: AtomicU64::new(0),
        })
    }

    pub fn base(&self) -> &BaseSystem {
        &self.base
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    /// The same base dynamics with every generator matrix transformed
    /// (e.g. rescaled); the memo starts empty.
    pub fn with_mapped_generator(
        &self,
        f: impl FnMut(&DMatrix<f64>) -> DMatrix<f64>,
    ) -> Result<CocycleSystem> {
        CocycleSystem::new(self.base.clone(), self.generator.map_matrices(f), self.norm.clone())
    }

    /// Product over `[0, n)` from `p`, splitting at the midpoint. The
    /// association depends only on `n`, so the same orbit stretch evaluates
    /// identically wherever the enclosing call started.
    fn eval_from(&self, p: &BasePoint, n: u32) -> ScaledOperator {
        match n {
            0 => return ScaledOperator::identity(self.dim),
            1 => return ScaledOperator::from_matrix(self.step_matrix(p)),
            _ => {}
        }
        let key = (*p, n);
        if let Some(hit) = self.memo.get(&key) {
            return hit.clone();
        }
        let h = n / 2;
        let left = self.eval_from(p, h);
        let mid = self.orbit(p, h as i64);
        let right = self.eval_from(&mid, n - h);
        let product = right.compose(&left);
        if self.memo.len() < MEMO_CAP {
            self.memo.insert(key, product.clone());
        }
        product
    }

    /// Mean of `max(log ‖L_x‖, 0)` over `samples` seeded base points: a
    /// direct estimate of the integrability of the generator.
    pub fn integrability_estimate(&self, samples: usize, seed: u64) -> Result<f64> {
        if samples == 0 {
            return Err(Error::InvalidArgument("integrability sample count is zero".into()));
        }
        let mut total = 0.0;
        for i in 0..samples {
            let p = self.sample_point(seed ^ splitmix64(i as u64));
            let op = ScaledOperator::from_matrix(self.step_matrix(&p));
            let log_norm = op.log_norm(&self.norm, &ExtremizeBudget::light())?;
            if log_norm.is_finite() {
                total += log_norm.max(0.0);
            }
        }
        Ok(total / samples as f64)
    }

    /// The inverse of the interval product, for callers that genuinely want
    /// it. Every use is counted; the decomposition pipeline never calls
    /// this, and its verification asserts that the counter stayed at zero.
    pub fn inverse_interval(&self, p: &BasePoint, a: i64, b: i64) -> Result<ScaledOperator> {
        self.inversions.fetch_add(1, Ordering::Relaxed);
        let op = self.interval(p, a, b);
        let inv = op
            .matrix()
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::RankDeficient { rank: 0, dim: self.dim })?;
        let mut out = ScaledOperator { matrix: inv, exp2: -op.exp2() };
        out.normalize();
        Ok(out)
    }
}

impl Cocycle for CocycleSystem {
    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn norm(&self) -> &NormSpec {
        &self.norm
    }

    fn orbit(&self, p: &BasePoint, steps: i64) -> BasePoint {
        self.base.advance(p, steps)
    }

    fn step_matrix(&self, p: &BasePoint) -> DMatrix<f64> {
        match &self.generator {
            Generator::Constant(m) => m.clone(),
            Generator::Alphabet(ms) => {
                let s = self.base.symbol(p) as usize;
                ms[s % ms.len()].clone()
            }
            Generator::Arcs(arcs) => {
                let x = match p {
                    BasePoint::Circle(x) => *x,
                    BasePoint::Torus(x, _) => *x,
                    BasePoint::Sequence { .. } => {
                        panic!("arc generators require a circle or torus base")
                    }
                };
                let idx = match arcs.iter().rposition(|(start, _)| *start <= x) {
                    Some(i) => i,
                    // Below the first start: wrap around to the last arc.
                    None => arcs.len() - 1,
                };
                arcs[idx].1.clone()
            }
        }
    }

    fn interval(&self, p: &BasePoint, a: i64, b: i64) -> ScaledOperator {
        assert!(a <= b, "interval endpoints out of order: [{a}, {b})");
        let start = self.orbit(p, a);
        self.eval_from(&start, (b - a) as u32)
    }

    fn sample_point(&self, seed: u64) -> BasePoint {
        self.base.point_from_seed(seed)
    }

    fn inversions(&self) -> u64 {
        self.inversions.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn rotation_system() -> CocycleSystem {
        let arcs = vec![
            (0u64, dmatrix![2.0, 1.0; 0.0, 0.5]),
            (1u64 << 63, dmatrix![0.3, 0.0; 1.0, 1.5]),
        ];
        CocycleSystem::new(
            BaseSystem::Rotation { alpha_num: 0x9E37_79B9_7F4A_7C15 },
            Generator::Arcs(arcs),
            NormSpec::L2,
        )
        .unwrap()
    }

    fn shift_system(alphabet: u32) -> CocycleSystem {
        let ms = (0..alphabet)
            .map(|s| {
                let t = s as f64;
                dmatrix![1.0 + 0.1 * t, 0.2; -0.1, 0.8 + 0.05 * t]
            })
            .collect();
        CocycleSystem::new(
            BaseSystem::Shift { alphabet },
            Generator::Alphabet(ms),
            NormSpec::L2,
        )
        .unwrap()
    }

    #[test]
    fn orbits_reverse_exactly() {
        let rot = BaseSystem::Rotation { alpha_num: 12345 | 1 };
        let p = BasePoint::Circle(987654321);
        assert_eq!(rot.advance(&rot.advance(&p, 1000), -1000), p);

        let cat = BaseSystem::ToralAutomorphism;
        let q = BasePoint::Torus(0xDEAD_BEEF, 0x1234_5678);
        assert_eq!(cat.advance(&cat.advance(&q, 37), -37), q);
        // One step matches the matrix action.
        if let BasePoint::Torus(x, y) = cat.advance(&q, 1) {
            assert_eq!(x, 2u64.wrapping_mul(0xDEAD_BEEF).wrapping_add(0x1234_5678));
            assert_eq!(y, 0xDEAD_BEEFu64.wrapping_add(0x1234_5678));
        } else {
            panic!("torus point expected");
        }

        let shift = BaseSystem::Shift { alphabet: 5 };
        let s = BasePoint::Sequence { key: 42, position: -3 };
        assert_eq!(shift.advance(&s, 10), BasePoint::Sequence { key: 42, position: 7 });
    }

    #[test]
    fn shift_symbols_are_deterministic_and_cover_the_alphabet() {
        let shift = BaseSystem::Shift { alphabet: 4 };
        let mut seen = [0usize; 4];
        for pos in -200..200 {
            let p = BasePoint::Sequence { key: 7, position: pos };
            let s = shift.symbol(&p);
            assert_eq!(s, shift.symbol(&p));
            assert!(s < 4);
            seen[s as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 40), "symbol histogram too skewed: {seen:?}");
    }

    #[test]
    fn interval_is_stationary_bitwise() {
        let sys = shift_system(3);
        let p = sys.sample_point(99);
        for shiftby in [-7i64, 1, 13] {
            let q = sys.orbit(&p, shiftby);
            let a = sys.interval(&p, -4 + shiftby, 9 + shiftby);
            let b = sys.interval(&q, -4, 9);
            assert_eq!(a.exp2(), b.exp2());
            assert_eq!(a.matrix().as_slice(), b.matrix().as_slice());
        }
    }

    #[test]
    fn interval_composes_consistently() {
        let sys = rotation_system();
        let p = sys.sample_point(5);
        let whole = sys.interval(&p, 0, 23);
        let late = sys.interval(&p, 11, 23);
        let early = sys.interval(&p, 0, 11);
        let glued = late.compose(&early);
        assert_eq!(whole.exp2(), glued.exp2());
        let diff = whole.matrix() - glued.matrix();
        assert!(linalg::max_abs(&diff) < 1e-13 * linalg::max_abs(whole.matrix()));
    }

    #[test]
    fn memoized_and_fresh_evaluations_agree_bitwise() {
        let sys = shift_system(4);
        let p = sys.sample_point(1);
        let first = sys.interval(&p, -16, 16);
        let again = sys.interval(&p, -16, 16);
        assert_eq!(first.matrix().as_slice(), again.matrix().as_slice());
        let fresh_sys = shift_system(4);
        let fresh = fresh_sys.interval(&p, -16, 16);
        assert_eq!(first.exp2(), fresh.exp2());
        assert_eq!(first.matrix().as_slice(), fresh.matrix().as_slice());
    }

    #[test]
    fn normalization_keeps_mantissa_in_binade() {
        let sys = rotation_system();
        let p = sys.sample_point(17);
        for n in [1, 5, 37, 256] {
            let op = sys.interval(&p, 0, n);
            let m = linalg::max_abs(op.matrix());
            assert!((1.0..2.0).contains(&m), "mantissa magnitude {m} at n = {n}");
        }
    }

    #[test]
    fn doubling_the_generator_shifts_only_the_exponent() {
        let sys = shift_system(3);
        let doubled = sys.with_mapped_generator(|m| m * 2.0).unwrap();
        let p = sys.sample_point(3);
        for n in [1u32, 2, 9, 64] {
            let a = sys.interval(&p, 0, n as i64);
            let b = doubled.interval(&p, 0, n as i64);
            assert_eq!(a.matrix().as_slice(), b.matrix().as_slice(), "mantissas differ at n = {n}");
            assert_eq!(b.exp2() - a.exp2(), n as i64, "scale shift at n = {n}");
        }
    }

    #[test]
    fn zero_generator_has_no_finite_log_statistics() {
        let sys = CocycleSystem::new(
            BaseSystem::Rotation { alpha_num: 1 },
            Generator::Constant(DMatrix::zeros(2, 2)),
            NormSpec::L2,
        )
        .unwrap();
        let p = sys.sample_point(0);
        let op = sys.interval(&p, 0, 4);
        let budget = ExtremizeBudget::light();
        assert_eq!(op.log_norm(&NormSpec::L2, &budget).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn long_products_stay_in_range_through_rescaling() {
        // A pure doubling cocycle: after 2000 steps the represented norm is
        // 2^2000, far outside f64, but the log statistic is exact.
        let sys = CocycleSystem::new(
            BaseSystem::Rotation { alpha_num: 1 },
            Generator::Constant(dmatrix![2.0, 0.0; 0.0, 2.0]),
            NormSpec::L2,
        )
        .unwrap();
        let p = BasePoint::Circle(0);
        let op = sys.interval(&p, 0, 2000);
        let log_norm = op.log_norm(&NormSpec::L2, &ExtremizeBudget::light()).unwrap();
        assert_relative_eq!(log_norm, 2000.0 * std::f64::consts::LN_2, max_relative = 1e-12);
    }

    #[test]
    fn inverse_interval_is_counted_and_interval_is_not() {
        let sys = rotation_system();
        let p = sys.sample_point(11);
        let _ = sys.interval(&p, -8, 8);
        assert_eq!(sys.inversions(), 0);
        let op = sys.interval(&p, 0, 3);
        let inv = sys.inverse_interval(&p, 0, 3).unwrap();
        assert_eq!(sys.inversions(), 1);
        let product = op.compose(&inv);
        let represented = product.matrix() * 2.0_f64.powi(product.exp2() as i32);
        let diff = represented - DMatrix::<f64>::identity(2, 2);
        assert!(linalg::max_abs(&diff) < 1e-10);
    }

    #[test]
    fn scaled_operator_log_bernstein_matches_singular_values() {
        let op = ScaledOperator::from_matrix(dmatrix![6.0, 0.0; 0.0, 0.75]);
        let b = Budgets::default();
        let l1 = op.log_bernstein(&NormSpec::L2, 1, &b).unwrap();
        let l2 = op.log_bernstein(&NormSpec::L2, 2, &b).unwrap();
        assert_relative_eq!(l1, 6.0_f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(l2, 0.75_f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn mismatched_generator_and_base_are_rejected() {
        let bad = CocycleSystem::new(
            BaseSystem::Rotation { alpha_num: 1 },
            Generator::Alphabet(vec![DMatrix::identity(2, 2)]),
            NormSpec::L2,
        );
        assert!(matches!(bad, Err(Error::ScenarioInvalid(_))));
    }
}
