//! The constructive decomposition pipeline: fast spaces, slow projections,
//! deflation, and the full exponent-space splitting.
//!
//! Everything here runs forward only. The fast space at a point is selected
//! from wide two-sided windows of the cocycle by a growth test, transported
//! to the point by the left half-window, and refined until the iterates
//! stabilize. The slow projection is assembled per basis vector by finding
//! the translate into the fast space whose forward growth is smallest.
//! Deflating the cocycle through that projection exposes the next level,
//! and iterating the construction splits the whole space. No operator is
//! ever inverted; the base dynamics alone walk backwards.

use dashmap::DashMap;
use nalgebra::{DMatrix, DVector};

use crate::cocycle::{BasePoint, Cocycle, ScaledOperator};
use crate::error::{Error, Result};
use crate::grassmannian::{
    first_hit, hausdorff_distance, DenseEnumeration, Projection, Subspace,
};
use crate::kingman::{self, Mode, TracePoint};
use crate::linalg;
use crate::normed::{self, NormSpec, Operator, Vector};
use crate::opstats::{self, Budgets, CheckReport, InputDigest};

/// Iterate gap below which the fast-space refinement stops.
pub const FAST_STOP_TOL: f64 = 1e-6;
/// Iterate gap below which the slow-projection refinement stops.
pub const SLOW_STOP_TOL: f64 = 1e-11;
const ENUM_SCAN: usize = 200_000;
const GRID_SCAN: usize = 200_000;
const PI_CACHE_CAP: usize = 200_000;
const PRODUCT_MEMO_CAP: usize = 200_000;

/// How the candidate fast space at each window width is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// First hit of the growth test over the dense subspace enumeration:
    /// slower, but the selection path is canonical and scale-invariant.
    Enumerated,
    /// Witness of the optimized growth statistic, falling back to the
    /// enumeration when the witness misses the threshold.
    Optimized,
}

/// One refinement step of the fast-space algorithm.
#[derive(Debug, Clone)]
pub struct FastSpaceRecord {
    /// Half-width of the window the candidate was selected from.
    pub n: u64,
    /// The selected subspace in the fiber at time `-n`.
    pub raw: Subspace,
    /// The candidate transported to time zero.
    pub transported: Subspace,
    /// Distance to the next candidate, once known.
    pub gap: Option<f64>,
}

/// The full run of the fast-space algorithm at one base point.
#[derive(Debug, Clone)]
pub struct FastSpaceRun {
    pub m1: usize,
    pub epsilon: f64,
    pub records: Vec<FastSpaceRecord>,
    pub e_final: Subspace,
    /// Least-squares slope of `log gap` against `n`, when enough gaps exist.
    pub decay_slope: Option<f64>,
}

fn fit_log_slope(points: &[(u64, f64)]) -> Option<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, g)| g.is_finite() && *g > 0.0)
        .map(|&(n, g)| (n as f64, g.ln()))
        .collect();
    if usable.len() < 3 {
        return None;
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Selects a subspace of dimension `m1` whose minimal growth under the
/// window product clears `threshold` (in log scale) and survives transport
/// by the left half-window.
fn select_raw(
    norm: &NormSpec,
    window: &ScaledOperator,
    transport: &ScaledOperator,
    m1: usize,
    threshold: f64,
    selection: Selection,
    budgets: &Budgets,
    enumeration: &mut DenseEnumeration,
) -> Result<Subspace> {
    let growth_ok = |v: &Subspace| -> bool {
        window
            .log_min_growth(norm, v, &budgets.inner)
            .map(|g| g > threshold)
            .unwrap_or(false)
    };
    let admissible =
        |v: &Subspace| -> bool { growth_ok(v) && transport.push_forward(v).is_ok() };
    if selection == Selection::Optimized {
        let op = Operator::endomorphism(window.matrix().clone(), norm.clone())?;
        let report = opstats::bernstein_with(&op, m1, budgets)?;
        if let Some(w) = report.witness {
            if admissible(&w) {
                return Ok(w);
            }
        }
        // Witness missed the threshold or its image collapses: fall through
        // to the canonical enumeration.
    }
    let (raw, _) = first_hit(|i| enumeration.get(i).map(Some), admissible, ENUM_SCAN)?;
    Ok(raw)
}

/// Runs the fast-space algorithm at `p`: for growing half-widths `n`, pick
/// a near-optimal subspace of the window product `L_{-n -> n}`, transport
/// it to time zero by `L_{-n -> 0}`, and stop once consecutive transported
/// candidates agree within [`FAST_STOP_TOL`].
pub fn fast_space(
    c: &dyn Cocycle,
    p: &BasePoint,
    m1: usize,
    epsilon: f64,
    n_max: u64,
    selection: Selection,
    budgets: &Budgets,
) -> Result<FastSpaceRun> {
    let d = c.ambient_dim();
    if m1 == 0 {
        return Err(Error::ZeroDimensional("fast-space dimension"));
    }
    if m1 > d {
        return Err(Error::DimensionMismatch {
            context: "fast-space dimension",
            expected: d,
            got: m1,
        });
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "resolution margin must be positive and finite, got {epsilon}"
        )));
    }
    if n_max == 0 {
        return Err(Error::InvalidArgument("window cap must be positive".into()));
    }
    let norm = c.norm();
    norm.validate()?;
    let mut enumeration = DenseEnumeration::new(d, m1)?;
    let mut records: Vec<FastSpaceRecord> = Vec::new();
    let mut converged = false;
    for n in 1..=n_max {
        let window = c.interval(p, -(n as i64), n as i64);
        let transport = c.interval(p, -(n as i64), 0);
        let log_rho = window.log_bernstein(norm, m1, budgets)?;
        if log_rho == f64::NEG_INFINITY {
            return Err(Error::QuasicompactnessFailure(format!(
                "window product rank fell below {m1} at half-width {n}"
            )));
        }
        let threshold = log_rho - epsilon;
        let raw = select_raw(
            norm,
            &window,
            &transport,
            m1,
            threshold,
            selection,
            budgets,
            &mut enumeration,
        )?;
        let transported = transport.push_forward(&raw)?;
        let gap_prev = match records.last() {
            Some(prev) => Some(hausdorff_distance(&prev.transported, &transported, norm)?),
            None => None,
        };
        if let (Some(prev), Some(g)) = (records.last_mut(), gap_prev) {
            prev.gap = Some(g);
        }
        records.push(FastSpaceRecord { n, raw, transported, gap: None });
        if gap_prev.is_some_and(|g| g < FAST_STOP_TOL) {
            converged = true;
            break;
        }
    }
    let gaps: Vec<(u64, f64)> =
        records.iter().filter_map(|r| r.gap.map(|g| (r.n, g))).collect();
    let decay_slope = fit_log_slope(&gaps);
    if !converged && gaps.len() >= 8 {
        let last_gap = gaps.last().map(|g| g.1).unwrap_or(0.0);
        if decay_slope.is_some_and(|s| s >= 0.0) && last_gap > 1e-3 {
            return Err(Error::QuasicompactnessFailure(format!(
                "candidate gaps are not contracting (slope {:.3}, last gap {:.3e})",
                decay_slope.unwrap(),
                last_gap
            )));
        }
    }
    let e_final = records
        .last()
        .map(|r| r.transported.clone())
        .ok_or(Error::InvalidArgument("no fast-space iterations ran".into()))?;
    Ok(FastSpaceRun { m1, epsilon, records, e_final, decay_slope })
}

/// Distance between the one-step image of the field `e` at `p` and the
/// field evaluated one step ahead. Zero for an exactly equivariant field.
pub fn equivariance_residual(
    c: &dyn Cocycle,
    p: &BasePoint,
    e: &dyn Fn(&BasePoint) -> Result<Subspace>,
) -> Result<f64> {
    let here = e(p)?;
    let ahead = e(&c.orbit(p, 1))?;
    let pushed = c.interval(p, 0, 1).push_forward(&here)?;
    hausdorff_distance(&pushed, &ahead, c.norm())
}

/// One assembled iterate of the slow projection.
#[derive(Debug, Clone)]
pub struct SlowIterate {
    pub n: u64,
    pub matrix: DMatrix<f64>,
    /// Frobenius distance to the next iterate, once known.
    pub gap: Option<f64>,
}

/// Rational-translate cross-check of the continuous minimization.
#[derive(Debug, Clone)]
pub struct TranslateGridCheck {
    /// Window length the grid selection ran at.
    pub n: u64,
    /// Selected coefficients per ambient basis vector, as `(num, den)`
    /// pairs per fast-space coordinate; empty for vectors inside the fast
    /// space.
    pub coefficients: Vec<Vec<(i64, u32)>>,
    /// Worst distance between grid-selected and continuously-minimized
    /// translate directions, over the ambient basis.
    pub worst_direction_distance: f64,
}

/// The slow-projection construction at one base point.
#[derive(Debug, Clone)]
pub struct SlowProjectionRun {
    pub epsilon: f64,
    pub iterates: Vec<SlowIterate>,
    pub projection: Projection,
    pub decay_slope: Option<f64>,
    /// Present when the rational-grid selection found all translates within
    /// its scan budget.
    pub grid: Option<TranslateGridCheck>,
}

/// Minimizes `log ‖M t‖ - log ‖t‖` over translates `t = x - B c`, warm
/// started at `warm`. For the Euclidean norm the stationarity condition is
/// a linear solve in `c`, iterated to convergence; other norms descend by
/// repeated line searches at shrinking scales.
fn slow_translate(
    mantissa: &DMatrix<f64>,
    norm: &NormSpec,
    basis: &DMatrix<f64>,
    x: &Vector,
    warm: &DVector<f64>,
) -> DVector<f64> {
    if norm.is_l2() {
        return slow_translate_l2(mantissa, basis, x, warm);
    }
    let objective = |cv: &DVector<f64>| -> f64 {
        let t = x - basis * cv;
        let denom = norm.eval_unchecked(&t);
        if !(denom > 0.0) {
            return f64::INFINITY;
        }
        let num = norm.eval_unchecked(&(mantissa * &t));
        if num <= 0.0 {
            f64::NEG_INFINITY
        } else {
            num.ln() - denom.ln()
        }
    };
    let mut c = warm.clone();
    let mut scale = 1.0_f64;
    while scale > 1e-15 {
        for _ in 0..2 {
            for i in 0..c.len() {
                let partial = |v: f64| {
                    let mut probe = c.clone();
                    probe[i] = v;
                    objective(&probe)
                };
                let (best, _) = normed::line_min_tan(&partial, c[i], scale, 9, 24);
                c[i] = best;
            }
        }
        scale *= 1e-2;
    }
    c
}

fn slow_translate_l2(
    mantissa: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    x: &Vector,
    warm: &DVector<f64>,
) -> DVector<f64> {
    let mb = mantissa * basis;
    let mx = mantissa * x;
    let a_fast = mb.transpose() * &mb;
    let b_fast = mb.transpose() * &mx;
    let a_id = basis.transpose() * basis;
    let b_id = basis.transpose() * x;
    let quotient = |c: &DVector<f64>| -> f64 {
        let t = x - basis * c;
        let d2 = t.norm_squared();
        if d2 == 0.0 {
            return f64::INFINITY;
        }
        (mantissa * t).norm_squared() / d2
    };
    let descend = |start: DVector<f64>| -> (DVector<f64>, f64) {
        let mut c = start;
        let mut q = quotient(&c);
        for _ in 0..12 {
            let lhs = &a_fast - &a_id * q;
            let rhs = &b_fast - &b_id * q;
            let Some(solved) = lhs.lu().solve(&rhs) else { break };
            let q_new = quotient(&solved);
            // The stationarity iteration is a descent on the quotient; stop
            // on stagnation or on a degenerate uphill step.
            if !q_new.is_finite() || q_new > q * (1.0 + 1e-12) + 1e-300 {
                break;
            }
            let moved = (&solved - &c).norm();
            c = solved;
            let stalled = (q - q_new).abs() <= 1e-15 * (1.0 + q);
            q = q_new;
            if moved <= 1e-15 * (1.0 + c.norm()) || stalled {
                break;
            }
        }
        (c, q)
    };
    // The warm start can sit exactly on a stationary maximum of the
    // quotient (a rank-deficient window maps a coordinate direction to the
    // top image direction), so also descend from the plain least-squares
    // translate, which targets the window kernel directly.
    let (c_warm, q_warm) = descend(warm.clone());
    let Some(ls) = a_fast.clone().lu().solve(&b_fast) else {
        return c_warm;
    };
    let (c_ls, q_ls) = descend(ls);
    if q_ls < q_warm {
        c_ls
    } else {
        c_warm
    }
}

/// Assembles one iterate of the slow projection: per ambient basis vector,
/// the minimizing translate into `e` under the window product, with zero
/// columns for basis vectors already inside `e`. Warm starts are read from
/// and written back to `warm`.
fn assemble_iterate(
    window: &ScaledOperator,
    norm: &NormSpec,
    e: &Subspace,
    warm: &mut [Option<DVector<f64>>],
) -> Result<DMatrix<f64>> {
    let d = e.ambient_dim();
    let m = e.dim();
    if linalg::max_abs(window.matrix()) == 0.0 {
        return Err(Error::RankDeficient { rank: 0, dim: d });
    }
    let mut pi = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut x = DVector::zeros(d);
        x[j] = 1.0;
        if e.contains(&x, 1e-12) {
            warm[j] = None;
            continue;
        }
        let start = warm[j].clone().unwrap_or_else(|| DVector::zeros(m));
        let c = slow_translate(window.matrix(), norm, e.basis(), &x, &start);
        let column = &x - e.basis() * &c;
        pi.set_column(j, &column);
        warm[j] = Some(c);
    }
    Ok(pi)
}

/// Builds the projection along `e` onto the complementary slow directions
/// by iterating the translate construction over growing window lengths.
pub fn slow_projection(
    c: &dyn Cocycle,
    p: &BasePoint,
    e: &Subspace,
    epsilon: f64,
    n_max: u64,
    budgets: &Budgets,
) -> Result<SlowProjectionRun> {
    let d = c.ambient_dim();
    if e.ambient_dim() != d {
        return Err(Error::DimensionMismatch {
            context: "slow projection ambient",
            expected: d,
            got: e.ambient_dim(),
        });
    }
    if e.dim() >= d {
        return Err(Error::NonComplementary(
            "fast space fills the ambient space, leaving no slow directions".into(),
        ));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "resolution margin must be positive and finite, got {epsilon}"
        )));
    }
    let norm = c.norm();
    norm.validate()?;
    let mut warm: Vec<Option<DVector<f64>>> = vec![None; d];
    let mut iterates: Vec<SlowIterate> = Vec::new();
    for n in 1..=n_max {
        let window = c.interval(p, 0, n as i64);
        let pi = assemble_iterate(&window, norm, e, &mut warm)?;
        let gap_prev = iterates
            .last()
            .map(|prev| linalg::frobenius(&(&pi - &prev.matrix)));
        if let (Some(prev), Some(g)) = (iterates.last_mut(), gap_prev) {
            prev.gap = Some(g);
        }
        iterates.push(SlowIterate { n, matrix: pi, gap: None });
        if gap_prev.is_some_and(|g| g < SLOW_STOP_TOL) {
            break;
        }
    }
    let last = iterates.last().ok_or(Error::InvalidArgument(
        "no slow-projection iterations ran".into(),
    ))?;
    let final_matrix = last.matrix.clone();
    let n_reached = last.n;
    let (q, rank) = linalg::orthonormal_span(&final_matrix, 1e-6);
    if rank != d - e.dim() {
        return Err(Error::ProjectionInvalid(format!(
            "assembled projection has rank {rank}, expected {}",
            d - e.dim()
        )));
    }
    let range = Subspace::from_span(&q)?;
    let projection = Projection::from_parts(final_matrix, range, e.clone(), 1e-8)?;
    let gaps: Vec<(u64, f64)> =
        iterates.iter().filter_map(|it| it.gap.map(|g| (it.n, g))).collect();
    let decay_slope = fit_log_slope(&gaps);
    let grid_n = n_reached.min(12).max(1);
    let grid = translate_grid_check(c, p, e, epsilon, grid_n, &projection, budgets).ok();
    Ok(SlowProjectionRun { epsilon, iterates, projection, decay_slope, grid })
}

/// Enumerates rational coefficient tuples by increasing height: all reduced
/// `num/den` with `|num| <= h` and `den <= h` appear before height `h + 1`.
fn rational_by_height(limit: usize) -> Vec<(i64, u32)> {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    let mut out = vec![(0i64, 1u32)];
    let mut h = 1u32;
    while out.len() < limit {
        for den in 1..=h {
            for num in 1..=h as i64 {
                let height = (num as u32).max(den);
                if height == h && gcd(num as u64, den as u64) == 1 {
                    out.push((num, den));
                    out.push((-num, den));
                }
            }
        }
        h += 1;
    }
    out.truncate(limit);
    out
}

/// Re-runs the translate selection over a rational coefficient grid: the
/// first tuple (in height order) whose translate grows no faster than
/// `e^epsilon` times the next growth statistic qualifies. Records the
/// selected coefficients and the worst disagreement with the continuous
/// projection's columns.
pub fn translate_grid_check(
    c: &dyn Cocycle,
    p: &BasePoint,
    e: &Subspace,
    epsilon: f64,
    n: u64,
    continuous: &Projection,
    budgets: &Budgets,
) -> Result<TranslateGridCheck> {
    let d = c.ambient_dim();
    let m = e.dim();
    let norm = c.norm();
    let window = c.interval(p, 0, n as i64);
    let log_rho_next = window.log_bernstein(norm, m + 1, budgets)?;
    let singles = rational_by_height(4096);
    let mut worst = 0.0_f64;
    let mut coefficients: Vec<Vec<(i64, u32)>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut x = DVector::zeros(d);
        x[j] = 1.0;
        if e.contains(&x, 1e-12) {
            coefficients.push(Vec::new());
            continue;
        }
        let admissible = |coeffs: &[(i64, u32)]| -> Option<Vector> {
            let mut t = x.clone();
            for (i, &(num, den)) in coeffs.iter().enumerate() {
                let q = num as f64 / den as f64;
                t -= e.basis().column(i) * q;
            }
            let log_t = norm.eval_unchecked(&t).ln();
            let image = window.matrix() * &t;
            let v = norm.eval_unchecked(&image);
            let log_image =
                if v > 0.0 { v.ln() + window.log_scale() } else { f64::NEG_INFINITY };
            (log_image <= epsilon + log_rho_next + log_t).then_some(t)
        };
        let hit = if m == 1 {
            first_hit(
                |i| Ok(singles.get(i).map(|&q| vec![q])),
                |q| admissible(q).is_some(),
                GRID_SCAN,
            )?
        } else {
            first_hit(
                |i| Ok(tuple_at(&singles, m, i)),
                |q| admissible(q).is_some(),
                GRID_SCAN,
            )?
        };
        let translate = admissible(&hit.0).expect("accepted translate vanished");
        let cont_col: Vector = continuous.matrix().column(j).into();
        let du = &translate / translate.norm();
        let dv = &cont_col / cont_col.norm();
        let dist = (&du - &dv).norm().min((&du + &dv).norm());
        worst = worst.max(dist);
        coefficients.push(hit.0);
    }
    Ok(TranslateGridCheck { n, coefficients, worst_direction_distance: worst })
}

/// Mixed-radix walk through `m`-tuples of grid rationals, ordered so that
/// every tuple over the first `k` singles appears before any tuple needing
/// the `(k+1)`-th.
fn tuple_at(singles: &[(i64, u32)], m: usize, index: usize) -> Option<Vec<(i64, u32)>> {
    // Tuples with max single-index `s` are enumerated for s = 0, 1, ...;
    // within a block, the remaining digits range over 0..=s.
    let mut s = 0usize;
    let mut skipped = 0usize;
    loop {
        if s >= singles.len() {
            return None;
        }
        let below = (s + 1).pow(m as u32) - s.pow(m as u32);
        if index < skipped + below {
            let offset = index - skipped;
            // Enumerate the block: all tuples over 0..=s containing s.
            let total = (s + 1).pow(m as u32);
            let mut tuple_index = 0usize;
            for raw in 0..total {
                let mut digits = Vec::with_capacity(m);
                let mut r = raw;
                for _ in 0..m {
                    digits.push(r % (s + 1));
                    r /= s + 1;
                }
                if digits.contains(&s) {
                    if tuple_index == offset {
                        return Some(digits.into_iter().map(|i| singles[i]).collect());
                    }
                    tuple_index += 1;
                }
            }
            return None;
        }
        skipped += below;
        s += 1;
    }
}

/// Tail estimate of `(1/n) log ‖L_{0 -> n} x‖`; negative infinity when the
/// orbit of `x` falls into a kernel (or `x` is zero).
pub fn vector_growth_rate(
    c: &dyn Cocycle,
    p: &BasePoint,
    x: &Vector,
    n_max: u64,
) -> Result<f64> {
    let d = c.ambient_dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            context: "growth-rate vector",
            expected: d,
            got: x.len(),
        });
    }
    let norm = c.norm();
    let base = normed::norm(x, norm)?;
    if base == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if n_max == 0 {
        return Err(Error::InvalidArgument("growth horizon must be positive".into()));
    }
    let mut trace = Vec::new();
    for n in kingman::trace_grid(n_max.max(8)) {
        let op = c.interval(p, 0, n as i64);
        let v = norm.eval_unchecked(&(op.matrix() * x));
        if !(v > 0.0) {
            // The image is zero and stays zero from here on.
            return Ok(f64::NEG_INFINITY);
        }
        let log_image = v.ln() + op.log_scale();
        trace.push(TracePoint { n, value: (log_image - base.ln()) / n as f64 });
    }
    Ok(kingman::tail_median(&trace))
}

/// Per-point construction parameters for one decomposition level.
#[derive(Debug, Clone)]
pub struct LevelParams {
    pub m1: usize,
    pub epsilon: f64,
    /// Half-width of the selection window for the fast space.
    pub n_fast: u64,
    /// Window length for the slow-translate assembly.
    pub n_slow: u64,
    pub selection: Selection,
    pub budgets: Budgets,
}

/// The fast space at `p` from a single selection window of half-width
/// `params.n_fast` (no refinement records).
pub fn point_fast_space(
    c: &dyn Cocycle,
    p: &BasePoint,
    params: &LevelParams,
) -> Result<Subspace> {
    let n = params.n_fast as i64;
    let window = c.interval(p, -n, n);
    let transport = c.interval(p, -n, 0);
    let log_rho = window.log_bernstein(c.norm(), params.m1, &params.budgets)?;
    if log_rho == f64::NEG_INFINITY {
        return Err(Error::QuasicompactnessFailure(format!(
            "window product rank fell below {} at half-width {}",
            params.m1, params.n_fast
        )));
    }
    let mut enumeration = DenseEnumeration::new(c.ambient_dim(), params.m1)?;
    let raw = select_raw(
        c.norm(),
        &window,
        &transport,
        params.m1,
        log_rho - params.epsilon,
        params.selection,
        &params.budgets,
        &mut enumeration,
    )?;
    transport.push_forward(&raw)
}

/// The slow-projection matrix at `p` from a single window of length
/// `params.n_slow` over the fast space computed there.
pub fn point_projection(
    c: &dyn Cocycle,
    p: &BasePoint,
    params: &LevelParams,
) -> Result<DMatrix<f64>> {
    let e = point_fast_space(c, p, params)?;
    if e.dim() >= c.ambient_dim() {
        return Err(Error::NonComplementary(
            "fast space fills the ambient space, leaving no slow directions".into(),
        ));
    }
    let window = c.interval(p, 0, params.n_slow as i64);
    let mut warm: Vec<Option<DVector<f64>>> = vec![None; c.ambient_dim()];
    assemble_iterate(&window, c.norm(), &e, &mut warm)
}

/// The cocycle with the current level projected away: each step becomes
/// `L_p ∘ Π_p`, with `Π_p` built per point from its own fast space and
/// cached. An optional norm bound restricts the deflation to points where
/// `‖Π_p‖` stays controlled, applying the bare step elsewhere.
pub struct DeflatedCocycle<'a> {
    inner: Box<dyn Cocycle + 'a>,
    params: LevelParams,
    norm_bound: Option<f64>,
    projections: DashMap<BasePoint, DMatrix<f64>>,
    products: DashMap<(BasePoint, u32), ScaledOperator>,
}

/// Relative floor for a deflated step: when `‖L_p Π_p‖` is this small
/// against the product of its factors' norms, the step has annihilated the
/// retained space at working accuracy and is flushed to exactly zero.
/// Carrying the residue instead would recycle the projection's estimation
/// error, which regrows at the top rate after every annihilation and
/// settles into a fake finite exponent no horizon can separate.
const DEFLATION_FLUSH: f64 = 1e-5;

/// Deflates `inner` through per-point slow projections with the given
/// construction parameters.
pub fn deflate<'a>(inner: Box<dyn Cocycle + 'a>, params: LevelParams) -> DeflatedCocycle<'a> {
    DeflatedCocycle {
        inner,
        params,
        norm_bound: None,
        projections: DashMap::new(),
        products: DashMap::new(),
    }
}

impl<'a> DeflatedCocycle<'a> {
    /// Restricts deflation to points where the projection norm is at most
    /// `bound`; elsewhere the step passes through unprojected.
    pub fn with_norm_bound(mut self, bound: f64) -> Self {
        self.norm_bound = Some(bound);
        self
    }

    /// The projection applied at `p` (computed on demand, cached).
    pub fn projection_at(&self, p: &BasePoint) -> Result<DMatrix<f64>> {
        if let Some(hit) = self.projections.get(p) {
            return Ok(hit.clone());
        }
        let pi = point_projection(self.inner.as_ref(), p, &self.params)?;
        if self.projections.len() < PI_CACHE_CAP {
            self.projections.insert(*p, pi.clone());
        }
        Ok(pi)
    }

    fn eval_from(&self, p: &BasePoint, n: u32) -> ScaledOperator {
        match n {
            0 => return ScaledOperator::identity(self.inner.ambient_dim()),
            1 => return ScaledOperator::from_matrix(self.step_matrix(p)),
            _ => {}
        }
        let key = (*p, n);
        if let Some(hit) = self.products.get(&key) {
            return hit.clone();
        }
        let h = n / 2;
        let left = self.eval_from(p, h);
        let mid = self.inner.orbit(p, h as i64);
        let right = self.eval_from(&mid, n - h);
        let product = right.compose(&left);
        if self.products.len() < PRODUCT_MEMO_CAP {
            self.products.insert(key, product.clone());
        }
        product
    }
}

impl Cocycle for DeflatedCocycle<'_> {
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    fn norm(&self) -> &NormSpec {
        self.inner.norm()
    }

    fn orbit(&self, p: &BasePoint, steps: i64) -> BasePoint {
        self.inner.orbit(p, steps)
    }

    fn step_matrix(&self, p: &BasePoint) -> DMatrix<f64> {
        let pi = self
            .projection_at(p)
            .expect("per-point projection failed during deflation");
        if let Some(bound) = self.norm_bound {
            let within = Operator::endomorphism(pi.clone(), self.norm().clone())
                .and_then(|op| op.operator_norm())
                .map(|n| n <= bound)
                .unwrap_or(false);
            if !within {
                return self.inner.step_matrix(p);
            }
        }
        let step = self.inner.step_matrix(p);
        let projected = &step * &pi;
        if linalg::max_abs(&projected)
            <= DEFLATION_FLUSH * linalg::frobenius(&step) * linalg::frobenius(&pi)
        {
            return DMatrix::zeros(projected.nrows(), projected.ncols());
        }
        projected
    }

    fn interval(&self, p: &BasePoint, a: i64, b: i64) -> ScaledOperator {
        assert!(a <= b, "interval endpoints out of order: [{a}, {b})");
        let start = self.inner.orbit(p, a);
        self.eval_from(&start, (b - a) as u32)
    }

    fn sample_point(&self, seed: u64) -> BasePoint {
        self.inner.sample_point(seed)
    }

    fn inversions(&self) -> u64 {
        self.inner.inversions()
    }
}

/// Norm profile of the projections along an orbit.
#[derive(Debug, Clone)]
pub struct TemperednessProfile {
    /// `(n, (1/n) log ‖Π at time n‖)` samples.
    pub samples: Vec<(u64, f64)>,
    pub slope: Option<f64>,
    pub final_value: f64,
}

/// Samples `(1/n) log ‖Π_{time n}‖` along the orbit of `p`, recomputing the
/// projection at each sampled time from its own fast space.
pub fn temperedness_profile(
    c: &dyn Cocycle,
    p: &BasePoint,
    params: &LevelParams,
    n_max: u64,
) -> Result<TemperednessProfile> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("profile horizon must be positive".into()));
    }
    let mut samples = Vec::new();
    for n in kingman::trace_grid(n_max.max(8)) {
        let q = c.orbit(p, n as i64);
        let pi = point_projection(c, &q, params)?;
        let norm_pi =
            Operator::endomorphism(pi, c.norm().clone())?.operator_norm()?;
        let value = if norm_pi > 0.0 {
            norm_pi.ln() / n as f64
        } else {
            f64::NEG_INFINITY
        };
        samples.push((n, value));
    }
    let fitted: Vec<(f64, f64)> =
        samples.iter().map(|&(n, v)| (n as f64, v)).collect();
    let slope = {
        let n = fitted.len() as f64;
        if fitted.len() < 3 {
            None
        } else {
            let mx = fitted.iter().map(|p| p.0).sum::<f64>() / n;
            let my = fitted.iter().map(|p| p.1).sum::<f64>() / n;
            let sxx: f64 = fitted.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let sxy: f64 = fitted.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            (sxx > 0.0).then(|| sxy / sxx)
        }
    };
    let final_value = samples.last().map(|s| s.1).unwrap_or(0.0);
    Ok(TemperednessProfile { samples, slope, final_value })
}

/// One level of the decomposition.
#[derive(Debug, Clone)]
pub struct Level {
    pub lambda: f64,
    pub multiplicity: usize,
    pub space: Subspace,
    /// The level's own slow projection at the base point, in ambient
    /// coordinates (for levels past the first, within the deflated system).
    pub slow_matrix: DMatrix<f64>,
    pub equivariance_residual: f64,
    /// `(n, gap)` trace of the fast-space refinement.
    pub fast_gaps: Vec<(u64, f64)>,
    pub fast_decay_slope: Option<f64>,
    /// `(n, gap)` trace of the slow-projection refinement.
    pub slow_gaps: Vec<(u64, f64)>,
    pub slow_decay_slope: Option<f64>,
}

/// Why the induction stopped early, when it did.
#[derive(Debug, Clone)]
pub struct LevelFailureNote {
    pub level: usize,
    pub reason: String,
}

/// Verification byproducts of the induction.
#[derive(Debug, Clone)]
pub struct DecompositionResiduals {
    /// Lower growth bound of the window products on the accumulated fast
    /// sum, one check per level.
    pub fast_sum_checks: Vec<CheckReport>,
    pub temperedness: Option<TemperednessProfile>,
    /// Growth rates of probe vectors inside the final slow space.
    pub slow_growth_rates: Vec<f64>,
    /// The exponent the slow space is expected to stay below.
    pub slow_growth_threshold: f64,
    pub dimension_audit_pass: bool,
    pub slow_rank: usize,
}

/// The assembled splitting: exponent levels with their spaces, and the
/// projection onto what remains.
#[derive(Debug)]
pub struct Decomposition {
    pub levels: Vec<Level>,
    /// Composite of the per-level slow projections at the base point.
    pub slow_matrix: DMatrix<f64>,
    /// The composite as a validated projection, when it is one.
    pub slow_projection: Option<Projection>,
    pub residuals: DecompositionResiduals,
    pub failure: Option<LevelFailureNote>,
}

/// Tunable horizons and thresholds of the decomposition induction.
#[derive(Debug, Clone)]
pub struct DecompositionConfig {
    /// Number of exponent levels to split off.
    pub levels: usize,
    /// Growth statistics per spectrum run (0 means the ambient dimension).
    pub k_max: usize,
    pub n_spectrum: u64,
    pub mode: Mode,
    pub gap_threshold: f64,
    /// Fixed resolution margin; by default a tenth of the level's spectral
    /// gap, capped at 0.25.
    pub epsilon_override: Option<f64>,
    pub n_fast: u64,
    pub n_slow: u64,
    /// Horizon of the per-level growth bound on the fast sum.
    pub check_horizon: u64,
    pub selection: Selection,
    pub budgets: Budgets,
    /// Horizon of the temperedness profile (0 skips it).
    pub temperedness_horizon: u64,
    /// Probe vectors drawn from the final slow space.
    pub growth_samples: usize,
    /// Horizon of the probe growth estimates.
    pub growth_horizon: u64,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        DecompositionConfig {
            levels: 1,
            k_max: 0,
            n_spectrum: 400,
            mode: Mode::Balanced,
            gap_threshold: 0.1,
            epsilon_override: None,
            n_fast: 48,
            n_slow: 64,
            check_horizon: 48,
            selection: Selection::Optimized,
            budgets: Budgets::default(),
            temperedness_horizon: 0,
            growth_samples: 3,
            growth_horizon: 56,
        }
    }
}

struct LevelPass {
    level: Level,
    params: LevelParams,
    pi_prime: DMatrix<f64>,
    check: CheckReport,
    floor: f64,
}

fn level_pass(
    current: &dyn Cocycle,
    original: &dyn Cocycle,
    p: &BasePoint,
    l: usize,
    prior: &[Level],
    config: &DecompositionConfig,
) -> Result<LevelPass> {
    let d = current.ambient_dim();
    let k_eff = if config.k_max == 0 { d } else { config.k_max.min(d) };
    let spectrum = kingman::lyapunov_spectrum(
        current,
        p,
        k_eff,
        config.n_spectrum,
        config.mode,
        config.gap_threshold,
        &config.budgets,
    )?;
    if spectrum.tracked_levels == 0 {
        return Err(Error::LevelFailure {
            level: l,
            reason: format!(
                "no exponent resolved above the truncation floor {:.4}",
                spectrum.nu_hat
            ),
        });
    }
    let lambda = spectrum.lambda[0];
    let multiplicity = spectrum.multiplicities[0];
    if let Some(prev) = prior.last() {
        if lambda >= prev.lambda - 1e-9 {
            return Err(Error::LevelFailure {
                level: l,
                reason: format!(
                    "deflated exponent {lambda:.6} did not drop below the previous level {:.6}",
                    prev.lambda
                ),
            });
        }
    }
    let floor = spectrum.lambda.get(1).copied().unwrap_or(spectrum.nu_hat);
    let gap = if floor.is_finite() { lambda - floor } else { f64::INFINITY };
    let epsilon = config
        .epsilon_override
        .unwrap_or_else(|| if gap.is_finite() { (gap / 10.0).min(0.25) } else { 0.25 });
    if gap.is_finite() && epsilon >= gap / 5.0 {
        return Err(Error::LevelFailure {
            level: l,
            reason: format!(
                "resolution margin {epsilon:.4} is too coarse for the spectral gap {gap:.4}"
            ),
        });
    }
    let run = fast_space(
        current,
        p,
        multiplicity,
        epsilon,
        config.n_fast,
        config.selection,
        &config.budgets,
    )?;
    let params = LevelParams {
        m1: multiplicity,
        epsilon,
        n_fast: config.n_fast,
        n_slow: config.n_slow,
        selection: config.selection,
        budgets: config.budgets.clone(),
    };
    let equivariance =
        equivariance_residual(current, p, &|q| point_fast_space(current, q, &params))?;
    let slow = slow_projection(current, p, &run.e_final, epsilon, config.n_slow, &config.budgets)?;

    let mut stacked = DMatrix::zeros(d, 0);
    for level in prior.iter() {
        stacked = stack_columns(&stacked, level.space.basis());
    }
    stacked = stack_columns(&stacked, run.e_final.basis());
    let fast_sum = Subspace::from_span(&stacked)?;
    let horizon = config.check_horizon;
    // Lower-bound the minimal growth over the full horizon by chaining short
    // blocks and pushing the subspace forward between them: a single product
    // over dozens of steps has singular values spread far beyond what the
    // floating-point decomposition can resolve, while each block stays
    // well conditioned and the composition inequality keeps the product a
    // valid lower bound for the whole window.
    let block = 8i64;
    let mut g_log = 0.0f64;
    let mut moving = fast_sum;
    let mut t = 0i64;
    while t < horizon as i64 && g_log.is_finite() {
        let b = block.min(horizon as i64 - t);
        let window = original.interval(p, t, t + b);
        g_log += window.log_min_growth(original.norm(), &moving, &config.budgets.inner)?;
        if !g_log.is_finite() {
            break;
        }
        moving = window.push_forward(&moving)?;
        t += b;
    }
    let bound = horizon as f64 * (lambda - 3.0 * epsilon);
    let digest = InputDigest::new("fast-sum-growth")
        .number(l as u64)
        .number(horizon)
        .finish();
    let check = CheckReport::compare(
        "fast-sum-growth",
        digest,
        bound,
        g_log,
        1e-9 * (1.0 + g_log.abs()),
    );
    let fast_gaps: Vec<(u64, f64)> =
        run.records.iter().filter_map(|r| r.gap.map(|g| (r.n, g))).collect();
    let slow_gaps: Vec<(u64, f64)> =
        slow.iterates.iter().filter_map(|it| it.gap.map(|g| (it.n, g))).collect();
    Ok(LevelPass {
        level: Level {
            lambda,
            multiplicity,
            space: run.e_final,
            slow_matrix: slow.projection.matrix().clone(),
            equivariance_residual: equivariance,
            fast_gaps,
            fast_decay_slope: run.decay_slope,
            slow_gaps,
            slow_decay_slope: slow.decay_slope,
        },
        params,
        pi_prime: slow.projection.matrix().clone(),
        check,
        floor,
    })
}

fn stack_columns(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((0, a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    out
}

fn seeded_unit(d: usize, seed: u64) -> DVector<f64> {
    let mut state = seed ^ 0x2545_F491_4F6C_DD1D;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    loop {
        let v = DVector::from_fn(d, |_, _| next());
        let n = v.norm();
        if n > 1e-3 {
            return v / n;
        }
    }
}

/// Splits off `config.levels` exponent levels by induction: estimate the
/// spectrum, build the level's fast space and slow projection, deflate,
/// and repeat on the deflated system. A failure past the first level stops
/// the induction and reports what was built, with the failure recorded.
pub fn full_decomposition(
    c: &dyn Cocycle,
    p: &BasePoint,
    config: &DecompositionConfig,
) -> Result<Decomposition> {
    let d = c.ambient_dim();
    if config.levels == 0 {
        return Err(Error::InvalidArgument("level count must be positive".into()));
    }
    let mut levels: Vec<Level> = Vec::new();
    let mut checks: Vec<CheckReport> = Vec::new();
    let mut pi_total = DMatrix::identity(d, d);
    let mut consumed = 0usize;
    let mut failure: Option<LevelFailureNote> = None;
    let mut floor = f64::NEG_INFINITY;
    let mut first_params: Option<LevelParams> = None;
    let mut current: Box<dyn Cocycle + '_> = Box::new(c);
    for l in 1..=config.levels {
        if consumed >= d {
            break;
        }
        let pass = match level_pass(current.as_ref(), c, p, l, &levels, config) {
            Ok(pass) => pass,
            Err(err) if l > 1 => {
                failure = Some(LevelFailureNote { level: l, reason: err.to_string() });
                break;
            }
            Err(err) => return Err(err),
        };
        consumed += pass.level.multiplicity;
        pi_total = &pi_total * &pass.pi_prime;
        floor = pass.floor;
        checks.push(pass.check);
        if first_params.is_none() {
            first_params = Some(pass.params.clone());
        }
        levels.push(pass.level);
        if l < config.levels && consumed < d {
            current = Box::new(deflate(current, pass.params));
        }
    }

    // A genuine projection has operator norm at least one, so a composite
    // whose entries all sit near the estimation floor is the zero map; the
    // relative rank tolerance alone would rank its noise. The floor is set
    // by each level projection's estimation error (not machine round-off),
    // amplified through the chain, so it scales with the level norms.
    let junk_scale: f64 =
        levels.iter().map(|l| linalg::frobenius(&l.slow_matrix).max(1.0)).product();
    let (q, rank) = if linalg::max_abs(&pi_total) <= 1e-4 * junk_scale {
        (DMatrix::zeros(d, 0), 0)
    } else {
        linalg::orthonormal_span(&pi_total, 1e-8)
    };
    let audit = rank == d - consumed;
    let slow_projection = if audit && consumed > 0 && consumed < d {
        let mut stacked = DMatrix::zeros(d, 0);
        for level in &levels {
            stacked = stack_columns(&stacked, level.space.basis());
        }
        Subspace::from_span(&q).ok().zip(Subspace::from_span(&stacked).ok()).and_then(
            |(range, kernel)| {
                Projection::from_parts(pi_total.clone(), range, kernel, 1e-6).ok()
            },
        )
    } else {
        None
    };

    let temperedness = match (&first_params, config.temperedness_horizon) {
        (Some(params), h) if h > 0 => Some(temperedness_profile(c, p, params, h)?),
        _ => None,
    };

    let mut rates = Vec::new();
    if rank > 0 && consumed < d {
        for i in 0..config.growth_samples {
            let probe = &pi_total * seeded_unit(d, 0x9E37 + i as u64);
            if probe.norm() < 1e-9 {
                continue;
            }
            rates.push(vector_growth_rate(c, p, &probe, config.growth_horizon)?);
        }
    }

    Ok(Decomposition {
        levels,
        slow_matrix: pi_total,
        slow_projection,
        residuals: DecompositionResiduals {
            fast_sum_checks: checks,
            temperedness,
            slow_growth_rates: rates,
            slow_growth_threshold: floor,
            dimension_audit_pass: audit,
            slow_rank: rank,
        },
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::{BaseSystem, CocycleSystem, Generator};
    use approx::{assert_relative_eq, relative_eq};
    use nalgebra::dmatrix;

    fn constant(m: DMatrix<f64>) -> CocycleSystem {
        CocycleSystem::new(
            BaseSystem::Rotation { alpha_num: 0x9E37_79B9_7F4A_7C15 },
            Generator::Constant(m),
            crate::normed::NormSpec::L2,
        )
        .unwrap()
    }

    fn e1(d: usize) -> Subspace {
        Subspace::coordinate(d, &[0]).unwrap()
    }

    #[test]
    fn fast_space_of_a_constant_diagonal_is_the_top_axis() {
        let sys = constant(dmatrix![2.0, 0.0; 0.0, 0.5]);
        let p = sys.sample_point(0);
        for selection in [Selection::Enumerated, Selection::Optimized] {
            let run =
                fast_space(&sys, &p, 1, 0.13, 20, selection, &Budgets::default()).unwrap();
            for rec in &run.records {
                assert!(
                    hausdorff_distance(&rec.transported, &e1(2), sys.norm()).unwrap()
                        < 1e-9
                );
            }
            assert_eq!(run.e_final, e1(2));
        }
    }

    #[test]
    fn fast_space_candidates_clear_their_growth_threshold() {
        let sys = constant(dmatrix![2.0, 1.0; 0.0, 0.5]);
        let p = sys.sample_point(1);
        let budgets = Budgets::default();
        let run = fast_space(&sys, &p, 1, 0.2, 10, Selection::Enumerated, &budgets).unwrap();
        for rec in &run.records {
            let n = rec.n as i64;
            let window = sys.interval(&p, -n, n);
            let g = window.log_min_growth(sys.norm(), &rec.raw, &budgets.inner).unwrap();
            let rho = window.log_bernstein(sys.norm(), 1, &budgets).unwrap();
            assert!(
                g >= rho - 0.2 - 1e-9,
                "candidate at n={n} misses the threshold: {g} vs {rho}"
            );
        }
    }

    #[test]
    fn fast_space_of_the_triangular_pair_converges_to_the_dominant_eigenvector() {
        let sys = constant(dmatrix![2.0, 1.0; 0.0, 0.5]);
        let p = sys.sample_point(0);
        let run =
            fast_space(&sys, &p, 1, 0.1, 30, Selection::Optimized, &Budgets::default())
                .unwrap();
        // The dominant eigenvector of the upper-triangular step is the first
        // axis.
        assert!(hausdorff_distance(&run.e_final, &e1(2), sys.norm()).unwrap() < 1e-6);
        let gap = 4.0_f64.ln();
        if let Some(slope) = run.decay_slope {
            assert!(
                slope <= -(gap - 5.0 * 0.1) * 0.7,
                "gap decay slope {slope} too shallow"
            );
        }
        let gaps: Vec<f64> = run.records.iter().filter_map(|r| r.gap).collect();
        assert!(gaps.len() >= 2);
        for w in gaps.windows(2) {
            assert!(w[1] <= w[0] * 1.5, "gaps not eventually decreasing: {gaps:?}");
        }
    }

    #[test]
    fn selection_modes_agree_on_the_fast_space() {
        let sys = constant(dmatrix![3.0, 0.4, 0.0; 0.2, 1.0, 0.1; 0.0, 0.3, 0.3]);
        let p = sys.sample_point(2);
        let a = fast_space(&sys, &p, 1, 0.08, 40, Selection::Enumerated, &Budgets::default())
            .unwrap();
        let b = fast_space(&sys, &p, 1, 0.08, 40, Selection::Optimized, &Budgets::default())
            .unwrap();
        assert!(
            hausdorff_distance(&a.e_final, &b.e_final, sys.norm()).unwrap() < 1e-3,
            "selection modes disagree"
        );
    }

    #[test]
    fn equivariance_residual_vanishes_for_an_invariant_field_and_flags_a_skewed_one() {
        let sys = constant(dmatrix![2.0, 0.0; 0.0, 0.5]);
        let p = sys.sample_point(3);
        let exact = |_: &BasePoint| e1(2);
        let r = equivariance_residual(&sys, &p, &|q| Ok(exact(q))).unwrap();
        assert!(r < 1e-10);
        let skewed = Subspace::line(&DVector::from_vec(vec![1.0, 0.1])).unwrap();
        let r = equivariance_residual(&sys, &p, &|_| Ok(skewed.clone())).unwrap();
        assert!(r >= 0.05, "perturbed field should leave a residual, got {r}");
    }

    #[test]
    fn slow_projection_of_a_diagonal_kills_the_top_axis() {
        let sys = constant(dmatrix![2.0, 0.0; 0.0, 0.5]);
        let p = sys.sample_point(0);
        let run =
            slow_projection(&sys, &p, &e1(2), 0.1, 40, &Budgets::default()).unwrap();
        let expected = dmatrix![0.0, 0.0; 0.0, 1.0];
        assert!(linalg::max_abs(&(run.projection.matrix() - &expected)) < 1e-9);
        let grid = run.grid.expect("grid check should succeed on the diagonal");
        assert_eq!(grid.coefficients[0], Vec::new());
        assert_eq!(grid.coefficients[1], vec![(0, 1)]);
        assert!(grid.worst_direction_distance < 1e-9);
    }

    #[test]
    fn slow_projection_of_the_triangular_pair_matches_the_eigenprojection() {
        // Eigenvalues 2 and 0.5; the slow eigenvector is (1, -1.5), so the
        // spectral projection along the top axis has columns 0 and
        // (-2/3, 1). The margin must exceed log ||(-2/3, 1)|| ~ 0.184 for
        // the limit rational itself to pass the grid criterion; 0.25 stays
        // well under half the spectral gap log 4.
        let sys = constant(dmatrix![2.0, 1.0; 0.0, 0.5]);
        let p = sys.sample_point(0);
        let run =
            slow_projection(&sys, &p, &e1(2), 0.25, 48, &Budgets::default()).unwrap();
        let expected = dmatrix![0.0, -2.0 / 3.0; 0.0, 1.0];
        assert!(
            linalg::max_abs(&(run.projection.matrix() - &expected)) < 1e-6,
            "projection {:?}",
            run.projection.matrix()
        );
        let m = run.projection.matrix();
        assert!(linalg::frobenius(&(m * m - m)) < 1e-8);
        let grid = run.grid.expect("grid check should find the rational translate");
        assert_eq!(grid.coefficients[1], vec![(2, 3)]);
        assert!(grid.worst_direction_distance < 1e-3);
    }

    #[test]
    fn slow_projection_iterates_decay_geometrically() {
        let sys = constant(dmatrix![2.0, 1.0; 0.0, 0.5]);
        let p = sys.sample_point(0);
        let run =
            slow_projection(&sys, &p, &e1(2), 0.1, 40, &Budgets::default()).unwrap();
        let slope = run.decay_slope.expect("enough iterates for a slope fit");
        // Rate bound: gaps shrink at least like the spectral gap minus the
        // construction slack.
        assert!(slope < -0.5, "iterate gaps decay too slowly: slope {slope}");
    }

    #[test]
    fn point_projection_matches_the_refined_run() {
        let sys = constant(dmatrix![2.0, 1.0; 0.0, 0.5]);
        let p = sys.sample_point(0);
        let run =
            slow_projection(&sys, &p, &e1(2), 0.1, 48, &Budgets::default()).unwrap();
        let params = LevelParams {
            m1: 1,
            epsilon: 0.1,
            n_fast: 24,
            n_slow: 48,
            selection: Selection::Optimized,
            budgets: Budgets::default(),
        };
        let single = point_projection(&sys, &p, &params).unwrap();
        assert!(linalg::max_abs(&(&single - run.projection.matrix())) < 1e-8);
    }

    #[test]
    fn growth_rate_picks_the_dominant_exponent_and_detects_kernels() {
        let sys = constant(dmatrix![2.0, 0.0; 0.0, 0.5]);
        let p = sys.sample_point(0);
        let zero = DVector::zeros(2);
        assert_eq!(vector_growth_rate(&sys, &p, &zero, 64).unwrap(), f64::NEG_INFINITY);
        let top = DVector::from_vec(vec![1.0, 0.0]);
        assert_relative_eq!(
            vector_growth_rate(&sys, &p, &top, 64).unwrap(),
            2.0_f64.ln(),
            epsilon = 1e-12
        );
        // Finite horizons carry an O(log ||x|| / n) offset, so the estimate
        // for a non-unit mixed vector is only accurate to about 1/n.
        let mixed = DVector::from_vec(vec![1.0, 1.0]);
        assert!(
            (vector_growth_rate(&sys, &p, &mixed, 64).unwrap() - 2.0_f64.ln()).abs()
                < 0.01
        );
        let lossy = constant(dmatrix![1.0, 0.0; 0.0, 0.0]);
        let bottom = DVector::from_vec(vec![0.0, 1.0]);
        assert_eq!(
            vector_growth_rate(&lossy, &p, &bottom, 64).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn deflation_exposes_the_second_exponent() {
        let sys = constant(dmatrix![3.0, 0.0, 0.0; 0.0, 2.0, 0.0; 0.0, 0.0, 1.0]);
        let p = sys.sample_point(0);
        let params = LevelParams {
            m1: 1,
            epsilon: 0.04,
            n_fast: 24,
            n_slow: 40,
            selection: Selection::Optimized,
            budgets: Budgets::default(),
        };
        let deflated = deflate(Box::new(&sys as &dyn Cocycle), params.clone());
        let report = kingman::lyapunov_spectrum(
            &deflated,
            &p,
            3,
            48,
            Mode::Balanced,
            0.1,
            &Budgets::default(),
        )
        .unwrap();
        assert_relative_eq!(report.mu[0], 2.0_f64.ln(), epsilon = 1e-6);
        assert_relative_eq!(report.mu[1], 0.0, epsilon = 1e-6);
        assert_eq!(report.mu[2], f64::NEG_INFINITY);
        assert_eq!(sys.inversions(), 0);

        let twice = deflate(Box::new(deflated), params);
        let report = kingman::lyapunov_spectrum(
            &twice,
            &p,
            2,
            48,
            Mode::Balanced,
            0.1,
            &Budgets::default(),
        )
        .unwrap();
        assert_relative_eq!(report.mu[0], 0.0, epsilon = 1e-6);
        assert_eq!(report.mu[1], f64::NEG_INFINITY);
        assert_eq!(sys.inversions(), 0);
    }

    #[test]
    fn full_decomposition_of_a_constant_diagonal() {
        let sys = constant(dmatrix![3.0, 0.0, 0.0; 0.0, 1.0, 0.0; 0.0, 0.0, 0.25]);
        let p = sys.sample_point(0);
        let config = DecompositionConfig {
            levels: 3,
            n_spectrum: 64,
            n_fast: 24,
            n_slow: 40,
            check_horizon: 32,
            ..DecompositionConfig::default()
        };
        let dec = full_decomposition(&sys, &p, &config).unwrap();
        assert!(dec.failure.is_none(), "failure: {:?}", dec.failure);
        assert_eq!(dec.levels.len(), 3);
        let expected = [3.0_f64.ln(), 0.0, 0.25_f64.ln()];
        for (i, level) in dec.levels.iter().enumerate() {
            assert!(
                relative_eq!(level.lambda, expected[i], epsilon = 1e-6),
                "level {i}: {} vs {}",
                level.lambda,
                expected[i]
            );
            assert_eq!(level.multiplicity, 1);
            let axis = Subspace::coordinate(3, &[i]).unwrap();
            assert!(
                hausdorff_distance(&level.space, &axis, sys.norm()).unwrap() < 1e-6,
                "level {i} space off-axis"
            );
            assert!(level.equivariance_residual < 1e-8);
        }
        for w in dec.levels.windows(2) {
            assert!(w[1].lambda < w[0].lambda);
        }
        let total: usize = dec.levels.iter().map(|l| l.multiplicity).sum();
        assert_eq!(total + dec.residuals.slow_rank, 3);
        assert!(dec.residuals.dimension_audit_pass);
        for check in &dec.residuals.fast_sum_checks {
            assert!(check.pass, "{}: {} vs {}", check.lemma, check.lhs, check.rhs);
        }
        assert_eq!(sys.inversions(), 0);
    }

    #[test]
    fn doubling_the_generator_shifts_exponents_and_keeps_the_spaces() {
        let sys = constant(dmatrix![2.0, 1.0; 0.0, 0.5]);
        let doubled = sys.with_mapped_generator(|m| m * 2.0).unwrap();
        let p = sys.sample_point(0);
        let config = DecompositionConfig {
            levels: 1,
            n_spectrum: 64,
            n_fast: 24,
            n_slow: 40,
            check_horizon: 24,
            selection: Selection::Enumerated,
            ..DecompositionConfig::default()
        };
        let a = full_decomposition(&sys, &p, &config).unwrap();
        let b = full_decomposition(&doubled, &p, &config).unwrap();
        assert_relative_eq!(
            b.levels[0].lambda - a.levels[0].lambda,
            2.0_f64.ln(),
            epsilon = 1e-9
        );
        assert_eq!(a.levels[0].space, b.levels[0].space);
        assert!(linalg::max_abs(&(&a.slow_matrix - &b.slow_matrix)) < 1e-9);
    }

    #[test]
    fn temperedness_profile_of_a_constant_system_flattens() {
        let sys = constant(dmatrix![2.0, 1.0; 0.0, 0.5]);
        let p = sys.sample_point(0);
        let params = LevelParams {
            m1: 1,
            epsilon: 0.1,
            n_fast: 20,
            n_slow: 32,
            selection: Selection::Optimized,
            budgets: Budgets::default(),
        };
        let profile = temperedness_profile(&sys, &p, &params, 100).unwrap();
        // The projection is the same everywhere, so the profile is
        // log-norm over n and must shrink toward zero.
        assert!(profile.final_value.abs() < 0.02);
        assert!(profile.slope.unwrap_or(0.0) <= 1e-4);
    }

    #[test]
    fn rational_enumeration_is_reduced_and_height_ordered() {
        let singles = rational_by_height(64);
        assert_eq!(singles[0], (0, 1));
        let heights: Vec<u32> =
            singles.iter().map(|&(n, d)| (n.unsigned_abs() as u32).max(d)).collect();
        for w in heights.windows(2) {
            assert!(w[0] <= w[1]);
        }
        for &(n, d) in &singles {
            if n != 0 {
                let g = {
                    fn gcd(a: u64, b: u64) -> u64 {
                        if b == 0 { a } else { gcd(b, a % b) }
                    }
                    gcd(n.unsigned_abs(), d as u64)
                };
                assert_eq!(g, 1, "unreduced entry {n}/{d}");
            }
        }
        let pair = tuple_at(&singles, 2, 0).unwrap();
        assert_eq!(pair, vec![(0, 1), (0, 1)]);
        let mut seen = std::collections::HashSet::new();
        for i in 0..200 {
            let t = tuple_at(&singles, 2, i).unwrap();
            assert!(seen.insert(t.clone()), "duplicate tuple {t:?} at {i}");
        }
    }
}
