//! Shared dense linear-algebra helpers.
//!
//! Thin wrappers over nalgebra factorizations that pin down ordering and
//! orientation conventions the rest of the crate relies on.

use nalgebra::{DMatrix, DVector};

/// Singular values sorted in non-increasing order.
pub(crate) fn singular_values_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("singular values are finite"));
    sv
}

/// The `k`-th singular value (1-based), `0.0` past the rank budget.
pub(crate) fn singular_value(m: &DMatrix<f64>, k: usize) -> f64 {
    let sv = singular_values_desc(m);
    if k == 0 || k > sv.len() {
        0.0
    } else {
        sv[k - 1]
    }
}

/// Orthonormal basis (columns) for the span of the top-`k` right singular
/// vectors, with singular values sorted non-increasing before selection.
pub(crate) fn top_right_singular_subspace(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .expect("singular values are finite")
    });
    let d = vt.ncols();
    let mut basis = DMatrix::zeros(d, k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        basis.set_column(col, &vt.row(idx).transpose());
    }
    basis
}

/// Right singular vectors of `m`, ordered by non-increasing singular value.
pub(crate) fn right_singular_vectors(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let svd = m.clone().svd(false, true);
    let vt = match svd.v_t {
        Some(vt) => vt,
        None => return Vec::new(),
    };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .expect("singular values are finite")
    });
    order.into_iter().map(|i| vt.row(i).transpose()).collect()
}

/// Rank-revealing orthonormalization of the column span via column-pivoted QR.
/// Returns the orthonormal columns spanning the range and the detected rank.
pub(crate) fn orthonormal_span(m: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let qr = m.clone().col_piv_qr();
    let q = qr.q();
    let r = qr.r();
    let kmax = q.ncols().min(r.nrows());
    let lead = if kmax == 0 { 0.0 } else { r[(0, 0)].abs() };
    let mut rank = 0;
    for i in 0..kmax {
        if r[(i, i)].abs() > rel_tol * lead.max(f64::MIN_POSITIVE) {
            rank += 1;
        } else {
            break;
        }
    }
    (q.columns(0, rank).into_owned(), rank)
}

/// Deterministic sign fix: each column is flipped so that its entry of largest
/// magnitude (first such index on ties) is positive.
pub(crate) fn fix_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut arg = 0;
        let mut best = -1.0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                arg = i;
            }
        }
        if col[arg] < 0.0 {
            col.neg_mut();
        }
    }
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub(crate) fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean normalization, `None` for (numerically) zero vectors.
pub(crate) fn unit(v: &DVector<f64>) -> Option<DVector<f64>> {
    let n = v.norm();
    if n > 1e-300 {
        Some(v / n)
    } else {
        None
    }
}
