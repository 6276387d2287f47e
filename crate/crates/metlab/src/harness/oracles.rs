//! Reference values computed by routes independent of the pipeline under
//! test: dense eigenvalue and singular value decompositions for constant
//! systems, and direct symbol averaging for i.i.d. diagonal families.

use nalgebra::DMatrix;

use crate::cocycle::BaseSystem;
use crate::error::{Error, Result};

/// Logs of the eigenvalue moduli of `m`, largest first; zero moduli map to
/// negative infinity. For a constant cocycle these are the exponents with
/// algebraic multiplicity.
pub fn log_eigenvalue_moduli(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = m
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| {
            let r = z.norm();
            if r > 0.0 {
                r.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    out.sort_by(|a, b| b.partial_cmp(a).expect("moduli are never NaN"));
    out
}

/// Singular values of `m` in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> =
        m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("singular values are never NaN"));
    sv
}

/// Spectral projection of a 2 x 2 matrix onto the eigenspace of `keep`
/// along the eigenspace of `drop`, via the resolvent identity
/// `(m - drop I) / (keep - drop)`.
pub fn eigenprojection_2x2(m: &DMatrix<f64>, keep: f64, drop: f64) -> Result<DMatrix<f64>> {
    if m.nrows() != 2 || m.ncols() != 2 {
        return Err(Error::DimensionMismatch {
            context: "eigenprojection oracle",
            expected: 2,
            got: m.nrows().max(m.ncols()),
        });
    }
    let split = keep - drop;
    if split.abs() < 1e-12 * (keep.abs() + drop.abs() + 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eigenvalues {keep} and {drop} are too close to separate"
        )));
    }
    Ok((m - DMatrix::identity(2, 2) * drop) / split)
}

/// Empirical average of `values[symbol]` along `samples` steps of a shift
/// orbit started from the seeded point. For an i.i.d. diagonal cocycle
/// with per-symbol log entries `values`, this estimates the corresponding
/// exponent by the strong law, touching none of the operator machinery.
pub fn strong_law_average(
    base: &BaseSystem,
    seed: u64,
    samples: u64,
    values: &[f64],
) -> Result<f64> {
    if !matches!(base, BaseSystem::Shift { .. }) {
        return Err(Error::InvalidArgument(
            "symbol averaging needs a shift base".into(),
        ));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let mut p = base.point_from_seed(seed);
    let mut acc = 0.0;
    for _ in 0..samples {
        let s = base.symbol(&p) as usize;
        let v = *values.get(s).ok_or_else(|| {
            Error::InvalidArgument(format!("symbol {s} has no tabulated value"))
        })?;
        acc += v;
        p = base.advance(&p, 1);
    }
    Ok(acc / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn eigenvalue_moduli_of_a_rotation_scaled_matrix() {
        // Eigenvalues 2 and 0.5 for the triangular pair; a planar rotation
        // scaled by 3 has both moduli equal to 3.
        let logs = log_eigenvalue_moduli(&dmatrix![2.0, 1.0; 0.0, 0.5]);
        assert_relative_eq!(logs[0], 2.0_f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(logs[1], 0.5_f64.ln(), epsilon = 1e-12);
        let c = 0.6_f64;
        let rot = dmatrix![c.cos(), -c.sin(); c.sin(), c.cos()] * 3.0;
        let logs = log_eigenvalue_moduli(&rot);
        assert_relative_eq!(logs[0], 3.0_f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(logs[1], 3.0_f64.ln(), epsilon = 1e-12);
        let logs = log_eigenvalue_moduli(&dmatrix![1.0, 1.0; 0.0, 0.0]);
        assert_eq!(logs[1], f64::NEG_INFINITY);
    }

    #[test]
    fn eigenprojection_of_the_triangular_pair() {
        let pi = eigenprojection_2x2(&dmatrix![2.0, 1.0; 0.0, 0.5], 0.5, 2.0).unwrap();
        let expected = dmatrix![0.0, -2.0 / 3.0; 0.0, 1.0];
        assert!((pi - expected).abs().max() < 1e-12);
    }

    #[test]
    fn symbol_average_matches_the_uniform_mixture() {
        let base = BaseSystem::Shift { alphabet: 3 };
        let values = [1.0, -0.5, 0.25];
        let mixture = values.iter().sum::<f64>() / 3.0;
        let avg = strong_law_average(&base, 7, 300_000, &values).unwrap();
        assert!(
            (avg - mixture).abs() < 0.01,
            "symbol average {avg} far from mixture {mixture}"
        );
    }
}
