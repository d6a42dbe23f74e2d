//! Checking bilinear schemes against ⟨n,n,n⟩, exactly or in floating point.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::BilinearScheme;
use crate::scalar::{ratio, rational_from_f64, Rational, Scalar};
use crate::tensor::{matmul_tensor, reconstruct, Tensor};

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub n: usize,
    pub r: usize,
    /// Frobenius norm of `reconstruct(s) − ⟨n,n,n⟩`.
    pub residual: f64,
    /// Set only when the check ran in exact arithmetic.
    pub exact: Option<bool>,
    /// `‖h_s‖·‖k_s‖·‖f_s‖`, the Frobenius norm of each rank-one term.
    pub slot_norms: Vec<f64>,
}

/// Squared Frobenius distance to ⟨n,n,n⟩, in the scheme's own field.
pub fn residual_sq<S: Scalar>(s: &BilinearScheme<S>, n: usize) -> Result<S> {
    let diff = reconstruct(s, n)?.sub(&matmul_tensor(n, n, n))?;
    Ok(diff.norm_sq())
}

pub fn residual<S: Scalar>(s: &BilinearScheme<S>, n: usize) -> Result<f64> {
    Ok(residual_sq(s, n)?.to_f64().sqrt())
}

fn slot_norms<S: Scalar>(s: &BilinearScheme<S>) -> Vec<f64> {
    let col = |t: &Tensor<S>, j: usize, rows: usize| {
        (0..rows).map(|i| t.at(i, j).to_f64().powi(2)).sum::<f64>().sqrt()
    };
    let m = s.n() * s.n();
    (0..s.r())
        .map(|j| {
            let f = (0..m).map(|o| s.f().at(j, o).to_f64().powi(2)).sum::<f64>().sqrt();
            col(s.h(), j, m) * col(s.k(), j, m) * f
        })
        .collect()
}

pub fn verify_exact(s: &BilinearScheme<Rational>) -> Result<VerifyReport> {
    let sq = residual_sq(s, s.n())?;
    Ok(VerifyReport {
        n: s.n(),
        r: s.r(),
        residual: Scalar::to_f64(&sq).sqrt(),
        exact: Some(sq.is_zero()),
        slot_norms: slot_norms(s),
    })
}

pub fn verify_float(s: &BilinearScheme<f64>) -> Result<VerifyReport> {
    Ok(VerifyReport {
        n: s.n(),
        r: s.r(),
        residual: residual(s, s.n())?,
        exact: None,
        slot_norms: slot_norms(s),
    })
}

/// `{−1, −½, 0, ½, 1}`.
pub fn default_grid() -> Vec<Rational> {
    vec![ratio(-1, 1), ratio(-1, 2), ratio(0, 1), ratio(1, 2), ratio(1, 1)]
}

/// Nearest grid value; ties go to the smaller magnitude, then to the negative side.
pub fn snap(x: &Rational, grid: &[Rational]) -> Rational {
    grid.iter()
        .min_by(|a, b| {
            let da = (x - *a).abs();
            let db = (x - *b).abs();
            da.cmp(&db)
                .then_with(|| a.abs().cmp(&b.abs()))
                .then_with(|| a.cmp(b))
        })
        .cloned()
        .expect("grid must be non-empty")
}

/// Snaps every entry of a float scheme to `grid`, comparing distances exactly.
pub fn round_scheme(s: &BilinearScheme<f64>, grid: &[Rational]) -> Result<BilinearScheme<Rational>> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("rounding grid is empty".into()));
    }
    let exact = s.to_rational()?;
    Ok(exact.map(|x| snap(x, grid)))
}

/// Per-slot gauge rescaling so that the largest |entry| of each column of H
/// and K is 1; F absorbs the inverse scale. Zero columns are left alone.
pub fn normalize_slots(s: &BilinearScheme<f64>) -> BilinearScheme<f64> {
    let m = s.n() * s.n();
    let mut out = s.clone();
    for j in 0..s.r() {
        let max_h = (0..m).map(|i| s.h().at(i, j).abs()).fold(0.0, f64::max);
        let max_k = (0..m).map(|i| s.k().at(i, j).abs()).fold(0.0, f64::max);
        if max_h == 0.0 || max_k == 0.0 {
            continue;
        }
        out = out.scale_slot(j, &(1.0 / max_h), &(1.0 / max_k), &(max_h * max_k));
    }
    out
}

/// Normalises slots, then snaps to `grid`.
pub fn round_learned(s: &BilinearScheme<f64>, grid: &[Rational]) -> Result<BilinearScheme<Rational>> {
    round_scheme(&normalize_slots(s), grid)
}

const STRASSEN_H: [[i64; 7]; 4] = [
    [1, 0, 1, 0, 1, -1, 0],
    [0, 0, 0, 0, 1, 0, 1],
    [0, 1, 0, 0, 0, 1, 0],
    [1, 1, 0, 1, 0, 0, -1],
];

const STRASSEN_K: [[i64; 7]; 4] = [
    [1, 1, 0, -1, 0, 1, 0],
    [0, 0, 1, 0, 0, 1, 0],
    [0, 0, 0, 1, 0, 0, 1],
    [1, 0, -1, 0, 1, 0, 1],
];

/// Output combinations: row o lists the coefficient of each product in c_o.
const STRASSEN_F0: [[i64; 7]; 4] = [
    [1, 0, 0, 1, -1, 0, 1],
    [0, 0, 1, 0, 1, 0, 0],
    [0, 1, 0, 1, 0, 0, 0],
    [1, -1, 1, 0, 0, 1, 0],
];

fn int_matrix<const R: usize, const C: usize>(rows: &[[i64; C]; R]) -> Tensor<Rational> {
    Tensor::from_fn(&[R, C], |ix| ratio(rows[ix[0]][ix[1]], 1))
}

/// Strassen's seven-product scheme for 2×2 matrices, exact.
pub fn known_strassen() -> BilinearScheme<Rational> {
    let f = int_matrix(&STRASSEN_F0).transpose().expect("matrix");
    BilinearScheme::new(2, 7, int_matrix(&STRASSEN_H), int_matrix(&STRASSEN_K), f)
        .expect("Strassen shapes are consistent")
}

/// Exponent of block recursion on a base-`k` scheme with `r` products: log_k r.
pub fn exponent(k: usize, r: usize) -> f64 {
    (r as f64).ln() / (k as f64).ln()
}

/// Parses an exact grid value such as `-1/2` or `0.5`.
pub fn parse_grid_value(s: &str) -> Result<Rational> {
    if let Some((num, den)) = s.split_once('/') {
        let num: i64 = num.trim().parse().map_err(|_| Error::InvalidConfig(format!("bad grid value {s}")))?;
        let den: i64 = den.trim().parse().map_err(|_| Error::InvalidConfig(format!("bad grid value {s}")))?;
        if den == 0 {
            return Err(Error::InvalidConfig(format!("zero denominator in {s}")));
        }
        return Ok(ratio(num, den));
    }
    let v: f64 = s.trim().parse().map_err(|_| Error::InvalidConfig(format!("bad grid value {s}")))?;
    rational_from_f64(v).ok_or_else(|| Error::InvalidConfig(format!("bad grid value {s}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(x: f64) -> Rational {
        rational_from_f64(x).unwrap()
    }

    #[test]
    fn strassen_is_exact() {
        let s = known_strassen();
        assert!(residual_sq(&s, 2).unwrap().is_zero());
        let rep = verify_exact(&s).unwrap();
        assert_eq!(rep.exact, Some(true));
        assert_eq!(rep.residual, 0.0);
    }

    #[test]
    fn strassen_columns_and_rows() {
        let s = known_strassen();
        let col0: Vec<Rational> = (0..4).map(|i| s.h().at(i, 0).clone()).collect();
        assert_eq!(col0, vec![ratio(1, 1), ratio(0, 1), ratio(0, 1), ratio(1, 1)]);
        // c11 = p1 + p4 - p5 + p7
        let c11: Vec<Rational> = (0..7).map(|j| s.f().at(j, 0).clone()).collect();
        let want: Vec<Rational> = [1, 0, 0, 1, -1, 0, 1].iter().map(|&v| ratio(v, 1)).collect();
        assert_eq!(c11, want);
    }

    #[test]
    fn zero_scheme_residual_is_sqrt8() {
        let z = BilinearScheme::<Rational>::zeros(2, 7);
        assert_eq!(residual_sq(&z, 2).unwrap(), ratio(8, 1));
        assert!((residual(&z, 2).unwrap() - 8f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn perturbed_strassen_is_not_exact() {
        let s = known_strassen();
        let mut h = s.h().clone();
        h.set(&[0, 0], ratio(0, 1));
        let p = BilinearScheme::new(2, 7, h, s.k().clone(), s.f().clone()).unwrap();
        assert!(residual(&p, 2).unwrap() > 0.0);
        assert_eq!(verify_exact(&p).unwrap().exact, Some(false));
    }

    #[test]
    fn snap_tie_rules() {
        let g = default_grid();
        assert_eq!(snap(&r(0.98), &g), ratio(1, 1));
        assert_eq!(snap(&r(-0.51), &g), ratio(-1, 2));
        assert_eq!(snap(&r(0.25), &g), ratio(0, 1));
        assert_eq!(snap(&r(-0.75), &g), ratio(-1, 2));
        assert_eq!(snap(&r(0.75), &g), ratio(1, 2));
        // equal magnitude and distance: negative wins
        let sym = vec![ratio(-1, 1), ratio(1, 1)];
        assert_eq!(snap(&r(0.0), &sym), ratio(-1, 1));
        for v in &g {
            assert_eq!(&snap(v, &g), v);
        }
    }

    #[test]
    fn rounding_recovers_scaled_strassen() {
        let s = known_strassen().map(Scalar::to_f64);
        let mut noisy = s.scale_slot(2, &3.0, &-0.25, &(1.0 / -0.75));
        noisy.parts_mut()[0].data_mut()[1] += 1e-3;
        let rounded = round_learned(&noisy, &default_grid()).unwrap();
        assert_eq!(verify_exact(&rounded).unwrap().exact, Some(true));
        assert!(round_scheme(&s, &[]).is_err());
    }

    #[test]
    fn exponent_values() {
        assert!((exponent(2, 8) - 3.0).abs() < 1e-15);
        assert!((exponent(2, 7) - 2.807355).abs() < 1e-6);
        assert!((exponent(3, 23) - 2.854).abs() < 1e-3);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid_value("-1/2").unwrap(), ratio(-1, 2));
        assert_eq!(parse_grid_value("0.5").unwrap(), ratio(1, 2));
        assert!(parse_grid_value("1/0").is_err());
        assert!(parse_grid_value("x").is_err());
    }
}
