//! Dense linear algebra used by the geometric checks: rank decisions,
//! null spaces, spans, intersections and principal angles.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold used for every rank decision.
pub const RANK_REL_TOL: f64 = 1e-8;

/// Width of the ambiguity band around the rank threshold, as a factor.
pub const AMBIGUITY_BAND: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankDecision {
    pub rank: usize,
    /// A singular value fell within a factor [`AMBIGUITY_BAND`] of the threshold.
    pub ambiguous: bool,
    pub sigma_max: f64,
    pub threshold: f64,
}

/// Decides a numerical rank from singular values sorted in any order.
pub fn decide_rank(singular: &[f64], rel: f64) -> RankDecision {
    let sigma_max = singular.iter().cloned().fold(0.0, f64::max);
    let threshold = rel * sigma_max;
    if sigma_max == 0.0 {
        return RankDecision {
            rank: 0,
            ambiguous: false,
            sigma_max,
            threshold,
        };
    }
    let rank = singular.iter().filter(|&&s| s > threshold).count();
    let ambiguous = singular
        .iter()
        .any(|&s| s > threshold / AMBIGUITY_BAND && s < threshold * AMBIGUITY_BAND);
    RankDecision {
        rank,
        ambiguous,
        sigma_max,
        threshold,
    }
}

/// Full singular value decomposition `a = u diag(singular) vt`, singular
/// values in descending order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular: Vec<f64>,
    pub vt: DMatrix<f64>,
}

impl Svd {
    pub fn sigma_max(&self) -> f64 {
        self.singular.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular.last().copied().unwrap_or(0.0)
    }

    /// Pseudo-inverse solve, dropping singular values at or below `eps`.
    pub fn solve(&self, b: &DVector<f64>, eps: f64) -> DVector<f64> {
        let mut x = DVector::zeros(self.vt.ncols());
        for (i, &s) in self.singular.iter().enumerate() {
            if s > eps {
                let c = self.u.column(i).dot(b) / s;
                x += self.vt.row(i).transpose() * c;
            }
        }
        x
    }
}

pub fn svd(a: &DMatrix<f64>) -> Svd {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Svd {
            u: DMatrix::identity(m, m),
            singular: vec![],
            vt: DMatrix::identity(n, n),
        };
    }
    let fm = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    match fm.svd() {
        Ok(d) => {
            let (u, v, s) = (d.U(), d.V(), d.S().column_vector());
            Svd {
                u: DMatrix::from_fn(m, m, |i, j| u[(i, j)]),
                singular: (0..m.min(n)).map(|i| s[i]).collect(),
                vt: DMatrix::from_fn(n, n, |i, j| v[(j, i)]),
            }
        }
        Err(_) => Svd {
            u: DMatrix::identity(m, m),
            singular: vec![f64::NAN; m.min(n)],
            vt: DMatrix::identity(n, n),
        },
    }
}

pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    svd(a).singular
}

/// Singular values padded with zeros to the domain dimension, with `V^T`.
fn square_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let d = svd(a);
    let mut sv = d.singular;
    sv.resize(a.ncols(), 0.0);
    (sv, d.vt)
}

/// Orthonormal basis (as columns) of the null space of `a`.
pub fn null_space(a: &DMatrix<f64>, rel: f64) -> (DMatrix<f64>, RankDecision) {
    null_space_scaled(a, rel, 0.0)
}

/// Null space with the rank threshold taken relative to `max(sigma_max, scale)`,
/// for matrices whose entries may all be numerically zero.
pub fn null_space_scaled(a: &DMatrix<f64>, rel: f64, scale: f64) -> (DMatrix<f64>, RankDecision) {
    let n = a.ncols();
    if a.nrows() == 0 {
        return (
            DMatrix::identity(n, n),
            RankDecision {
                rank: 0,
                ambiguous: false,
                sigma_max: 0.0,
                threshold: 0.0,
            },
        );
    }
    let (sv, vt) = square_svd(a);
    let mut padded = sv.clone();
    padded.push(scale);
    let mut dec = decide_rank(&padded, rel);
    dec.rank = sv.iter().filter(|&&s| s > dec.threshold && dec.sigma_max > 0.0).count();
    let cols: Vec<DVector<f64>> = sv
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= dec.threshold || dec.sigma_max == 0.0)
        .map(|(i, _)| vt.row(i).transpose())
        .collect();
    (from_columns(n, &cols), dec)
}

/// Orthonormal basis of the column span of `a`.
pub fn span(a: &DMatrix<f64>, rel: f64) -> (DMatrix<f64>, RankDecision) {
    let n = a.nrows();
    if a.ncols() == 0 {
        return (
            DMatrix::zeros(n, 0),
            RankDecision {
                rank: 0,
                ambiguous: false,
                sigma_max: 0.0,
                threshold: 0.0,
            },
        );
    }
    let d = svd(a);
    let (u, sv) = (d.u, d.singular);
    let dec = decide_rank(&sv, rel);
    let cols: Vec<DVector<f64>> = sv
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > dec.threshold && dec.sigma_max > 0.0)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    (from_columns(n, &cols), dec)
}

pub fn from_columns(rows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    if cols.is_empty() {
        DMatrix::zeros(rows, 0)
    } else {
        DMatrix::from_columns(cols)
    }
}

pub fn smallest_singular_value(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    svd(a).sigma_min()
}

/// Orthonormal basis of the intersection of two column spans.
pub fn intersection(a: &DMatrix<f64>, b: &DMatrix<f64>, rel: f64) -> (DMatrix<f64>, RankDecision) {
    let n = a.nrows();
    let (qa, _) = span(a, rel);
    let (qb, _) = span(b, rel);
    let id = DMatrix::<f64>::identity(n, n);
    let pa = &id - &qa * qa.transpose();
    let pb = &id - &qb * qb.transpose();
    let mut stacked = DMatrix::zeros(2 * n, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(&pa);
    stacked.view_mut((n, 0), (n, n)).copy_from(&pb);
    let (sv, vt) = square_svd(&stacked);
    // Singular values of the stacked complement projectors are bounded by sqrt(2).
    let threshold = rel;
    let cols: Vec<DVector<f64>> = sv
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= threshold)
        .map(|(i, _)| vt.row(i).transpose())
        .collect();
    let ambiguous = sv
        .iter()
        .any(|&s| s > threshold / AMBIGUITY_BAND && s < threshold * AMBIGUITY_BAND);
    let dec = RankDecision {
        rank: cols.len(),
        ambiguous,
        sigma_max: sv.iter().cloned().fold(0.0, f64::max),
        threshold,
    };
    (from_columns(n, &cols), dec)
}

/// Largest principal angle between two column spans. Returns `pi/2` when
/// the dimensions differ.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>, rel: f64) -> f64 {
    let (qa, _) = span(a, rel);
    let (qb, _) = span(b, rel);
    if qa.ncols() != qb.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if qa.ncols() == 0 {
        return 0.0;
    }
    let residual = |q1: &DMatrix<f64>, q2: &DMatrix<f64>| {
        let r = q2 - q1 * (q1.transpose() * q2);
        svd(&r).sigma_max()
    };
    let s = residual(&qa, &qb).max(residual(&qb, &qa)).min(1.0);
    s.asin()
}

/// Least-squares solution together with the residual norm.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let d = svd(a);
    let eps = (RANK_REL_TOL * d.sigma_max()).max(f64::MIN_POSITIVE);
    let x = d.solve(b, eps);
    let r = (a * &x - b).norm();
    (x, r)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Determinant of the `k x k` minor of `m` picking the given rows and all columns.
pub fn minor_det(m: &DMatrix<f64>, rows: &[usize]) -> f64 {
    let k = rows.len();
    match k {
        0 => 1.0,
        1 => m[(rows[0], 0)],
        2 => m[(rows[0], 0)] * m[(rows[1], 1)] - m[(rows[0], 1)] * m[(rows[1], 0)],
        _ => DMatrix::from_fn(k, k, |i, j| m[(rows[i], j)]).determinant(),
    }
}

/// All increasing `k`-subsets of `0..n`.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_row() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let (n, dec) = null_space(&a, RANK_REL_TOL);
        assert_eq!(dec.rank, 1);
        assert_eq!(n.ncols(), 2);
        assert!((&a * &n).norm() < 1e-14);
    }

    #[test]
    fn ambiguity_band_is_flagged() {
        let d = decide_rank(&[1.0, 2e-8], RANK_REL_TOL);
        assert_eq!(d.rank, 2);
        assert!(d.ambiguous);
        let d = decide_rank(&[1.0, 1e-3, 1e-14], RANK_REL_TOL);
        assert_eq!(d.rank, 2);
        assert!(!d.ambiguous);
    }

    #[test]
    fn intersection_of_planes() {
        let a = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let b = DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let (i, dec) = intersection(&a, &b, RANK_REL_TOL);
        assert_eq!(dec.rank, 1);
        assert!((i[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn principal_angle_small() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 1e-9]);
        let ang = max_principal_angle(&a, &b, RANK_REL_TOL);
        assert!((ang - 1e-9).abs() < 1e-15);
    }

    #[test]
    fn subsets_count() {
        assert_eq!(subsets(5, 2).len(), 10);
        assert_eq!(subsets(3, 0), vec![Vec::<usize>::new()]);
        assert!(subsets(2, 3).is_empty());
    }
}
