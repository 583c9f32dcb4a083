//! Fixed-size dense linear algebra for the 2×2 and 3×3 symmetric matrices
//! that appear in the quadratic-form statistics.
//!
//! Everything here works on stack arrays; there is no heap allocation and no
//! general `n×n` machinery.

use std::ops::{Add, Index, Mul, Sub};

use thiserror::Error;

/// Relative cutoff below which eigenvalues are treated as zero by [`pinv`].
pub const PINV_RANK_TOL: f64 = 1e-12;

/// Relative pivot threshold used by [`cholesky_lower`].
pub const CHOLESKY_PIVOT_TOL: f64 = 1e-14;

const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} at column {column})")]
    NotPositiveDefinite { column: usize, pivot: f64 },
    #[error("matrix is not symmetric: entry ({row},{col}) differs from its transpose")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix contains a non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },
}

/// A real vector of fixed length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vector<const N: usize>(pub [f64; N]);

pub type Vec2 = Vector<2>;
pub type Vec3 = Vector<3>;

impl<const N: usize> Vector<N> {
    pub fn zeros() -> Self {
        Self([0.0; N])
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(self.0.map(|x| x * c))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl<const N: usize> Index<usize> for Vector<N> {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<const N: usize> Add for Vector<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o += r;
        }
        Self(out)
    }
}

impl<const N: usize> Sub for Vector<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0) {
            *o -= r;
        }
        Self(out)
    }
}

/// Square matrix product of two plain row-major arrays.
pub fn matmul<const N: usize>(a: &[[f64; N]; N], b: &[[f64; N]; N]) -> [[f64; N]; N] {
    let mut out = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..N {
            out[i][j] = (0..N).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Symmetric `N×N` matrix. Symmetry holds by construction: every
/// constructor either checks it or writes both triangles from one value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat<const N: usize> {
    data: [[f64; N]; N],
}

pub type SymMat2 = SymMat<2>;
pub type SymMat3 = SymMat<3>;

impl<const N: usize> SymMat<N> {
    /// Builds a matrix from full rows, rejecting asymmetric or non-finite input.
    /// Symmetry is checked exactly; use [`SymMat::from_lower`] to symmetrize.
    pub fn new(rows: [[f64; N]; N]) -> Result<Self, LinalgError> {
        for i in 0..N {
            for j in 0..N {
                if !rows[i][j].is_finite() {
                    return Err(LinalgError::NonFinite { row: i, col: j });
                }
                if rows[i][j] != rows[j][i] {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { data: rows })
    }

    /// Builds a matrix from its lower triangle, mirroring it to the upper one.
    pub fn from_lower(rows: [[f64; N]; N]) -> Self {
        let mut data = rows;
        for i in 0..N {
            for j in (i + 1)..N {
                data[i][j] = rows[j][i];
            }
        }
        Self { data }
    }

    pub fn identity() -> Self {
        Self::diagonal([1.0; N])
    }

    pub fn zeros() -> Self {
        Self {
            data: [[0.0; N]; N],
        }
    }

    pub fn diagonal(diag: [f64; N]) -> Self {
        let mut data = [[0.0; N]; N];
        for (i, d) in diag.into_iter().enumerate() {
            data[i][i] = d;
        }
        Self { data }
    }

    /// Sets entries `(i,j)` and `(j,i)` together.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i][j] = value;
        self.data[j][i] = value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i][j]
    }

    pub fn as_array(&self) -> &[[f64; N]; N] {
        &self.data
    }

    pub fn diag(&self) -> [f64; N] {
        std::array::from_fn(|i| self.data[i][i])
    }

    pub fn trace(&self) -> f64 {
        (0..N).map(|i| self.data[i][i]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            data: self.data.map(|row| row.map(|x| x * c)),
        }
    }

    pub fn mul_vec(&self, v: &Vector<N>) -> Vector<N> {
        Vector(std::array::from_fn(|i| {
            (0..N).map(|k| self.data[i][k] * v.0[k]).sum()
        }))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().flatten().all(|x| x.is_finite())
    }
}

impl SymMat<2> {
    pub fn det(&self) -> f64 {
        let [[a, b], [_, c]] = self.data;
        a * c - b * b
    }
}

impl SymMat<3> {
    pub fn det(&self) -> f64 {
        let m = &self.data;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

impl<const N: usize> Index<(usize, usize)> for SymMat<N> {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i][j]
    }
}

impl<const N: usize> Mul<&SymMat<N>> for &SymMat<N> {
    type Output = [[f64; N]; N];
    fn mul(self, rhs: &SymMat<N>) -> [[f64; N]; N] {
        matmul(&self.data, &rhs.data)
    }
}

/// Lower-triangular factor with a nonnegative diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerTri<const N: usize> {
    data: [[f64; N]; N],
}

impl<const N: usize> LowerTri<N> {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i][j]
    }

    pub fn as_array(&self) -> &[[f64; N]; N] {
        &self.data
    }

    /// `L·v`, touching only the lower triangle.
    pub fn mul_vec(&self, v: &Vector<N>) -> Vector<N> {
        Vector(std::array::from_fn(|i| {
            (0..=i).map(|k| self.data[i][k] * v.0[k]).sum()
        }))
    }

    /// Reconstructs `L·Lᵀ`.
    pub fn gram(&self) -> SymMat<N> {
        let mut out = SymMat::zeros();
        for i in 0..N {
            for j in 0..=i {
                let s = (0..=j).map(|k| self.data[i][k] * self.data[j][k]).sum();
                out.set(i, j, s);
            }
        }
        out
    }
}

/// Lower Cholesky factor `L` with `L·Lᵀ = s`.
pub fn cholesky_lower<const N: usize>(s: &SymMat<N>) -> Result<LowerTri<N>, LinalgError> {
    let threshold = CHOLESKY_PIVOT_TOL * s.max_abs();
    let mut l = [[0.0; N]; N];
    for j in 0..N {
        let pivot = s[(j, j)] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if !(pivot > threshold) {
            return Err(LinalgError::NotPositiveDefinite { column: j, pivot });
        }
        let d = pivot.sqrt();
        l[j][j] = d;
        for i in (j + 1)..N {
            let off = s[(i, j)] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = off / d;
        }
    }
    Ok(LowerTri { data: l })
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigen<const N: usize> {
    /// Sorted in descending order.
    pub values: [f64; N],
    /// Column `k` (i.e. `vectors[i][k]` over `i`) belongs to `values[k]`.
    pub vectors: [[f64; N]; N],
}

impl<const N: usize> SymEigen<N> {
    pub fn vector(&self, k: usize) -> Vector<N> {
        Vector(std::array::from_fn(|i| self.vectors[i][k]))
    }
}

/// Symmetric eigendecomposition: closed form for 2×2, cyclic Jacobi otherwise.
pub fn eig_sym<const N: usize>(s: &SymMat<N>) -> SymEigen<N> {
    let (values, vectors) = if N == 2 {
        eig_closed_form_2(s)
    } else {
        eig_jacobi(s)
    };
    sort_descending(values, vectors)
}

fn eig_closed_form_2<const N: usize>(s: &SymMat<N>) -> ([f64; N], [[f64; N]; N]) {
    let (a, b, c) = (s[(0, 0)], s[(0, 1)], s[(1, 1)]);
    let mid = 0.5 * (a + c);
    let half_gap = 0.5 * (a - c);
    let radius = half_gap.hypot(b);
    let mut values = [0.0; N];
    values[0] = mid + radius;
    values[1] = mid - radius;

    let (x, y) = if radius == 0.0 {
        (1.0, 0.0)
    } else if half_gap >= 0.0 {
        (half_gap + radius, b)
    } else {
        (b, radius - half_gap)
    };
    let norm = x.hypot(y);
    let (x, y) = (x / norm, y / norm);
    let mut vectors = [[0.0; N]; N];
    vectors[0][0] = x;
    vectors[1][0] = y;
    vectors[0][1] = -y;
    vectors[1][1] = x;
    (values, vectors)
}

fn eig_jacobi<const N: usize>(s: &SymMat<N>) -> ([f64; N], [[f64; N]; N]) {
    let mut a = *s.as_array();
    let mut v = [[0.0; N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let total: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..N)
            .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * total {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - sn * akq;
                    a[k][q] = sn * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - sn * aqk;
                    a[q][k] = sn * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - sn * vkq;
                    row[q] = sn * vkp + c * vkq;
                }
            }
        }
    }
    (std::array::from_fn(|i| a[i][i]), v)
}

fn sort_descending<const N: usize>(values: [f64; N], vectors: [[f64; N]; N]) -> SymEigen<N> {
    let mut order: [usize; N] = std::array::from_fn(|i| i);
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    SymEigen {
        values: order.map(|k| values[k]),
        vectors: std::array::from_fn(|i| order.map(|k| vectors[i][k])),
    }
}

/// Moore-Penrose pseudoinverse through the eigendecomposition. Eigenvalues
/// with `|λ| ≤ PINV_RANK_TOL·max|λ|` are dropped.
pub fn pinv<const N: usize>(s: &SymMat<N>) -> SymMat<N> {
    let eig = eig_sym(s);
    let largest = eig.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut out = SymMat::zeros();
    if largest == 0.0 {
        return out;
    }
    let cutoff = PINV_RANK_TOL * largest;
    for k in 0..N {
        let lambda = eig.values[k];
        if lambda.abs() <= cutoff {
            continue;
        }
        let v = eig.vector(k);
        for i in 0..N {
            for j in 0..=i {
                let value = out.get(i, j) + v[i] * v[j] / lambda;
                out.set(i, j, value);
            }
        }
    }
    out
}

/// `vᵀ·S·v` by direct bilinear expansion.
pub fn quad_form<const N: usize>(v: &Vector<N>, s: &SymMat<N>) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        for j in 0..N {
            acc += v[i] * s[(i, j)] * v[j];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // AΣ̂Aᵀ for the five-subject fixture.
    fn m0() -> SymMat2 {
        SymMat::from_lower([
            [1.803_846_615_273_879_4, 0.0],
            [3.651_923_307_636_939_7, 20.916_666_666_666_668],
        ])
    }

    fn max_abs_diff<const N: usize>(a: &[[f64; N]; N], b: &[[f64; N]; N]) -> f64 {
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    fn transpose<const N: usize>(a: &[[f64; N]; N]) -> [[f64; N]; N] {
        std::array::from_fn(|i| std::array::from_fn(|j| a[j][i]))
    }

    #[test]
    fn cholesky_identity_and_diagonal() {
        let l = cholesky_lower(&SymMat2::identity()).unwrap();
        assert_eq!(l.as_array(), &[[1.0, 0.0], [0.0, 1.0]]);
        let l = cholesky_lower(&SymMat2::diagonal([4.0, 9.0])).unwrap();
        assert_eq!(l.as_array(), &[[2.0, 0.0], [0.0, 3.0]]);
    }

    #[test]
    fn cholesky_multiplies_back() {
        let gamma = SymMat2::from_lower([[3.7, 0.0], [4.808_845, 7.0]]);
        let l = cholesky_lower(&gamma).unwrap();
        assert_eq!(l.get(0, 1), 0.0);
        let back = l.gram();
        assert!(max_abs_diff(back.as_array(), gamma.as_array()) <= 1e-12 * gamma.max_abs());
    }

    #[test]
    fn cholesky_rejects_rank_one() {
        let s = SymMat2::from_lower([[1.0, 0.0], [1.0, 1.0]]);
        assert!(matches!(
            cholesky_lower(&s),
            Err(LinalgError::NotPositiveDefinite { column: 1, .. })
        ));
    }

    #[test]
    fn new_checks_symmetry_and_finiteness() {
        assert!(matches!(
            SymMat2::new([[1.0, 2.0], [2.5, 1.0]]),
            Err(LinalgError::NotSymmetric { .. })
        ));
        assert!(matches!(
            SymMat2::new([[f64::NAN, 0.0], [0.0, 1.0]]),
            Err(LinalgError::NonFinite { .. })
        ));
        assert!(SymMat2::new([[1.0, 2.0], [2.0, 1.0]]).is_ok());
    }

    #[test]
    fn eig_small_cases() {
        let e = eig_sym(&SymMat2::diagonal([2.0, 5.0]));
        assert_eq!(e.values, [5.0, 2.0]);
        let e = eig_sym(&SymMat2::from_lower([[0.0, 0.0], [1.0, 0.0]]));
        assert!((e.values[0] - 1.0).abs() < 1e-15);
        assert!((e.values[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_fixture_trace_and_determinant() {
        let e = eig_sym(&m0());
        assert!((e.values.iter().sum::<f64>() - 22.720_513_281_940_546).abs() < 1e-10);
        assert!((e.values[0] * e.values[1] - 24.393_914_524_616_72).abs() < 1e-10);
        for k in 0..2 {
            let v = e.vector(k);
            let lhs = m0().mul_vec(&v);
            let rhs = v.scale(e.values[k]);
            assert!((lhs - rhs).norm_sq().sqrt() < 1e-10);
        }
    }

    #[test]
    fn jacobi_three_by_three() {
        let s = SymMat3::from_lower([[4.0, 0.0, 0.0], [1.0, 3.0, 0.0], [0.5, -2.0, 6.0]]);
        let e = eig_sym(&s);
        assert!(e.values[0] >= e.values[1] && e.values[1] >= e.values[2]);
        assert!((e.values.iter().sum::<f64>() - s.trace()).abs() < 1e-10);
        assert!((e.values.iter().product::<f64>() - s.det()).abs() < 1e-10);
        for k in 0..3 {
            let v = e.vector(k);
            let r = s.mul_vec(&v) - v.scale(e.values[k]);
            assert!(r.norm_sq().sqrt() < 1e-10);
        }
    }

    #[test]
    fn pinv_small_cases() {
        assert_eq!(pinv(&SymMat2::diagonal([2.0, 0.0])), SymMat2::diagonal([0.5, 0.0]));
        let id = pinv(&SymMat2::identity());
        assert!(max_abs_diff(id.as_array(), SymMat2::identity().as_array()) < 1e-15);
        assert_eq!(pinv(&SymMat2::zeros()), SymMat2::zeros());
    }

    #[test]
    fn pinv_fixture_is_inverse() {
        let inv = pinv(&m0());
        let prod = &inv * &m0();
        assert!(max_abs_diff(&prod, SymMat2::identity().as_array()) < 1e-10);
    }

    #[test]
    fn quad_form_cases() {
        let v = Vector([1.0, 0.0]);
        assert_eq!(quad_form(&v, &SymMat2::diagonal([3.0, 4.0])), 3.0);
        assert_eq!(quad_form(&Vec2::zeros(), &m0()), 0.0);
        let az = Vector([-2.0, 1.0]).scale(5f64.sqrt());
        let q = quad_form(&az, &pinv(&m0()));
        assert!((q - 20.512_945_228_920_93).abs() < 1e-3);
    }

    fn penrose_residual<const N: usize>(s: &SymMat<N>) -> f64 {
        let p = pinv(s);
        let sp = s * &p;
        let ps = &p * s;
        let sps = matmul(&sp, s.as_array());
        let psp = matmul(&ps, p.as_array());
        let scale = s.max_abs().max(p.max_abs()).max(1.0);
        [
            max_abs_diff(&sps, s.as_array()),
            max_abs_diff(&psp, p.as_array()),
            max_abs_diff(&sp, &transpose(&sp)),
            max_abs_diff(&ps, &transpose(&ps)),
        ]
        .into_iter()
        .fold(0.0, f64::max)
            / scale
    }

    fn arb_sym2() -> impl Strategy<Value = SymMat2> {
        prop_oneof![
            (-10.0..10.0, -10.0..10.0, -10.0..10.0)
                .prop_map(|(a, b, c)| SymMat2::from_lower([[a, 0.0], [b, c]])),
            // rank one: λ·u·uᵀ
            (-10.0..10.0, -3.0..3.0, -3.0..3.0).prop_map(|(l, x, y): (f64, f64, f64)| {
                SymMat2::from_lower([[l * x * x, 0.0], [l * x * y, l * y * y]])
            }),
        ]
    }

    fn arb_sym3() -> impl Strategy<Value = SymMat3> {
        (prop::array::uniform6(-5.0..5.0f64), 0usize..3).prop_map(|(e, rank_cut)| {
            let full = SymMat3::from_lower([[e[0], 0.0, 0.0], [e[1], e[2], 0.0], [e[3], e[4], e[5]]]);
            if rank_cut == 0 {
                return full;
            }
            // Rebuild with trailing eigenvalues zeroed to get rank-deficient input.
            let eig = eig_sym(&full);
            let mut out = SymMat3::zeros();
            for k in 0..(3 - rank_cut) {
                let v = eig.vector(k);
                for i in 0..3 {
                    for j in 0..=i {
                        out.set(i, j, out.get(i, j) + eig.values[k] * v[i] * v[j]);
                    }
                }
            }
            out
        })
    }

    proptest! {
        #[test]
        fn penrose_conditions_2x2(s in arb_sym2()) {
            prop_assert!(penrose_residual(&s) < 1e-10);
        }

        #[test]
        fn penrose_conditions_3x3(s in arb_sym3()) {
            prop_assert!(penrose_residual(&s) < 1e-10);
        }

        #[test]
        fn eig_invariants(s in arb_sym2()) {
            let e = eig_sym(&s);
            let scale = s.max_abs().max(1.0);
            prop_assert!(e.values[0] >= e.values[1]);
            prop_assert!((e.values[0] + e.values[1] - s.trace()).abs() < 1e-10 * scale);
            prop_assert!((e.values[0] * e.values[1] - s.det()).abs() < 1e-10 * scale * scale);
            let (u, v) = (e.vector(0), e.vector(1));
            prop_assert!((u.norm_sq() - 1.0).abs() < 1e-10);
            prop_assert!((v.norm_sq() - 1.0).abs() < 1e-10);
            prop_assert!(u.dot(&v).abs() < 1e-10);
        }

        #[test]
        fn cholesky_roundtrip(d0 in 0.1..5.0f64, d1 in 0.1..5.0f64, off in -5.0..5.0f64) {
            let mut l = [[0.0; 2]; 2];
            l[0][0] = d0;
            l[1][0] = off;
            l[1][1] = d1;
            let s = LowerTri { data: l }.gram();
            let back = cholesky_lower(&s).unwrap();
            prop_assert!(max_abs_diff(back.as_array(), &l) < 1e-10);
        }
    }
}
