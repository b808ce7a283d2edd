//! Dense double-precision containers, pointwise nonlinearities and power iteration.

use std::fmt;
use std::ops::{Deref, DerefMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Dense real vector.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RealVector(pub Vec<f64>);

impl RealVector {
    pub fn zeros(len: usize) -> Self {
        RealVector(vec![0.0; len])
    }

    pub fn filled(len: usize, value: f64) -> Self {
        RealVector(vec![value; len])
    }

    /// Kronecker delta of length `len` centered at `at`.
    pub fn delta(len: usize, at: usize) -> Self {
        let mut v = Self::zeros(len);
        v.0[at] = 1.0;
        v
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm2(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        RealVector(self.0.iter().map(|x| alpha * x).collect())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &[f64]) {
        axpy(alpha, other, &mut self.0);
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Deref for RealVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for RealVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl FromIterator<f64> for RealVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        RealVector(iter.into_iter().collect())
    }
}

impl From<Vec<f64>> for RealVector {
    fn from(v: Vec<f64>) -> Self {
        RealVector(v)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dense row-major real matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RealMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims("matrix data", rows * cols, data.len()));
        }
        Ok(RealMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::dims("matrix row", c, row.len()));
            }
            data.extend_from_slice(row);
        }
        Ok(RealMatrix {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        RealMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        RealMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| alpha * x).collect(),
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[f64]) -> Result<RealVector> {
        if v.len() != self.cols {
            return Err(Error::dims("matvec", self.cols, v.len()));
        }
        let mut out = vec![0.0; self.rows];
        self.matvec_into(v, &mut out);
        Ok(RealVector(out))
    }

    /// Unchecked product into a caller-provided buffer; lengths are debug-asserted.
    #[inline]
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(row, v);
        }
    }

    pub fn matmul(&self, other: &RealMatrix) -> Result<RealMatrix> {
        if self.cols != other.rows {
            return Err(Error::dims("matmul", self.cols, other.rows));
        }
        let mut out = RealMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                axpy(a, other.row(k), dst);
            }
        }
        Ok(out)
    }
}

/// Pointwise nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Relu,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Identity,
    ];

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative at the pre-activation `x`. The ReLU derivative at exactly 0 is 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" | "linear" | "none" => Ok(Activation::Identity),
            other => Err(Error::invalid(format!("unknown activation '{other}'"))),
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn activation(kind: Activation, v: &[f64]) -> RealVector {
    RealVector(v.iter().map(|&x| kind.apply(x)).collect())
}

pub fn activation_grad(kind: Activation, v: &[f64]) -> RealVector {
    RealVector(v.iter().map(|&x| kind.derivative(x)).collect())
}

/// Result of power iteration: the dominant eigenvalue magnitude and its unit eigenvector.
#[derive(Clone, Debug)]
pub struct DominantEigen {
    pub magnitude: f64,
    pub vector: RealVector,
    pub iterations: usize,
}

// Fixed seed for the single restart taken when the all-ones start vector stalls.
const RESTART_SEED: u64 = 0x005e_ed0f_1e55;

/// Power iteration for the largest-magnitude eigenvalue.
///
/// The per-step estimate is `||M x||` for the current unit iterate `x`, i.e. the square
/// root of the Rayleigh quotient of `MᵀM`. It converges to `|λ_max|` even when `±λ_max`
/// are both eigenvalues (bipartite graphs), where the plain Rayleigh quotient does not.
/// Iteration stops once successive estimates differ by less than `tol * max(1, estimate)`.
pub fn power_iteration(m: &RealMatrix, tol: f64, max_iters: usize) -> Result<DominantEigen> {
    if !m.is_square() {
        return Err(Error::dims("power_iteration (square)", m.rows(), m.cols()));
    }
    let n = m.rows();
    if n == 0 {
        return Err(Error::invalid("power iteration on an empty matrix"));
    }
    let mut x = RealVector::filled(n, 1.0 / (n as f64).sqrt());
    let mut y = RealVector::zeros(n);
    let mut prev = f64::NAN;
    let mut restarted = false;
    for it in 1..=max_iters {
        m.matvec_into(&x, &mut y);
        let est = y.norm2();
        if est == 0.0 {
            if restarted {
                // M annihilates two unrelated start vectors: treat as nilpotent/zero.
                return Ok(DominantEigen {
                    magnitude: 0.0,
                    vector: x,
                    iterations: it,
                });
            }
            restarted = true;
            let mut rng = Rng::new(RESTART_SEED);
            for xi in x.iter_mut() {
                *xi = rng.uniform_range(-1.0, 1.0);
            }
            let nx = x.norm2();
            x.iter_mut().for_each(|xi| *xi /= nx);
            prev = f64::NAN;
            continue;
        }
        for (xi, yi) in x.iter_mut().zip(y.iter()) {
            *xi = yi / est;
        }
        if (est - prev).abs() < tol * est.max(1.0) {
            return Ok(DominantEigen {
                magnitude: est,
                vector: x,
                iterations: it,
            });
        }
        prev = est;
    }
    Err(Error::NotConverged {
        iters: max_iters,
        last: prev,
    })
}

pub fn spectral_radius(m: &RealMatrix, tol: f64, max_iters: usize) -> Result<f64> {
    power_iteration(m, tol, max_iters).map(|e| e.magnitude)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::rng::Rng;

    fn random_matrix(rng: &mut Rng, r: usize, c: usize) -> RealMatrix {
        RealMatrix::from_fn(r, c, |_, _| rng.uniform_range(-1.0, 1.0))
    }

    #[test]
    fn matvec_identity_and_zero() {
        let v = RealMatrix::identity(3).matvec(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(v.0, vec![1.0, 2.0, 3.0]);
        let z = RealMatrix::zeros(2, 2).matvec(&[5.0, 7.0]).unwrap();
        assert_eq!(z.0, vec![0.0, 0.0]);
    }

    #[test]
    fn matvec_matches_scalar_loop() {
        let mut rng = Rng::new(11);
        let m = random_matrix(&mut rng, 4, 4);
        let v: Vec<f64> = (0..4).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let got = m.matvec(&v).unwrap();
        for i in 0..4 {
            let mut acc = 0.0;
            for j in 0..4 {
                acc += m.get(i, j) * v[j];
            }
            assert!((got[i] - acc).abs() < 1e-15);
        }
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let err = RealMatrix::zeros(2, 3).matvec(&[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn activation_values() {
        assert_eq!(activation(Activation::Sigmoid, &[0.0]).0, vec![0.5]);
        assert_eq!(activation(Activation::Relu, &[-1.0, 2.0]).0, vec![0.0, 2.0]);
        // tanh(0.5) = (e - 1)/(e + 1) with e = exp(1)
        let e = 1f64.exp();
        let t = activation(Activation::Tanh, &[0.5])[0];
        assert!((t - (e - 1.0) / (e + 1.0)).abs() < 1e-15);
        assert!((t - 0.462_117_157_260_009_7).abs() < 1e-15);
    }

    #[test]
    fn activation_grad_values() {
        assert_eq!(activation_grad(Activation::Sigmoid, &[0.0]).0, vec![0.25]);
        assert_eq!(activation_grad(Activation::Relu, &[-1.0, 2.0]).0, vec![0.0, 1.0]);
        assert_eq!(activation_grad(Activation::Relu, &[0.0]).0, vec![0.0]);
        let g = activation_grad(Activation::Tanh, &[0.5])[0];
        assert!((g - (1.0 - 0.5f64.tanh().powi(2))).abs() < 1e-15);
        assert!((g - 0.786_447_732_965_927_4).abs() < 1e-12);
    }

    #[test]
    fn activation_ranges() {
        let xs = [-50.0, -3.0, -1e-3, 0.0, 1e-3, 3.0, 50.0];
        for &x in &xs {
            let s = Activation::Sigmoid.apply(x);
            assert!((0.0..=1.0).contains(&s));
            assert!(Activation::Tanh.apply(x).abs() <= 1.0);
            assert!(Activation::Relu.apply(x) >= 0.0);
        }
        assert!(Activation::Sigmoid.apply(-800.0).is_finite());
    }

    #[test]
    fn activation_grad_matches_central_differences() {
        let mut rng = Rng::new(3);
        let h = 1e-6;
        for kind in Activation::ALL {
            for _ in 0..1000 {
                let x = rng.uniform_range(-4.0, 4.0);
                if kind == Activation::Relu && x.abs() < 1e-4 {
                    continue;
                }
                let fd = (kind.apply(x + h) - kind.apply(x - h)) / (2.0 * h);
                let an = kind.derivative(x);
                let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-300);
                if an == 0.0 && fd == 0.0 {
                    continue;
                }
                assert!(rel < 1e-6, "{kind} at {x}: fd {fd} vs {an}");
            }
        }
    }

    #[test]
    fn spectral_radius_simple() {
        let r = spectral_radius(&RealMatrix::identity(5), 1e-12, 1000).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let r = spectral_radius(&RealMatrix::diag(&[2.0, 1.0, 0.5]), 1e-14, 10_000).unwrap();
        assert!((r - 2.0).abs() < 1e-10);
        assert_eq!(
            spectral_radius(&RealMatrix::zeros(3, 3), 1e-12, 100).unwrap(),
            0.0
        );
    }

    #[test]
    fn spectral_radius_bipartite() {
        // Path on two nodes has eigenvalues ±1.
        let m = RealMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((spectral_radius(&m, 1e-12, 100).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_restarts_on_stall() {
        // all-ones lies in the kernel
        let m = RealMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let r = spectral_radius(&m, 1e-12, 1000).unwrap();
        assert!((r - 2.0).abs() < 1e-10);
    }

    #[test]
    fn power_iteration_reports_non_convergence() {
        let m = RealMatrix::diag(&[1.0, 0.999_999]);
        let err = power_iteration(&m, 1e-300, 5).unwrap_err();
        assert!(matches!(err, Error::NotConverged { iters: 5, .. }));
    }

    #[test]
    fn spectral_radius_matches_dense_eigensolver() {
        let mut rng = Rng::new(99);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 6, 6);
            let sym = RealMatrix::from_fn(6, 6, |i, j| a.get(i, j) + a.get(j, i));
            let dense = nalgebra::DMatrix::from_fn(6, 6, |i, j| sym.get(i, j));
            let eig = nalgebra::SymmetricEigen::new(dense);
            let oracle = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
            let got = spectral_radius(&sym, 1e-15, 1_000_000).unwrap();
            assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
        }
    }

    proptest! {
        #[test]
        fn matvec_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut rng = Rng::new(seed);
            let m = random_matrix(&mut rng, 5, 4);
            let u: Vec<f64> = (0..4).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            let comb: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let lhs = m.matvec(&comb).unwrap();
            let mu = m.matvec(&u).unwrap();
            let mv = m.matvec(&v).unwrap();
            for i in 0..5 {
                let rhs = a * mu[i] + b * mv[i];
                let scale = lhs[i].abs().max(rhs.abs()).max(1.0);
                prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn spectral_radius_is_absolutely_homogeneous(seed in any::<u64>(), alpha in -5.0f64..5.0) {
            prop_assume!(alpha.abs() > 1e-3);
            let mut rng = Rng::new(seed);
            let a = random_matrix(&mut rng, 6, 6);
            let sym = RealMatrix::from_fn(6, 6, |i, j| a.get(i, j) + a.get(j, i));
            let r = spectral_radius(&sym, 1e-15, 1_000_000).unwrap();
            let ra = spectral_radius(&sym.scaled(alpha), 1e-15, 1_000_000).unwrap();
            prop_assert!((ra - alpha.abs() * r).abs() <= 1e-7 * ra.max(1.0));
        }
    }
}
