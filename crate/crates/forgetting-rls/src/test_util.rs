//! Deterministic helpers shared by the unit tests.

use crate::linalg::{SymMatrix, Vector};

pub fn assert_close(actual: f64, expected: f64, tol: f64) {
    assert!(
        (actual - expected).abs() <= tol,
        "expected {expected}, got {actual} (tol {tol})"
    );
}

/// Small xorshift generator so unit tests stay deterministic without
/// depending on RNG crate internals.
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed.wrapping_mul(0x9E3779B97F4A7C15).max(1),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.state = x;
        x
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }

    pub fn vector(&mut self, n: usize, lo: f64, hi: f64) -> Vector {
        Vector::new((0..n).map(|_| self.uniform(lo, hi)).collect()).unwrap()
    }

    /// Random symmetric matrix with eigenvalues uniform in [eig_lo, eig_hi],
    /// built by conjugating a diagonal with random plane rotations.
    pub fn random_spd(&mut self, n: usize, eig_lo: f64, eig_hi: f64) -> SymMatrix {
        let diag: Vec<f64> = (0..n).map(|_| self.uniform(eig_lo, eig_hi)).collect();
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { diag[i] } else { 0.0 }).collect())
            .collect();
        for _ in 0..(4 * n) {
            let p = (self.next_u64() as usize) % n;
            let mut q = (self.next_u64() as usize) % n;
            if p == q {
                q = (q + 1) % n;
            }
            let angle = self.uniform(0.0, std::f64::consts::TAU);
            let (s, c) = angle.sin_cos();
            // A <- G^T A G with the Givens rotation G acting on (p, q)
            for row in a.iter_mut() {
                let (x, y) = (row[p], row[q]);
                row[p] = c * x - s * y;
                row[q] = s * x + c * y;
            }
            for j in 0..n {
                let (x, y) = (a[p][j], a[q][j]);
                a[p][j] = c * x - s * y;
                a[q][j] = s * x + c * y;
            }
        }
        SymMatrix::from_rows(&a).expect("rotation keeps symmetry")
    }
}
