//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use ecf_toolkit::ecf::{random_valid_ecf, DiscreteSpectralMeasure};
use ecf_toolkit::{EcfTable, SetFunction, SubsetMask};

/// `τ_L = Σ_{I ⊂ L} (−1)^{|I|+1} θ((M∖L) ∪ I)` by explicit enumeration.
pub fn tau_oracle(theta: &SetFunction) -> Vec<f64> {
    let m = theta.m();
    let full = (1u32 << m) - 1;
    let mut out = vec![0.0; 1 << m];
    for l in 1..=full {
        let rest = full & !l;
        let mut s = 0.0;
        for i in 0..=full {
            if i & !l != 0 {
                continue;
            }
            let sign = if i.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
            s += sign * theta.get(SubsetMask(rest | i));
        }
        out[l as usize] = s;
    }
    out
}

/// `θ(A) = Σ_{L ∩ A ≠ ∅} τ_L` by explicit enumeration.
pub fn theta_from_tau_oracle(tau: &[f64]) -> Vec<f64> {
    let n = tau.len();
    (0..n)
        .map(|a| (1..n).filter(|l| l & a != 0).map(|l| tau[l]).sum())
        .collect()
}

/// `ℓ(x) = Σ_j max_i a_ij x_i` of a max-linear vector.
pub fn maxlinear_ell(sm: &DiscreteSpectralMeasure, x: &[f64]) -> f64 {
    (0..sm.q())
        .map(|j| (0..sm.m()).map(|i| sm.coef(i, j) * x[i]).fold(0.0, f64::max))
        .sum()
}

/// `−log P(X ≤ x)` of a max-linear vector.
pub fn maxlinear_neg_log_cdf(sm: &DiscreteSpectralMeasure, x: &[f64]) -> f64 {
    let inv: Vec<f64> = x.iter().map(|v| 1.0 / v).collect();
    maxlinear_ell(sm, &inv)
}

/// Copy of `ecf` with `θ(A)` shifted by `delta`.
pub fn perturbed(ecf: &EcfTable, a: SubsetMask, delta: f64) -> EcfTable {
    let mut th = ecf.theta().clone();
    th[a] += delta;
    EcfTable::new(ecf.ground().clone(), th).unwrap()
}

/// Deterministic random valid ECF with `m` sites.
pub fn random_ecf(m: usize, seed: u64) -> EcfTable {
    random_valid_ecf(m, 1 + (seed % 12) as usize, seed).unwrap()
}

/// Small deterministic generator for test inputs.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }
}
