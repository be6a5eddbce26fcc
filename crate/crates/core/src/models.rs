//! ECFs of standard max-stable models on sites of a ground set.
//!
//! Closed forms: independence, full dependence, `√|A|` (the Euclidean-norm
//! tail dependence), Mixed Moving Maxima with a box indicator kernel, and
//! bivariate Brown–Resnick / Hüsler–Reiss quantities. Higher-order
//! Brown–Resnick coefficients are estimated by Monte Carlo.
//!
//! `erf` and `erfc` come from `libm` (a port of the musl rational
//! approximations, error within a few ulps).

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use libm::{erf, erfc};

use crate::ecf::{EcfTable, TOL_VALIDATE};
use crate::error::{Error, Result};
use crate::rng;
use crate::subset::{masks, GroundSet, SetFunction, SubsetMask};

/// Eigenvalues of the Gaussian covariance down to this are clipped to zero.
pub const PSD_CLIP: f64 = -1e-10;

pub fn independent_ecf(g: &GroundSet) -> EcfTable {
    EcfTable::from_fn(g.clone(), |a| a.len() as f64)
}

pub fn identical_ecf(g: &GroundSet) -> EcfTable {
    EcfTable::from_fn(g.clone(), |a| if a.is_empty() { 0.0 } else { 1.0 })
}

/// `θ(A) = √|A|`.
pub fn sqrt_ecf(g: &GroundSet) -> EcfTable {
    EcfTable::from_fn(g.clone(), |a| (a.len() as f64).sqrt())
}

/// `ℓ(x) = ‖x‖₂`, whose dependency set is the positive unit ball.
pub fn ball_ell(x: &[f64]) -> Result<f64> {
    if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain("coordinates must be finite and nonnegative".into()));
    }
    Ok(x.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Axis-aligned box `[lower, upper)` of unit volume used as an M3 kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxKernel {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxKernel {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let k = BoxKernel { lower, upper };
        k.check()?;
        Ok(k)
    }

    /// `[0, 1)^d`.
    pub fn unit(d: usize) -> Self {
        BoxKernel {
            lower: vec![0.0; d],
            upper: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .product()
    }

    pub fn check(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::Parameter("box corners must have equal positive dimension".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && u > l)) {
            return Err(Error::Parameter("box must have finite corners with upper > lower".into()));
        }
        let v = self.volume();
        if (v - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("box volume is {v}, expected 1")));
        }
        Ok(())
    }
}

/// Mixed Moving Maxima with indicator kernel `1_B`:
/// `θ(A) = vol(⋃_{t ∈ A} (t + B))`, by inclusion–exclusion over the
/// (box-shaped) intersections of translates.
pub fn m3_box_ecf(g: &GroundSet, kernel: &BoxKernel) -> Result<EcfTable> {
    kernel.check()?;
    let coords = g.coords().ok_or(Error::MissingCoords)?;
    let d = kernel.dim();
    if coords[0].len() != d {
        return Err(Error::Parameter(format!(
            "sites have {} coordinates but the kernel has {d}",
            coords[0].len()
        )));
    }
    let m = g.size();
    let n = 1usize << m;
    let mut lo = vec![f64::NEG_INFINITY; n * d];
    let mut hi = vec![f64::INFINITY; n * d];
    // Signed intersection volumes (−1)^{|S|+1} vol(⋂_{s∈S} (s + B)).
    let mut signed = vec![0.0; n];
    for s in 1..n {
        let t = s.trailing_zeros() as usize;
        let parent = s & (s - 1);
        let mut vol = 1.0;
        for k in 0..d {
            let l = f64::max(lo[parent * d + k], coords[t][k] + kernel.lower[k]);
            let h = f64::min(hi[parent * d + k], coords[t][k] + kernel.upper[k]);
            lo[s * d + k] = l;
            hi[s * d + k] = h;
            vol *= (h - l).max(0.0);
        }
        signed[s] = if s.count_ones() % 2 == 1 { vol } else { -vol };
    }
    // Subset sums give the union volumes.
    for i in 0..m {
        let bit = 1usize << i;
        for s in 0..n {
            if s & bit != 0 {
                signed[s] += signed[s ^ bit];
            }
        }
    }
    signed[0] = 0.0;
    EcfTable::new(g.clone(), SetFunction::new(m, signed)?)
}

/// Power variogram `γ(h) = λ ‖h‖^α`, `λ > 0`, `0 < α ≤ 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariogramSpec {
    pub lambda: f64,
    pub alpha: f64,
}

impl VariogramSpec {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        let v = VariogramSpec { lambda, alpha };
        v.check()?;
        Ok(v)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) || !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::Parameter(format!(
                "variogram needs lambda > 0 and 0 < alpha <= 2, got ({}, {})",
                self.lambda, self.alpha
            )));
        }
        Ok(())
    }

    pub fn gamma(&self, h: &[f64]) -> f64 {
        let r = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.lambda * r.powf(self.alpha)
    }

    pub fn gamma_between(&self, s: &[f64], t: &[f64]) -> f64 {
        let h: Vec<f64> = s.iter().zip(t).map(|(a, b)| a - b).collect();
        self.gamma(&h)
    }
}

/// Standard normal distribution function.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Brown–Resnick bivariate coefficient `1 + erf(√(γ/8))`.
pub fn br_bivariate_theta(gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::Parameter(format!("variogram value {gamma} must be >= 0")));
    }
    if gamma.is_infinite() {
        return Ok(2.0);
    }
    Ok(1.0 + erf((gamma / 8.0).sqrt()))
}

/// Hüsler–Reiss bivariate `−log P(X₁ ≤ x₁, X₂ ≤ x₂)` with unit Fréchet
/// margins. `γ = 0` is full dependence and `γ = ∞` independence.
pub fn hr_bivariate_neg_log_cdf(gamma: f64, x1: f64, x2: f64) -> Result<f64> {
    if !(x1 > 0.0 && x2 > 0.0) {
        return Err(Error::Domain(format!("arguments must be positive, got ({x1}, {x2})")));
    }
    if !(gamma >= 0.0) {
        return Err(Error::Parameter(format!("variogram value {gamma} must be >= 0")));
    }
    if gamma == 0.0 {
        return Ok(1.0 / x1.min(x2));
    }
    if gamma.is_infinite() {
        return Ok(1.0 / x1 + 1.0 / x2);
    }
    let a = gamma.sqrt();
    let r = (x2 / x1).ln();
    Ok(std_normal_cdf(a / 2.0 + r / a) / x1 + std_normal_cdf(a / 2.0 - r / a) / x2)
}

/// Hüsler–Reiss stable tail dependence `ℓ(y) = V(1/y₁, 1/y₂)` on
/// `[0, ∞)² ∖ {0}`.
pub fn hr_stable_tail_dependence(gamma: f64, y: [f64; 2]) -> Result<f64> {
    crate::tm::check_direction(&y, 2)?;
    match (y[0] == 0.0, y[1] == 0.0) {
        (true, _) => Ok(y[1]),
        (_, true) => Ok(y[0]),
        _ => hr_bivariate_neg_log_cdf(gamma, 1.0 / y[0], 1.0 / y[1]),
    }
}

/// Gradient of the Hüsler–Reiss `ℓ` at direction `y`: the point of its
/// dependency set where `⟨y, ·⟩` is maximal.
pub fn hr_dependency_boundary_point(gamma: f64, y: [f64; 2]) -> Result<[f64; 2]> {
    crate::tm::check_direction(&y, 2)?;
    if !(gamma > 0.0) {
        return Err(Error::Parameter(format!("variogram value {gamma} must be > 0")));
    }
    if gamma.is_infinite() {
        return Ok([1.0, 1.0]);
    }
    let a = gamma.sqrt();
    let r = (y[0] / y[1]).ln();
    Ok([std_normal_cdf(a / 2.0 + r / a), std_normal_cdf(a / 2.0 - r / a)])
}

/// Output of [`br_ecf_mc`].
#[derive(Clone, Debug, PartialEq)]
pub struct BrEstimate {
    /// Unbiased Monte Carlo estimates; singletons are 1 only up to noise.
    pub raw: SetFunction,
    /// Standard errors of `raw`.
    pub se: SetFunction,
    /// `raw` with each site's spectral weights rescaled to unit mass and
    /// singletons set to 1; a valid ECF within noise of `raw`.
    pub repaired: EcfTable,
}

/// Monte Carlo Brown–Resnick ECF on the sites of `g`.
///
/// `W` is the centred Gaussian vector with `W_{t₀} = 0` at the first site
/// and covariance `C(s,t) = (γ(s−t₀) + γ(t−t₀) − γ(s−t))/2`, and
/// `V_t = exp(W_t − γ(t−t₀)/2)`, so that `θ(A) = E max_{t∈A} V_t`.
///
/// The expectation is estimated under the mixture `Q = m⁻¹ Σ_s P_s` of the
/// measures tilted by `V_s` (under `P_s`, `W ~ N(C e_s, C)`), where
/// `θ(A) = E_Q[m max_{t∈A} V_t / Σ_{t∈M} V_t]`. Every summand lies in
/// `(0, m]`, so the reported standard errors are reliable even for large
/// variograms.
pub fn br_ecf_mc(g: &GroundSet, v: &VariogramSpec, n: usize, seed: u64) -> Result<BrEstimate> {
    v.check()?;
    let coords = g.coords().ok_or(Error::MissingCoords)?;
    if n < 2 {
        return Err(Error::Parameter("at least two Monte Carlo draws are required".into()));
    }
    let m = g.size();
    let size = 1usize << m;

    let anchor = &coords[0];
    let sigma2: Vec<f64> = coords.iter().map(|c| v.gamma_between(c, anchor)).collect();
    let cov = DMatrix::from_fn(m, m, |s, t| {
        0.5 * (sigma2[s] + sigma2[t] - v.gamma_between(&coords[s], &coords[t]))
    });
    let factor = psd_factor(&cov)?;

    // Per draw: normalized weights w_t = m V_t / Σ V.
    let weights: Vec<f64> = rng::map_blocks(n, seed, rng::DOMAIN_BROWN_RESNICK, |r, range| {
        let mut out = Vec::with_capacity(range.len() * m);
        let mut xi = vec![0.0; m];
        for _ in range {
            let tilt = (rng::open_unit(r) * m as f64) as usize % m;
            xi.iter_mut().for_each(|z| *z = StandardNormal.sample(r));
            let logv: Vec<f64> = (0..m)
                .map(|t| {
                    let w: f64 = (0..m).map(|k| factor[(t, k)] * xi[k]).sum();
                    w + cov[(t, tilt)] - sigma2[t] / 2.0
                })
                .collect();
            let top = logv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let vals: Vec<f64> = logv.iter().map(|l| (l - top).exp()).collect();
            let total: f64 = vals.iter().sum();
            out.extend(vals.iter().map(|x| m as f64 * x / total));
        }
        out
    })
    .concat();

    let accumulate = |scale: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let parts = rng::map_ranges(n, |range| {
            let mut sum = vec![0.0; size];
            let mut sq = vec![0.0; size];
            let mut mx = vec![0.0; size];
            for k in range {
                let w = &weights[k * m..(k + 1) * m];
                for s in 1..size {
                    let t = s.trailing_zeros() as usize;
                    mx[s] = f64::max(mx[s & (s - 1)], w[t] / scale[t]);
                    sum[s] += mx[s];
                    sq[s] += mx[s] * mx[s];
                }
            }
            (sum, sq)
        });
        let mut sum = vec![0.0; size];
        let mut sq = vec![0.0; size];
        for (ps, pq) in &parts {
            for s in 0..size {
                sum[s] += ps[s];
                sq[s] += pq[s];
            }
        }
        (sum, sq)
    };

    let nf = n as f64;
    let (sum, sq) = accumulate(&vec![1.0; m]);
    let raw: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let se: Vec<f64> = (0..size)
        .map(|s| {
            let var = (sq[s] / nf - raw[s] * raw[s]).max(0.0) * nf / (nf - 1.0);
            (var / nf).sqrt()
        })
        .collect();
    let mass: Vec<f64> = (0..m).map(|t| raw[1 << t]).collect();
    let (rsum, _) = accumulate(&mass);
    let mut repaired: Vec<f64> = rsum.iter().map(|s| s / nf).collect();
    // Singletons equal 1 up to rounding; pin them.
    for t in 0..m {
        repaired[1 << t] = 1.0;
    }

    Ok(BrEstimate {
        raw: SetFunction::new(m, raw)?,
        se: SetFunction::new(m, se)?,
        repaired: EcfTable::new(g.clone(), SetFunction::new(m, repaired)?)?,
    })
}

/// `F` with `F Fᵀ = C`, from the symmetric eigendecomposition with
/// slightly negative eigenvalues clipped.
fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = cov.nrows();
    let eig = SymmetricEigen::new(cov.clone());
    let scale = cov.diagonal().iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < PSD_CLIP * scale {
        return Err(Error::NotPsd(min));
    }
    Ok(DMatrix::from_fn(m, m, |i, k| {
        eig.eigenvectors[(i, k)] * eig.eigenvalues[k].max(0.0).sqrt()
    }))
}

/// JSON model description: `{ "model": "br", "lambda": 1, ... }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Independent,
    Identical,
    Sqrt,
    #[serde(rename = "m3box")]
    M3Box {
        #[serde(default)]
        lower: Option<Vec<f64>>,
        #[serde(default)]
        upper: Option<Vec<f64>>,
    },
    Br {
        lambda: f64,
        alpha: f64,
        #[serde(default = "default_mc_draws")]
        n: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_mc_draws() -> usize {
    100_000
}

/// A model ECF together with Monte Carlo side information, if any.
#[derive(Clone, Debug)]
pub struct ModelOutput {
    pub ecf: EcfTable,
    pub mc: Option<BrEstimate>,
}

impl ModelSpec {
    pub fn build(&self, g: &GroundSet) -> Result<ModelOutput> {
        let ecf = match self {
            ModelSpec::Independent => independent_ecf(g),
            ModelSpec::Identical => identical_ecf(g),
            ModelSpec::Sqrt => sqrt_ecf(g),
            ModelSpec::M3Box { lower, upper } => {
                let d = g.coords().ok_or(Error::MissingCoords)?[0].len();
                let kernel = match (lower, upper) {
                    (Some(l), Some(u)) => BoxKernel::new(l.clone(), u.clone())?,
                    (None, None) => BoxKernel::unit(d),
                    _ => return Err(Error::Parameter("box needs both lower and upper".into())),
                };
                m3_box_ecf(g, &kernel)?
            }
            ModelSpec::Br {
                lambda,
                alpha,
                n,
                seed,
            } => {
                let est = br_ecf_mc(g, &VariogramSpec::new(*lambda, *alpha)?, *n, *seed)?;
                return Ok(ModelOutput {
                    ecf: est.repaired.clone(),
                    mc: Some(est),
                });
            }
        };
        Ok(ModelOutput { ecf, mc: None })
    }
}

/// Largest `|raw − repaired|` in units of standard error over nonempty
/// subsets with positive SE.
pub fn repair_shift_in_se(est: &BrEstimate) -> f64 {
    masks(est.raw.m(), true)
        .filter(|&a| est.se[a] > 0.0)
        .map(|a| (est.raw[a] - est.repaired.get(a)).abs() / est.se[a])
        .fold(0.0, f64::max)
}

/// Whether the singletons of `est.repaired` are normalized.
pub fn repaired_is_normalized(est: &BrEstimate) -> bool {
    est.repaired.check_normalization(TOL_VALIDATE).is_ok()
        && (0..est.raw.m()).all(|t| est.repaired.get(SubsetMask::singleton(t)).is_finite())
}
