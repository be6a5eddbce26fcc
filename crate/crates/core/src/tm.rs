//! The Tawn–Molchanov (TM) process on a finite ground set.
//!
//! Given valid τ-coefficients the TM vector is the max-linear model
//! `X_i = max_{L ∋ i} τ_L Z_L` with i.i.d. unit Fréchet `Z_L`, one per
//! nonempty `L ⊂ M`. Its distribution function is explicit,
//! `−log P(X ≤ x) = Σ_L τ_L max_{t ∈ L} 1/x_t`, and it realizes the ECF
//! the coefficients were computed from.

use crate::ecf::{
    self, compute_tau, DiscreteSpectralMeasure, EcfTable, TauTable, TOL_VALIDATE,
};
use crate::error::{Error, Result};
use crate::rng;
use crate::subset::{masks, SubsetMask};

/// Atoms with weight at or below this are not simulated.
pub const SIMULATION_CUTOFF: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq)]
pub struct TmProcess {
    tau: TauTable,
    theta: EcfTable,
}

impl TmProcess {
    pub fn from_tau(tau: TauTable) -> Result<Self> {
        tau.check_invariants(TOL_VALIDATE)?;
        let theta = ecf::ecf_from_tau_unchecked(&tau);
        Ok(TmProcess { tau, theta })
    }

    pub fn tau(&self) -> &TauTable {
        &self.tau
    }

    /// The ECF realized by the process.
    pub fn theta(&self) -> &EcfTable {
        &self.theta
    }

    pub fn m(&self) -> usize {
        self.tau.m()
    }

    /// The process restricted to `sites`.
    pub fn marginal(&self, sites: SubsetMask) -> Result<TmProcess> {
        TmProcess::from_tau(ecf::marginalize_tau(&self.tau, sites)?)
    }

    fn terms(&self) -> impl Iterator<Item = (SubsetMask, f64)> + '_ {
        masks(self.m(), true)
            .map(|l| (l, self.tau.get(l)))
            .filter(|&(_, w)| w != 0.0)
    }

    fn simulation_atoms(&self) -> Vec<Vec<(usize, f64)>> {
        self.tau
            .atoms(SIMULATION_CUTOFF)
            .into_iter()
            .map(|(l, w)| l.sites().map(|t| (t, w)).collect())
            .collect()
    }
}

/// The TM process realizing `ecf`; invalid input is rejected with the
/// validation diagnostics.
pub fn tm_from_ecf(ecf: &EcfTable) -> Result<TmProcess> {
    ecf::ensure_valid(ecf)?;
    let tau = compute_tau(ecf)?;
    let theta = ecf::ecf_from_tau_unchecked(&tau);
    Ok(TmProcess { tau, theta })
}

/// `−log P(X*_t ≤ x_t, t ∈ M)`. Coordinates may be `+∞`, which drops the
/// corresponding site.
pub fn tm_neg_log_cdf(p: &TmProcess, x: &[f64]) -> Result<f64> {
    ecf::check_point(x, p.m())?;
    Ok(p.terms()
        .map(|(l, w)| w * l.sites().map(|t| 1.0 / x[t]).fold(0.0, f64::max))
        .sum())
}

/// Bivariate case `η/(x ∨ y) + 1/(x ∧ y)` with `η = θ({s,t}) − 1`.
pub fn tm_bivariate_neg_log_cdf(eta: f64, x: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Parameter(format!("eta = {eta} must lie in [0, 1]")));
    }
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::Domain(format!("arguments must be positive, got ({x}, {y})")));
    }
    Ok(eta / x.max(y) + 1.0 / x.min(y))
}

/// `ℓ*(x) = Σ_L τ_L max_{t ∈ L} x_t` on `[0, ∞)^M ∖ {0}`.
pub fn stable_tail_dependence(p: &TmProcess, x: &[f64]) -> Result<f64> {
    check_direction(x, p.m())?;
    Ok(p.terms()
        .map(|(l, w)| w * l.sites().map(|t| x[t]).fold(0.0, f64::max))
        .sum())
}

pub(crate) fn check_direction(x: &[f64], m: usize) -> Result<()> {
    if x.len() != m {
        return Err(Error::Domain(format!("point has {} coordinates, expected {m}", x.len())));
    }
    if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain("coordinates must be finite and nonnegative".into()));
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::Domain("the zero vector has no direction".into()));
    }
    Ok(())
}

/// `n` replicates of an `m`-variate vector, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub labels: Vec<String>,
    pub seed: u64,
    values: Vec<f64>,
}

impl SampleBatch {
    pub fn new(labels: Vec<String>, seed: u64, values: Vec<f64>) -> Result<Self> {
        let m = labels.len();
        if m == 0 || values.len() % m != 0 || values.is_empty() {
            return Err(Error::Format(format!(
                "{} values do not form rows of {m} sites",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Format(format!(
                "samples must be positive and finite, found {v}"
            )));
        }
        Ok(SampleBatch {
            labels,
            seed,
            values,
        })
    }

    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.m()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let m = self.m();
        &self.values[k * m..(k + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.m())
    }

    pub fn column(&self, site: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[site])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn simulate_atoms(labels: Vec<String>, atoms: &[Vec<(usize, f64)>], n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::Parameter("sample size must be at least 1".into()));
    }
    let m = labels.len();
    let blocks = rng::map_blocks(n, seed, rng::DOMAIN_SIMULATE, |r, range| {
        let mut out = vec![0.0; range.len() * m];
        for row in out.chunks_exact_mut(m) {
            for atom in atoms {
                let z = rng::unit_frechet(r);
                for &(t, w) in atom {
                    row[t] = f64::max(row[t], w * z);
                }
            }
        }
        out
    });
    SampleBatch::new(labels, seed, blocks.concat())
}

/// Exact simulation of the TM vector; deterministic in `seed` and
/// independent of the number of worker threads.
pub fn simulate_tm(p: &TmProcess, n: usize, seed: u64) -> Result<SampleBatch> {
    simulate_atoms(p.tau.ground().labels().to_vec(), &p.simulation_atoms(), n, seed)
}

/// Exact simulation of `X_i = max_j a_{ij} Z_j`.
pub fn simulate_maxlinear(sm: &DiscreteSpectralMeasure, n: usize, seed: u64) -> Result<SampleBatch> {
    let atoms: Vec<Vec<(usize, f64)>> = (0..sm.q())
        .map(|j| {
            (0..sm.m())
                .filter(|&i| sm.coef(i, j) > 0.0)
                .map(|i| (i, sm.coef(i, j)))
                .collect()
        })
        .collect();
    simulate_atoms(sm.ground().labels().to_vec(), &atoms, n, seed)
}

/// An estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// `|value − target| ≤ k · se`.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

/// `θ̂(A) = n / Σ_k 1/max_{t ∈ A} X_t^{(k)}`, standard error `θ̂/√n`.
///
/// Under simple max-stability `1/max_{t∈A} X_t` is exponential with rate
/// `θ(A)`.
pub fn empirical_ecf(batch: &SampleBatch, a: SubsetMask) -> Result<Estimate> {
    if a.is_empty() {
        return Err(Error::EmptySubset);
    }
    if !a.is_subset_of(SubsetMask::full(batch.m())) {
        return Err(Error::MaskOutOfRange {
            mask: a.bits(),
            m: batch.m(),
        });
    }
    let n = batch.n();
    if n < 2 {
        return Err(Error::Parameter("at least two replicates are required".into()));
    }
    let s: f64 = batch
        .rows()
        .map(|r| 1.0 / a.sites().map(|t| r[t]).fold(0.0, f64::max))
        .sum();
    Ok(rate_estimate(n, s))
}

fn rate_estimate(n: usize, sum_inv_max: f64) -> Estimate {
    let value = n as f64 / sum_inv_max;
    Estimate {
        value,
        se: value / (n as f64).sqrt(),
    }
}

/// [`empirical_ecf`] for every nonempty subset with at most `max_size`
/// sites, ascending by mask.
pub fn empirical_ecf_all(batch: &SampleBatch, max_size: usize) -> Result<Vec<(SubsetMask, Estimate)>> {
    let (m, n) = (batch.m(), batch.n());
    if n < 2 {
        return Err(Error::Parameter("at least two replicates are required".into()));
    }
    if m > crate::subset::MAX_SITES {
        return Err(Error::GroundSetSize(m));
    }
    let size = 1usize << m;
    // Per-block partial sums of min_{t∈A} 1/X_t, merged in block order.
    let partial = rng::map_ranges(n, |range| {
        let mut acc = vec![0.0; size];
        let mut inv_max = vec![0.0; size];
        for k in range {
            let r = batch.row(k);
            inv_max[0] = f64::INFINITY;
            for s in 1..size {
                let t = s.trailing_zeros() as usize;
                inv_max[s] = f64::min(inv_max[s & (s - 1)], 1.0 / r[t]);
                acc[s] += inv_max[s];
            }
        }
        acc
    });
    let mut sums = vec![0.0; size];
    for block in &partial {
        for (s, v) in sums.iter_mut().zip(block) {
            *s += v;
        }
    }
    Ok(masks(m, true)
        .filter(|a| a.len() <= max_size)
        .map(|a| (a, rate_estimate(n, sums[a.index()])))
        .collect())
}

/// Kolmogorov–Smirnov distance between `1/X_site` and the standard
/// exponential distribution.
pub fn ks_exponential(batch: &SampleBatch, site: usize) -> f64 {
    let mut y: Vec<f64> = batch.column(site).map(|x| 1.0 / x).collect();
    y.sort_by(f64::total_cmp);
    let n = y.len() as f64;
    y.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = 1.0 - (-v).exp();
            f64::max(f - i as f64 / n, (i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Empirical `P(|X_s − X_t| > eps)` with its binomial standard error.
pub fn exceedance_probability(batch: &SampleBatch, s: usize, t: usize, eps: f64) -> Estimate {
    let n = batch.n() as f64;
    let hits = batch.rows().filter(|r| (r[s] - r[t]).abs() > eps).count() as f64;
    let p = hits / n;
    Estimate {
        value: p,
        se: (p * (1.0 - p) / n).sqrt(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuityBound {
    /// `2(1 − exp(−η/ε))`.
    pub tight: f64,
    /// `2η/ε`.
    pub linear: f64,
}

/// Upper bounds on `P(|X*_s − X*_t| > ε)` in terms of `η = θ({s,t}) − 1`.
pub fn continuity_bound(eta_st: f64, eps: f64) -> Result<ContinuityBound> {
    if !(eta_st >= 0.0) || !(eps > 0.0) {
        return Err(Error::Parameter(format!(
            "need eta >= 0 and eps > 0, got eta = {eta_st}, eps = {eps}"
        )));
    }
    Ok(ContinuityBound {
        tight: -2.0 * (-eta_st / eps).exp_m1(),
        linear: 2.0 * eta_st / eps,
    })
}
