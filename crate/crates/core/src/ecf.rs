//! Extremal coefficient functions and the τ-coefficients of the
//! Tawn–Molchanov max-linear model.
//!
//! On a finite ground set `M` an ECF `θ` is a valid extremal coefficient
//! function exactly when `θ(∅) = 0`, `θ({t}) = 1` and every coefficient
//!
//! ```text
//! τ_L = Σ_{I ⊂ L} (−1)^{|I|+1} θ((M∖L) ∪ I),    ∅ ≠ L ⊂ M
//! ```
//!
//! is nonnegative. Conversely `θ(A) = Σ_{L ∩ A ≠ ∅} τ_L`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;
use crate::subset::{masks, GroundSet, SetFunction, SubsetMask};

/// Absolute tolerance on τ-nonnegativity and on normalization.
pub const TOL_VALIDATE: f64 = 1e-9;

/// An extremal coefficient function tabulated on every subset of the ground
/// set. The table itself may be invalid; see [`validate_ecf`].
#[derive(Clone, Debug, PartialEq)]
pub struct EcfTable {
    ground: GroundSet,
    theta: SetFunction,
}

impl EcfTable {
    pub fn new(ground: GroundSet, theta: SetFunction) -> Result<Self> {
        if theta.m() != ground.size() {
            return Err(Error::TableSize {
                expected: ground.subset_count(),
                got: theta.values().len(),
            });
        }
        Ok(EcfTable { ground, theta })
    }

    pub fn from_fn(ground: GroundSet, f: impl FnMut(SubsetMask) -> f64) -> Self {
        let theta = SetFunction::from_fn(ground.size(), f);
        EcfTable { ground, theta }
    }

    pub fn ground(&self) -> &GroundSet {
        &self.ground
    }

    pub fn theta(&self) -> &SetFunction {
        &self.theta
    }

    pub fn m(&self) -> usize {
        self.ground.size()
    }

    #[inline]
    pub fn get(&self, mask: SubsetMask) -> f64 {
        self.theta[mask]
    }

    /// `θ(∅) = 0` and `θ({t}) = 1` within `tol`; reports the first offender.
    pub fn check_normalization(&self, tol: f64) -> Result<()> {
        let empty = self.theta[SubsetMask::EMPTY];
        if empty.abs() > tol || !empty.is_finite() {
            return Err(Error::Normalization {
                subset: SubsetMask::EMPTY,
                expected: 0.0,
                found: empty,
            });
        }
        for t in 0..self.m() {
            let s = SubsetMask::singleton(t);
            let v = self.theta[s];
            if (v - 1.0).abs() > tol || !v.is_finite() {
                return Err(Error::Normalization {
                    subset: s,
                    expected: 1.0,
                    found: v,
                });
            }
        }
        Ok(())
    }

    /// The ECF of the sub-vector indexed by `sites`.
    pub fn restrict(&self, sites: SubsetMask) -> Result<EcfTable> {
        let ground = self.ground.restrict(sites)?;
        let theta = SetFunction::from_fn(ground.size(), |k| self.theta[k.expand(sites)]);
        Ok(EcfTable { ground, theta })
    }
}

/// τ-coefficients `τ_L`, `∅ ≠ L ⊂ M`; the entry at `∅` is kept at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct TauTable {
    ground: GroundSet,
    tau: SetFunction,
}

impl TauTable {
    /// Checks nonnegativity and unit row sums within [`TOL_VALIDATE`].
    pub fn new(ground: GroundSet, tau: SetFunction) -> Result<Self> {
        let t = Self::new_unchecked(ground, tau)?;
        t.check_invariants(TOL_VALIDATE)?;
        Ok(t)
    }

    /// Only the shape is checked; negative entries are kept so that callers
    /// can report them.
    pub fn new_unchecked(ground: GroundSet, mut tau: SetFunction) -> Result<Self> {
        if tau.m() != ground.size() {
            return Err(Error::TableSize {
                expected: ground.subset_count(),
                got: tau.values().len(),
            });
        }
        tau[SubsetMask::EMPTY] = 0.0;
        Ok(TauTable { ground, tau })
    }

    pub fn ground(&self) -> &GroundSet {
        &self.ground
    }

    pub fn tau(&self) -> &SetFunction {
        &self.tau
    }

    pub fn m(&self) -> usize {
        self.ground.size()
    }

    #[inline]
    pub fn get(&self, mask: SubsetMask) -> f64 {
        self.tau[mask]
    }

    /// `Σ_{L ∋ t} τ_L` for each site `t`.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.m()];
        for l in masks(self.m(), true) {
            for t in l.sites() {
                sums[t] += self.tau[l];
            }
        }
        sums
    }

    /// Smallest coefficient and where it occurs.
    pub fn min_entry(&self) -> (SubsetMask, f64) {
        masks(self.m(), true)
            .map(|l| (l, self.tau[l]))
            .fold((SubsetMask(1), f64::INFINITY), |best, cur| {
                if cur.1 < best.1 {
                    cur
                } else {
                    best
                }
            })
    }

    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let (l, v) = self.min_entry();
        if !(v >= -tol) {
            return Err(Error::InvalidTau(format!(
                "coefficient at {} is {v:e}",
                self.ground.format_subset(l)
            )));
        }
        for (t, s) in self.row_sums().into_iter().enumerate() {
            if !((s - 1.0).abs() <= tol) {
                return Err(Error::InvalidTau(format!(
                    "coefficients containing site {} sum to {s}",
                    self.ground.labels()[t]
                )));
            }
        }
        Ok(())
    }

    /// Nonzero atoms `(L, τ_L)` with `τ_L > cutoff`, ascending in `L`.
    pub fn atoms(&self, cutoff: f64) -> Vec<(SubsetMask, f64)> {
        masks(self.m(), true)
            .map(|l| (l, self.tau[l]))
            .filter(|&(_, v)| v > cutoff)
            .collect()
    }
}

/// Coefficient matrix `a_{ij} ≥ 0` of a max-linear model
/// `X_i = max_j a_{ij} Z_j`, rows indexed by sites, unit row sums.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSpectralMeasure {
    ground: GroundSet,
    rows: Vec<Vec<f64>>,
}

impl DiscreteSpectralMeasure {
    /// Requires nonnegative finite entries and row sums within
    /// [`TOL_VALIDATE`] of one. All-zero columns are dropped.
    pub fn new(ground: GroundSet, rows: Vec<Vec<f64>>) -> Result<Self> {
        let sm = Self::checked_shape(ground, rows)?;
        for (i, row) in sm.rows.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if !((s - 1.0).abs() <= TOL_VALIDATE) {
                return Err(Error::InvalidSpectralMeasure(format!(
                    "row {} sums to {s}",
                    sm.ground.labels()[i]
                )));
            }
        }
        Ok(sm)
    }

    /// Rescales every row to unit sum.
    pub fn from_unnormalized(ground: GroundSet, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut sm = Self::checked_shape(ground, rows)?;
        for (i, row) in sm.rows.iter_mut().enumerate() {
            let s: f64 = row.iter().sum();
            if !(s > 0.0) {
                return Err(Error::InvalidSpectralMeasure(format!(
                    "row {} has no positive entry",
                    sm.ground.labels()[i]
                )));
            }
            row.iter_mut().for_each(|a| *a /= s);
        }
        Ok(sm)
    }

    fn checked_shape(ground: GroundSet, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != ground.size() {
            return Err(Error::InvalidSpectralMeasure(format!(
                "{} rows for {} sites",
                rows.len(),
                ground.size()
            )));
        }
        let q = rows[0].len();
        if rows.iter().any(|r| r.len() != q) {
            return Err(Error::InvalidSpectralMeasure("ragged coefficient matrix".into()));
        }
        if rows.iter().flatten().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidSpectralMeasure(
                "entries must be finite and nonnegative".into(),
            ));
        }
        let keep: Vec<usize> = (0..q).filter(|&j| rows.iter().any(|r| r[j] > 0.0)).collect();
        if keep.is_empty() {
            return Err(Error::InvalidSpectralMeasure("no nonzero column".into()));
        }
        let rows = rows
            .into_iter()
            .map(|r| keep.iter().map(|&j| r[j]).collect())
            .collect();
        Ok(DiscreteSpectralMeasure { ground, rows })
    }

    pub fn ground(&self) -> &GroundSet {
        &self.ground
    }

    pub fn m(&self) -> usize {
        self.ground.size()
    }

    /// Number of atoms (columns).
    pub fn q(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    #[inline]
    pub fn coef(&self, site: usize, atom: usize) -> f64 {
        self.rows[site][atom]
    }

    /// Column `j` as a vector over sites.
    pub fn column(&self, atom: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[atom]).collect()
    }

    /// Exact `−log P(X ≤ x) = Σ_j max_i a_{ij} / x_i`.
    pub fn neg_log_cdf(&self, x: &[f64]) -> Result<f64> {
        check_point(x, self.m())?;
        Ok((0..self.q())
            .map(|j| {
                (0..self.m())
                    .map(|i| self.rows[i][j] / x[i])
                    .fold(0.0, f64::max)
            })
            .sum())
    }
}

pub(crate) fn check_point(x: &[f64], m: usize) -> Result<()> {
    if x.len() != m {
        return Err(Error::Domain(format!("point has {} coordinates, expected {m}", x.len())));
    }
    if let Some(v) = x.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Domain(format!("coordinates must be positive, found {v}")));
    }
    Ok(())
}

/// Subset-lattice Möbius transform of `g ↦ θ(M∖·)`, negated: returns the
/// τ-coefficients without any validity check.
fn tau_values(theta: &SetFunction) -> SetFunction {
    let m = theta.m();
    let full = SubsetMask::full(m);
    let mut h = SetFunction::from_fn(m, |s| theta[full.difference(s)]);
    let v = h.values_mut();
    for i in 0..m {
        let bit = 1usize << i;
        for s in 0..v.len() {
            if s & bit != 0 {
                v[s] -= v[s ^ bit];
            }
        }
    }
    let mut tau = h.map(|_, x| -x);
    tau[SubsetMask::EMPTY] = 0.0;
    tau
}

/// τ-coefficients of `θ` by a fast subset Möbius transform, `O(m 2^m)`.
///
/// Validity is not required: negative coefficients are returned as they are.
/// Only normalization is a precondition.
pub fn compute_tau(ecf: &EcfTable) -> Result<TauTable> {
    ecf.check_normalization(TOL_VALIDATE)?;
    TauTable::new_unchecked(ecf.ground.clone(), tau_values(&ecf.theta))
}

/// τ-coefficients by the literal alternating sum, one pairwise-summed
/// sum per coefficient. `O(3^m)`.
pub fn compute_tau_direct(ecf: &EcfTable) -> Result<TauTable> {
    ecf.check_normalization(TOL_VALIDATE)?;
    let m = ecf.m();
    let full = SubsetMask::full(m);
    let mut terms = Vec::with_capacity(1 << m);
    let tau = SetFunction::from_fn(m, |l| {
        if l.is_empty() {
            return 0.0;
        }
        let rest = full.difference(l);
        terms.clear();
        terms.extend(l.subsets().map(|i| {
            let sign = if i.len() % 2 == 1 { 1.0 } else { -1.0 };
            sign * ecf.theta[rest | i]
        }));
        pairwise_sum(&terms)
    });
    TauTable::new_unchecked(ecf.ground.clone(), tau)
}

pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    /// `θ(∅) ≠ 0`.
    EmptyNotZero,
    /// `θ({t}) ≠ 1`.
    SingletonNotOne,
    /// `θ(A) < 1` for nonempty `A`.
    BelowOne,
    /// `θ(A) > |A|`.
    ExceedsCardinality,
    /// `θ(A) > θ(A ∪ {t})`.
    NotMonotone,
    /// `τ_L < 0`.
    NegativeTau,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub subset: SubsetMask,
    /// The offending value (θ or τ).
    pub value: f64,
    /// The bound it violates.
    pub bound: f64,
}

impl Diagnostic {
    pub fn magnitude(&self) -> f64 {
        (self.value - self.bound).abs()
    }

    pub fn message(&self, ground: &GroundSet) -> String {
        let a = ground.format_subset(self.subset);
        match self.kind {
            DiagnosticKind::EmptyNotZero => format!("θ(∅) = {} is not 0", self.value),
            DiagnosticKind::SingletonNotOne => format!("θ({a}) = {} is not 1", self.value),
            DiagnosticKind::BelowOne => format!("θ({a}) = {} is below 1", self.value),
            DiagnosticKind::ExceedsCardinality => {
                format!("θ({a}) = {} exceeds |A| = {}", self.value, self.bound)
            }
            DiagnosticKind::NotMonotone => {
                format!("θ({a}) = {} exceeds the value {} of a superset", self.value, self.bound)
            }
            DiagnosticKind::NegativeTau => format!("τ({a}) = {} is negative", self.value),
        }
    }
}

/// Outcome of [`validate_ecf`].
#[derive(Clone, Debug, PartialEq)]
pub struct Validation {
    pub passed: bool,
    pub tol: f64,
    /// Smallest τ-coefficient (computed even when normalization fails).
    pub min_tau: f64,
    pub min_tau_subset: SubsetMask,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn validate_ecf(ecf: &EcfTable) -> Validation {
    validate_ecf_with_tol(ecf, TOL_VALIDATE)
}

/// Passes iff `θ(∅) = 0`, `θ({t}) = 1` and `min_L τ_L ≥ −tol`.
///
/// Diagnostics additionally flag range and monotonicity violations; on
/// normalized tables those imply a negative τ, so they never change the
/// verdict.
pub fn validate_ecf_with_tol(ecf: &EcfTable, tol: f64) -> Validation {
    let m = ecf.m();
    let th = &ecf.theta;
    let mut diagnostics = Vec::new();
    let mut push = |kind, subset, value, bound| {
        diagnostics.push(Diagnostic {
            kind,
            subset,
            value,
            bound,
        })
    };

    let mut normalized = true;
    if !(th[SubsetMask::EMPTY].abs() <= tol) {
        normalized = false;
        push(DiagnosticKind::EmptyNotZero, SubsetMask::EMPTY, th[SubsetMask::EMPTY], 0.0);
    }
    for t in 0..m {
        let s = SubsetMask::singleton(t);
        if !((th[s] - 1.0).abs() <= tol) {
            normalized = false;
            push(DiagnosticKind::SingletonNotOne, s, th[s], 1.0);
        }
    }
    for a in masks(m, true).filter(|a| a.len() > 1) {
        let v = th[a];
        if v < 1.0 - tol {
            push(DiagnosticKind::BelowOne, a, v, 1.0);
        }
        if v > a.len() as f64 + tol {
            push(DiagnosticKind::ExceedsCardinality, a, v, a.len() as f64);
        }
    }
    for a in masks(m, true) {
        let sup = (0..m)
            .filter(|&t| !a.contains(t))
            .map(|t| th[a | SubsetMask::singleton(t)])
            .fold(f64::INFINITY, f64::min);
        if th[a] > sup + tol {
            push(DiagnosticKind::NotMonotone, a, th[a], sup);
        }
    }

    let tau = tau_values(th);
    let mut min_tau = f64::INFINITY;
    let mut min_tau_subset = SubsetMask(1);
    for l in masks(m, true) {
        let v = tau[l];
        if !(v >= -tol) {
            push(DiagnosticKind::NegativeTau, l, v, 0.0);
        }
        if v < min_tau || v.is_nan() {
            min_tau = v;
            min_tau_subset = l;
        }
    }

    Validation {
        passed: normalized && min_tau >= -tol,
        tol,
        min_tau,
        min_tau_subset,
        diagnostics,
    }
}

/// Rejects an invalid table with its joined diagnostic messages.
pub fn ensure_valid(ecf: &EcfTable) -> Result<()> {
    let v = validate_ecf(ecf);
    if v.passed {
        return Ok(());
    }
    let msgs: Vec<String> = v.diagnostics.iter().map(|d| d.message(ecf.ground())).collect();
    Err(Error::InvalidEcf(msgs.join("; ")))
}

/// `θ(A) = Σ_{L ∩ A ≠ ∅} τ_L`; requires a valid τ table.
pub fn ecf_from_tau(tau: &TauTable) -> Result<EcfTable> {
    tau.check_invariants(TOL_VALIDATE)?;
    Ok(ecf_from_tau_unchecked(tau))
}

/// `θ(A) = T − z(M∖A)` with `z` the subset-sum (zeta) transform of τ and
/// `T = z(M)`.
pub(crate) fn ecf_from_tau_unchecked(tau: &TauTable) -> EcfTable {
    let m = tau.m();
    let full = SubsetMask::full(m);
    let mut z = tau.tau.clone();
    let v = z.values_mut();
    for i in 0..m {
        let bit = 1usize << i;
        for s in 0..v.len() {
            if s & bit != 0 {
                v[s] += v[s ^ bit];
            }
        }
    }
    let total = z[full];
    let theta = SetFunction::from_fn(m, |a| {
        if a.is_empty() {
            0.0
        } else {
            total - z[full.difference(a)]
        }
    });
    EcfTable {
        ground: tau.ground.clone(),
        theta,
    }
}

/// Coefficients of the sub-vector on `sites`:
/// `τ^A_K = Σ_{J ⊂ M∖A} τ^M_{K ∪ J}`.
pub fn marginalize_tau(tau: &TauTable, sites: SubsetMask) -> Result<TauTable> {
    if sites.is_empty() {
        return Err(Error::EmptySubset);
    }
    let ground = tau.ground.restrict(sites)?;
    let mut out = SetFunction::zeros(ground.size());
    for l in masks(tau.m(), true) {
        let k = l.intersection(sites);
        if !k.is_empty() {
            out[k.compress(sites)] += tau.tau[l];
        }
    }
    TauTable::new_unchecked(ground, out)
}

/// `θ(A) = Σ_j max_{i ∈ A} a_{ij}`.
pub fn ecf_from_spectral_measure(sm: &DiscreteSpectralMeasure) -> EcfTable {
    let m = sm.m();
    let n = 1usize << m;
    let mut theta = vec![0.0; n];
    let mut colmax = vec![0.0; n];
    for j in 0..sm.q() {
        for s in 1..n {
            let t = s.trailing_zeros() as usize;
            colmax[s] = f64::max(colmax[s & (s - 1)], sm.rows[t][j]);
            theta[s] += colmax[s];
        }
    }
    EcfTable {
        ground: sm.ground.clone(),
        theta: SetFunction::new(m, theta).expect("table size matches ground set"),
    }
}

/// `m × q` coefficients drawn i.i.d. uniform on `(0, 1)` with rows rescaled
/// to unit sum. Deterministic in `(m, q, seed)`.
pub fn random_spectral_measure(m: usize, q: usize, seed: u64) -> Result<DiscreteSpectralMeasure> {
    if q == 0 {
        return Err(Error::Parameter("at least one atom is required".into()));
    }
    let ground = GroundSet::indexed(m)?;
    let mut r = rng::stream(seed, rng::DOMAIN_RANDOM_ECF, ((m as u64) << 32) | q as u64);
    let rows = (0..m)
        .map(|_| (0..q).map(|_| rng::open_unit(&mut r)).collect())
        .collect();
    DiscreteSpectralMeasure::from_unnormalized(ground, rows)
}

/// The ECF of [`random_spectral_measure`]`(m, q, seed)`; valid by construction.
pub fn random_valid_ecf(m: usize, q: usize, seed: u64) -> Result<EcfTable> {
    Ok(ecf_from_spectral_measure(&random_spectral_measure(m, q, seed)?))
}
