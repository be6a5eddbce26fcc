//! Subsets of a finite ground set as bitmasks.
//!
//! The finite subsets of `M` form an idempotent semigroup under union with
//! the empty set as neutral element. Functions on that semigroup are stored
//! densely, one value per mask, so every table has exactly `2^m` entries.

use std::fmt;
use std::ops::{BitAnd, BitOr, Index, IndexMut};

use crate::error::{Error, Result};

/// Hard cap on the number of sites; tables have `2^m` entries.
pub const MAX_SITES: usize = 20;

/// A subset of the ground set; bit `i` marks membership of site `i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubsetMask(pub u32);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    pub fn singleton(site: usize) -> Self {
        SubsetMask(1 << site)
    }

    /// The full ground set `{0, .., m-1}`.
    pub fn full(m: usize) -> Self {
        SubsetMask(((1u64 << m) - 1) as u32)
    }

    pub fn from_sites<I: IntoIterator<Item = usize>>(sites: I) -> Self {
        SubsetMask(sites.into_iter().fold(0, |acc, s| acc | (1 << s)))
    }

    #[inline]
    pub fn bits(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn contains(self, site: usize) -> bool {
        self.0 >> site & 1 == 1
    }

    #[inline]
    pub fn union(self, other: Self) -> Self {
        SubsetMask(self.0 | other.0)
    }

    #[inline]
    pub fn intersection(self, other: Self) -> Self {
        SubsetMask(self.0 & other.0)
    }

    #[inline]
    pub fn difference(self, other: Self) -> Self {
        SubsetMask(self.0 & !other.0)
    }

    #[inline]
    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    #[inline]
    pub fn intersects(self, other: Self) -> bool {
        self.0 & other.0 != 0
    }

    /// Sites in ascending order.
    pub fn sites(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let t = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(t)
            }
        })
    }

    /// All subsets of `self`, including `∅` and `self`, in ascending bit order.
    pub fn subsets(self) -> impl Iterator<Item = SubsetMask> {
        let full = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full {
                None
            } else {
                Some((cur.wrapping_sub(full)) & full)
            };
            Some(SubsetMask(cur))
        })
    }

    /// Re-index the members of `self` lying in `within` to consecutive
    /// positions, i.e. the mask of `self ∩ within` on the sub-ground-set.
    pub fn compress(self, within: SubsetMask) -> SubsetMask {
        let mut out = 0u32;
        for (k, t) in within.sites().enumerate() {
            if self.contains(t) {
                out |= 1 << k;
            }
        }
        SubsetMask(out)
    }

    /// Inverse of [`SubsetMask::compress`].
    pub fn expand(self, within: SubsetMask) -> SubsetMask {
        let mut out = 0u32;
        for (k, t) in within.sites().enumerate() {
            if self.contains(k) {
                out |= 1 << t;
            }
        }
        SubsetMask(out)
    }
}

impl BitOr for SubsetMask {
    type Output = SubsetMask;
    fn bitor(self, rhs: Self) -> Self {
        self.union(rhs)
    }
}

impl BitAnd for SubsetMask {
    type Output = SubsetMask;
    fn bitand(self, rhs: Self) -> Self {
        self.intersection(rhs)
    }
}

impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, t) in self.sites().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str("}")
    }
}

/// The finite window `M` of the index set: labelled sites, optionally with
/// spatial coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundSet {
    labels: Vec<String>,
    coords: Option<Vec<Vec<f64>>>,
}

impl GroundSet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        let m = labels.len();
        if m == 0 || m > MAX_SITES {
            return Err(Error::GroundSetSize(m));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.trim().is_empty() || l.trim() != l || l.contains([',', '[', ']']) {
                return Err(Error::InvalidLabel(l.clone()));
            }
            if labels[..i].contains(l) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        Ok(GroundSet {
            labels,
            coords: None,
        })
    }

    /// Sites labelled `"0"`, `"1"`, ...
    pub fn indexed(m: usize) -> Result<Self> {
        Self::new((0..m).map(|i| i.to_string()).collect())
    }

    pub fn with_coords(mut self, coords: Vec<Vec<f64>>) -> Result<Self> {
        if coords.len() != self.size() {
            return Err(Error::CoordCount {
                expected: self.size(),
                got: coords.len(),
            });
        }
        let d = coords[0].len();
        if d == 0 || coords.iter().any(|c| c.len() != d) {
            return Err(Error::Format(
                "all sites need the same positive number of coordinates".into(),
            ));
        }
        if coords.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Format("coordinates must be finite".into()));
        }
        self.coords = Some(coords);
        Ok(self)
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn full_mask(&self) -> SubsetMask {
        SubsetMask::full(self.size())
    }

    /// `2^m`.
    pub fn subset_count(&self) -> usize {
        1 << self.size()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn check_mask(&self, mask: SubsetMask) -> Result<()> {
        if mask.is_subset_of(self.full_mask()) {
            Ok(())
        } else {
            Err(Error::MaskOutOfRange {
                mask: mask.bits(),
                m: self.size(),
            })
        }
    }

    /// The sub-ground-set on the sites of `mask`, in the original order.
    pub fn restrict(&self, mask: SubsetMask) -> Result<GroundSet> {
        self.check_mask(mask)?;
        if mask.is_empty() {
            return Err(Error::EmptySubset);
        }
        Ok(GroundSet {
            labels: mask.sites().map(|t| self.labels[t].clone()).collect(),
            coords: self
                .coords
                .as_ref()
                .map(|c| mask.sites().map(|t| c[t].clone()).collect()),
        })
    }

    /// `"[a,b]"` – member labels in ground-set order; `"[]"` for `∅`.
    pub fn format_subset(&self, mask: SubsetMask) -> String {
        let mut s = String::from("[");
        for (k, t) in mask.sites().enumerate() {
            if k > 0 {
                s.push(',');
            }
            s.push_str(&self.labels[t]);
        }
        s.push(']');
        s
    }

    pub fn parse_subset(&self, key: &str) -> Result<SubsetMask> {
        let inner = key
            .trim()
            .strip_prefix('[')
            .and_then(|k| k.strip_suffix(']'))
            .ok_or_else(|| Error::Format(format!("subset key {key:?} is not of the form [a,b,..]")))?;
        let mut mask = SubsetMask::EMPTY;
        if inner.trim().is_empty() {
            return Ok(mask);
        }
        for part in inner.split(',') {
            let label = part.trim().trim_matches('"');
            let t = self
                .index_of(label)
                .ok_or_else(|| Error::Format(format!("unknown site label {label:?} in {key:?}")))?;
            if mask.contains(t) {
                return Err(Error::Format(format!("repeated label {label:?} in {key:?}")));
            }
            mask = mask | SubsetMask::singleton(t);
        }
        Ok(mask)
    }
}

/// A total real function on all `2^m` subsets.
#[derive(Clone, Debug, PartialEq)]
pub struct SetFunction {
    m: usize,
    values: Vec<f64>,
}

impl SetFunction {
    pub fn new(m: usize, values: Vec<f64>) -> Result<Self> {
        if m > MAX_SITES {
            return Err(Error::GroundSetSize(m));
        }
        if values.len() != 1 << m {
            return Err(Error::TableSize {
                expected: 1 << m,
                got: values.len(),
            });
        }
        Ok(SetFunction { m, values })
    }

    pub fn zeros(m: usize) -> Self {
        assert!(m <= MAX_SITES, "ground set too large");
        SetFunction {
            m,
            values: vec![0.0; 1 << m],
        }
    }

    pub fn from_fn(m: usize, mut f: impl FnMut(SubsetMask) -> f64) -> Self {
        assert!(m <= MAX_SITES, "ground set too large");
        SetFunction {
            m,
            values: (0..1u32 << m).map(|b| f(SubsetMask(b))).collect(),
        }
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, mask: SubsetMask) -> f64 {
        self.values[mask.index()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, mut f: impl FnMut(SubsetMask, f64) -> f64) -> SetFunction {
        SetFunction {
            m: self.m,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(b, &v)| f(SubsetMask(b as u32), v))
                .collect(),
        }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &SetFunction) -> f64 {
        assert_eq!(self.m, other.m);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<SubsetMask> for SetFunction {
    type Output = f64;
    fn index(&self, mask: SubsetMask) -> &f64 {
        &self.values[mask.index()]
    }
}

impl IndexMut<SubsetMask> for SetFunction {
    fn index_mut(&mut self, mask: SubsetMask) -> &mut f64 {
        &mut self.values[mask.index()]
    }
}

/// All `2^m` masks (or the `2^m - 1` nonempty ones) in ascending bit order.
pub fn enumerate_subsets(g: &GroundSet, nonempty_only: bool) -> impl Iterator<Item = SubsetMask> {
    masks(g.size(), nonempty_only)
}

pub fn masks(m: usize, nonempty_only: bool) -> impl Iterator<Item = SubsetMask> {
    let start = u32::from(nonempty_only);
    (start..(1u64 << m) as u32).map(SubsetMask)
}

/// `(Δ_K f)(L) = f(L) − f(L ∪ K)`.
pub fn delta(f: &SetFunction, k: SubsetMask) -> SetFunction {
    f.map(|l, v| v - f[l | k])
}

/// `(Δ_{K_1} ⋯ Δ_{K_n} f)(K)`, which equals
/// `Σ_{I ⊂ {1..n}} (−1)^{|I|} f(K ∪ ⋃_{i∈I} K_i)`.
///
/// Evaluated by peeling one operator at a time, so `Δ_K Δ_K = Δ_K` holds
/// exactly in floating point.
pub fn nested_delta(f: &SetFunction, ks: &[SubsetMask], k: SubsetMask) -> f64 {
    match ks.split_first() {
        None => f[k],
        Some((&first, rest)) => {
            if first.is_subset_of(k) {
                0.0
            } else {
                nested_delta(f, rest, k) - nested_delta(f, rest, k | first)
            }
        }
    }
}

/// A tuple `(K_1..K_n; K)` whose nested difference is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct CaWitness {
    pub generators: Vec<SubsetMask>,
    pub base: SubsetMask,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaReport {
    pub depth: usize,
    pub evaluated: usize,
    pub witness: Option<CaWitness>,
}

impl CaReport {
    pub fn passed(&self) -> bool {
        self.witness.is_none()
    }
}

/// Direct complete-alternation check with singleton generators.
///
/// Visits generator sets by size, then by mask, then base sets `K` by mask,
/// and stops at the first nested difference exceeding `tol`. Base sets that
/// meet a generator are skipped: their difference is exactly zero.
pub fn check_completely_alternating_direct(
    f: &SetFunction,
    max_depth: usize,
    tol: f64,
) -> Result<CaReport> {
    let m = f.m();
    if max_depth == 0 || max_depth > m {
        return Err(Error::Parameter(format!(
            "depth {max_depth} must lie in 1..={m}"
        )));
    }
    let full = SubsetMask::full(m);
    let mut evaluated = 0;
    for depth in 1..=max_depth {
        for gens in masks(m, true).filter(|g| g.len() == depth) {
            let singles: Vec<SubsetMask> = gens.sites().map(SubsetMask::singleton).collect();
            for base in full.difference(gens).subsets() {
                evaluated += 1;
                let value = nested_delta(f, &singles, base);
                if value > tol {
                    return Ok(CaReport {
                        depth: max_depth,
                        evaluated,
                        witness: Some(CaWitness {
                            generators: singles,
                            base,
                            value,
                        }),
                    });
                }
            }
        }
    }
    Ok(CaReport {
        depth: max_depth,
        evaluated,
        witness: None,
    })
}
