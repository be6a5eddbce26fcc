//! New ECFs from old: convex combinations and Bernstein-function
//! transforms, plus the triangle inequalities they imply.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ecf::{ensure_valid, EcfTable, TOL_VALIDATE};
use crate::error::{Error, Result};
use crate::subset::{SetFunction, SubsetMask};

/// One atom `w (1 − e^{−λ r})` of a finite exponential mixture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpAtom {
    pub w: f64,
    pub lambda: f64,
}

/// Bernstein functions `g: [0, ∞) → [0, ∞)` with a completely monotone
/// derivative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BernsteinFunction {
    /// `c + b r`.
    Affine { c: f64, b: f64 },
    /// `log(1 + r)`.
    Log1p,
    /// `(1 + r)^α − 1`, `0 < α ≤ 1`.
    Power { alpha: f64 },
    /// `1 − (1 + r)^α`, `α ≤ 0`.
    NegPower { alpha: f64 },
    /// `c + b r + Σ w_k (1 − e^{−λ_k r})`.
    ExpMixture { c: f64, b: f64, atoms: Vec<ExpAtom> },
}

impl BernsteinFunction {
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        match self {
            BernsteinFunction::Affine { c, b } => {
                if !(*c >= 0.0 && *b >= 0.0 && c.is_finite() && b.is_finite()) {
                    return bad(format!("affine needs finite c, b >= 0, got ({c}, {b})"));
                }
            }
            BernsteinFunction::Log1p => {}
            BernsteinFunction::Power { alpha } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return bad(format!("power needs 0 < alpha <= 1, got {alpha}"));
                }
            }
            BernsteinFunction::NegPower { alpha } => {
                if !(*alpha <= 0.0 && alpha.is_finite()) {
                    return bad(format!("negpower needs finite alpha <= 0, got {alpha}"));
                }
            }
            BernsteinFunction::ExpMixture { c, b, atoms } => {
                if !(*c >= 0.0 && *b >= 0.0 && c.is_finite() && b.is_finite()) {
                    return bad(format!("mixture needs finite c, b >= 0, got ({c}, {b})"));
                }
                for a in atoms {
                    if !(a.w > 0.0 && a.lambda > 0.0 && a.w.is_finite() && a.lambda.is_finite()) {
                        return bad(format!("mixture atoms need w, lambda > 0, got ({}, {})", a.w, a.lambda));
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether `g(1) > g(0)`; for Bernstein functions this is equivalent to
    /// `g` being nonconstant.
    pub fn is_constant(&self) -> bool {
        match self {
            BernsteinFunction::Affine { b, .. } => *b == 0.0,
            BernsteinFunction::Log1p | BernsteinFunction::Power { .. } => false,
            BernsteinFunction::NegPower { alpha } => *alpha == 0.0,
            BernsteinFunction::ExpMixture { b, atoms, .. } => *b == 0.0 && atoms.is_empty(),
        }
    }

    fn eval_unchecked(&self, r: f64) -> f64 {
        match self {
            BernsteinFunction::Affine { c, b } => c + b * r,
            BernsteinFunction::Log1p => r.ln_1p(),
            BernsteinFunction::Power { alpha } => (alpha * r.ln_1p()).exp_m1(),
            BernsteinFunction::NegPower { alpha } => -(alpha * r.ln_1p()).exp_m1(),
            BernsteinFunction::ExpMixture { c, b, atoms } => {
                c + b * r + atoms.iter().map(|a| -a.w * (-a.lambda * r).exp_m1()).sum::<f64>()
            }
        }
    }
}

impl fmt::Display for BernsteinFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BernsteinFunction::Affine { c, b } => write!(f, "affine:{c},{b}"),
            BernsteinFunction::Log1p => write!(f, "log1p"),
            BernsteinFunction::Power { alpha } => write!(f, "pow:{alpha}"),
            BernsteinFunction::NegPower { alpha } => write!(f, "negpow:{alpha}"),
            BernsteinFunction::ExpMixture { c, b, atoms } => {
                let parts: Vec<String> = atoms.iter().map(|a| format!("{}:{}", a.w, a.lambda)).collect();
                write!(f, "mix:{c},{b},[{}]", parts.join(","))
            }
        }
    }
}

/// Parses the shorthand forms `log1p`, `pow:α`, `negpow:α`, `affine:c,b`
/// and `mix:c,b,[w:λ,...]`, or a JSON object.
impl FromStr for BernsteinFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("bad number {v:?} in Bernstein function {s:?}")))
        };
        let g = if s.starts_with('{') {
            serde_json::from_str(s)?
        } else if s == "log1p" {
            BernsteinFunction::Log1p
        } else if let Some(v) = s.strip_prefix("pow:") {
            BernsteinFunction::Power { alpha: num(v)? }
        } else if let Some(v) = s.strip_prefix("negpow:") {
            BernsteinFunction::NegPower { alpha: num(v)? }
        } else if let Some(v) = s.strip_prefix("affine:") {
            let (c, b) = v
                .split_once(',')
                .ok_or_else(|| Error::Format(format!("expected affine:c,b, got {s:?}")))?;
            BernsteinFunction::Affine { c: num(c)?, b: num(b)? }
        } else if let Some(v) = s.strip_prefix("mix:") {
            let malformed = || Error::Format(format!("expected mix:c,b,[w:lambda,...], got {s:?}"));
            let (head, rest) = v.split_once('[').ok_or_else(malformed)?;
            let list = rest.strip_suffix(']').ok_or_else(malformed)?;
            let mut head = head.trim().trim_end_matches(',').split(',');
            let c = num(head.next().ok_or_else(malformed)?)?;
            let b = num(head.next().ok_or_else(malformed)?)?;
            if head.next().is_some() {
                return Err(malformed());
            }
            let mut atoms = Vec::new();
            for item in list.split(',').filter(|t| !t.trim().is_empty()) {
                let (w, l) = item.split_once(':').ok_or_else(malformed)?;
                atoms.push(ExpAtom { w: num(w)?, lambda: num(l)? });
            }
            BernsteinFunction::ExpMixture { c, b, atoms }
        } else {
            return Err(Error::Format(format!("unknown Bernstein function {s:?}")));
        };
        g.check()?;
        Ok(g)
    }
}

/// `g(r)` for `r ≥ 0`.
pub fn bernstein_eval(g: &BernsteinFunction, r: f64) -> Result<f64> {
    g.check()?;
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("Bernstein functions are defined on r >= 0, got {r}")));
    }
    Ok(g.eval_unchecked(r))
}

/// `A ↦ (g(θ(A)) − g(0)) / (g(1) − g(0))`, again an ECF.
pub fn bernstein_transform_ecf(ecf: &EcfTable, g: &BernsteinFunction) -> Result<EcfTable> {
    g.check()?;
    if g.is_constant() {
        return Err(Error::Parameter(format!("{g} is constant")));
    }
    ensure_valid(ecf)?;
    let g0 = g.eval_unchecked(0.0);
    let scale = g.eval_unchecked(1.0) - g0;
    let theta = ecf.theta().map(|a, v| match a.len() {
        0 => 0.0,
        1 => 1.0,
        _ => (g.eval_unchecked(v.max(1.0)) - g0) / scale,
    });
    EcfTable::new(ecf.ground().clone(), theta)
}

/// `α θ₁ + (1 − α) θ₂`, the ECF of `αX ∨ (1 − α)Y` for independent `X`, `Y`.
pub fn convex_combine(e1: &EcfTable, e2: &EcfTable, alpha: f64) -> Result<EcfTable> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Parameter(format!("alpha = {alpha} must lie in [0, 1]")));
    }
    if e1.ground().labels() != e2.ground().labels() {
        return Err(Error::GroundSetMismatch);
    }
    ensure_valid(e1)?;
    ensure_valid(e2)?;
    let values = e1
        .theta()
        .values()
        .iter()
        .zip(e2.theta().values())
        .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
        .collect();
    EcfTable::new(e1.ground().clone(), SetFunction::new(e1.m(), values)?)
}

/// Slacks of `f(A∪B) ≤ f(C) + f(A∪B) ≤ f(A∪C) + f(C∪B)`, `f = g∘(θ − 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TriangleReport {
    /// `f(C)`.
    pub slack_first: f64,
    /// `f(A∪C) + f(C∪B) − f(C) − f(A∪B)`.
    pub slack_second: f64,
    pub min_slack: f64,
    pub passed: bool,
}

/// Evaluates both triangle inequalities for nonempty `A`, `B`, `C`.
///
/// The table is not validated, so that violations can be detected; values
/// of `θ` more than `1e−9` below 1 on nonempty sets are a domain error.
pub fn triangle_check(
    ecf: &EcfTable,
    g: &BernsteinFunction,
    a: SubsetMask,
    b: SubsetMask,
    c: SubsetMask,
) -> Result<TriangleReport> {
    g.check()?;
    for s in [a, b, c] {
        if s.is_empty() {
            return Err(Error::EmptySubset);
        }
        ecf.ground().check_mask(s)?;
    }
    let f = |s: SubsetMask| {
        let eta = ecf.get(s) - 1.0;
        bernstein_eval(g, if eta >= -TOL_VALIDATE { eta.max(0.0) } else { eta })
    };
    let fc = f(c)?;
    let slack_second = f(a | c)? + f(c | b)? - fc - f(a | b)?;
    let min_slack = fc.min(slack_second);
    Ok(TriangleReport {
        slack_first: fc,
        slack_second,
        min_slack,
        passed: min_slack >= -TOL_VALIDATE,
    })
}

/// Slack of one inequality; `passed` iff `slack ≥ −1e−9`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InequalityResult {
    pub slack: f64,
    pub passed: bool,
}

impl InequalityResult {
    fn new(slack: f64) -> Self {
        InequalityResult {
            slack,
            passed: slack >= -TOL_VALIDATE,
        }
    }
}

/// The bivariate inequalities for sites `r`, `s`, `t`:
/// `θ_st ≤ θ_sr θ_rt`, and `θ_st^α ≤ θ_sr^α + θ_rt^α − 1` (`0 < α ≤ 1`)
/// or `θ_st^α ≥ θ_sr^α + θ_rt^α − 1` (`α ≤ 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CooleyReport {
    pub product: InequalityResult,
    pub power: Option<InequalityResult>,
    pub negpower: Option<InequalityResult>,
}

impl CooleyReport {
    pub fn passed(&self) -> bool {
        self.product.passed
            && self.power.map_or(true, |p| p.passed)
            && self.negpower.map_or(true, |p| p.passed)
    }
}

pub fn cooley_check(ecf: &EcfTable, r: usize, s: usize, t: usize, alpha: f64) -> Result<CooleyReport> {
    let m = ecf.m();
    if r >= m || s >= m || t >= m || r == s || s == t || r == t {
        return Err(Error::Domain(format!("need three distinct sites below {m}, got ({r}, {s}, {t})")));
    }
    let pair = |i: usize, j: usize| ecf.get(SubsetMask::from_sites([i, j]));
    let (st, sr, rt) = (pair(s, t), pair(s, r), pair(r, t));
    let product = InequalityResult::new(sr * rt - st);
    let power = (alpha > 0.0 && alpha <= 1.0)
        .then(|| InequalityResult::new(sr.powf(alpha) + rt.powf(alpha) - 1.0 - st.powf(alpha)));
    let negpower = (alpha <= 0.0)
        .then(|| InequalityResult::new(st.powf(alpha) - sr.powf(alpha) - rt.powf(alpha) + 1.0));
    Ok(CooleyReport {
        product,
        power,
        negpower,
    })
}
