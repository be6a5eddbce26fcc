//! The dependency set of the TM process as an explicit polytope
//! `D* = {x ≥ 0 : Σ_{t∈A} x_t ≤ θ(A) for all ∅ ≠ A ⊂ M}`, its support
//! function, and the lower bounds on distribution functions it yields.

use rayon::prelude::*;
use serde::Serialize;

use crate::ecf::{check_point, ensure_valid, EcfTable, TOL_VALIDATE};
use crate::error::{Error, Result};
use crate::subset::{masks, GroundSet, SubsetMask};
use crate::tm::{tm_from_ecf, tm_neg_log_cdf};

/// Largest ground set accepted by vertex enumeration.
pub const MAX_VERTEX_SITES: usize = 6;

/// Vertices closer than this in the sup norm are merged.
pub const DEDUP_TOL: f64 = 1e-9;

/// `Σ_{t ∈ mask} x_t ≤ bound`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Halfspace {
    pub mask: SubsetMask,
    pub bound: f64,
}

impl Halfspace {
    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.mask.sites().map(|t| x[t]).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepSetPolytope {
    pub ground: GroundSet,
    pub halfspaces: Vec<Halfspace>,
    pub vertices: Vec<Vec<f64>>,
}

impl DepSetPolytope {
    /// Halfspaces and vertices of the TM dependency set of `ecf`.
    pub fn from_ecf(ecf: &EcfTable) -> Result<Self> {
        let halfspaces = halfspaces_from_ecf(ecf)?;
        let vertices = enumerate_vertices(&halfspaces, ecf.m())?;
        Ok(DepSetPolytope {
            ground: ecf.ground().clone(),
            halfspaces,
            vertices,
        })
    }

    pub fn m(&self) -> usize {
        self.ground.size()
    }
}

/// `(A, θ(A))` for every nonempty `A`, in mask order.
pub fn halfspaces_from_ecf(ecf: &EcfTable) -> Result<Vec<Halfspace>> {
    ensure_valid(ecf)?;
    Ok(masks(ecf.m(), true)
        .map(|mask| Halfspace {
            mask,
            bound: ecf.get(mask),
        })
        .collect())
}

/// A constraint `⟨normal, x⟩ ≤ bound` with a 0/±1 normal.
#[derive(Clone, Debug)]
struct Constraint {
    normal: Vec<f64>,
    bound: f64,
}

impl Constraint {
    fn slack(&self, x: &[f64]) -> f64 {
        self.normal.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - self.bound
    }
}

fn check_halfspaces(halfspaces: &[Halfspace], m: usize) -> Result<()> {
    if m == 0 || m > MAX_VERTEX_SITES {
        return Err(Error::TooManySites { got: m });
    }
    for h in halfspaces {
        if h.mask.is_empty() || h.mask.bits() >> m != 0 {
            return Err(Error::MaskOutOfRange { mask: h.mask.bits(), m });
        }
        if !(h.bound >= 0.0 && h.bound.is_finite()) {
            return Err(Error::Parameter(format!("halfspace bound {} must be finite and >= 0", h.bound)));
        }
    }
    Ok(())
}

/// Orthant constraints `−x_t ≤ 0` followed by the halfspaces.
fn constraints(halfspaces: &[Halfspace], m: usize) -> Vec<Constraint> {
    let mut out: Vec<Constraint> = (0..m)
        .map(|t| {
            let mut normal = vec![0.0; m];
            normal[t] = -1.0;
            Constraint { normal, bound: 0.0 }
        })
        .collect();
    out.extend(halfspaces.iter().map(|h| Constraint {
        normal: (0..m).map(|t| if h.mask.contains(t) { 1.0 } else { 0.0 }).collect(),
        bound: h.bound,
    }));
    out
}

/// Rank of the rows of `cons` selected by `set`.
fn rank(cons: &[Constraint], set: u128, m: usize) -> usize {
    let mut rows: Vec<Vec<f64>> = (0..cons.len())
        .filter(|&j| set >> j & 1 == 1)
        .map(|j| cons[j].normal.clone())
        .collect();
    let mut r = 0;
    for col in 0..m {
        let Some(p) = (r..rows.len()).max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs())) else {
            break;
        };
        if rows[p][col].abs() < 1e-9 {
            continue;
        }
        rows.swap(r, p);
        let pivot = rows[r].clone();
        for row in rows.iter_mut().skip(r + 1) {
            let f = row[col] / pivot[col];
            if f != 0.0 {
                row.iter_mut().zip(&pivot).for_each(|(x, y)| *x -= f * y);
            }
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    r
}

#[derive(Clone, Debug)]
struct Vertex {
    x: Vec<f64>,
    tight: u128,
}

fn tight_set(cons: &[Constraint], upto: usize, x: &[f64]) -> u128 {
    (0..upto)
        .filter(|&j| cons[j].slack(x).abs() <= DEDUP_TOL)
        .fold(0u128, |acc, j| acc | 1 << j)
}

/// Vertices of `{x ≥ 0} ∩ ⋂ halfspaces` by double description: start from
/// a bounding box and cut with one constraint at a time, creating new
/// vertices on the edges that cross each cutting plane. Two vertices span
/// an edge iff their common tight constraints have rank `m − 1`.
///
/// Vertices are returned in lexicographic order.
pub fn enumerate_vertices(halfspaces: &[Halfspace], m: usize) -> Result<Vec<Vec<f64>>> {
    check_halfspaces(halfspaces, m)?;
    let mut upper = vec![f64::INFINITY; m];
    for h in halfspaces {
        for t in h.mask.sites() {
            upper[t] = upper[t].min(h.bound);
        }
    }
    if let Some(t) = upper.iter().position(|u| u.is_infinite()) {
        return Err(Error::Unbounded(t));
    }

    // Orthant, then box faces x_t ≤ u_t, then the halfspaces.
    let mut cons = constraints(&[], m);
    cons.extend((0..m).map(|t| {
        let mut normal = vec![0.0; m];
        normal[t] = 1.0;
        Constraint {
            normal,
            bound: upper[t],
        }
    }));
    cons.extend(constraints(halfspaces, m).into_iter().skip(m));

    let box_count = 2 * m;
    let mut verts: Vec<Vertex> = (0..1usize << m)
        .map(|corner| {
            let x: Vec<f64> = (0..m).map(|t| if corner >> t & 1 == 1 { upper[t] } else { 0.0 }).collect();
            let tight = tight_set(&cons, box_count, &x);
            Vertex { x, tight }
        })
        .collect();

    for j in box_count..cons.len() {
        let c = &cons[j];
        let slack: Vec<f64> = verts.iter().map(|v| c.slack(&v.x)).collect();
        let inside: Vec<usize> = (0..verts.len()).filter(|&i| slack[i] < -DEDUP_TOL).collect();
        let outside: Vec<usize> = (0..verts.len()).filter(|&i| slack[i] > DEDUP_TOL).collect();
        if outside.is_empty() {
            for (v, s) in verts.iter_mut().zip(&slack) {
                if s.abs() <= DEDUP_TOL {
                    v.tight |= 1 << j;
                }
            }
            continue;
        }
        let created: Vec<Vertex> = outside
            .par_iter()
            .map(|&p| {
                let mut out = Vec::new();
                for &q in &inside {
                    let common = verts[p].tight & verts[q].tight;
                    if (common.count_ones() as usize) < m - 1 || rank(&cons, common, m) != m - 1 {
                        continue;
                    }
                    let lam = slack[p] / (slack[p] - slack[q]);
                    let x: Vec<f64> = verts[p]
                        .x
                        .iter()
                        .zip(&verts[q].x)
                        .map(|(a, b)| a + lam * (b - a))
                        .collect();
                    let tight = tight_set(&cons, j, &x) | 1 << j;
                    out.push(Vertex { x, tight });
                }
                out
            })
            .flatten()
            .collect();
        let mut next: Vec<Vertex> = Vec::with_capacity(verts.len() + created.len());
        for (i, v) in verts.into_iter().enumerate() {
            if slack[i] < -DEDUP_TOL {
                next.push(v);
            } else if slack[i] <= DEDUP_TOL {
                next.push(Vertex {
                    tight: v.tight | 1 << j,
                    ..v
                });
            }
        }
        next.extend(created);
        verts = next;
    }

    let mut points: Vec<Vec<f64>> = verts.into_iter().map(|v| v.x).collect();
    Ok(dedupe_sorted(&mut points))
}

fn dedupe_sorted(points: &mut [Vec<f64>]) -> Vec<Vec<f64>> {
    for p in points.iter_mut() {
        p.iter_mut().for_each(|v| {
            if v.abs() <= DEDUP_TOL {
                *v = 0.0;
            }
        });
    }
    points.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for p in points.iter() {
        let dup = out
            .iter()
            .any(|q| q.iter().zip(p).all(|(a, b)| (a - b).abs() <= DEDUP_TOL));
        if !dup {
            out.push(p.clone());
        }
    }
    out
}

/// Vertices by brute force: solve every `m × m` system of active
/// constraints (orthant planes included) and keep the feasible solutions.
/// Exponential in the number of constraints; intended as a cross-check for
/// small `m`.
pub fn enumerate_vertices_exhaustive(halfspaces: &[Halfspace], m: usize) -> Result<Vec<Vec<f64>>> {
    check_halfspaces(halfspaces, m)?;
    let cons = constraints(halfspaces, m);
    let n = cons.len();
    let mut found = Vec::new();
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        if let Some(x) = solve(&cons, &idx, m) {
            if cons.iter().all(|c| c.slack(&x) <= DEDUP_TOL) {
                found.push(x);
            }
        }
        // Next m-combination in lexicographic order.
        let mut i = m;
        while i > 0 && idx[i - 1] == n - m + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for k in i..m {
            idx[k] = idx[k - 1] + 1;
        }
    }
    Ok(dedupe_sorted(&mut found))
}

/// Solves `⟨a_j, x⟩ = b_j` for the selected rows, or `None` if singular.
fn solve(cons: &[Constraint], rows: &[usize], m: usize) -> Option<Vec<f64>> {
    let mut a: Vec<Vec<f64>> = rows
        .iter()
        .map(|&j| {
            let mut r = cons[j].normal.clone();
            r.push(cons[j].bound);
            r
        })
        .collect();
    for col in 0..m {
        let p = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[p][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, p);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    let pivot = a[col].clone();
                    a[r].iter_mut().zip(&pivot).for_each(|(x, y)| *x -= f * y);
                }
            }
        }
    }
    Some((0..m).map(|i| a[i][m] / a[i][i]).collect())
}

/// `max_v ⟨x, v⟩` over the enumerated vertices.
pub fn support_function(poly: &DepSetPolytope, x: &[f64]) -> Result<f64> {
    if poly.vertices.is_empty() {
        return Err(Error::Domain("polytope has no vertices".into()));
    }
    if x.len() != poly.m() || x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain(format!(
            "direction must have {} finite nonnegative coordinates",
            poly.m()
        )));
    }
    Ok(poly
        .vertices
        .iter()
        .map(|v| v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Largest violation of `y ≥ 0` and the halfspaces, `≤ 0` inside.
pub fn violation(poly: &DepSetPolytope, y: &[f64]) -> f64 {
    let orthant = y.iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max);
    poly.halfspaces
        .iter()
        .map(|h| h.lhs(y) - h.bound)
        .fold(orthant, f64::max)
}

/// Membership with tolerance `1e−9`.
pub fn contains(poly: &DepSetPolytope, y: &[f64]) -> bool {
    y.len() == poly.m() && violation(poly, y) <= TOL_VALIDATE
}

/// A vertex maximizing `Σ_{t∈A} v_t`; it must attain `θ(A)`.
pub fn touches_plane(poly: &DepSetPolytope, a: SubsetMask) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Err(Error::EmptySubset);
    }
    poly.ground.check_mask(a)?;
    let h = poly
        .halfspaces
        .iter()
        .find(|h| h.mask == a)
        .ok_or_else(|| Error::Domain(format!("no halfspace for {a}")))?;
    let best = poly
        .vertices
        .iter()
        .max_by(|u, v| h.lhs(u).total_cmp(&h.lhs(v)))
        .ok_or_else(|| Error::Domain("polytope has no vertices".into()))?;
    let value = h.lhs(best);
    if (value - h.bound).abs() > TOL_VALIDATE {
        return Err(Error::InvalidEcf(format!(
            "plane of {a} is not touched: max {value} < bound {}",
            h.bound
        )));
    }
    Ok(best.clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InclusionReport {
    pub passed: bool,
    /// Largest violation over all points; `≤ 0` when every point is inside.
    pub max_violation: f64,
    /// Index of the point attaining `max_violation`.
    pub worst: Option<usize>,
}

/// Whether every point lies in the polytope up to `1e−9`.
pub fn inclusion_check(points: &[Vec<f64>], poly: &DepSetPolytope) -> InclusionReport {
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst = None;
    for (i, p) in points.iter().enumerate() {
        let v = if p.len() == poly.m() { violation(poly, p) } else { f64::INFINITY };
        if v > max_violation {
            max_violation = v;
            worst = Some(i);
        }
    }
    InclusionReport {
        passed: max_violation <= TOL_VALIDATE,
        max_violation,
        worst,
    }
}

/// `log` of the sharp lower bound `exp(−Σ_L τ_L max_{t∈L} 1/x_t)` on
/// `P(X ≤ x)` over all simple max-stable vectors with ECF `θ`.
pub fn fdd_lower_bound_log(ecf: &EcfTable, x: &[f64]) -> Result<f64> {
    check_point(x, ecf.m())?;
    Ok(-tm_neg_log_cdf(&tm_from_ecf(ecf)?, x)?)
}

/// [`fdd_lower_bound_log`] exponentiated.
pub fn fdd_lower_bound(ecf: &EcfTable, x: &[f64]) -> Result<f64> {
    Ok(fdd_lower_bound_log(ecf, x)?.exp())
}

/// Whether `(η_rs, η_st, η_rt)` is compatible with a trivariate ECF:
/// each in `[0, 1]` and `η_rs ∨ η_st ∨ η_rt ∨ (Σ η − 1) ≤ a_rst`.
pub fn check_eta_triple(eta_rs: f64, eta_st: f64, eta_rt: f64) -> Result<f64> {
    for e in [eta_rs, eta_st, eta_rt] {
        if !(0.0..=1.0).contains(&e) {
            return Err(Error::Parameter(format!("eta = {e} must lie in [0, 1]")));
        }
    }
    let a = (eta_rs + eta_st).min(eta_rs + eta_rt).min(eta_st + eta_rt);
    let lower = eta_rs.max(eta_st).max(eta_rt).max(eta_rs + eta_st + eta_rt - 1.0);
    if lower > a + TOL_VALIDATE {
        return Err(Error::Parameter(format!(
            "infeasible eta triple ({eta_rs}, {eta_st}, {eta_rt}): lower bound {lower} exceeds {a}"
        )));
    }
    Ok(a)
}

/// `log` of the trivariate bound built from the bivariate `η = θ − 1`
/// only, at `x = (x_r, x_s, x_t)`.
pub fn trivariate_bound_from_bivariate_log(eta_rs: f64, eta_st: f64, eta_rt: f64, x: [f64; 3]) -> Result<f64> {
    let a = check_eta_triple(eta_rs, eta_st, eta_rt)?;
    check_point(&x, 3)?;
    let [xr, xs, xt] = x;
    let inv_min = |p: f64, q: f64| 1.0 / p.min(q);
    let (rs, st, rt) = (inv_min(xr, xs), inv_min(xs, xt), inv_min(xr, xt));
    let all = 1.0 / xr.min(xs).min(xt);
    let sum = (1.0 - eta_rs.max(eta_st).max(eta_rt)) * all + a.min(1.0) * (rs + st + rt)
        - (eta_rs * rs + eta_st * st + eta_rt * rt)
        + a * (1.0 / xr + 1.0 / xs + 1.0 / xt)
        - (eta_st / xr + eta_rt / xs + eta_rs / xt);
    Ok(-sum)
}

pub fn trivariate_bound_from_bivariate(eta_rs: f64, eta_st: f64, eta_rt: f64, x: [f64; 3]) -> Result<f64> {
    Ok(trivariate_bound_from_bivariate_log(eta_rs, eta_st, eta_rt, x)?.exp())
}
