//! Shifted convolution sums `Σ |λ(𝔷⁻¹m) λ(𝔷⁻¹n)|` over boxes and hyperbolic
//! regions, the bound they are compared against, and the weighted
//! archimedean sums built from the integral `I`.
//!
//! Lattice points are always enumerated with floating bounds and then
//! filtered with exact comparisons, so membership never depends on rounding.

use crate::arith::{euler_product, ArithError, MultiplicativeFunction};
use crate::field::{
    embedding_cmp, in_bounds, FieldDescriptor, FieldElement, FieldError, FractionalIdeal, IdealFactorization, QuadReal,
};
use crate::par;
use crate::regions::{cover_with_boxes, AxisBox, HyperbolicRegion, Interval, RegionError};
use crate::special::{i_contour, i_direct, BumpMellin, IParams, MajorantKernel, Order, Place, SpecialError};
use num_complex::Complex64;
use serde::Serialize;
use std::collections::BTreeSet;

/// Default cap on the number of lattice points one query may visit.
pub const DEFAULT_POINT_BUDGET: f64 = 1e7;

#[derive(Debug, thiserror::Error)]
pub enum ShiftedError {
    #[error("shift must be nonzero")]
    ZeroShift,
    #[error("shift is not in the ideal")]
    ShiftNotInIdeal,
    #[error("enumeration needs about {needed:.0} points, budget is {budget:.0}")]
    Budget { needed: f64, budget: f64 },
    #[error("region has dimension {region}, field has degree {degree}")]
    Dimension { region: usize, degree: usize },
    #[error("{0}")]
    BadParameters(&'static str),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Region(#[from] RegionError),
}

pub type Result<T> = std::result::Result<T, ShiftedError>;

#[derive(Clone, Debug)]
pub enum SumRegion {
    Box(AxisBox<f64>),
    Hyperbolic(HyperbolicRegion<f64>),
}

impl SumRegion {
    fn dim(&self) -> usize {
        match self {
            SumRegion::Box(b) => b.dim(),
            SumRegion::Hyperbolic(r) => r.dim(),
        }
    }
}

/// A shifted sum: field, ideal `𝔷`, shift `l ∈ 𝔷`, region and `λ`.
#[derive(Clone)]
pub struct ShiftedSumQuery<'a> {
    pub field: &'a FieldDescriptor,
    pub zeta: FractionalIdeal,
    pub shift: FieldElement,
    pub region: SumRegion,
    pub lambda: MultiplicativeFunction,
    pub budget: f64,
    zeta_factors: IdealFactorization,
}

/// Value of a shifted sum with bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SumValue {
    pub value: f64,
    /// Pairs `(n, m)` that contributed a term.
    pub terms: usize,
    /// Lattice points visited.
    pub visited: usize,
}

impl<'a> ShiftedSumQuery<'a> {
    pub fn new(
        field: &'a FieldDescriptor,
        zeta: FractionalIdeal,
        shift: FieldElement,
        region: SumRegion,
        lambda: MultiplicativeFunction,
    ) -> Result<Self> {
        if shift.is_zero() {
            return Err(ShiftedError::ZeroShift);
        }
        if !zeta.contains(&shift) {
            return Err(ShiftedError::ShiftNotInIdeal);
        }
        if region.dim() != field.degree() {
            return Err(ShiftedError::Dimension { region: region.dim(), degree: field.degree() });
        }
        let zeta_factors = field.factor_fractional(&zeta);
        Ok(ShiftedSumQuery { field, zeta, shift, region, lambda, budget: DEFAULT_POINT_BUDGET, zeta_factors })
    }

    pub fn with_budget(mut self, budget: f64) -> Self {
        self.budget = budget;
        self
    }

    /// `λ(𝔷⁻¹ e)` for a nonzero `e ∈ 𝔷`.
    pub fn lambda_at(&self, e: &FieldElement) -> Result<f64> {
        let fac = self.field.factor_element(e)?.div(&self.zeta_factors);
        Ok(self.lambda.eval(&fac)?)
    }

    fn check_budget(&self, boxes: &[Vec<(f64, f64, bool)>]) -> Result<()> {
        let needed: f64 = boxes.iter().map(|b| self.field.lattice_candidates(&self.zeta, b)).sum();
        if needed > self.budget {
            return Err(ShiftedError::Budget { needed, budget: self.budget });
        }
        Ok(())
    }

    fn points_in(&self, boxes: &[Vec<(f64, f64, bool)>]) -> Result<Vec<FieldElement>> {
        self.check_budget(boxes)?;
        let mut set = BTreeSet::new();
        for b in boxes {
            self.field.for_each_lattice_point(&self.zeta, b, |_, e| {
                set.insert(e);
                true
            });
        }
        Ok(set.into_iter().collect())
    }

    /// Sum of `|λ(𝔷⁻¹m)λ(𝔷⁻¹n)|` over the given `n`, with `m = n + l`.
    fn sum_pairs(&self, ns: &[FieldElement]) -> Result<SumValue> {
        let terms: Vec<Result<f64>> = par::map_ordered(ns, |n| {
            let m = n.add(&self.shift);
            Ok((self.lambda_at(n)? * self.lambda_at(&m)?).abs())
        });
        let terms: Vec<f64> = terms.into_iter().collect::<Result<_>>()?;
        Ok(SumValue { value: par::tree_sum(&terms), terms: terms.len(), visited: ns.len() })
    }
}

/// `Σ |λ(𝔷⁻¹m)λ(𝔷⁻¹n)|` over nonzero `n, m = n + l` in `𝔷 ∩ B`.
pub fn sum_over_box(q: &ShiftedSumQuery) -> Result<SumValue> {
    let SumRegion::Box(b) = &q.region else {
        return Err(ShiftedError::BadParameters("sum_over_box needs a box region"));
    };
    let bounds = b.bounds();
    let points = q.points_in(std::slice::from_ref(&bounds))?;
    let visited = points.len();
    let ns: Vec<FieldElement> = points
        .into_iter()
        .filter(|n| {
            let m = n.add(&q.shift);
            !n.is_zero() && !m.is_zero() && in_bounds(&m, &bounds)
        })
        .collect();
    let mut v = q.sum_pairs(&ns)?;
    v.visited = visited;
    Ok(v)
}

/// Per embedding, whether the shift is positive (then `max(m, n) = m` there).
fn shift_signs(l: &FieldElement, d: usize) -> Vec<bool> {
    (0..d).map(|i| l.exact_embedding(i).signum() > 0).collect()
}

/// Exact embedding `i` of `max(m, n)`.
fn max_component(n: &FieldElement, m: &FieldElement, l_pos: &[bool], i: usize) -> QuadReal {
    if l_pos[i] {
        m.exact_embedding(i)
    } else {
        n.exact_embedding(i)
    }
}

/// Whether `max(m, n)` lies in `R_{T,U}`, decided exactly.
pub fn max_in_region(n: &FieldElement, m: &FieldElement, l_pos: &[bool], r: &HyperbolicRegion<f64>) -> bool {
    let d = r.dim();
    let pick = |i: usize| if l_pos[i] { m } else { n };
    for i in 0..d {
        if embedding_cmp(pick(i), i, r.t[i] / r.u) < 0 {
            return false;
        }
    }
    let x = r.x();
    let approx: f64 = (0..d).map(|i| pick(i).embedding()[i]).product();
    if (approx - x).abs() > 1e-9 * (1.0 + x.abs().max(approx.abs())) {
        return approx <= x;
    }
    let mut prod = max_component(n, m, l_pos, 0);
    for i in 1..d {
        prod = prod.mul(&max_component(n, m, l_pos, i));
    }
    prod.cmp_f64(x) <= 0
}

fn max_in_box(n: &FieldElement, m: &FieldElement, l_pos: &[bool], bounds: &[(f64, f64, bool)]) -> bool {
    bounds.iter().enumerate().all(|(i, &(lo, hi, open))| {
        let e = if l_pos[i] { m } else { n };
        let c = embedding_cmp(e, i, lo);
        (if open { c > 0 } else { c >= 0 }) && embedding_cmp(e, i, hi) <= 0
    })
}

/// The box of `n` with `max(m, n)` in `b`: shift each side by `-max(l_i, 0)`,
/// keep `n > 0`, and widen slightly (the exact filter runs afterwards).
fn n_box_for(b: &[(f64, f64, bool)], l: &[f64]) -> Vec<(f64, f64, bool)> {
    b.iter()
        .zip(l)
        .map(|(&(lo, hi, _), &li)| {
            let s = li.max(0.0);
            let (lo, hi) = (lo - s, hi - s);
            let pad = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
            ((lo - pad).max(0.0), hi + pad, true)
        })
        .collect()
}

fn admissible(n: &FieldElement, m: &FieldElement) -> bool {
    n.is_totally_positive() && m.is_totally_positive()
}

/// `Σ_λ(𝔷, l, T, U)`: the sum over totally positive `n, m = n + l ∈ 𝔷`
/// with `max(m, n) ∈ R_{T,U}`. Candidates come from the box cover.
pub fn sum_over_hyperbolic(q: &ShiftedSumQuery) -> Result<SumValue> {
    let SumRegion::Hyperbolic(r) = &q.region else {
        return Err(ShiftedError::BadParameters("sum_over_hyperbolic needs a hyperbolic region"));
    };
    let d = r.dim();
    let l_emb = q.shift.embedding().to_vec();
    let l_pos = shift_signs(&q.shift, d);
    let boxes: Vec<Vec<(f64, f64, bool)>> = if d == 1 {
        vec![vec![(r.t[0] / r.u, r.t[0], false)]]
    } else {
        cover_with_boxes(r).iter().map(|b| b.bounds()).collect()
    };
    let n_boxes: Vec<_> = boxes.iter().map(|b| n_box_for(b, &l_emb)).collect();
    let points = q.points_in(&n_boxes)?;
    let visited = points.len();
    let ns: Vec<FieldElement> = points
        .into_iter()
        .filter(|n| {
            let m = n.add(&q.shift);
            admissible(n, &m) && max_in_region(n, &m, &l_pos, r)
        })
        .collect();
    let mut v = q.sum_pairs(&ns)?;
    v.visited = visited;
    Ok(v)
}

/// The same sum by scanning every `n` in `∏ (0, T_i U^{d-1}]`.
pub fn sum_over_hyperbolic_brute(q: &ShiftedSumQuery) -> Result<SumValue> {
    let SumRegion::Hyperbolic(r) = &q.region else {
        return Err(ShiftedError::BadParameters("brute-force sum needs a hyperbolic region"));
    };
    let d = r.dim();
    let l_pos = shift_signs(&q.shift, d);
    let up = r.u.powi(d as i32 - 1);
    let bounds: Vec<(f64, f64, bool)> = r.t.iter().map(|&t| (0.0, t * up, true)).collect();
    let points = q.points_in(&[bounds])?;
    let visited = points.len();
    let ns: Vec<FieldElement> = points
        .into_iter()
        .filter(|n| {
            let m = n.add(&q.shift);
            admissible(n, &m) && max_in_region(n, &m, &l_pos, r)
        })
        .collect();
    let mut v = q.sum_pairs(&ns)?;
    v.visited = visited;
    Ok(v)
}

/// Sum over the cover boxes of the pairs with `max(m, n)` in each box, without
/// removing overlaps; an upper bound for [`sum_over_hyperbolic`].
pub fn sum_over_cover(q: &ShiftedSumQuery) -> Result<SumValue> {
    let SumRegion::Hyperbolic(r) = &q.region else {
        return Err(ShiftedError::BadParameters("sum_over_cover needs a hyperbolic region"));
    };
    let d = r.dim();
    let l_emb = q.shift.embedding().to_vec();
    let l_pos = shift_signs(&q.shift, d);
    let mut total = Vec::new();
    let mut terms = 0;
    let mut visited = 0;
    for b in cover_with_boxes(r) {
        let bounds = b.bounds();
        let points = q.points_in(&[n_box_for(&bounds, &l_emb)])?;
        visited += points.len();
        let ns: Vec<FieldElement> = points
            .into_iter()
            .filter(|n| {
                let m = n.add(&q.shift);
                admissible(n, &m) && max_in_box(n, &m, &l_pos, &bounds)
            })
            .collect();
        let v = q.sum_pairs(&ns)?;
        total.push(v.value);
        terms += v.terms;
    }
    Ok(SumValue { value: par::tree_sum(&total), terms, visited })
}

/// The right-hand side `log(eU)^{d-1} X log(eX)^{ε-2} ∏_{N𝔭 <= X}(1 + 2|λ(𝔭)|/N𝔭)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundRhs {
    pub x: f64,
    pub u: f64,
    pub epsilon: f64,
    pub degree: usize,
    /// `log(eU)^{d-1}`.
    pub log_u_factor: f64,
    /// `log(eX)^{ε-2}`.
    pub log_x_factor: f64,
    pub euler_product: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: BoundRhs,
    /// `lhs / rhs`, or `NaN` when `rhs = 0`.
    pub ratio: f64,
    pub terms: usize,
}

pub const DEFAULT_EPSILON: f64 = 0.1;

pub fn essential_rhs(f: &FieldDescriptor, lambda: &MultiplicativeFunction, x: f64, u: f64, epsilon: f64) -> Result<BoundRhs> {
    if !(x >= 2.0) || !(u >= 1.0) || !x.is_finite() {
        return Err(ShiftedError::BadParameters("need X >= 2 and U >= 1"));
    }
    let d = f.degree();
    let e = std::f64::consts::E;
    let log_u_factor = (e * u).ln().powi(d as i32 - 1);
    let log_x_factor = (e * x).ln().powf(epsilon - 2.0);
    let ep = euler_product(f, lambda, x)?;
    Ok(BoundRhs { x, u, epsilon, degree: d, log_u_factor, log_x_factor, euler_product: ep, value: log_u_factor * x * log_x_factor * ep })
}

/// `Σ_λ(𝔷, l, T, U)` paired with its bound, `X = T^𝟏`.
pub fn essential_bound(q: &ShiftedSumQuery, epsilon: f64) -> Result<BoundReport> {
    let SumRegion::Hyperbolic(r) = &q.region else {
        return Err(ShiftedError::BadParameters("essential bound needs a hyperbolic region"));
    };
    let lhs = sum_over_hyperbolic(q)?;
    let rhs = essential_rhs(q.field, &q.lambda, r.x(), r.u, epsilon)?;
    let ratio = if rhs.value > 0.0 { lhs.value / rhs.value } else { f64::NAN };
    Ok(BoundReport { lhs: lhs.value, rhs, ratio, terms: lhs.terms })
}

/// How the `n`-sum of a weighted sum is cut off.
#[derive(Clone, Debug)]
pub enum Truncation {
    /// Grow boxes until the majorant of the newly added points is negligible.
    Adaptive,
    /// Sum exactly over `n` in the given box.
    FixedBox(AxisBox<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntegralMethod {
    Contour,
    Direct,
}

/// Archimedean data of a weighted sum. The test function is the standard bump.
#[derive(Clone)]
pub struct WeightSpec {
    pub weights: Vec<u32>,
    pub orders: Vec<Order<f64>>,
    pub parities: Vec<u8>,
    pub x: f64,
    pub lambda: MultiplicativeFunction,
    pub truncation: Truncation,
    /// The exponent `A` of the decaying majorant.
    pub majorant_exponent: f64,
    pub method: IntegralMethod,
    pub budget: f64,
    pub rel_tol: f64,
}

impl WeightSpec {
    pub fn new(weights: Vec<u32>, orders: Vec<Order<f64>>, parities: Vec<u8>, x: f64, lambda: MultiplicativeFunction) -> Self {
        WeightSpec {
            weights,
            orders,
            parities,
            x,
            lambda,
            truncation: Truncation::Adaptive,
            majorant_exponent: 8.0,
            method: IntegralMethod::Contour,
            budget: DEFAULT_POINT_BUDGET,
            rel_tol: 1e-12,
        }
    }

    pub fn validate(&self, degree: usize) -> Result<()> {
        if self.weights.len() != degree || self.orders.len() != degree || self.parities.len() != degree {
            return Err(ShiftedError::BadParameters("weight data must have one entry per embedding"));
        }
        if self.weights.iter().any(|&k| k < 2 || k % 2 != 0) {
            return Err(ShiftedError::BadParameters("weights must be even and at least 2"));
        }
        if self.parities.iter().any(|&e| e > 1) {
            return Err(ShiftedError::BadParameters("parities must be 0 or 1"));
        }
        for o in &self.orders {
            o.validate()?;
        }
        if !(self.x > 0.0) || !self.x.is_finite() {
            return Err(ShiftedError::BadParameters("scale x must be positive"));
        }
        if !(self.majorant_exponent > 0.0) {
            return Err(ShiftedError::BadParameters("majorant exponent must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedSum {
    pub value: Complex64,
    pub magnitude: f64,
    /// Terms evaluated through `I`.
    pub terms: usize,
    /// Summed majorants of skipped and unvisited terms; `None` for a fixed box.
    pub truncation_error: Option<f64>,
    /// Accumulated error estimates of the evaluated `I` values.
    pub integral_error: f64,
    /// Half-widths of the last box, per embedding.
    pub radius: Vec<f64>,
    /// `ĥ(1)`, the normalization the sum is reported without.
    pub h_hat_at_one: f64,
}

struct WeightedContext<'a> {
    field: &'a FieldDescriptor,
    zeta: &'a FractionalIdeal,
    zeta_factors: IdealFactorization,
    zeta_norm: f64,
    l: &'a FieldElement,
    w: &'a WeightSpec,
    hat: BumpMellin<f64>,
    kernels: [MajorantKernel<f64>; 2],
}

/// A visited `n` with its weight `λλ/√(NN)/N𝔷` and majorant.
struct Candidate {
    n: FieldElement,
    weight: f64,
    bound: f64,
}

impl WeightedContext<'_> {
    fn places(&self, n: &FieldElement) -> Vec<Place<f64>> {
        let (ne, le) = (n.embedding(), self.l.embedding());
        (0..ne.len())
            .map(|j| Place { k: self.w.weights[j], order: self.w.orders[j], parity: self.w.parities[j], l: le[j], n: ne[j] })
            .collect()
    }

    fn lambda_over_sqrt_norm(&self, e: &FieldElement) -> Result<f64> {
        let fac = self.field.factor_element(e)?.div(&self.zeta_factors);
        let norm = e.embedding().iter().product::<f64>().abs() / self.zeta_norm;
        Ok(self.w.lambda.eval(&fac)? / norm.sqrt())
    }

    fn candidate(&self, n: &FieldElement) -> Result<Candidate> {
        let m = n.add(self.l);
        let weight = self.lambda_over_sqrt_norm(n)? * self.lambda_over_sqrt_norm(&m)? / self.zeta_norm;
        let places = self.places(n);
        let log_b = self.kernels[0].log_bound(&places).min(self.kernels[1].log_bound(&places));
        Ok(Candidate { n: n.clone(), weight, bound: weight.abs() * log_b.exp() })
    }

    fn term(&self, c: &Candidate) -> Result<(Complex64, f64)> {
        if c.weight == 0.0 {
            return Ok((Complex64::new(0.0, 0.0), 0.0));
        }
        let p = IParams { places: self.places(&c.n), x: self.zeta_norm * self.w.x, c: 0.5, t_max: None };
        let v = match self.w.method {
            IntegralMethod::Contour => i_contour(&p, &self.hat)?,
            IntegralMethod::Direct => i_direct(&p)?,
        };
        Ok((v.value * c.weight, v.abs_err * c.weight.abs()))
    }

    /// Admissible `n` (totally positive with `n + l` totally positive) in the box.
    fn admissible_in(&self, bounds: &[(f64, f64, bool)]) -> Vec<FieldElement> {
        let mut out = Vec::new();
        self.field.for_each_lattice_point(self.zeta, bounds, |_, n| {
            if admissible(&n, &n.add(self.l)) {
                out.push(n);
            }
            true
        });
        out
    }

    fn candidates(&self, ns: &[FieldElement]) -> Result<Vec<Candidate>> {
        par::map_ordered(ns, |n| self.candidate(n)).into_iter().collect()
    }

    fn evaluate(&self, cs: &[&Candidate]) -> Result<(Complex64, f64)> {
        let vals: Vec<(Complex64, f64)> = par::map_ordered(cs, |c| self.term(c)).into_iter().collect::<Result<_>>()?;
        let re: Vec<f64> = vals.iter().map(|v| v.0.re).collect();
        let im: Vec<f64> = vals.iter().map(|v| v.0.im).collect();
        let err: Vec<f64> = vals.iter().map(|v| v.1).collect();
        Ok((Complex64::new(par::tree_sum(&re), par::tree_sum(&im)), par::tree_sum(&err)))
    }
}

/// `Σ_n λ(𝔷⁻¹m)/N(𝔷⁻¹m)^{1/2} · λ(𝔷⁻¹n)/N(𝔷⁻¹n)^{1/2} · I(l, n, N(𝔷)x) / N(𝔷)`
/// over totally positive `n ∈ 𝔷` with `m = n + l` totally positive.
///
/// Adaptive truncation doubles a box around the bulk of `I` until the summed
/// majorant `min(M_0, M_A)` of the new points drops below `rel_tol` of the
/// running total; points whose own majorant is negligible are skipped and
/// counted in the error.
pub fn weighted_archimedean_sum(f: &FieldDescriptor, w: &WeightSpec, zeta: &FractionalIdeal, l: &FieldElement) -> Result<WeightedSum> {
    let d = f.degree();
    w.validate(d)?;
    if l.is_zero() {
        return Err(ShiftedError::ZeroShift);
    }
    if !zeta.contains(l) {
        return Err(ShiftedError::ShiftNotInIdeal);
    }
    let hat = BumpMellin::new();
    let zeta_norm = zeta.norm_f64();
    let x_eff = zeta_norm * w.x;
    let kernels = [
        MajorantKernel::new(&w.weights, x_eff, 0.0, &hat)?,
        MajorantKernel::new(&w.weights, x_eff, w.majorant_exponent, &hat)?,
    ];
    let h_hat_at_one = hat.eval(Complex64::new(1.0, 0.0)).re;
    let ctx = WeightedContext { field: f, zeta, zeta_factors: f.factor_fractional(zeta), zeta_norm, l, w, hat, kernels };
    let lattice_budget = |b: &[(f64, f64, bool)]| -> Result<()> {
        let needed = f.lattice_candidates(zeta, b);
        if needed > w.budget {
            return Err(ShiftedError::Budget { needed, budget: w.budget });
        }
        Ok(())
    };

    if let Truncation::FixedBox(b) = &w.truncation {
        if b.dim() != d {
            return Err(ShiftedError::Dimension { region: b.dim(), degree: d });
        }
        let bounds = b.bounds();
        lattice_budget(&bounds)?;
        let ns = ctx.admissible_in(&bounds);
        let cs = ctx.candidates(&ns)?;
        let refs: Vec<&Candidate> = cs.iter().collect();
        let (value, integral_error) = ctx.evaluate(&refs)?;
        return Ok(WeightedSum {
            value,
            magnitude: value.norm(),
            terms: refs.len(),
            truncation_error: None,
            integral_error,
            radius: b.sides.iter().map(|s| s.hi).collect(),
            h_hat_at_one,
        });
    }

    // the integrand of I peaks near Σ(m_j + n_j) y_j ≈ k_j with y^𝟏 ≈ 1/x
    let k_prod: f64 = w.weights.iter().map(|&k| k as f64).product();
    let bulk = (x_eff * k_prod / (4.0 * std::f64::consts::PI).powi(d as i32)).powf(1.0 / d as f64);
    let le = l.embedding();
    let base: Vec<f64> = (0..d).map(|j| 2.0 * bulk + 2.0 * le[j].abs() + 1.0).collect();
    let box_at = |r: i32| -> Vec<(f64, f64, bool)> { base.iter().map(|&s| (0.0, s * 2f64.powi(r), true)).collect() };

    let mut total = Complex64::new(0.0, 0.0);
    let mut integral_error = 0.0;
    let mut skipped = 0.0;
    let mut terms = 0;
    let mut r = 0;
    loop {
        let bounds = box_at(r);
        lattice_budget(&bounds)?;
        let prev = if r > 0 { Some(box_at(r - 1)) } else { None };
        let ns: Vec<FieldElement> = ctx
            .admissible_in(&bounds)
            .into_iter()
            .filter(|n| prev.as_ref().is_none_or(|p| !in_bounds(n, p)))
            .collect();
        let cs = ctx.candidates(&ns)?;
        let shell_bound = par::tree_sum(&cs.iter().map(|c| c.bound).collect::<Vec<_>>());
        let scale = total.norm();
        if r > 0 && (shell_bound <= w.rel_tol * scale || shell_bound < 1e-300) {
            return Ok(WeightedSum {
                value: total,
                magnitude: total.norm(),
                terms,
                truncation_error: Some(skipped + shell_bound),
                integral_error,
                radius: base.iter().map(|&s| s * 2f64.powi(r - 1)).collect(),
                h_hat_at_one,
            });
        }
        // per-point skip threshold; the skipped mass over all rounds stays below rel_tol·|total|
        let per_point = if r == 0 || cs.is_empty() { 0.0 } else { w.rel_tol * scale * 0.5f64.powi(r) / cs.len() as f64 };
        let (eval, skip): (Vec<&Candidate>, Vec<&Candidate>) = cs.iter().partition(|c| c.bound >= per_point && c.weight != 0.0);
        skipped += par::tree_sum(&skip.iter().map(|c| c.bound).collect::<Vec<_>>());
        let (v, e) = ctx.evaluate(&eval)?;
        total += v;
        integral_error += e;
        terms += eval.len();
        r += 1;
        if r > 60 {
            return Err(ShiftedError::BadParameters("weighted sum failed to converge"));
        }
    }
}

/// Parameters of the dyadic decomposition: `T_i = k_i Y^{1/d}`, `X = k^𝟏 Y`, `U = exp(log(X)^ε)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DyadicParams {
    pub y: f64,
    pub epsilon: f64,
    pub a: f64,
    pub r_max: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DyadicShellValue {
    pub r: u32,
    pub weight: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DyadicReport {
    pub x: f64,
    pub u: f64,
    pub x_pow_minus_a: f64,
    pub shells: Vec<DyadicShellValue>,
    pub total: f64,
}

/// `X^{-A} + Σ_r 2^{-rdA} Σ_λ(𝔷, l, 2^{r+1}T, 2^{r+1}U)`, stopping once a
/// weighted shell adds less than `1e-12` of the running total or at `r_max`.
pub fn sum_dyadic_majorant(
    f: &FieldDescriptor,
    weights: &[u32],
    lambda: &MultiplicativeFunction,
    zeta: &FractionalIdeal,
    l: &FieldElement,
    p: DyadicParams,
) -> Result<DyadicReport> {
    let d = f.degree();
    if weights.len() != d {
        return Err(ShiftedError::BadParameters("one weight per embedding"));
    }
    let k_prod: f64 = weights.iter().map(|&k| k as f64).product();
    let x = k_prod * p.y;
    if !(p.y >= 1.0) || x < 2.0 {
        return Err(ShiftedError::BadParameters("need Y >= 1 and X >= 2"));
    }
    if p.y > x.ln().powi(10) {
        return Err(ShiftedError::BadParameters("need Y <= log(X)^10"));
    }
    let u = x.ln().powf(p.epsilon).exp();
    let t: Vec<f64> = weights.iter().map(|&k| k as f64 * p.y.powf(1.0 / d as f64)).collect();
    let base = HyperbolicRegion::new(t, u)?;
    let x_pow_minus_a = x.powf(-p.a);
    let mut total = x_pow_minus_a;
    let mut shells = Vec::new();
    for shell in crate::regions::dyadic_shells(&base, p.r_max, p.a) {
        let q = ShiftedSumQuery::new(f, zeta.clone(), l.clone(), SumRegion::Hyperbolic(shell.region), lambda.clone())?;
        let sigma = sum_over_hyperbolic(&q)?.value;
        let add = shell.weight * sigma;
        shells.push(DyadicShellValue { r: shell.r, weight: shell.weight, sigma });
        total += add;
        if add <= 1e-12 * total {
            break;
        }
    }
    Ok(DyadicReport { x, u, x_pow_minus_a, shells, total })
}

/// Both sides of the exponential-smallness step for one pair `(m, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentialStep {
    /// `(min/max)^{(k-1)/2}`.
    pub ratio_power: f64,
    /// `exp(-Σ (k_j-1)|l_j| / (2 max_j))`.
    pub elementary: f64,
    /// `exp(-|l_i| U / (3 Y^{1/d}))` for the first index with `max_i <= T_i/U`, if any.
    pub small_component: Option<f64>,
}

impl ExponentialStep {
    pub fn elementary_holds(&self) -> bool {
        self.ratio_power <= self.elementary * (1.0 + 1e-12)
    }

    pub fn small_component_holds(&self) -> bool {
        self.small_component.is_none_or(|b| self.ratio_power <= b * (1.0 + 1e-12))
    }
}

/// Evaluates the exponential-smallness step with `T_i = k_i Y^{1/d}`.
pub fn exponential_step(weights: &[u32], l: &[f64], n: &[f64], y: f64, u: f64) -> ExponentialStep {
    let d = weights.len();
    let mut log_ratio = 0.0;
    let mut log_elem = 0.0;
    let mut small = None;
    for j in 0..d {
        let m = n[j] + l[j];
        let (lo, hi) = (m.min(n[j]), m.max(n[j]));
        let kk = weights[j] as f64 - 1.0;
        log_ratio += 0.5 * kk * (lo / hi).ln();
        log_elem -= 0.5 * kk * l[j].abs() / hi;
        let t = weights[j] as f64 * y.powf(1.0 / d as f64);
        if small.is_none() && hi <= t / u {
            small = Some((-l[j].abs() * u / (3.0 * y.powf(1.0 / d as f64))).exp());
        }
    }
    ExponentialStep { ratio_power: log_ratio.exp(), elementary: log_elem.exp(), small_component: small }
}

/// A box `∏ (0, s_i]` as an [`AxisBox`].
pub fn positive_box(sides: &[f64]) -> AxisBox<f64> {
    AxisBox::new(sides.iter().map(|&s| Interval::left_open(0.0, s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{default_table, LambdaSpec};
    use crate::field::{make_field, FieldSpec};

    fn rational() -> FieldDescriptor {
        make_field(&FieldSpec::Rational, None).unwrap()
    }

    #[test]
    fn tau_pairs_up_to_ten() {
        let f = rational();
        let q = ShiftedSumQuery::new(
            &f,
            f.ring(),
            f.element(1, 0),
            SumRegion::Box(positive_box(&[10.0])),
            MultiplicativeFunction::divisor(),
        )
        .unwrap();
        let v = sum_over_box(&q).unwrap();
        let tau = [1.0, 2.0, 2.0, 3.0, 2.0, 4.0, 2.0, 4.0, 3.0, 4.0];
        let expect: f64 = (0..9).map(|i| tau[i] * tau[i + 1]).sum();
        assert_eq!(expect, 66.0);
        assert_eq!(v.value, expect);
        assert_eq!(v.terms, 9);
    }

    #[test]
    fn shift_too_long_for_box() {
        let f = rational();
        let q = ShiftedSumQuery::new(
            &f,
            f.ring(),
            f.element(20, 0),
            SumRegion::Box(positive_box(&[10.0])),
            MultiplicativeFunction::divisor(),
        )
        .unwrap();
        assert_eq!(sum_over_box(&q).unwrap().value, 0.0);
    }

    #[test]
    fn rejects_zero_and_foreign_shift() {
        let f = rational();
        let two = FractionalIdeal::principal(&f.element(2, 0)).unwrap();
        let r = SumRegion::Box(positive_box(&[10.0]));
        let lam = MultiplicativeFunction::divisor();
        assert!(matches!(
            ShiftedSumQuery::new(&f, f.ring(), f.element(0, 0), r.clone(), lam.clone()),
            Err(ShiftedError::ZeroShift)
        ));
        assert!(matches!(ShiftedSumQuery::new(&f, two, f.element(3, 0), r, lam), Err(ShiftedError::ShiftNotInIdeal)));
    }

    #[test]
    fn hyperbolic_in_degree_one_is_an_interval() {
        let f = rational();
        let lam = MultiplicativeFunction::divisor();
        let region = HyperbolicRegion::new(vec![40.0], 4.0).unwrap();
        let q = ShiftedSumQuery::new(&f, f.ring(), f.element(3, 0), SumRegion::Hyperbolic(region), lam.clone()).unwrap();
        let hyp = sum_over_hyperbolic(&q).unwrap().value;
        // max(m, n) = m ∈ [10, 40] means n ∈ [7, 37]
        let expect: f64 = (7..=37u64).map(|n| (crate::arith::divisor_count(n) * crate::arith::divisor_count(n + 3)) as f64).sum();
        assert_eq!(hyp, expect);
    }

    #[test]
    fn budget_is_enforced() {
        let f = rational();
        let q = ShiftedSumQuery::new(
            &f,
            f.ring(),
            f.element(1, 0),
            SumRegion::Box(positive_box(&[1e6])),
            MultiplicativeFunction::divisor(),
        )
        .unwrap()
        .with_budget(1e3);
        assert!(matches!(sum_over_box(&q), Err(ShiftedError::Budget { .. })));
    }

    #[test]
    fn zero_on_primes_rhs_is_bare() {
        let f = rational();
        let r = essential_rhs(&f, &MultiplicativeFunction::zero_on_primes(), 100.0, 1.0, 0.1).unwrap();
        assert_eq!(r.euler_product, 1.0);
        assert_eq!(r.log_u_factor, 1.0);
        let e = std::f64::consts::E;
        assert!((r.value - 100.0 * (e * 100.0).ln().powf(-1.9)).abs() < 1e-12);
    }

    #[test]
    fn dyadic_with_empty_shells() {
        let f = rational();
        let p = DyadicParams { y: 2.0, epsilon: 0.5, a: 2.0, r_max: 3 };
        let rep = sum_dyadic_majorant(&f, &[12], &MultiplicativeFunction::zero_on_primes(), &f.ring(), &f.element(1, 0), p).unwrap();
        assert_eq!(rep.total, rep.x_pow_minus_a);
        assert_eq!(rep.x, 24.0);
    }

    #[test]
    fn fixed_box_without_admissible_n() {
        let f = rational();
        let lam = LambdaSpec::Ramanujan.build(&default_table());
        let mut w = WeightSpec::new(vec![12], vec![Order::Imaginary(0.0)], vec![0], 1.0, lam);
        w.truncation = Truncation::FixedBox(positive_box(&[3.0]));
        let s = weighted_archimedean_sum(&f, &w, &f.ring(), &f.element(-5, 0)).unwrap();
        assert_eq!(s.value, Complex64::new(0.0, 0.0));
        assert_eq!(s.terms, 0);
    }

    #[test]
    fn exponential_step_example() {
        let s = exponential_step(&[12], &[0.01], &[0.05], 1.0, 100.0);
        assert!(s.elementary_holds());
        assert!(s.small_component.is_some());
        assert!(s.small_component_holds());
    }
}
