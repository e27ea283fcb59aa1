//! Hyperbolic regions `R_{T,U}`, axis-aligned boxes, the box cover of a
//! region, and dyadic shells.

use crate::field::{FieldDescriptor, FieldError};
use crate::Real;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegionError {
    #[error("box side {0} is degenerate")]
    Degenerate(usize),
    #[error("need T >= 1 and U >= 1")]
    BadParameters,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// `[lo, hi]`, or `(lo, hi]` when `open_lo` is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
    #[serde(default)]
    pub open_lo: bool,
}

impl<T: Real> Interval<T> {
    pub fn closed(lo: T, hi: T) -> Self {
        Interval { lo, hi, open_lo: false }
    }

    pub fn left_open(lo: T, hi: T) -> Self {
        Interval { lo, hi, open_lo: true }
    }

    pub fn len(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, x: T) -> bool {
        let lo_ok = if self.open_lo { x > self.lo } else { x >= self.lo };
        lo_ok && x <= self.hi
    }
}

/// Product of intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox<T> {
    pub sides: Vec<Interval<T>>,
}

impl<T: Real> AxisBox<T> {
    pub fn new(sides: Vec<Interval<T>>) -> Self {
        AxisBox { sides }
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn volume(&self) -> T {
        self.sides.iter().fold(T::one(), |acc, s| acc * s.len())
    }

    pub fn contains(&self, x: &[T]) -> bool {
        self.sides.iter().zip(x).all(|(s, &v)| s.contains(v))
    }

    pub fn validate(&self) -> Result<(), RegionError> {
        for (i, s) in self.sides.iter().enumerate() {
            if !(s.hi > s.lo) || !s.lo.is_finite() || !s.hi.is_finite() {
                return Err(RegionError::Degenerate(i));
            }
        }
        Ok(())
    }

    /// Sides as `(lo, hi, open_lo)` triples in `f64`.
    pub fn bounds(&self) -> Vec<(f64, f64, bool)> {
        self.sides.iter().map(|s| (s.lo.to_f64_lossy(), s.hi.to_f64_lossy(), s.open_lo)).collect()
    }

    /// Componentwise scaling by positive factors.
    pub fn scaled(&self, factors: &[T]) -> Self {
        AxisBox {
            sides: self
                .sides
                .iter()
                .zip(factors)
                .map(|(s, &f)| Interval { lo: s.lo * f, hi: s.hi * f, open_lo: s.open_lo })
                .collect(),
        }
    }
}

/// `{x : x^𝟏 <= X, x >= T/U}` with `X = T^𝟏`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicRegion<T> {
    pub t: Vec<T>,
    pub u: T,
}

impl<T: Real> HyperbolicRegion<T> {
    pub fn new(t: Vec<T>, u: T) -> Result<Self, RegionError> {
        if t.is_empty() || t.iter().any(|&x| !(x >= T::one())) || !(u >= T::one()) {
            return Err(RegionError::BadParameters);
        }
        Ok(HyperbolicRegion { t, u })
    }

    pub fn dim(&self) -> usize {
        self.t.len()
    }

    pub fn x(&self) -> T {
        self.t.iter().fold(T::one(), |acc, &v| acc * v)
    }

    pub fn contains(&self, x: &[T]) -> bool {
        let prod = x.iter().fold(T::one(), |acc, &v| acc * v);
        prod <= self.x() && x.iter().zip(&self.t).all(|(&v, &t)| v >= t / self.u)
    }

    /// The bounding box `∏ [T_i/U, T_i U^{d-1}]`.
    pub fn bounding_box(&self) -> AxisBox<T> {
        let d = self.dim();
        let up = self.u.powi(d as i32 - 1);
        AxisBox::new(self.t.iter().map(|&t| Interval::closed(t / self.u, t * up)).collect())
    }

    /// `⌈log₂ U⌉`.
    pub fn log2_u(&self) -> i32 {
        let l = self.u.to_f64_lossy().log2();
        let c = l.ceil();
        // guard against U = 2^k computed as slightly above
        if (l - l.round()).abs() < 1e-12 {
            l.round() as i32
        } else {
            c as i32
        }
    }

    /// Explicit upper bound `d (⌈log₂ U⌉ + 2)^{d-1}` on the number of cover boxes.
    pub fn cover_count_bound(&self) -> usize {
        let d = self.dim();
        d * ((self.log2_u() + 2) as usize).pow(d as u32 - 1)
    }
}

/// All integer tuples of length `len` with entries in `[lo, hi]` and nonnegative sum.
fn tuples(len: usize, lo: i32, hi: i32) -> Vec<Vec<i32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for t in &out {
            for a in lo..=hi {
                let mut v = t.clone();
                v.push(a);
                next.push(v);
            }
        }
        out = next;
    }
    out.retain(|t| t.iter().sum::<i32>() >= 0);
    out
}

/// Boxes of volume `X` whose union contains `R_{T,U}`.
///
/// For each index `i` and each tuple `(a_j)_{j≠i}` with `a_j <= ⌈log₂U⌉` and
/// `Σ a_j >= 0`, the box is `[0, 2^{Σa_j} T_i] × ∏_j [T_j/2^{a_j}, T_j/2^{a_j-1}]`.
/// Supported for `d <= 2`, where the tuples need no lower cutoff.
pub fn cover_with_boxes<T: Real>(r: &HyperbolicRegion<T>) -> Vec<AxisBox<T>> {
    let d = r.dim();
    assert!(d <= 2, "box covers are implemented for d <= 2");
    if d == 1 {
        return vec![AxisBox::new(vec![Interval::closed(T::zero(), r.t[0])])];
    }
    let a_max = r.log2_u();
    let two = T::of(2.0);
    let mut out: Vec<AxisBox<T>> = Vec::new();
    for i in 0..d {
        for tuple in tuples(d - 1, 0, a_max) {
            let sum: i32 = tuple.iter().sum();
            let mut sides = Vec::with_capacity(d);
            let mut it = tuple.iter();
            for j in 0..d {
                if j == i {
                    sides.push(Interval::closed(T::zero(), two.powi(sum) * r.t[i]));
                } else {
                    let a = *it.next().expect("tuple covers the other indices");
                    sides.push(Interval::closed(r.t[j] / two.powi(a), r.t[j] / two.powi(a - 1)));
                }
            }
            let b = AxisBox::new(sides);
            if !out.contains(&b) {
                out.push(b);
            }
        }
    }
    out
}

/// `η·B` for the totally positive unit power `η = ε₊^k` that best equalizes the side lengths.
pub fn balance_box(f: &FieldDescriptor, b: &AxisBox<f64>) -> Result<(i64, AxisBox<f64>), RegionError> {
    b.validate()?;
    if f.degree() == 1 {
        return Ok((0, b.clone()));
    }
    let gap = b.sides[0].len().ln() - b.sides[1].len().ln();
    let k = f.balancing_exponent(gap);
    let eta = f.eps_plus.as_ref().expect("quadratic field has a unit").pow(k)?;
    let e = eta.embedding();
    Ok((k, b.scaled(&[e[0], e[1]])))
}

/// One dyadic shell: the region `R_{2^{r+1}T, 2^{r+1}U}` with weight `2^{-rdA}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shell<T> {
    pub r: u32,
    pub region: HyperbolicRegion<T>,
    pub weight: T,
}

pub fn dyadic_shells<T: Real>(r: &HyperbolicRegion<T>, r_max: u32, a: T) -> Vec<Shell<T>> {
    let d = T::of(r.dim() as f64);
    let two = T::of(2.0);
    (0..=r_max)
        .map(|k| {
            let scale = two.powi(k as i32 + 1);
            Shell {
                r: k,
                region: HyperbolicRegion { t: r.t.iter().map(|&t| t * scale).collect(), u: r.u * scale },
                weight: two.powf(-(T::of(k as f64) * d * a)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_field, FieldSpec};

    #[test]
    fn one_dimensional_cover() {
        let r = HyperbolicRegion::new(vec![10.0], 5.0).unwrap();
        let c = cover_with_boxes(&r);
        assert_eq!(c, vec![AxisBox::new(vec![Interval::closed(0.0, 10.0)])]);
        assert_eq!(c[0].volume(), 10.0);
    }

    #[test]
    fn degenerate_region_point_is_covered() {
        let r = HyperbolicRegion::new(vec![10.0, 10.0], 1.0).unwrap();
        let c = cover_with_boxes(&r);
        assert!(c.iter().any(|b| b.contains(&[10.0, 10.0])));
        assert!(c.len() <= r.cover_count_bound());
    }

    #[test]
    fn cover_volumes_and_count() {
        let r: HyperbolicRegion<f64> = HyperbolicRegion::new(vec![8.0, 8.0], 4.0).unwrap();
        let c = cover_with_boxes(&r);
        assert!(c.len() <= r.cover_count_bound());
        for b in &c {
            assert!((b.volume() - 64.0).abs() <= 64.0 * 1e-12);
        }
    }

    #[test]
    fn shells() {
        let r = HyperbolicRegion::new(vec![3.0], 2.0).unwrap();
        let s = dyadic_shells(&r, 0, 2.0);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].region.t, vec![6.0]);
        assert_eq!(s[0].region.u, 4.0);
        assert_eq!(s[0].weight, 1.0);
        let s = dyadic_shells(&r, 3, 2.0);
        assert_eq!(s[3].weight, 2f64.powi(-6));
    }

    #[test]
    fn balance_skewed_box() {
        let f = make_field(&FieldSpec::Quadratic(5), None).unwrap();
        let b = AxisBox::new(vec![Interval::closed(0.0, 100.0), Interval::closed(0.0, 1.0)]);
        let (k, out) = balance_box(&f, &b).unwrap();
        assert_ne!(k, 0);
        let ratio = out.sides[0].len() / out.sides[1].len();
        assert!(ratio.max(1.0 / ratio) <= f.unit_ratio());
        let (k0, same) = balance_box(&f, &out).unwrap();
        assert_eq!(k0, 0);
        assert_eq!(same, out);
    }
}
