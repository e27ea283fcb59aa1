//! Grid verifiers for `|2F1(1/2+ν, 1/2-ν; s; -x)| <= 1` and
//! `|Γ(s+ν)Γ(s-ν) / (Γ(s+1/2)Γ(s-1/2))| <= 1`.

use super::bessel::Order;
use super::gamma::log_gamma;
use super::hyper::hyp2f1;
use crate::par::map_ordered;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const PASS_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub nu: Order<f64>,
    pub s_re: f64,
    pub s_im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechnicalReport {
    pub lemma: String,
    pub points: usize,
    pub skipped: usize,
    pub max_value: f64,
    pub argmax: Option<GridPoint>,
    /// `false` for probes outside the proven region.
    pub in_hypothesis: bool,
    pub pass: bool,
}

/// Grid for the hypergeometric inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid1 {
    pub xs: Vec<f64>,
    pub orders: Vec<Order<f64>>,
    pub s_re: Vec<f64>,
    pub s_im: Vec<f64>,
}

/// Grid for the Gamma-quotient inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2 {
    pub orders: Vec<Order<f64>>,
    pub s_re: Vec<f64>,
    pub s_im: Vec<f64>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

impl Grid1 {
    /// 60 values of `x` (zero plus a log-spaced sweep up to `10^4`), six orders,
    /// six abscissae in `[1/2, 5]` and seven heights in `[-10, 10]`.
    pub fn default_grid() -> Self {
        let mut xs = vec![0.0];
        xs.extend((0..59).map(|i| 10f64.powf(-3.0 + 7.0 * i as f64 / 58.0)));
        Self {
            xs,
            orders: vec![
                Order::Imaginary(0.0),
                Order::Imaginary(0.3),
                Order::Imaginary(2.0),
                Order::Imaginary(10.0),
                Order::Real(0.49),
                Order::Real(-0.49),
            ],
            s_re: linspace(0.5, 5.0, 6),
            s_im: linspace(-10.0, 10.0, 7),
        }
    }

    /// The same grid moved to `Re s = 0.4`, outside the proven region.
    pub fn probe_grid() -> Self {
        Self { s_re: vec![0.4], ..Self::default_grid() }
    }

    fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.xs.len() * self.orders.len() * self.s_re.len() * self.s_im.len());
        for &nu in &self.orders {
            for &s_re in &self.s_re {
                for &s_im in &self.s_im {
                    for &x in &self.xs {
                        out.push(GridPoint { x, nu, s_re, s_im });
                    }
                }
            }
        }
        out
    }
}

impl Grid2 {
    /// Twelve orders, eight abscissae in `[1, 8]` and 105 heights in `[-52, 52]`.
    pub fn default_grid() -> Self {
        let mut orders: Vec<Order<f64>> = [0.0, 0.1, 0.5, 1.0, 3.0, 10.0, 30.0].iter().map(|&r| Order::Imaginary(r)).collect();
        orders.extend([-0.4999, -0.25, 0.1, 0.3, 0.4999].iter().map(|&v| Order::Real(v)));
        Self { orders, s_re: linspace(1.0, 8.0, 8), s_im: linspace(-52.0, 52.0, 105) }
    }

    /// Abscissae in `[1/2, 1)`, where the inequality is only conjectured.
    pub fn probe_grid() -> Self {
        Self { s_re: linspace(0.5, 0.95, 4), ..Self::default_grid() }
    }

    fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &nu in &self.orders {
            for &s_re in &self.s_re {
                for &s_im in &self.s_im {
                    out.push(GridPoint { x: 0.0, nu, s_re, s_im });
                }
            }
        }
        out
    }
}

fn summarize(lemma: &str, pts: &[GridPoint], vals: Vec<Option<f64>>, in_hypothesis: bool) -> TechnicalReport {
    let mut max_value = f64::NEG_INFINITY;
    let mut argmax = None;
    let mut skipped = 0;
    for (p, v) in pts.iter().zip(vals) {
        match v {
            Some(v) if v.is_finite() => {
                if v > max_value {
                    max_value = v;
                    argmax = Some(*p);
                }
            }
            _ => skipped += 1,
        }
    }
    TechnicalReport {
        lemma: lemma.to_string(),
        points: pts.len(),
        skipped,
        max_value,
        argmax,
        in_hypothesis,
        pass: skipped == 0 && max_value <= 1.0 + PASS_SLACK,
    }
}

/// Maximum of `|2F1(1/2+ν, 1/2-ν; s; -x)|` over the grid.
pub fn verify_technical_1(grid: &Grid1) -> TechnicalReport {
    let pts = grid.points();
    let vals = map_ordered(&pts, |p| {
        let nu = p.nu.nu();
        let half = Complex64::new(0.5, 0.0);
        hyp2f1(half + nu, half - nu, Complex64::new(p.s_re, p.s_im), -p.x).ok().map(|e| e.value.norm())
    });
    let proven = grid.s_re.iter().all(|&s| s >= 0.5);
    summarize("technical-1", &pts, vals, proven)
}

/// Maximum of `|Γ(s+ν)Γ(s-ν) / (Γ(s+1/2)Γ(s-1/2))|` over the grid.
pub fn verify_technical_2(grid: &Grid2) -> TechnicalReport {
    let pts = grid.points();
    let vals = map_ordered(&pts, |p| {
        let nu = p.nu.nu();
        let s = Complex64::new(p.s_re, p.s_im);
        let h = 0.5;
        let log = log_gamma(s + nu).ok()? + log_gamma(s - nu).ok()? - log_gamma(s + h).ok()? - log_gamma(s - h).ok()?;
        Some(log.re.exp())
    });
    let proven = grid.s_re.iter().all(|&s| s >= 1.0);
    summarize("technical-2", &pts, vals, proven)
}
