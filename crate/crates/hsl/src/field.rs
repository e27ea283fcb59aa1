//! Exact arithmetic in `Q` and real quadratic fields `Q(√D)`.
//!
//! Elements are pairs of rationals on the integral basis `{1, ω}`, where `ω`
//! is the root `(t + √Δ)/2` of `x² - t x + n`. Ideals are `Z`-lattices kept in
//! Hermite normal form over that basis.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::sync::OnceLock;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("D = {0} is not a squarefree integer > 1")]
    NotSquarefree(i64),
    #[error("cannot parse field specification {0:?}")]
    BadSpec(String),
    #[error("narrow class number is not 1; supply narrow_class_reps")]
    NeedClassReps,
    #[error("element is not in the ideal")]
    NotInIdeal,
    #[error("zero element")]
    Zero,
    #[error("ideal basis is degenerate")]
    Degenerate,
    #[error("an embedding of the element vanishes")]
    ZeroEmbedding,
}

fn q(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Arithmetic context shared by all elements of one field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Quad {
    pub degree: u8,
    /// Squarefree `D`; `1` for `Q`.
    pub d: i64,
    /// Discriminant `Δ`.
    pub disc: i64,
    /// Trace of `ω`.
    pub tr: i64,
    /// Norm of `ω`.
    pub nm: i64,
}

impl Quad {
    pub fn rational() -> Self {
        Quad { degree: 1, d: 1, disc: 1, tr: 0, nm: 0 }
    }

    pub fn quadratic(d: i64) -> Self {
        if d.rem_euclid(4) == 1 {
            Quad { degree: 2, d, disc: d, tr: 1, nm: (1 - d) / 4 }
        } else {
            Quad { degree: 2, d, disc: 4 * d, tr: 0, nm: -d }
        }
    }

    pub fn sqrt_disc(&self) -> f64 {
        (self.disc as f64).sqrt()
    }
}

/// `p + q √Δ` with rational `p, q`, for exact sign decisions.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadReal {
    pub p: BigRational,
    pub q: BigRational,
    pub disc: i64,
}

impl QuadReal {
    pub fn signum(&self) -> i32 {
        let sp = sign_of(&self.p);
        let sq = sign_of(&self.q);
        if sq == 0 || sp == sq {
            return if sp != 0 { sp } else { sq };
        }
        if sp == 0 {
            return sq;
        }
        // opposite signs: compare p² with q²Δ
        let lhs = &self.p * &self.p;
        let rhs = &self.q * &self.q * q(self.disc);
        match lhs.cmp(&rhs) {
            Ordering::Greater => sp,
            Ordering::Less => sq,
            Ordering::Equal => 0,
        }
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.p) + to_f64(&self.q) * (self.disc as f64).sqrt()
    }

    pub fn mul(&self, o: &Self) -> Self {
        debug_assert_eq!(self.disc, o.disc);
        QuadReal {
            p: &self.p * &o.p + &self.q * &o.q * q(self.disc),
            q: &self.p * &o.q + &self.q * &o.p,
            disc: self.disc,
        }
    }

    /// Sign of `self - x`, decided exactly when the two are close.
    pub fn cmp_f64(&self, x: f64) -> i32 {
        let v = self.to_f64();
        let tol = 1e-9 * (1.0 + x.abs().max(v.abs()));
        if (v - x).abs() > tol {
            return if v > x { 1 } else { -1 };
        }
        let mut d = self.clone();
        d.p -= BigRational::from_float(x).expect("finite bound");
        d.signum()
    }
}

fn sign_of(x: &BigRational) -> i32 {
    if x.is_positive() {
        1
    } else if x.is_negative() {
        -1
    } else {
        0
    }
}

/// `a + b ω` with exact rational coordinates and cached real embeddings.
#[derive(Clone, Debug)]
pub struct FieldElement {
    pub ctx: Quad,
    pub a: BigRational,
    pub b: BigRational,
    emb: [f64; 2],
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b
    }
}

impl Eq for FieldElement {}

impl PartialOrd for FieldElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FieldElement {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.a, &self.b).cmp(&(&other.a, &other.b))
    }
}

impl std::hash::Hash for FieldElement {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.a.hash(state);
        self.b.hash(state);
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ctx.degree == 1 || self.b.is_zero() {
            write!(f, "{}", self.a)
        } else {
            write!(f, "{} + {}*w", self.a, self.b)
        }
    }
}

impl FieldElement {
    pub fn new(ctx: Quad, a: BigRational, b: BigRational) -> Self {
        let b = if ctx.degree == 1 { BigRational::zero() } else { b };
        let emb = embed_exact(ctx, &a, &b);
        FieldElement { ctx, a, b, emb }
    }

    pub fn from_ints(ctx: Quad, a: i64, b: i64) -> Self {
        Self::new(ctx, q(a), q(b))
    }

    pub fn from_rational(ctx: Quad, a: BigRational) -> Self {
        Self::new(ctx, a, BigRational::zero())
    }

    pub fn zero(ctx: Quad) -> Self {
        Self::from_ints(ctx, 0, 0)
    }

    pub fn one(ctx: Quad) -> Self {
        Self::from_ints(ctx, 1, 0)
    }

    pub fn omega(ctx: Quad) -> Self {
        Self::from_ints(ctx, 0, 1)
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    /// Real embeddings (one entry for `Q`).
    pub fn embedding(&self) -> &[f64] {
        &self.emb[..self.ctx.degree as usize]
    }

    /// The `i`-th embedding as an exact `p + q√Δ`.
    pub fn exact_embedding(&self, i: usize) -> QuadReal {
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let p = &self.a + &self.b * q(self.ctx.tr) * &half;
        let mut qq = &self.b * &half;
        if i == 1 {
            qq = -qq;
        }
        if self.ctx.degree == 1 {
            qq = BigRational::zero();
        }
        QuadReal { p, q: qq, disc: self.ctx.disc }
    }

    pub fn is_totally_positive(&self) -> bool {
        (0..self.ctx.degree as usize).all(|i| self.exact_embedding(i).signum() > 0)
    }

    pub fn is_integral(&self) -> bool {
        self.a.is_integer() && self.b.is_integer()
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.ctx, &self.a + &o.a, &self.b + &o.b)
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(self.ctx, &self.a - &o.a, &self.b - &o.b)
    }

    pub fn neg(&self) -> Self {
        Self::new(self.ctx, -&self.a, -&self.b)
    }

    pub fn mul(&self, o: &Self) -> Self {
        // ω² = t ω - n
        let bb = &self.b * &o.b;
        let a = &self.a * &o.a - &bb * q(self.ctx.nm);
        let b = &self.a * &o.b + &self.b * &o.a + &bb * q(self.ctx.tr);
        Self::new(self.ctx, a, b)
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        Self::new(self.ctx, &self.a * c, &self.b * c)
    }

    pub fn conj(&self) -> Self {
        if self.ctx.degree == 1 {
            return self.clone();
        }
        Self::new(self.ctx, &self.a + &self.b * q(self.ctx.tr), -&self.b)
    }

    pub fn norm(&self) -> BigRational {
        if self.ctx.degree == 1 {
            return self.a.clone();
        }
        &self.a * &self.a + &self.a * &self.b * q(self.ctx.tr) + &self.b * &self.b * q(self.ctx.nm)
    }

    pub fn trace(&self) -> BigRational {
        if self.ctx.degree == 1 {
            return self.a.clone();
        }
        &self.a * q(2) + &self.b * q(self.ctx.tr)
    }

    pub fn inv(&self) -> Result<Self, FieldError> {
        let n = self.norm();
        if n.is_zero() {
            return Err(FieldError::Zero);
        }
        if self.ctx.degree == 1 {
            return Ok(Self::new(self.ctx, n.recip(), BigRational::zero()));
        }
        Ok(self.conj().scale(&n.recip()))
    }

    pub fn pow(&self, k: i64) -> Result<Self, FieldError> {
        let base = if k < 0 { self.inv()? } else { self.clone() };
        let mut acc = Self::one(self.ctx);
        for _ in 0..k.unsigned_abs() {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    /// Least common denominator of the coordinates.
    pub fn denominator(&self) -> BigInt {
        self.a.denom().lcm(self.b.denom())
    }
}

fn embed_exact(ctx: Quad, a: &BigRational, b: &BigRational) -> [f64; 2] {
    if ctx.degree == 1 {
        return [to_f64(a), 0.0];
    }
    let x = to_f64(a) + to_f64(b) * ctx.tr as f64 / 2.0;
    let y = to_f64(b) * ctx.sqrt_disc() / 2.0;
    let (e1, e2) = (x + y, x - y);
    // recover the smaller embedding from the norm to avoid cancellation
    let norm = to_f64(&(a * a + a * b * q(ctx.tr) + b * b * q(ctx.nm)));
    if e1.abs() >= e2.abs() && e1 != 0.0 {
        [e1, norm / e1]
    } else if e2 != 0.0 {
        [norm / e2, e2]
    } else {
        [e1, e2]
    }
}

/// A fractional ideal `(1/den)·(Z a + Z (b + c ω))` in Hermite normal form.
///
/// For `Q` only `a` is meaningful and `b = 0`, `c = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FractionalIdeal {
    pub ctx: Quad,
    pub den: BigInt,
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
    pub generator: Option<(BigRational, BigRational)>,
}

impl fmt::Display for FractionalIdeal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ctx.degree == 1 {
            write!(f, "({})", BigRational::new(self.a.clone(), self.den.clone()))
        } else {
            write!(f, "[{}, {} + {}w]/{}", self.a, self.b, self.c, self.den)
        }
    }
}

/// Hermite normal form `(a, b, c)` of the `Z`-span of integer vectors `(x, y)`.
fn hnf(vectors: &[(BigInt, BigInt)], degree: u8) -> Option<(BigInt, BigInt, BigInt)> {
    if degree == 1 {
        let mut g = BigInt::zero();
        for (x, _) in vectors {
            g = g.gcd(x);
        }
        return if g.is_zero() { None } else { Some((g, BigInt::zero(), BigInt::one())) };
    }
    // reduce second coordinates to a single pivot by Euclid
    let mut pivot: Option<(BigInt, BigInt)> = None;
    let mut firsts: Vec<BigInt> = Vec::new();
    for (x, y) in vectors {
        let mut cur = (x.clone(), y.clone());
        if cur.1.is_zero() {
            firsts.push(cur.0);
            continue;
        }
        match pivot.take() {
            None => pivot = Some(cur),
            Some(mut p) => {
                while !cur.1.is_zero() {
                    let t = p.1.div_floor(&cur.1);
                    let nx = &p.0 - &t * &cur.0;
                    let ny = &p.1 - &t * &cur.1;
                    p = cur;
                    cur = (nx, ny);
                }
                firsts.push(cur.0);
                pivot = Some(p);
            }
        }
    }
    let (mut px, mut py) = pivot?;
    if py.is_negative() {
        px = -px;
        py = -py;
    }
    let mut a = BigInt::zero();
    for f in &firsts {
        a = a.gcd(f);
    }
    if a.is_zero() {
        return None;
    }
    let b = px.mod_floor(&a);
    Some((a, b, py))
}

impl FractionalIdeal {
    /// The `Z`-span of the given elements (which must span a full lattice).
    pub fn from_z_span(ctx: Quad, elems: &[FieldElement]) -> Result<Self, FieldError> {
        let mut den = BigInt::one();
        for e in elems {
            den = den.lcm(&e.denominator());
        }
        let dq = BigRational::from_integer(den.clone());
        let vecs: Vec<(BigInt, BigInt)> = elems
            .iter()
            .map(|e| ((&e.a * &dq).to_integer(), (&e.b * &dq).to_integer()))
            .collect();
        let (a, b, c) = hnf(&vecs, ctx.degree).ok_or(FieldError::Degenerate)?;
        Ok(Self::normalized(ctx, den, a, b, c, None))
    }

    fn normalized(ctx: Quad, den: BigInt, a: BigInt, b: BigInt, c: BigInt, generator: Option<(BigRational, BigRational)>) -> Self {
        let g = den.gcd(&a).gcd(&b).gcd(&c);
        let (den, a, b, c) = if ctx.degree == 1 {
            let g = den.gcd(&a);
            (&den / &g, &a / &g, BigInt::zero(), BigInt::one())
        } else {
            (&den / &g, &a / &g, &b / &g, &c / &g)
        };
        FractionalIdeal { ctx, den, a, b, c, generator }
    }

    /// The ideal generated by a list of elements as an `O`-module.
    pub fn from_generators(ctx: Quad, gens: &[FieldElement]) -> Result<Self, FieldError> {
        let w = FieldElement::omega(ctx);
        let mut span = Vec::new();
        for g in gens {
            span.push(g.clone());
            if ctx.degree == 2 {
                span.push(g.mul(&w));
            }
        }
        Self::from_z_span(ctx, &span)
    }

    pub fn principal(g: &FieldElement) -> Result<Self, FieldError> {
        if g.is_zero() {
            return Err(FieldError::Zero);
        }
        let mut id = Self::from_generators(g.ctx, std::slice::from_ref(g))?;
        id.generator = Some((g.a.clone(), g.b.clone()));
        Ok(id)
    }

    pub fn unit(ctx: Quad) -> Self {
        FractionalIdeal {
            ctx,
            den: BigInt::one(),
            a: BigInt::one(),
            b: BigInt::zero(),
            c: BigInt::one(),
            generator: Some((BigRational::one(), BigRational::zero())),
        }
    }

    /// From a `d×d` rational basis matrix whose rows are `Z`-basis elements.
    pub fn from_basis_rows(ctx: Quad, rows: &[(BigRational, BigRational)]) -> Result<Self, FieldError> {
        let elems: Vec<FieldElement> = rows.iter().map(|(a, b)| FieldElement::new(ctx, a.clone(), b.clone())).collect();
        let id = Self::from_z_span(ctx, &elems)?;
        if elems.len() != ctx.degree as usize {
            return Err(FieldError::Degenerate);
        }
        Ok(id)
    }

    /// `Z`-basis elements.
    pub fn basis(&self) -> Vec<FieldElement> {
        let d = BigRational::from_integer(self.den.clone());
        let e1 = FieldElement::from_rational(self.ctx, BigRational::from_integer(self.a.clone()) / &d);
        if self.ctx.degree == 1 {
            return vec![e1];
        }
        let e2 = FieldElement::new(
            self.ctx,
            BigRational::from_integer(self.b.clone()) / &d,
            BigRational::from_integer(self.c.clone()) / &d,
        );
        vec![e1, e2]
    }

    /// Index relative to `O`, i.e. the absolute norm.
    pub fn norm(&self) -> BigRational {
        let num = if self.ctx.degree == 1 { self.a.clone() } else { &self.a * &self.c };
        let den = num_traits::pow(self.den.clone(), self.ctx.degree as usize);
        BigRational::new(num, den)
    }

    pub fn norm_f64(&self) -> f64 {
        to_f64(&self.norm())
    }

    pub fn is_integral(&self) -> bool {
        let one = FieldElement::one(self.ctx);
        let unit = FractionalIdeal::unit(self.ctx);
        let _ = one;
        unit.contains_ideal(self)
    }

    /// Integer coordinates of `x` on [`basis`](Self::basis), or `None` if `x` is not a member.
    pub fn coords(&self, x: &FieldElement) -> Option<[BigInt; 2]> {
        let d = BigRational::from_integer(self.den.clone());
        let xa = &x.a * &d;
        let xb = &x.b * &d;
        if self.ctx.degree == 1 {
            let t = xa / BigRational::from_integer(self.a.clone());
            return if t.is_integer() { Some([t.to_integer(), BigInt::zero()]) } else { None };
        }
        let t2 = xb / BigRational::from_integer(self.c.clone());
        if !t2.is_integer() {
            return None;
        }
        let t2 = t2.to_integer();
        let t1 = (xa - BigRational::from_integer(&t2 * &self.b)) / BigRational::from_integer(self.a.clone());
        if !t1.is_integer() {
            return None;
        }
        Some([t1.to_integer(), t2])
    }

    pub fn contains(&self, x: &FieldElement) -> bool {
        self.coords(x).is_some()
    }

    /// `other ⊆ self`, i.e. `self` divides `other`.
    pub fn contains_ideal(&self, other: &Self) -> bool {
        other.basis().iter().all(|e| self.contains(e))
    }

    pub fn element(&self, coords: &[BigInt; 2]) -> FieldElement {
        let b = self.basis();
        let c0 = BigRational::from_integer(coords[0].clone());
        let mut e = b[0].scale(&c0);
        if self.ctx.degree == 2 {
            e = e.add(&b[1].scale(&BigRational::from_integer(coords[1].clone())));
        }
        e
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut span = Vec::new();
        for x in self.basis() {
            for y in o.basis() {
                span.push(x.mul(&y));
            }
        }
        let mut id = Self::from_z_span(self.ctx, &span).expect("product of nonzero ideals is full rank");
        if let (Some(g1), Some(g2)) = (&self.generator, &o.generator) {
            let e1 = FieldElement::new(self.ctx, g1.0.clone(), g1.1.clone());
            let e2 = FieldElement::new(self.ctx, g2.0.clone(), g2.1.clone());
            let g = e1.mul(&e2);
            id.generator = Some((g.a, g.b));
        }
        id
    }

    pub fn scale(&self, x: &FieldElement) -> Result<Self, FieldError> {
        Ok(self.mul(&FractionalIdeal::principal(x)?))
    }

    pub fn conj(&self) -> Self {
        let b: Vec<FieldElement> = self.basis().iter().map(|e| e.conj()).collect();
        Self::from_z_span(self.ctx, &b).expect("conjugate lattice is full rank")
    }

    /// `I⁻¹ = conj(I) / N(I)`.
    pub fn inv(&self) -> Self {
        let n = self.norm().recip();
        let n = if self.ctx.degree == 1 { &n * &n } else { n };
        let b: Vec<FieldElement> = self.conj().basis().iter().map(|e| e.scale(&n)).collect();
        let mut id = Self::from_z_span(self.ctx, &b).expect("inverse lattice is full rank");
        if let Some(g) = &self.generator {
            let e = FieldElement::new(self.ctx, g.0.clone(), g.1.clone());
            if let Ok(inv) = e.inv() {
                id.generator = Some((inv.a, inv.b));
            }
        }
        id
    }

    pub fn generator_element(&self) -> Option<FieldElement> {
        self.generator.as_ref().map(|g| FieldElement::new(self.ctx, g.0.clone(), g.1.clone()))
    }

    /// Lattice equality, ignoring cached generators.
    pub fn same_lattice(&self, o: &Self) -> bool {
        self.den == o.den && self.a == o.a && self.b == o.b && self.c == o.c
    }

    /// Hermite basis of a sublattice `sub ⊆ self` in `self`-coordinates:
    /// rows `(α, 0)` and `(β, γ)` with `0 <= β < α` and `αγ = [self : sub]`.
    pub fn relative_hnf(&self, sub: &Self) -> Option<RelativeLattice> {
        let vecs: Vec<(BigInt, BigInt)> = sub
            .basis()
            .iter()
            .map(|e| self.coords(e).map(|c| (c[0].clone(), c[1].clone())))
            .collect::<Option<_>>()?;
        let (a, b, c) = hnf(&vecs, self.ctx.degree)?;
        Some(RelativeLattice { alpha: a, beta: b, gamma: c })
    }

    /// Embedding matrix: `m[i][k]` is the `i`-th embedding of basis vector `k`.
    pub fn embedding_matrix(&self) -> Vec<Vec<f64>> {
        let b = self.basis();
        let d = self.ctx.degree as usize;
        (0..d).map(|i| (0..d).map(|k| b[k].embedding()[i]).collect()).collect()
    }
}

/// A full-rank sublattice in Hermite form relative to an ambient lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelativeLattice {
    pub alpha: BigInt,
    pub beta: BigInt,
    pub gamma: BigInt,
}

impl RelativeLattice {
    pub fn index(&self) -> BigInt {
        &self.alpha * &self.gamma
    }

    /// Canonical residue of ambient coordinates modulo the sublattice,
    /// as an index in `0..index`.
    pub fn residue(&self, c: &[BigInt; 2]) -> u64 {
        let t = c[1].div_floor(&self.gamma);
        let c2 = &c[1] - &t * &self.gamma;
        let c1 = (&c[0] - &t * &self.beta).mod_floor(&self.alpha);
        (c1 + &self.alpha * c2).to_u64().expect("residue index fits in u64")
    }

    /// Coordinates of the residue with the given index.
    pub fn representative(&self, idx: u64) -> [BigInt; 2] {
        let i = BigInt::from(idx);
        let (c2, c1) = i.div_mod_floor(&self.alpha);
        [c1, c2]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Splitting {
    Split,
    Inert,
    Ramified,
}

/// A prime ideal of `O`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PrimeIdeal {
    pub p: u64,
    pub f: u8,
    pub splitting: Splitting,
    /// Root `r` of the minimal polynomial of `ω` mod `p`, with `𝔭 = (p, ω - r)`.
    pub root: Option<u64>,
    /// `0` or `1` to tell the two primes above a split `p` apart.
    pub index: u8,
    pub ideal: FractionalIdeal,
}

impl PartialOrd for PrimeIdeal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PrimeIdeal {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.p, self.index).cmp(&(other.p, other.index))
    }
}

impl PrimeIdeal {
    pub fn norm(&self) -> u64 {
        self.p.pow(self.f as u32)
    }

    /// Ramification index.
    pub fn e(&self) -> u8 {
        if self.splitting == Splitting::Ramified {
            2
        } else {
            1
        }
    }

    /// Valuation of a nonzero integral element.
    fn valuation_integral(&self, a: &BigInt, b: &BigInt, ctx: Quad) -> i64 {
        let p = BigInt::from(self.p);
        if ctx.degree == 1 {
            return vp(a, &p);
        }
        let j = vp(a, &p).min(vp(b, &p));
        let pj = num_traits::pow(p.clone(), j as usize);
        let (a1, b1) = (a / &pj, b / &pj);
        let nb = &a1 * &a1 + &a1 * &b1 * ctx.tr + &b1 * &b1 * ctx.nm;
        match self.splitting {
            Splitting::Inert => j,
            Splitting::Ramified => 2 * j + vp(&nb, &p),
            Splitting::Split => {
                let r = BigInt::from(self.root.expect("split prime has a root"));
                if (&a1 + &b1 * r).mod_floor(&p).is_zero() {
                    j + vp(&nb, &p)
                } else {
                    j
                }
            }
        }
    }

    /// `v_𝔭(x)` for nonzero `x`.
    pub fn valuation(&self, x: &FieldElement) -> i64 {
        let d = x.denominator();
        let dq = BigRational::from_integer(d.clone());
        let a = (&x.a * &dq).to_integer();
        let b = (&x.b * &dq).to_integer();
        self.valuation_integral(&a, &b, x.ctx) - self.e() as i64 * vp(&d, &BigInt::from(self.p))
    }

    /// `v_𝔭(I)` for a nonzero fractional ideal.
    pub fn ideal_valuation(&self, id: &FractionalIdeal) -> i64 {
        let ctx = id.ctx;
        let e = self.e() as i64;
        let p = BigInt::from(self.p);
        let mut v = i64::MAX;
        let gens: Vec<(BigInt, BigInt)> = if ctx.degree == 1 {
            vec![(id.a.clone(), BigInt::zero())]
        } else {
            vec![(id.a.clone(), BigInt::zero()), (id.b.clone(), id.c.clone())]
        };
        for (a, b) in gens {
            if a.is_zero() && b.is_zero() {
                continue;
            }
            v = v.min(self.valuation_integral(&a, &b, ctx));
        }
        v - e * vp(&id.den, &p)
    }
}

fn vp(x: &BigInt, p: &BigInt) -> i64 {
    if x.is_zero() {
        return i64::MAX / 4;
    }
    let mut n = x.abs();
    let mut k = 0;
    loop {
        let (q, r) = n.div_rem(p);
        if !r.is_zero() {
            return k;
        }
        n = q;
        k += 1;
    }
}

/// Factorization of a fractional ideal into prime ideals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdealFactorization {
    pub factors: Vec<(PrimeIdeal, i64)>,
    /// Exact norm of the factored ideal.
    pub norm: BigRational,
}

impl IdealFactorization {
    pub fn one() -> Self {
        IdealFactorization { factors: Vec::new(), norm: BigRational::one() }
    }

    pub fn is_integral(&self) -> bool {
        self.factors.iter().all(|(_, e)| *e >= 0)
    }

    pub fn exponent(&self, p: &PrimeIdeal) -> i64 {
        self.factors.iter().find(|(q, _)| q == p).map(|(_, e)| *e).unwrap_or(0)
    }

    /// Multiplies two factorizations (adds exponents).
    pub fn mul(&self, o: &Self) -> Self {
        self.combine(o, 1)
    }

    /// Divides by another factorization (subtracts exponents).
    pub fn div(&self, o: &Self) -> Self {
        self.combine(o, -1)
    }

    fn combine(&self, o: &Self, sign: i64) -> Self {
        let mut map: std::collections::BTreeMap<PrimeIdeal, i64> = std::collections::BTreeMap::new();
        for (p, e) in &self.factors {
            *map.entry(p.clone()).or_default() += e;
        }
        for (p, e) in &o.factors {
            *map.entry(p.clone()).or_default() += sign * e;
        }
        let norm = if sign > 0 { &self.norm * &o.norm } else { &self.norm / &o.norm };
        IdealFactorization { factors: map.into_iter().filter(|(_, e)| *e != 0).collect(), norm }
    }

    /// Part supported on primes of norm `<= z`.
    pub fn smooth_part(&self, z: f64) -> Self {
        let factors: Vec<(PrimeIdeal, i64)> =
            self.factors.iter().filter(|(p, _)| (p.norm() as f64) <= z).cloned().collect();
        Self::from_factors(factors)
    }

    pub fn from_factors(factors: Vec<(PrimeIdeal, i64)>) -> Self {
        let mut norm = BigRational::one();
        for (p, e) in &factors {
            let pn = BigRational::from_integer(BigInt::from(p.norm()));
            norm *= num_traits::pow::pow(if *e >= 0 { pn.clone() } else { pn.recip() }, e.unsigned_abs() as usize);
        }
        let mut factors = factors;
        factors.sort_by(|a, b| a.0.cmp(&b.0));
        IdealFactorization { factors, norm }
    }

    /// Componentwise minimum of exponents.
    pub fn gcd(&self, o: &Self) -> Self {
        let mut out = Vec::new();
        for (p, e) in &self.factors {
            let f = o.exponent(p);
            let m = (*e).min(f);
            if m != 0 {
                out.push((p.clone(), m));
            }
        }
        Self::from_factors(out)
    }

    pub fn divides(&self, o: &Self) -> bool {
        self.factors.iter().all(|(p, e)| o.exponent(p) >= *e)
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn to_ideal(&self, ctx: Quad) -> FractionalIdeal {
        let mut id = FractionalIdeal::unit(ctx);
        for (p, e) in &self.factors {
            let base = if *e >= 0 { p.ideal.clone() } else { p.ideal.inv() };
            for _ in 0..e.unsigned_abs() {
                id = id.mul(&base);
            }
        }
        id
    }
}

impl fmt::Display for IdealFactorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "(1)");
        }
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|(p, e)| {
                let name = match p.splitting {
                    Splitting::Split => format!("P{}_{}", p.p, p.index),
                    _ => format!("P{}", p.p),
                };
                if *e == 1 {
                    name
                } else {
                    format!("{name}^{e}")
                }
            })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// Primes up to `10^6`, computed once.
pub fn small_primes() -> &'static [u64] {
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| primes_up_to(1_000_000))
}

pub fn primes_up_to(n: u64) -> Vec<u64> {
    let n = n as usize;
    let mut sieve = vec![true; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if sieve[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                sieve[j] = false;
                j += i;
            }
        }
    }
    out
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in small_primes() {
        if p * p > n {
            return true;
        }
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = 1_000_003u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Prime factorization of a positive integer.
pub fn factor_integer(n: &BigInt) -> Vec<(u64, u32)> {
    let mut n = n.abs();
    let mut out = Vec::new();
    if n.is_zero() {
        return out;
    }
    for &p in small_primes() {
        let pb = BigInt::from(p);
        if &pb * &pb > n {
            break;
        }
        let mut k = 0;
        while (&n % &pb).is_zero() {
            n /= &pb;
            k += 1;
        }
        if k > 0 {
            out.push((p, k));
        }
    }
    if n > BigInt::one() {
        let p = n.to_u64().expect("cofactor beyond trial-division range");
        if let Some(last) = out.last_mut().filter(|l| l.0 == p) {
            last.1 += 1;
        } else {
            out.push((p, 1));
        }
    }
    out
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u128;
    let mut bb = (b % m) as u128;
    let mm = m as u128;
    while e > 0 {
        if e & 1 == 1 {
            r = r * bb % mm;
        }
        bb = bb * bb % mm;
        e >>= 1;
    }
    b = r as u64;
    b
}

/// Square root of `a` modulo an odd prime `p` (Tonelli–Shanks), if one exists.
pub fn sqrt_mod(a: u64, p: u64) -> Option<u64> {
    let a = a % p;
    if a == 0 {
        return Some(0);
    }
    if pow_mod(a, (p - 1) / 2, p) != 1 {
        return None;
    }
    let (mut qq, mut s) = (p - 1, 0u32);
    while qq % 2 == 0 {
        qq /= 2;
        s += 1;
    }
    let mut z = 2;
    while pow_mod(z, (p - 1) / 2, p) != p - 1 {
        z += 1;
    }
    let mul = |x: u64, y: u64| ((x as u128 * y as u128) % p as u128) as u64;
    let mut m = s;
    let mut c = pow_mod(z, qq, p);
    let mut t = pow_mod(a, qq, p);
    let mut r = pow_mod(a, qq.div_ceil(2), p);
    while t != 1 {
        let mut i = 0;
        let mut tt = t;
        while tt != 1 {
            tt = mul(tt, tt);
            i += 1;
        }
        let b = pow_mod(c, 1 << (m - i - 1), p);
        m = i;
        c = mul(b, b);
        t = mul(t, c);
        r = mul(r, b);
    }
    Some(r)
}

/// An axis-aligned box with closed sides (optionally open at the lower end).
pub type Bounds = [(f64, f64, bool)];

/// Description of a totally real field of degree 1 or 2.
#[derive(Clone, Debug)]
pub struct FieldDescriptor {
    pub ctx: Quad,
    /// Fundamental totally positive unit (`None` for `Q`).
    pub eps_plus: Option<FieldElement>,
    /// Fundamental unit (`None` for `Q`).
    pub fundamental_unit: Option<FieldElement>,
    pub different: FractionalIdeal,
    pub narrow_class_reps: Vec<FractionalIdeal>,
    /// Whether the representatives were supplied by the caller.
    pub reps_supplied: bool,
}

/// How to build a field.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldSpec {
    Rational,
    Quadratic(i64),
}

impl FieldSpec {
    /// Parses `"Q"`, `"rational"` or `"Q(sqrt D)"`.
    pub fn parse(s: &str) -> Result<Self, FieldError> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let lower = t.to_ascii_lowercase();
        if lower == "q" || lower == "rational" {
            return Ok(FieldSpec::Rational);
        }
        let inner = lower
            .strip_prefix("q(sqrt")
            .and_then(|r| r.strip_suffix(')'))
            .map(|r| r.trim_start_matches('(').trim_end_matches(')'))
            .ok_or_else(|| FieldError::BadSpec(s.to_string()))?;
        let d: i64 = inner.parse().map_err(|_| FieldError::BadSpec(s.to_string()))?;
        Ok(FieldSpec::Quadratic(d))
    }
}

fn is_squarefree(d: i64) -> bool {
    if d < 2 {
        return false;
    }
    let mut k = 2i64;
    while k * k <= d {
        if d % (k * k) == 0 {
            return false;
        }
        k += 1;
    }
    true
}

fn isqrt_big(n: &BigInt) -> BigInt {
    n.sqrt()
}

/// Smallest unit `> 1` from the continued fraction of `-ω̄`.
fn fundamental_unit(ctx: Quad) -> FieldElement {
    // -ω̄ = (P + √D)/Q
    let (mut pp, mut qq) = if ctx.tr == 1 { (BigInt::from(-1), BigInt::from(2)) } else { (BigInt::zero(), BigInt::one()) };
    let dd = BigInt::from(ctx.d);
    let s = isqrt_big(&dd);
    let (mut h_prev, mut h) = (BigInt::one(), BigInt::zero());
    let (mut k_prev, mut k) = (BigInt::zero(), BigInt::one());
    let mut first = true;
    loop {
        let a = if qq.is_positive() {
            (&pp + &s).div_floor(&qq)
        } else {
            (-&pp - &s - BigInt::one()).div_floor(&(-&qq))
        };
        if first {
            h = a.clone();
            k = BigInt::one();
            h_prev = BigInt::one();
            k_prev = BigInt::zero();
            first = false;
        } else {
            let nh = &a * &h + &h_prev;
            let nk = &a * &k + &k_prev;
            h_prev = std::mem::replace(&mut h, nh);
            k_prev = std::mem::replace(&mut k, nk);
        }
        let n = &h * &h + &h * &k * ctx.tr + &k * &k * ctx.nm;
        if n.abs().is_one() {
            return FieldElement::new(ctx, BigRational::from_integer(h), BigRational::from_integer(k));
        }
        pp = &a * &qq - &pp;
        qq = (&dd - &pp * &pp) / &qq;
    }
}

/// Roots of `x² - t x + n` modulo `p`.
fn min_poly_roots(ctx: Quad, p: u64) -> Vec<u64> {
    let t = ctx.tr.rem_euclid(p as i64) as u64;
    let n = ctx.nm.rem_euclid(p as i64) as u64;
    let f = |x: u64| -> u64 { ((x as u128 * x as u128 + (p - t) as u128 * x as u128 + n as u128) % p as u128) as u64 };
    if p < 64 {
        return (0..p).filter(|&x| f(x) == 0).collect();
    }
    let disc = ctx.disc.rem_euclid(p as i64) as u64;
    match sqrt_mod(disc, p) {
        None => Vec::new(),
        Some(r) => {
            let inv2 = p.div_ceil(2);
            let x1 = ((t + r) as u128 * inv2 as u128 % p as u128) as u64;
            let x2 = ((t + p - r) as u128 * inv2 as u128 % p as u128) as u64;
            let mut v = vec![x1, x2];
            v.sort();
            v.dedup();
            debug_assert!(v.iter().all(|&x| f(x) == 0));
            v
        }
    }
}

impl FieldDescriptor {
    pub fn degree(&self) -> usize {
        self.ctx.degree as usize
    }

    pub fn disc(&self) -> i64 {
        self.ctx.disc
    }

    pub fn sqrt_disc(&self) -> f64 {
        self.ctx.sqrt_disc()
    }

    pub fn ring(&self) -> FractionalIdeal {
        FractionalIdeal::unit(self.ctx)
    }

    pub fn element(&self, a: i64, b: i64) -> FieldElement {
        FieldElement::from_ints(self.ctx, a, b)
    }

    /// `Σ e·f = d` over the returned primes.
    pub fn split_prime(&self, p: u64) -> Vec<PrimeIdeal> {
        let ctx = self.ctx;
        let pb = BigInt::from(p);
        let pe = FieldElement::from_ints(ctx, p as i64, 0);
        if ctx.degree == 1 {
            let ideal = FractionalIdeal::principal(&pe).expect("p is nonzero");
            return vec![PrimeIdeal { p, f: 1, splitting: Splitting::Split, root: None, index: 0, ideal }];
        }
        let ramified = ctx.disc.rem_euclid(p as i64) == 0;
        let roots = min_poly_roots(ctx, p);
        let make = |r: u64| {
            let gen = FieldElement::new(ctx, BigRational::from_integer(-BigInt::from(r)), BigRational::one());
            FractionalIdeal::from_generators(ctx, &[pe.clone(), gen]).expect("prime ideal is full rank")
        };
        if ramified {
            let r = roots[0];
            vec![PrimeIdeal { p, f: 1, splitting: Splitting::Ramified, root: Some(r), index: 0, ideal: make(r) }]
        } else if roots.len() == 2 {
            roots
                .iter()
                .enumerate()
                .map(|(i, &r)| PrimeIdeal { p, f: 1, splitting: Splitting::Split, root: Some(r), index: i as u8, ideal: make(r) })
                .collect()
        } else {
            let _ = pb;
            let ideal = FractionalIdeal::principal(&pe).expect("p is nonzero");
            vec![PrimeIdeal { p, f: 2, splitting: Splitting::Inert, root: None, index: 0, ideal }]
        }
    }

    /// Prime ideals above the rational primes dividing `n`.
    fn primes_above_factors(&self, n: &BigInt, out: &mut std::collections::BTreeSet<u64>) {
        for (p, _) in factor_integer(n) {
            out.insert(p);
        }
    }

    /// Factorization of `I` (any nonzero fractional ideal).
    pub fn factor_fractional(&self, id: &FractionalIdeal) -> IdealFactorization {
        let mut ps = std::collections::BTreeSet::new();
        let n = id.norm();
        self.primes_above_factors(n.numer(), &mut ps);
        self.primes_above_factors(n.denom(), &mut ps);
        self.primes_above_factors(&id.den, &mut ps);
        let mut factors = Vec::new();
        for p in ps {
            for pr in self.split_prime(p) {
                let v = pr.ideal_valuation(id);
                if v != 0 {
                    factors.push((pr, v));
                }
            }
        }
        IdealFactorization::from_factors(factors)
    }

    /// Factorization of the principal ideal `(x)`.
    pub fn factor_element(&self, x: &FieldElement) -> Result<IdealFactorization, FieldError> {
        if x.is_zero() {
            return Err(FieldError::Zero);
        }
        let mut ps = std::collections::BTreeSet::new();
        let n = x.norm();
        self.primes_above_factors(n.numer(), &mut ps);
        self.primes_above_factors(n.denom(), &mut ps);
        self.primes_above_factors(&x.denominator(), &mut ps);
        let mut factors = Vec::new();
        for p in ps {
            for pr in self.split_prime(p) {
                let v = pr.valuation(x);
                if v != 0 {
                    factors.push((pr, v));
                }
            }
        }
        Ok(IdealFactorization::from_factors(factors))
    }

    /// Factorization of `𝔷⁻¹(n)` for `n ∈ 𝔷`.
    pub fn factor_ideal(&self, n: &FieldElement, z: &FractionalIdeal) -> Result<IdealFactorization, FieldError> {
        if n.is_zero() {
            return Err(FieldError::Zero);
        }
        if !z.contains(n) {
            return Err(FieldError::NotInIdeal);
        }
        let fz = self.factor_fractional(z);
        Ok(self.factor_element(n)?.div(&fz))
    }

    /// Points of `𝔷` whose embedding lies in the box, in lexicographic order
    /// of their coordinates on the basis of `𝔷`.
    ///
    /// Each side is `(lo, hi, open_lo)`: `lo < x <= hi` when `open_lo`, else `lo <= x <= hi`.
    pub fn enumerate_lattice(&self, z: &FractionalIdeal, bounds: &Bounds) -> Vec<FieldElement> {
        let mut out = Vec::new();
        self.for_each_lattice_point(z, bounds, |c, e| {
            let _ = c;
            out.push(e);
            true
        });
        out
    }

    /// Number of lattice points the enumeration of the box would visit, bounded above.
    pub fn lattice_candidates(&self, z: &FractionalIdeal, bounds: &Bounds) -> f64 {
        let vol: f64 = bounds.iter().map(|&(lo, hi, _)| (hi - lo).max(0.0)).product();
        let covol = z.norm_f64() * if self.degree() == 2 { self.sqrt_disc() } else { 1.0 };
        vol / covol + 1.0
    }

    /// Calls `f(coords, element)` for each lattice point in the box; stops when `f` returns `false`.
    pub fn for_each_lattice_point(
        &self,
        z: &FractionalIdeal,
        bounds: &Bounds,
        mut f: impl FnMut([BigInt; 2], FieldElement) -> bool,
    ) {
        let d = self.degree();
        assert_eq!(bounds.len(), d, "box dimension must equal the field degree");
        if bounds.iter().any(|&(lo, hi, open)| hi < lo || (open && hi <= lo) || !lo.is_finite() || !hi.is_finite()) {
            return;
        }
        let basis = z.basis();
        let inside = |e: &FieldElement| -> bool { (0..d).all(|i| in_side(e, i, bounds[i])) };
        if d == 1 {
            let g = basis[0].embedding()[0];
            let (lo, hi, _) = bounds[0];
            let c_lo = (lo / g).floor() as i64 - 1;
            let c_hi = (hi / g).ceil() as i64 + 1;
            for c in c_lo..=c_hi {
                let e = basis[0].scale(&q(c));
                if inside(&e) && !f([BigInt::from(c), BigInt::zero()], e) {
                    return;
                }
            }
            return;
        }
        let m = z.embedding_matrix();
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        let corners: Vec<[f64; 2]> = vec![
            [bounds[0].0, bounds[1].0],
            [bounds[0].0, bounds[1].1],
            [bounds[0].1, bounds[1].0],
            [bounds[0].1, bounds[1].1],
        ];
        let c1s: Vec<f64> = corners.iter().map(|y| inv[0][0] * y[0] + inv[0][1] * y[1]).collect();
        let c1_lo = c1s.iter().cloned().fold(f64::INFINITY, f64::min).floor() as i64 - 1;
        let c1_hi = c1s.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil() as i64 + 1;
        for c1 in c1_lo..=c1_hi {
            // lo_i <= c1 m[i][0] + c2 m[i][1] <= hi_i
            let mut lo2 = f64::NEG_INFINITY;
            let mut hi2 = f64::INFINITY;
            for i in 0..2 {
                let off = c1 as f64 * m[i][0];
                let g = m[i][1];
                let (a, b) = ((bounds[i].0 - off) / g, (bounds[i].1 - off) / g);
                let (a, b) = if g > 0.0 { (a, b) } else { (b, a) };
                lo2 = lo2.max(a);
                hi2 = hi2.min(b);
            }
            if lo2 > hi2 + 1.0 {
                continue;
            }
            let slack = 1e-9 * (1.0 + lo2.abs().max(hi2.abs()));
            let start = (lo2 - slack).floor() as i64;
            let end = (hi2 + slack).ceil() as i64;
            for c2 in start..=end {
                let coords = [BigInt::from(c1), BigInt::from(c2)];
                let e = z.element(&coords);
                if inside(&e) && !f(coords, e) {
                    return;
                }
            }
        }
    }

    /// `η^k · l` with `η = ε₊` and `k` minimizing `|log|l₁| - log|l₂||` (ties go to the smaller `|k|`).
    pub fn balance_by_units(&self, l: &FieldElement) -> Result<(i64, FieldElement), FieldError> {
        if self.degree() == 1 {
            if l.is_zero() {
                return Err(FieldError::ZeroEmbedding);
            }
            return Ok((0, l.clone()));
        }
        let e = l.embedding();
        if e[0] == 0.0 || e[1] == 0.0 || l.norm().is_zero() {
            return Err(FieldError::ZeroEmbedding);
        }
        let k = self.balancing_exponent(e[0].abs().ln() - e[1].abs().ln());
        let eta = self.eps_plus.as_ref().expect("quadratic field has a unit").pow(k)?;
        Ok((k, eta.mul(l)))
    }

    /// Exponent `k` minimizing `|gap + 2k log ε₊|`, ties toward `0`.
    pub fn balancing_exponent(&self, gap: f64) -> i64 {
        let le = self.eps_plus.as_ref().map(|u| u.embedding()[0].ln()).unwrap_or(0.0);
        if le == 0.0 {
            return 0;
        }
        let target = -gap / (2.0 * le);
        let lo = target.floor() as i64;
        let hi = lo + 1;
        let cost = |k: i64| (gap + 2.0 * k as f64 * le).abs();
        let (cl, ch) = (cost(lo), cost(hi));
        if (cl - ch).abs() <= 1e-12 * cl.max(1.0) {
            if lo.abs() <= hi.abs() {
                lo
            } else {
                hi
            }
        } else if cl < ch {
            lo
        } else {
            hi
        }
    }

    /// Ratio of the embeddings of `ε₊` (at least 1).
    pub fn unit_ratio(&self) -> f64 {
        match &self.eps_plus {
            Some(u) => {
                let e = u.embedding();
                (e[0] / e[1]).max(e[1] / e[0])
            }
            None => 1.0,
        }
    }
}

/// Whether `e` lies in the box, deciding boundary cases exactly.
pub fn in_bounds(e: &FieldElement, bounds: &Bounds) -> bool {
    (0..bounds.len()).all(|i| in_side(e, i, bounds[i]))
}

fn in_side(e: &FieldElement, i: usize, side: (f64, f64, bool)) -> bool {
    let (lo, hi, open) = side;
    let cmp = |bound: f64| embedding_cmp(e, i, bound);
    let lo_ok = if open { cmp(lo) > 0 } else { cmp(lo) >= 0 };
    lo_ok && cmp(hi) <= 0
}

/// Sign of `σ_i(e) - x`, using the cached embedding unless it is too close to call.
pub fn embedding_cmp(e: &FieldElement, i: usize, x: f64) -> i32 {
    let v = e.embedding()[i];
    if (v - x).abs() > 1e-9 * (1.0 + x.abs().max(v.abs())) {
        return if v > x { 1 } else { -1 };
    }
    e.exact_embedding(i).cmp_f64(x)
}

/// Largest rational prime norm checked when certifying class number one.
const PRINCIPAL_SEARCH_BUDGET: f64 = 2e7;

/// Whether some element of `O` has norm `±p`.
fn has_element_of_norm(ctx: Quad, eps: &FieldElement, p: u64) -> Option<bool> {
    // after multiplying by units the embeddings satisfy |σ_i| <= sqrt(p ε)
    let e = eps.embedding()[0].abs().max(eps.embedding()[1].abs());
    let bound = ((p as f64) * e).sqrt() * (1.0 + 1e-9) + 1.0;
    let cost = bound * bound / ctx.sqrt_disc();
    if cost > PRINCIPAL_SEARCH_BUDGET {
        return None;
    }
    let fd = FieldDescriptor {
        ctx,
        eps_plus: None,
        fundamental_unit: None,
        different: FractionalIdeal::unit(ctx),
        narrow_class_reps: Vec::new(),
        reps_supplied: false,
    };
    let mut found = false;
    let target = BigRational::from_integer(BigInt::from(p));
    fd.for_each_lattice_point(&FractionalIdeal::unit(ctx), &[(0.0, bound, true), (-bound, bound, false)], |_, x| {
        if x.norm().abs() == target {
            found = true;
            return false;
        }
        true
    });
    Some(found)
}

/// Builds the field descriptor. Fields of narrow class number above one need
/// `reps` (bases of the narrow class representatives).
pub fn make_field(spec: &FieldSpec, reps: Option<Vec<FractionalIdeal>>) -> Result<FieldDescriptor, FieldError> {
    match *spec {
        FieldSpec::Rational => {
            let ctx = Quad::rational();
            Ok(FieldDescriptor {
                ctx,
                eps_plus: None,
                fundamental_unit: None,
                different: FractionalIdeal::unit(ctx),
                narrow_class_reps: reps.unwrap_or_else(|| vec![FractionalIdeal::unit(ctx)]),
                reps_supplied: false,
            })
        }
        FieldSpec::Quadratic(d) => {
            if !is_squarefree(d) {
                return Err(FieldError::NotSquarefree(d));
            }
            let ctx = Quad::quadratic(d);
            let u = fundamental_unit(ctx);
            let norm_u = u.norm();
            let eps_plus = if norm_u.is_negative() { u.mul(&u) } else { u.clone() };
            let root_disc = FieldElement::from_ints(ctx, -ctx.tr, 2); // ω - ω̄ = 2ω - t = √Δ
            let different = FractionalIdeal::principal(&root_disc)?;
            let (narrow_class_reps, supplied) = match reps {
                Some(r) if !r.is_empty() => (r, true),
                _ => {
                    if !norm_u.is_negative() {
                        return Err(FieldError::NeedClassReps);
                    }
                    let minkowski = ctx.sqrt_disc() / 2.0;
                    let fd = FieldDescriptor {
                        ctx,
                        eps_plus: Some(eps_plus.clone()),
                        fundamental_unit: Some(u.clone()),
                        different: different.clone(),
                        narrow_class_reps: Vec::new(),
                        reps_supplied: false,
                    };
                    for &p in small_primes().iter().take_while(|&&p| (p as f64) <= minkowski) {
                        for pr in fd.split_prime(p) {
                            if pr.f == 1 && has_element_of_norm(ctx, &u, p) != Some(true) {
                                return Err(FieldError::NeedClassReps);
                            }
                        }
                    }
                    (vec![FractionalIdeal::unit(ctx)], false)
                }
            };
            Ok(FieldDescriptor {
                ctx,
                eps_plus: Some(eps_plus),
                fundamental_unit: Some(u),
                different,
                narrow_class_reps,
                reps_supplied: supplied,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    #[test]
    fn rational_field() {
        let f = make_field(&FieldSpec::Rational, None).unwrap();
        assert_eq!(f.degree(), 1);
        assert_eq!(f.disc(), 1);
        assert_eq!(f.different.norm(), BigRational::one());
    }

    #[test]
    fn units_of_sqrt5_and_sqrt2() {
        let f5 = make_field(&FieldSpec::Quadratic(5), None).unwrap();
        assert_eq!(f5.disc(), 5);
        let e = f5.eps_plus.as_ref().unwrap();
        // ω² = ω + 1 = (3 + √5)/2
        assert_eq!((e.a.clone(), e.b.clone()), (r(1, 1), r(1, 1)));
        assert!((e.embedding()[0] - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert_eq!(f5.different.norm(), r(5, 1));

        let f2 = make_field(&FieldSpec::Quadratic(2), None).unwrap();
        assert_eq!(f2.disc(), 8);
        let e = f2.eps_plus.as_ref().unwrap();
        assert_eq!((e.a.clone(), e.b.clone()), (r(3, 1), r(2, 1)));
        assert_eq!(f2.different.norm(), r(8, 1));
    }

    #[test]
    fn larger_fundamental_unit() {
        let u = fundamental_unit(Quad::quadratic(94));
        assert_eq!(u.a, r(2143295, 1));
        assert_eq!(u.b, r(221064, 1));
    }

    #[test]
    fn rejects_bad_fields() {
        assert_eq!(make_field(&FieldSpec::Quadratic(12), None).unwrap_err(), FieldError::NotSquarefree(12));
        // h⁺(Q(√3)) = 2
        assert_eq!(make_field(&FieldSpec::Quadratic(3), None).unwrap_err(), FieldError::NeedClassReps);
        // h(Q(√10)) = 2
        assert_eq!(make_field(&FieldSpec::Quadratic(10), None).unwrap_err(), FieldError::NeedClassReps);
        assert!(make_field(&FieldSpec::Quadratic(13), None).is_ok());
    }

    #[test]
    fn parse_specs() {
        assert_eq!(FieldSpec::parse("Q").unwrap(), FieldSpec::Rational);
        assert_eq!(FieldSpec::parse("Q(sqrt 5)").unwrap(), FieldSpec::Quadratic(5));
        assert_eq!(FieldSpec::parse("Q(sqrt(2))").unwrap(), FieldSpec::Quadratic(2));
        assert!(FieldSpec::parse("Q(i)").is_err());
    }

    #[test]
    fn splitting_in_sqrt5() {
        let f = make_field(&FieldSpec::Quadratic(5), None).unwrap();
        let p11 = f.split_prime(11);
        assert_eq!(p11.len(), 2);
        assert_eq!(p11.iter().map(|p| p.root.unwrap()).collect::<Vec<_>>(), vec![4, 8]);
        assert!(p11.iter().all(|p| p.norm() == 11 && p.ideal.norm() == r(11, 1)));
        let p3 = f.split_prime(3);
        assert_eq!((p3.len(), p3[0].norm(), p3[0].splitting), (1, 9, Splitting::Inert));
        let p5 = f.split_prime(5);
        assert_eq!((p5.len(), p5[0].norm(), p5[0].splitting), (1, 5, Splitting::Ramified));
        let p2 = f.split_prime(2);
        assert_eq!(p2[0].norm(), 4);
    }

    #[test]
    fn factorizations() {
        let fq = make_field(&FieldSpec::Rational, None).unwrap();
        let fac = fq.factor_ideal(&fq.element(12, 0), &fq.ring()).unwrap();
        assert_eq!(fac.factors.iter().map(|(p, e)| (p.p, *e)).collect::<Vec<_>>(), vec![(2, 2), (3, 1)]);

        let f = make_field(&FieldSpec::Quadratic(5), None).unwrap();
        let fac = f.factor_ideal(&f.element(11, 0), &f.ring()).unwrap();
        assert_eq!(fac.factors.len(), 2);
        assert!(fac.factors.iter().all(|(p, e)| p.p == 11 && *e == 1));
        assert_eq!(fac.norm, r(121, 1));
        let unit = f.factor_ideal(&f.element(0, 1), &f.ring()).unwrap();
        assert!(unit.is_one());
        assert!(f.factor_ideal(&f.element(0, 0), &f.ring()).is_err());
    }

    #[test]
    fn element_outside_ideal_is_rejected() {
        let f = make_field(&FieldSpec::Quadratic(5), None).unwrap();
        let two = FractionalIdeal::principal(&f.element(2, 0)).unwrap();
        assert_eq!(f.factor_ideal(&f.element(3, 0), &two).unwrap_err(), FieldError::NotInIdeal);
    }

    #[test]
    fn ideal_inverse_and_product() {
        let f = make_field(&FieldSpec::Quadratic(5), None).unwrap();
        for p in [2u64, 5, 11, 19] {
            for pr in f.split_prime(p) {
                let prod = pr.ideal.mul(&pr.ideal.inv());
                assert!(prod.same_lattice(&f.ring()), "p = {p}");
            }
        }
        let p11 = f.split_prime(11);
        let prod = p11[0].ideal.mul(&p11[1].ideal);
        assert!(prod.same_lattice(&FractionalIdeal::principal(&f.element(11, 0)).unwrap()));
    }

    #[test]
    fn rational_inverses() {
        let f = make_field(&FieldSpec::Rational, None).unwrap();
        let six = f.element(6, 0);
        assert_eq!(six.inv().unwrap().mul(&six), f.element(1, 0));
        let id = FractionalIdeal::principal(&six).unwrap();
        assert!(id.mul(&id.inv()).same_lattice(&f.ring()));
    }

    #[test]
    fn enumeration_examples() {
        let fq = make_field(&FieldSpec::Rational, None).unwrap();
        let pts = fq.enumerate_lattice(&fq.ring(), &[(0.0, 10.0, true)]);
        assert_eq!(pts.iter().map(|e| e.a.to_integer().to_i64().unwrap()).collect::<Vec<_>>(), (1..=10).collect::<Vec<_>>());
        let two = FractionalIdeal::principal(&fq.element(2, 0)).unwrap();
        let pts = fq.enumerate_lattice(&two, &[(0.0, 10.0, true)]);
        assert_eq!(pts.iter().map(|e| e.a.to_integer().to_i64().unwrap()).collect::<Vec<_>>(), vec![2, 4, 6, 8, 10]);

        let f = make_field(&FieldSpec::Quadratic(5), None).unwrap();
        let pts = f.enumerate_lattice(&f.ring(), &[(0.0, 5.0, true), (0.0, 5.0, true)]);
        let mut brute = 0;
        for a in -20..=20 {
            for b in -20..=20 {
                let e = f.element(a, b);
                let x = e.embedding();
                if x[0] > 0.0 && x[0] <= 5.0 && x[1] > 0.0 && x[1] <= 5.0 {
                    brute += 1;
                }
            }
        }
        assert_eq!(pts.len(), brute);
    }

    #[test]
    fn boundary_points_resolved_exactly() {
        let f = make_field(&FieldSpec::Quadratic(5), None).unwrap();
        // ω has embeddings (1.618.., -0.618..); 1 lies on the boundary 1 <= x
        let pts = f.enumerate_lattice(&f.ring(), &[(1.0, 1.0, false), (1.0, 1.0, false)]);
        assert_eq!(pts, vec![f.element(1, 0)]);
        let pts = f.enumerate_lattice(&f.ring(), &[(1.0, 1.0, true), (1.0, 1.0, false)]);
        assert!(pts.is_empty());
    }

    #[test]
    fn balancing() {
        let fq = make_field(&FieldSpec::Rational, None).unwrap();
        assert_eq!(fq.balance_by_units(&fq.element(7, 0)).unwrap().1, fq.element(7, 0));
        let f = make_field(&FieldSpec::Quadratic(5), None).unwrap();
        assert_eq!(f.balance_by_units(&f.element(1, 0)).unwrap(), (0, f.element(1, 0)));
        let eps = f.eps_plus.clone().unwrap();
        let l = eps.pow(-5).unwrap().mul(&f.element(3, 1));
        let (_, b) = f.balance_by_units(&l).unwrap();
        let e = b.embedding();
        assert!((e[0] / e[1]).abs().max((e[1] / e[0]).abs()) <= f.unit_ratio());
    }

    #[test]
    fn sqrt_mod_matches_brute_force() {
        for &p in &[3u64, 5, 7, 11, 13, 17, 97, 101, 10007] {
            for a in 0..p.min(200) {
                let brute = (0..p).any(|x| x * x % p == a);
                match sqrt_mod(a, p) {
                    Some(r) => assert_eq!(r * r % p, a),
                    None => assert!(!brute),
                }
            }
        }
    }

    #[test]
    fn relative_residues() {
        let f = make_field(&FieldSpec::Quadratic(5), None).unwrap();
        let o = f.ring();
        let p = &f.split_prime(11)[0];
        let rel = o.relative_hnf(&p.ideal).unwrap();
        assert_eq!(rel.index(), BigInt::from(11));
        let c = o.coords(&p.ideal.basis()[1]).unwrap();
        assert_eq!(rel.residue(&c), 0);
    }
}
