//! z-data of shifted pairs, the sieve systems they reduce to, sifted counts,
//! `H(Ω, Q)`, Montgomery's inequality, the large-sieve majorant and `B(y, z)`.
//!
//! Residue classes of `𝔵/𝔭𝔵` are indices of a [`RelativeLattice`]; for a
//! prime ideal the quotient is `Z/α × Z/γ` with one factor trivial or with
//! `β = 0`, so the index splits as `r₁ + α r₂` and characters are products
//! of cyclic ones.

use crate::arith::{euler_phi, prime_ideals_up_to, ArithError, MultiplicativeFunction};
use crate::field::{in_bounds, FieldDescriptor, FieldElement, FieldError, FractionalIdeal, IdealFactorization, PrimeIdeal, RelativeLattice};
use crate::par;
use crate::regions::{AxisBox, Interval};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

pub const DEFAULT_POINT_BUDGET: f64 = 1e7;

#[derive(Debug, thiserror::Error)]
pub enum SieveError {
    #[error("{0}")]
    Precondition(&'static str),
    #[error("no CRT solution for the translate")]
    Crt,
    #[error("residue-class count {got} disagrees with the predicted {expected} at p = {p}")]
    OmegaMismatch { p: u64, got: usize, expected: usize },
    #[error("enumeration needs about {needed:.0} points, budget is {budget:.0}")]
    Budget { needed: f64, budget: f64 },
    #[error("box side {side} is below the required {required}")]
    RegionTooSmall { side: f64, required: f64 },
    #[error("the sequence does not vanish on a declared class mod p = {0}")]
    NotVanishing(u64),
    #[error("need at least two characters")]
    TooFewCharacters,
    #[error("no z-datum has both parts of norm <= y")]
    EmptyData,
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

pub type Result<T> = std::result::Result<T, SieveError>;

fn to_u64(x: &BigInt) -> u64 {
    x.to_u64().expect("index fits in u64")
}

fn norm_u64(f: &IdealFactorization) -> u64 {
    f.factors.iter().map(|(p, e)| p.norm().pow(*e as u32)).product()
}

/// `(𝔞, 𝔟, 𝔠)`: `𝔞𝔠` is the z-part of `𝔷⁻¹m`, `𝔟𝔠` that of `𝔷⁻¹n`, `gcd(𝔞, 𝔟) = 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZDatum {
    pub a: IdealFactorization,
    pub b: IdealFactorization,
    pub c: IdealFactorization,
}

/// Sortable identity of an ideal factorization.
pub type FactorKey = Vec<(u64, u8, i64)>;

fn key_of(f: &IdealFactorization) -> FactorKey {
    f.factors.iter().map(|(p, e)| (p.p, p.index, *e)).collect()
}

impl ZDatum {
    pub fn key(&self) -> (FactorKey, FactorKey, FactorKey) {
        (key_of(&self.a), key_of(&self.b), key_of(&self.c))
    }

    pub fn norms(&self) -> (u64, u64, u64) {
        (norm_u64(&self.a), norm_u64(&self.b), norm_u64(&self.c))
    }

    /// `max(|𝔞𝔠|, |𝔟𝔠|)`.
    pub fn size(&self) -> u64 {
        let (a, b, c) = self.norms();
        (a * c).max(b * c)
    }
}

/// The z-datum of `n` for the shift `l`.
pub fn z_datum(f: &FieldDescriptor, zeta: &FractionalIdeal, l: &FieldElement, n: &FieldElement, z: f64) -> Result<ZDatum> {
    if !(z >= 2.0) {
        return Err(SieveError::Precondition("need z >= 2"));
    }
    let m = n.add(l);
    if !zeta.contains(n) || !zeta.contains(&m) {
        return Err(SieveError::Precondition("n and n + l must lie in the ideal"));
    }
    if !n.is_totally_positive() || !m.is_totally_positive() {
        return Err(SieveError::Precondition("n and n + l must be totally positive"));
    }
    let mz = f.factor_ideal(&m, zeta)?.smooth_part(z);
    let nz = f.factor_ideal(n, zeta)?.smooth_part(z);
    let c = mz.gcd(&nz);
    Ok(ZDatum { a: mz.div(&c), b: nz.div(&c), c })
}

/// Whether `n` satisfies the four membership conditions of the class `d`.
pub fn in_datum_class(f: &FieldDescriptor, zeta: &FractionalIdeal, l: &FieldElement, n: &FieldElement, z: f64, d: &ZDatum) -> Result<bool> {
    let m = n.add(l);
    let mf = f.factor_ideal(&m, zeta)?;
    let nf = f.factor_ideal(n, zeta)?;
    Ok(in_class_factored(&mf, &nf, z, d))
}

fn in_class_factored(mf: &IdealFactorization, nf: &IdealFactorization, z: f64, d: &ZDatum) -> bool {
    let ac = d.a.mul(&d.c);
    let bc = d.b.mul(&d.c);
    if !ac.divides(mf) || !bc.divides(nf) {
        return false;
    }
    mf.div(&ac).smooth_part(z).is_one() && nf.div(&bc).smooth_part(z).is_one()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionReport {
    pub points: usize,
    pub classes: usize,
    /// Every point lies in exactly one class, by the membership conditions.
    pub exclusive: bool,
    /// Every datum is valid and its `𝔠` divides `𝔷⁻¹l`.
    pub data_valid: bool,
    pub class_sum: f64,
    pub direct_sum: f64,
    pub ok: bool,
}

/// Largest point count for the brute-force partition and inclusion checks.
pub const BRUTE_FORCE_LIMIT: f64 = 1e5;

/// Totally positive `n ∈ 𝔷` with `n + l` totally positive and both in the box.
pub fn shifted_pairs(f: &FieldDescriptor, zeta: &FractionalIdeal, l: &FieldElement, bounds: &[(f64, f64, bool)], budget: f64) -> Result<Vec<FieldElement>> {
    let needed = f.lattice_candidates(zeta, bounds);
    if needed > budget {
        return Err(SieveError::Budget { needed, budget });
    }
    Ok(f.enumerate_lattice(zeta, bounds)
        .into_iter()
        .filter(|n| {
            let m = n.add(l);
            n.is_totally_positive() && m.is_totally_positive() && in_bounds(&m, bounds)
        })
        .collect())
}

/// The z-data occurring in the box, with multiplicities, in key order.
pub fn data_in_box(f: &FieldDescriptor, zeta: &FractionalIdeal, l: &FieldElement, z: f64, b: &AxisBox<f64>, budget: f64) -> Result<Vec<(ZDatum, u64)>> {
    let ns = shifted_pairs(f, zeta, l, &b.bounds(), budget)?;
    let data: Vec<Result<ZDatum>> = par::map_ordered(&ns, |n| z_datum(f, zeta, l, n, z));
    let mut classes: BTreeMap<(FactorKey, FactorKey, FactorKey), (ZDatum, u64)> = BTreeMap::new();
    for dn in data {
        let dn = dn?;
        classes.entry(dn.key()).or_insert_with(|| (dn.clone(), 0)).1 += 1;
    }
    Ok(classes.into_values().collect())
}

/// Classifies every admissible `n` of the box by z-datum and re-aggregates the shifted sum.
pub fn partition_check(
    f: &FieldDescriptor,
    zeta: &FractionalIdeal,
    l: &FieldElement,
    z: f64,
    b: &AxisBox<f64>,
    lambda: &MultiplicativeFunction,
) -> Result<PartitionReport> {
    let ns = shifted_pairs(f, zeta, l, &b.bounds(), BRUTE_FORCE_LIMIT)?;
    let zf = f.factor_fractional(zeta);
    let lz = f.factor_element(l)?.div(&zf);
    let data: Vec<Result<(ZDatum, IdealFactorization, IdealFactorization, f64)>> = par::map_ordered(&ns, |n| {
        let d = z_datum(f, zeta, l, n, z)?;
        let mf = f.factor_ideal(&n.add(l), zeta)?;
        let nf = f.factor_ideal(n, zeta)?;
        let term = (lambda.eval(&mf)? * lambda.eval(&nf)?).abs();
        Ok((d, mf, nf, term))
    });
    let data = data.into_iter().collect::<Result<Vec<_>>>()?;
    let mut classes: BTreeMap<(FactorKey, FactorKey, FactorKey), (ZDatum, f64)> = BTreeMap::new();
    for (d, _, _, term) in &data {
        classes.entry(d.key()).or_insert_with(|| (d.clone(), 0.0)).1 += term;
    }
    let direct: Vec<f64> = data.iter().map(|t| t.3).collect();
    let data_valid = classes.values().all(|(d, _)| d.a.gcd(&d.b).is_one() && d.c.divides(&lz));
    // a point can only meet the conditions of classes whose 𝔞𝔠, 𝔟𝔠 have its z-smooth parts
    let mut by_smooth: BTreeMap<(FactorKey, FactorKey), Vec<&ZDatum>> = BTreeMap::new();
    for (d, _) in classes.values() {
        let key = (key_of(&d.a.mul(&d.c).smooth_part(z)), key_of(&d.b.mul(&d.c).smooth_part(z)));
        by_smooth.entry(key).or_default().push(d);
    }
    let exclusive = par::map_ordered(&data, |(own, mf, nf, _)| {
        let key = (key_of(&mf.smooth_part(z)), key_of(&nf.smooth_part(z)));
        let hits: Vec<&ZDatum> = by_smooth.get(&key).into_iter().flatten().copied().filter(|d| in_class_factored(mf, nf, z, d)).collect();
        hits.len() == 1 && hits[0] == own
    })
    .into_iter()
    .all(|x| x);
    let class_sum = par::tree_sum(&classes.values().map(|c| c.1).collect::<Vec<_>>());
    let direct_sum = par::tree_sum(&direct);
    let ok = exclusive && data_valid && (class_sum - direct_sum).abs() <= 1e-9 * direct_sum.abs().max(1.0);
    Ok(PartitionReport { points: ns.len(), classes: classes.len(), exclusive, data_valid, class_sum, direct_sum, ok })
}

/// One sieving prime with its excluded classes of `𝔵/𝔭𝔵`.
#[derive(Clone, Debug)]
pub struct SievePrime {
    pub prime: PrimeIdeal,
    pub rel: RelativeLattice,
    pub omega: Vec<u64>,
}

impl SievePrime {
    fn new(x: &FractionalIdeal, prime: PrimeIdeal, omega: Vec<u64>) -> Self {
        let px = prime.ideal.mul(x);
        let rel = x.relative_hnf(&px).expect("p𝔵 is a sublattice of 𝔵");
        let mut omega = omega;
        omega.sort_unstable();
        omega.dedup();
        SievePrime { prime, rel, omega }
    }

    pub fn norm(&self) -> u64 {
        self.prime.norm()
    }
}

/// Lattice `𝔵`, sieving primes with classes `Ω_𝔭`, and the translate `r`.
#[derive(Clone, Debug)]
pub struct SieveSystem {
    pub lattice: FractionalIdeal,
    pub primes: Vec<SievePrime>,
    pub translate: FieldElement,
}

impl SieveSystem {
    /// A system from explicit class representatives (elements of `𝔵`).
    pub fn with_classes(x: &FractionalIdeal, classes: Vec<(PrimeIdeal, Vec<FieldElement>)>) -> Result<Self> {
        let mut primes = Vec::new();
        for (p, reps) in classes {
            let sp = SievePrime::new(x, p, Vec::new());
            let mut omega = Vec::new();
            for r in &reps {
                let c = x.coords(r).ok_or(SieveError::Precondition("class representative not in the lattice"))?;
                omega.push(sp.rel.residue(&c));
            }
            primes.push(SievePrime::new(x, sp.prime, omega));
        }
        Ok(SieveSystem { lattice: x.clone(), primes, translate: FieldElement::zero(x.ctx) })
    }

    pub fn omega_sizes(&self) -> Vec<(u64, usize)> {
        self.primes.iter().map(|p| (p.norm(), p.omega.len())).collect()
    }

    fn avoids(&self, c: &[BigInt; 2]) -> bool {
        self.primes.iter().all(|p| p.omega.binary_search(&p.rel.residue(c)).is_err())
    }
}

/// Prime ideals of norm `<= z` not above `2`.
pub fn odd_primes_up_to(f: &FieldDescriptor, z: f64) -> Vec<PrimeIdeal> {
    prime_ideals_up_to(f, z.floor() as u64).into_iter().filter(|p| p.p != 2).collect()
}

/// Some `ρ ∈ I` with `ρ + t ∈ J`, searched over `I / (I ∩ J)` with `I ∩ J = meet`.
fn crt_solve(i: &FractionalIdeal, j: &FractionalIdeal, meet: &FractionalIdeal, t: &FieldElement) -> Option<FieldElement> {
    let rel = i.relative_hnf(meet)?;
    let count = to_u64(&rel.index());
    (0..count).map(|k| i.element(&rel.representative(k))).find(|rho| j.contains(&rho.add(t)))
}

/// The sieve system of a z-datum: `𝔵 = 𝔞𝔟𝔠𝔷`, the odd primes of norm `<= z`,
/// a translate `r ∈ 𝔟𝔠𝔷` with `r + l ∈ 𝔞𝔠𝔷`, and the classes `Ω_𝔭`.
///
/// `n ↦ n - r` then maps the class of the datum into the sifted set.
pub fn build_sieve_system(f: &FieldDescriptor, zeta: &FractionalIdeal, l: &FieldElement, d: &ZDatum, z: f64) -> Result<SieveSystem> {
    let ctx = f.ctx;
    let zf = f.factor_fractional(zeta);
    let lz = f.factor_element(l)?.div(&zf);
    if !d.a.gcd(&d.b).is_one() || !d.c.divides(&lz) {
        return Err(SieveError::Precondition("invalid z-datum"));
    }
    let a = d.a.to_ideal(ctx);
    let b = d.b.to_ideal(ctx);
    let c = d.c.to_ideal(ctx);
    let cz = c.mul(zeta);
    let acz = a.mul(&cz);
    let bcz = b.mul(&cz);
    let x = a.mul(&bcz);
    let r = crt_solve(&bcz, &acz, &x, l).ok_or(SieveError::Crt)?;
    // Ω_𝔭 is predicted to be a singleton exactly when 𝔭 | 𝔞𝔟𝔠⁻¹𝔷⁻¹l
    let modulus = d.a.mul(&d.b).mul(&lz.div(&d.c));
    let mut primes = Vec::new();
    for p in odd_primes_up_to(f, z) {
        let sp = SievePrime::new(&x, p.clone(), Vec::new());
        let n_side = p.ideal.mul(&bcz);
        let m_side = p.ideal.mul(&acz);
        let (pa, pb) = (d.a.exponent(&p) > 0, d.b.exponent(&p) > 0);
        let mut omega = Vec::new();
        for k in 0..to_u64(&sp.rel.index()) {
            let zeta_k = x.element(&sp.rel.representative(k));
            let n = zeta_k.add(&r);
            let bad_n = !pa && n_side.contains(&n);
            let bad_m = !pb && m_side.contains(&n.add(l));
            if bad_n || bad_m {
                omega.push(k);
            }
        }
        let expected = if modulus.exponent(&p) > 0 { 1 } else { 2 };
        if omega.len() != expected {
            return Err(SieveError::OmegaMismatch { p: p.p, got: omega.len(), expected });
        }
        primes.push(SievePrime::new(&x, p, omega));
    }
    Ok(SieveSystem { lattice: x, primes, translate: r })
}

/// `#{n ∈ 𝔵 ∩ B : n ∉ Ω_𝔭 mod 𝔭𝔵 for all 𝔭}`.
pub fn sifted_count(f: &FieldDescriptor, s: &SieveSystem, b: &AxisBox<f64>, budget: f64) -> Result<u64> {
    let bounds = b.bounds();
    let needed = f.lattice_candidates(&s.lattice, &bounds);
    if needed > budget {
        return Err(SieveError::Budget { needed, budget });
    }
    let mut coords = Vec::new();
    f.for_each_lattice_point(&s.lattice, &bounds, |c, _| {
        coords.push(c);
        true
    });
    let hits = par::map_ordered(&coords, |c| s.avoids(c) as u64);
    Ok(hits.iter().sum())
}

/// The members of the sifted set in the box, in enumeration order.
pub fn sifted_points(f: &FieldDescriptor, s: &SieveSystem, b: &AxisBox<f64>, budget: f64) -> Result<Vec<FieldElement>> {
    let bounds = b.bounds();
    let needed = f.lattice_candidates(&s.lattice, &bounds);
    if needed > budget {
        return Err(SieveError::Budget { needed, budget });
    }
    let mut out = Vec::new();
    f.for_each_lattice_point(&s.lattice, &bounds, |c, e| {
        if s.avoids(&c) {
            out.push(e);
        }
        true
    });
    Ok(out)
}

/// The box `B - r`.
pub fn translated(b: &AxisBox<f64>, r: &FieldElement) -> AxisBox<f64> {
    let e = r.embedding();
    let mut out = b.clone();
    for (s, &t) in out.sides.iter_mut().zip(e) {
        s.lo -= t;
        s.hi -= t;
    }
    out
}

/// Counts the class of `d` inside the box and checks that `n - r` lands in the sifted set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InclusionReport {
    pub class_count: u64,
    pub sifted_count: u64,
    pub violations: u64,
}

pub fn inclusion_check(
    f: &FieldDescriptor,
    zeta: &FractionalIdeal,
    l: &FieldElement,
    d: &ZDatum,
    z: f64,
    s: &SieveSystem,
    b: &AxisBox<f64>,
    budget: f64,
) -> Result<InclusionReport> {
    let bounds = b.bounds();
    let needed = f.lattice_candidates(zeta, &bounds);
    if needed > budget {
        return Err(SieveError::Budget { needed, budget });
    }
    let mut class_count = 0;
    let mut violations = 0;
    let mut result = Ok(());
    f.for_each_lattice_point(zeta, &bounds, |_, n| {
        let m = n.add(l);
        if !(n.is_totally_positive() && m.is_totally_positive() && in_bounds(&m, &bounds)) {
            return true;
        }
        match z_datum(f, zeta, l, &n, z) {
            Ok(dn) if &dn == d => {
                class_count += 1;
                let shifted = n.sub(&s.translate);
                match s.lattice.coords(&shifted) {
                    Some(c) if s.avoids(&c) => {}
                    _ => violations += 1,
                }
            }
            Ok(_) => {}
            Err(e) => {
                result = Err(e);
                return false;
            }
        }
        true
    });
    result?;
    let sifted = sifted_count(f, s, &translated(b, &s.translate), budget)?;
    Ok(InclusionReport { class_count, sifted_count: sifted, violations })
}

/// [`inclusion_check`] for every datum of the box at once, classifying each point a single time.
pub fn inclusion_by_datum(
    f: &FieldDescriptor,
    zeta: &FractionalIdeal,
    l: &FieldElement,
    z: f64,
    b: &AxisBox<f64>,
    budget: f64,
) -> Result<Vec<(ZDatum, SieveSystem, InclusionReport)>> {
    let ns = shifted_pairs(f, zeta, l, &b.bounds(), budget)?;
    let data: Vec<Result<ZDatum>> = par::map_ordered(&ns, |n| z_datum(f, zeta, l, n, z));
    let mut groups: BTreeMap<(FactorKey, FactorKey, FactorKey), (ZDatum, Vec<usize>)> = BTreeMap::new();
    for (i, dn) in data.into_iter().enumerate() {
        let dn = dn?;
        groups.entry(dn.key()).or_insert_with(|| (dn, Vec::new())).1.push(i);
    }
    let groups: Vec<(ZDatum, Vec<usize>)> = groups.into_values().collect();
    let reports = par::map_ordered(&groups, |(d, members)| -> Result<(ZDatum, SieveSystem, InclusionReport)> {
        let s = build_sieve_system(f, zeta, l, d, z)?;
        let violations = members
            .iter()
            .filter(|&&i| match s.lattice.coords(&ns[i].sub(&s.translate)) {
                Some(c) => !s.avoids(&c),
                None => true,
            })
            .count() as u64;
        let sifted = sifted_count(f, &s, &translated(b, &s.translate), budget)?;
        let report = InclusionReport { class_count: members.len() as u64, sifted_count: sifted, violations };
        Ok((d.clone(), s, report))
    });
    reports.into_iter().collect()
}

/// Squarefree products of the given primes with norm `<= q`, as index lists.
fn squarefree_products(norms: &[u64], q: f64) -> Vec<Vec<usize>> {
    fn go(norms: &[u64], q: f64, start: usize, cur: &mut Vec<usize>, prod: u64, out: &mut Vec<Vec<usize>>) {
        out.push(cur.clone());
        for i in start..norms.len() {
            let next = prod.saturating_mul(norms[i]);
            if next as f64 <= q {
                cur.push(i);
                go(norms, q, i + 1, cur, next, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(norms, q, 0, &mut Vec::new(), 1, &mut out);
    out
}

/// `H(Ω, Q) = Σ_{𝔮} ∏_{𝔭|𝔮} #Ω_𝔭 / (N𝔭 - #Ω_𝔭)`; `+∞` when some `#Ω_𝔭 >= N𝔭`.
pub fn sieve_h(s: &SieveSystem, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(SieveError::Precondition("need Q >= 1"));
    }
    let norms: Vec<u64> = s.primes.iter().map(|p| p.norm()).collect();
    let ratio: Vec<f64> = s
        .primes
        .iter()
        .map(|p| {
            let w = p.omega.len() as f64;
            let n = p.norm() as f64;
            if w >= n {
                f64::INFINITY
            } else {
                w / (n - w)
            }
        })
        .collect();
    let terms: Vec<f64> = squarefree_products(&norms, q).iter().map(|idx| idx.iter().map(|&i| ratio[i]).product()).collect();
    Ok(par::tree_sum(&terms))
}

/// Primitive additive characters of `𝔵` with squarefree conductor of norm `<= Q`
/// built from the given primes, as points of `F / 𝔵⁻¹𝔡⁻¹`. Includes the trivial one.
#[derive(Clone, Debug)]
pub struct CharacterFamily {
    pub lattice: FractionalIdeal,
    pub dual: FractionalIdeal,
    pub q: f64,
    pub points: Vec<FieldElement>,
    pub conductor_norms: Vec<u64>,
}

impl CharacterFamily {
    pub fn new(f: &FieldDescriptor, x: &FractionalIdeal, primes: &[PrimeIdeal], q: f64) -> Result<Self> {
        if !(q >= 1.0) {
            return Err(SieveError::Precondition("need Q >= 1"));
        }
        let dual = x.mul(&f.different).inv();
        let norms: Vec<u64> = primes.iter().map(|p| p.norm()).collect();
        let mut points = Vec::new();
        let mut conductor_norms = Vec::new();
        for idx in squarefree_products(&norms, q) {
            let conductor = idx.iter().fold(FractionalIdeal::unit(f.ctx), |acc, &i| acc.mul(&primes[i].ideal));
            let big = conductor.inv().mul(&dual);
            let rel = big.relative_hnf(&dual).expect("dual is a sublattice");
            // a point is primitive when it lies in no (𝔮/𝔭)⁻¹𝔵⁻¹𝔡⁻¹
            let smaller: Vec<FractionalIdeal> = idx
                .iter()
                .map(|&i| {
                    idx.iter().filter(|&&j| j != i).fold(FractionalIdeal::unit(f.ctx), |acc, &j| acc.mul(&primes[j].ideal)).inv().mul(&dual)
                })
                .collect();
            let nq: u64 = idx.iter().map(|&i| norms[i]).product();
            for k in 0..to_u64(&rel.index()) {
                let xi = big.element(&rel.representative(k));
                if smaller.iter().all(|s| !s.contains(&xi)) {
                    points.push(xi);
                    conductor_norms.push(nq);
                }
            }
        }
        Ok(CharacterFamily { lattice: x.clone(), dual, q, points, conductor_norms })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `min_{ν ∈ dual} max_i |w_i - ν_i|`.
fn torus_distance(f: &FieldDescriptor, dual: &FractionalIdeal, w: &FieldElement) -> f64 {
    let we = w.embedding().to_vec();
    let mut rho = dual.norm_f64().powf(1.0 / we.len() as f64).max(1e-6);
    loop {
        let bounds: Vec<(f64, f64, bool)> = we.iter().map(|&v| (v - rho, v + rho, false)).collect();
        let mut best = f64::INFINITY;
        f.for_each_lattice_point(dual, &bounds, |_, nu| {
            let d = nu.embedding().iter().zip(&we).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            best = best.min(d);
            true
        });
        if best <= rho {
            return best;
        }
        rho *= 2.0;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpacingReport {
    pub delta: f64,
    /// `(|𝔵| Δ Q²)^{-1/d}`.
    pub guaranteed: f64,
    pub ok: bool,
}

/// Minimum `ℓ^∞` torus distance between distinct members of the family.
pub fn spacing(f: &FieldDescriptor, fam: &CharacterFamily) -> Result<SpacingReport> {
    if fam.len() < 2 {
        return Err(SieveError::TooFewCharacters);
    }
    let idx: Vec<usize> = (0..fam.len()).collect();
    let mins = par::map_ordered(&idx, |&i| {
        let mut m = f64::INFINITY;
        for j in (i + 1)..fam.len() {
            m = m.min(torus_distance(f, &fam.dual, &fam.points[i].sub(&fam.points[j])));
        }
        m
    });
    let delta = mins.into_iter().fold(f64::INFINITY, f64::min);
    let d = f.degree() as f64;
    let guaranteed = (fam.lattice.norm_f64() * f.disc().unsigned_abs() as f64 * fam.q * fam.q).powf(-1.0 / d);
    Ok(SpacingReport { delta, guaranteed, ok: delta >= guaranteed * (1.0 - 1e-12) })
}

/// Both sides of `#S · H <= D̂` with `D̂ = F(f; 𝔵, ℱ) / (vol(F_∞/𝔬)|𝔵|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LargeSieveReport {
    pub count: u64,
    pub h: f64,
    pub d_hat: f64,
    /// `F(f; 𝔵, ℱ)`.
    pub f_sup: f64,
    pub family_size: usize,
    pub bound: f64,
    pub ok: bool,
}

/// `f̂` of the admissible `(π²/8)^d ∏ sinc²((x_i - c_i)/(2L_i))`:
/// `(π²/8)^d ∏ 2L_i (1 - 2L_i|y_i|)⁺ e(-c_i y_i)`.
fn admissible_hat(sides: &[(f64, f64)], y: &[f64]) -> Complex64 {
    let mut v = Complex64::new(1.0, 0.0);
    for (&(center, len), &yi) in sides.iter().zip(y) {
        let tent = (1.0 - 2.0 * len * yi.abs()).max(0.0);
        if tent == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        v *= Complex64::from_polar(PI * PI / 8.0 * 2.0 * len * tent, -2.0 * PI * center * yi);
    }
    v
}

/// `F(f; 𝔵, ℱ) = sup_ξ Σ_η |Σ_{μ ∈ 𝔵⁻¹𝔡⁻¹} f̂(μ - ξ + η)|` for the box's admissible function.
pub fn admissible_sup(f: &FieldDescriptor, fam: &CharacterFamily, b: &AxisBox<f64>) -> f64 {
    let sides: Vec<(f64, f64)> = b.sides.iter().map(|s| (0.5 * (s.lo + s.hi), s.hi - s.lo)).collect();
    let half: Vec<f64> = sides.iter().map(|&(_, len)| 0.5 / len).collect();
    let idx: Vec<usize> = (0..fam.len()).collect();
    let rows = par::map_ordered(&idx, |&i| {
        let mut row = Vec::with_capacity(fam.len());
        for eta in &fam.points {
            let w = eta.sub(&fam.points[i]);
            let we = w.embedding().to_vec();
            let bounds: Vec<(f64, f64, bool)> = we.iter().zip(&half).map(|(&v, &h)| (-h - v, h - v, false)).collect();
            let mut acc = Complex64::new(0.0, 0.0);
            f.for_each_lattice_point(&fam.dual, &bounds, |_, mu| {
                let y: Vec<f64> = mu.embedding().iter().zip(&we).map(|(a, b)| a + b).collect();
                acc += admissible_hat(&sides, &y);
                true
            });
            row.push(acc.norm());
        }
        par::tree_sum(&row)
    });
    rows.into_iter().fold(0.0, f64::max)
}

/// Side length every box must reach, `(Δ|𝔵|)^{1/d}`.
pub fn minimal_side(f: &FieldDescriptor, x: &FractionalIdeal) -> f64 {
    (f.disc().unsigned_abs() as f64 * x.norm_f64()).powf(1.0 / f.degree() as f64)
}

/// Counts the sifted set in `b` and compares `#S` with `D̂ / H`.
pub fn large_sieve_bound(f: &FieldDescriptor, s: &SieveSystem, b: &AxisBox<f64>, q: f64, budget: f64) -> Result<LargeSieveReport> {
    let required = minimal_side(f, &s.lattice);
    for side in &b.sides {
        if side.hi - side.lo < required {
            return Err(SieveError::RegionTooSmall { side: side.hi - side.lo, required });
        }
    }
    let primes: Vec<PrimeIdeal> = s.primes.iter().map(|p| p.prime.clone()).collect();
    let fam = CharacterFamily::new(f, &s.lattice, &primes, q)?;
    let f_sup = admissible_sup(f, &fam, b);
    let covol = s.lattice.norm_f64() * if f.degree() == 2 { f.sqrt_disc() } else { 1.0 };
    let d_hat = f_sup / covol;
    let h = sieve_h(s, q)?;
    let count = sifted_count(f, s, b, budget)?;
    let bound = d_hat / h;
    Ok(LargeSieveReport { count, h, d_hat, f_sup, family_size: fam.len(), bound, ok: count as f64 <= bound * (1.0 + 1e-12) })
}

/// Both sides of `h(𝔮)‖a[(1)]‖² <= N𝔮 ‖a[𝔮]_#‖²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MontgomeryReport {
    pub lhs: f64,
    pub rhs: f64,
    pub h: f64,
    pub holds: bool,
}

/// Montgomery's inequality for `a` supported on `𝔵`, with `𝔮 = ∏ 𝔭` over
/// the given primes and `a[𝔭]` required to vanish on the declared classes.
pub fn montgomery_check(x: &FractionalIdeal, primes: &[(PrimeIdeal, Vec<u64>)], a: &[(FieldElement, Complex64)]) -> Result<MontgomeryReport> {
    if a.len() > 10_000 {
        return Err(SieveError::Precondition("support larger than 10^4 points"));
    }
    let sps: Vec<SievePrime> = primes.iter().map(|(p, om)| SievePrime::new(x, p.clone(), om.clone())).collect();
    let mut dims = Vec::new();
    for sp in &sps {
        let (al, ga) = (to_u64(&sp.rel.alpha), to_u64(&sp.rel.gamma));
        if !(sp.rel.beta.is_zero() || al == 1 || ga == 1) {
            return Err(SieveError::Precondition("quotient is not a product of cyclic factors"));
        }
        dims.push(al as usize);
        dims.push(ga as usize);
    }
    let size: usize = dims.iter().product();
    let mut grid = vec![Complex64::new(0.0, 0.0); size];
    let mut total = Complex64::new(0.0, 0.0);
    let mut scale = 0.0f64;
    let mut per_prime: Vec<Vec<Complex64>> = sps.iter().map(|sp| vec![Complex64::new(0.0, 0.0); to_u64(&sp.rel.index()) as usize]).collect();
    for (e, v) in a {
        let c = x.coords(e).ok_or(SieveError::Precondition("support point not in the lattice"))?;
        let mut flat = 0usize;
        let mut stride = 1usize;
        for (k, sp) in sps.iter().enumerate() {
            let r = sp.rel.residue(&c) as usize;
            per_prime[k][r] += v;
            let al = dims[2 * k];
            flat += (r % al) * stride;
            stride *= al;
            flat += (r / al) * stride;
            stride *= dims[2 * k + 1];
        }
        grid[flat] += v;
        total += v;
        scale = scale.max(v.norm());
    }
    let mut h = 1.0;
    for (k, sp) in sps.iter().enumerate() {
        for &cls in &sp.omega {
            if per_prime[k][cls as usize].norm() > 1e-9 * scale.max(1e-300) * a.len() as f64 {
                return Err(SieveError::NotVanishing(sp.prime.p));
            }
        }
        let w = sp.omega.len() as f64;
        h *= w / (sp.norm() as f64 - w);
    }
    // DFT along every cyclic axis
    let mut stride = 1usize;
    for &n in &dims {
        if n > 1 {
            let block = stride * n;
            let mut out = vec![Complex64::new(0.0, 0.0); size];
            for base in (0..size).step_by(block) {
                for off in 0..stride {
                    for t in 0..n {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for r in 0..n {
                            let ang = -2.0 * PI * ((t * r) % n) as f64 / n as f64;
                            acc += grid[base + off + r * stride] * Complex64::from_polar(1.0, ang);
                        }
                        out[base + off + t * stride] = acc;
                    }
                }
            }
            grid = out;
        }
        stride *= n;
    }
    // primitive characters are nontrivial on every prime's pair of axes
    let mut rhs_terms = Vec::new();
    for (flat, v) in grid.iter().enumerate() {
        let mut rem = flat;
        let mut primitive = true;
        for k in 0..sps.len() {
            let (al, ga) = (dims[2 * k], dims[2 * k + 1]);
            let t1 = rem % al;
            rem /= al;
            let t2 = rem % ga;
            rem /= ga;
            if t1 == 0 && t2 == 0 {
                primitive = false;
            }
        }
        if primitive {
            rhs_terms.push(v.norm_sqr());
        }
    }
    let rhs = par::tree_sum(&rhs_terms);
    let lhs = h * total.norm_sqr();
    Ok(MontgomeryReport { lhs, rhs, h, holds: lhs <= rhs * (1.0 + 1e-9) + 1e-12 * scale * scale })
}

/// `B(y, z)` with the class attaining it and the comparison value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BReport {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub classes: usize,
    pub b: f64,
    /// Norms `(|𝔞|, |𝔟|, |𝔠|)` of the maximizing datum.
    pub argmax: (u64, u64, u64),
    pub argmax_count: u64,
    /// `(X + y²z²) / log(z)²`.
    pub reference: f64,
    pub ratio: f64,
    /// Whether `φ(𝔞𝔟) >= φ(𝔞)φ(𝔟)` held on every emitted datum.
    pub phi_ok: bool,
}

/// The constant in the size condition `X > c₂ y²`.
pub fn c2(f: &FieldDescriptor) -> f64 {
    f.disc().unsigned_abs() as f64
}

/// `sup` over data with `max(|𝔞𝔠|, |𝔟𝔠|) <= y` of `count / (|𝔷⁻¹l| / (|𝔠|² φ(𝔞𝔟𝔠⁻¹𝔷⁻¹l)))`,
/// counting `n` with `m, n ∈ (0, (N𝔷 X)^{1/d}]^d`.
pub fn b_quantity(f: &FieldDescriptor, zeta: &FractionalIdeal, l: &FieldElement, y: f64, z: f64, x: f64, budget: f64) -> Result<BReport> {
    if !(2.0 <= z && z <= y && y <= x) {
        return Err(SieveError::Precondition("need 2 <= z <= y <= X"));
    }
    if !(x > c2(f) * y * y) {
        return Err(SieveError::Precondition("need X > c2 y^2"));
    }
    let d = f.degree();
    let side = (zeta.norm_f64() * x).powf(1.0 / d as f64);
    let b = AxisBox::new(vec![Interval::left_open(0.0, side); d]);
    let classes: Vec<(ZDatum, u64)> = data_in_box(f, zeta, l, z, &b, budget)?.into_iter().filter(|(dn, _)| dn.size() as f64 <= y).collect();
    if classes.is_empty() {
        return Err(SieveError::EmptyData);
    }
    let lz = f.factor_element(l)?.div(&f.factor_fractional(zeta));
    let lz_norm = norm_u64(&lz) as f64;
    let mut best = (f64::NEG_INFINITY, (0, 0, 0), 0);
    let mut phi_ok = true;
    for (dn, count) in &classes {
        let modulus = dn.a.mul(&dn.b).mul(&lz.div(&dn.c));
        let phi = euler_phi(&modulus).to_f64().unwrap_or(f64::INFINITY);
        let c_norm = norm_u64(&dn.c) as f64;
        let ratio = *count as f64 / (lz_norm / (c_norm * c_norm * phi));
        if ratio > best.0 {
            best = (ratio, dn.norms(), *count);
        }
        if euler_phi(&dn.a.mul(&dn.b)) < euler_phi(&dn.a) * euler_phi(&dn.b) {
            phi_ok = false;
        }
    }
    let reference = (x + y * y * z * z) / z.ln().powi(2);
    Ok(BReport { x, y, z, classes: classes.len(), b: best.0, argmax: best.1, argmax_count: best.2, reference, ratio: best.0 / reference, phi_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_field, FieldSpec};

    fn q() -> FieldDescriptor {
        make_field(&FieldSpec::Rational, None).unwrap()
    }

    fn ints(f: &FieldDescriptor, v: &IdealFactorization) -> u64 {
        let _ = f;
        norm_u64(v)
    }

    #[test]
    fn datum_examples() {
        let f = q();
        let d = z_datum(&f, &f.ring(), &f.element(1, 0), &f.element(8, 0), 3.0).unwrap();
        assert_eq!((ints(&f, &d.a), ints(&f, &d.b), ints(&f, &d.c)), (9, 8, 1));
        let d = z_datum(&f, &f.ring(), &f.element(2, 0), &f.element(2, 0), 3.0).unwrap();
        assert_eq!(d.norms(), (2, 1, 2));
        let d = z_datum(&f, &f.ring(), &f.element(6, 0), &f.element(7, 0), 5.0).unwrap();
        assert_eq!(d.norms(), (1, 1, 1));
    }

    #[test]
    fn grouped_inclusion_agrees_with_single_datum() {
        let f = make_field(&FieldSpec::Quadratic(5), None).unwrap();
        let l = f.element(3, 1);
        let b = crate::shifted::positive_box(&[15.0, 15.0]);
        let grouped = inclusion_by_datum(&f, &f.ring(), &l, 7.0, &b, 1e6).unwrap();
        assert!(grouped.len() > 3);
        for (d, s, rep) in &grouped {
            assert_eq!(*rep, inclusion_check(&f, &f.ring(), &l, d, 7.0, s, &b, 1e6).unwrap());
            assert_eq!(rep.violations, 0);
        }
    }

    #[test]
    fn sifted_mod_three() {
        let f = q();
        let p3 = f.split_prime(3).remove(0);
        let s = SieveSystem::with_classes(&f.ring(), vec![(p3, vec![f.element(0, 0), f.element(1, 0)])]).unwrap();
        let b = AxisBox::new(vec![Interval::left_open(0.0, 30.0)]);
        assert_eq!(sifted_count(&f, &s, &b, 1e6).unwrap(), 10);
        let empty = SieveSystem::with_classes(&f.ring(), vec![]).unwrap();
        assert_eq!(sifted_count(&f, &empty, &b, 1e6).unwrap(), 30);
    }

    #[test]
    fn h_examples() {
        let f = q();
        let p3 = f.split_prime(3).remove(0);
        let p5 = f.split_prime(5).remove(0);
        let s = SieveSystem::with_classes(&f.ring(), vec![(p3.clone(), vec![f.element(0, 0), f.element(1, 0)])]).unwrap();
        assert_eq!(sieve_h(&s, 3.0).unwrap(), 3.0);
        assert_eq!(sieve_h(&s, 1.0).unwrap(), 1.0);
        let s = SieveSystem::with_classes(&f.ring(), vec![(p3, vec![f.element(0, 0)]), (p5, vec![f.element(0, 0)])]).unwrap();
        assert_eq!(sieve_h(&s, 15.0).unwrap(), 1.875);
    }

    #[test]
    fn farey_spacing() {
        let f = q();
        let primes = vec![f.split_prime(2).remove(0), f.split_prime(3).remove(0)];
        let fam = CharacterFamily::new(&f, &f.ring(), &primes, 3.0).unwrap();
        assert_eq!(fam.len(), 4);
        let s = spacing(&f, &fam).unwrap();
        assert!((s.delta - 1.0 / 6.0).abs() < 1e-12);
        assert!((s.guaranteed - 1.0 / 9.0).abs() < 1e-12);
        let fam = CharacterFamily::new(&f, &f.ring(), &primes[..1], 2.0).unwrap();
        assert_eq!(spacing(&f, &fam).unwrap().delta, 0.5);
    }

    #[test]
    fn system_for_trivial_datum() {
        let f = q();
        let one = IdealFactorization::one();
        let d = ZDatum { a: one.clone(), b: one.clone(), c: one };
        let s = build_sieve_system(&f, &f.ring(), &f.element(1, 0), &d, 5.0).unwrap();
        assert_eq!(s.omega_sizes(), vec![(3, 2), (5, 2)]);
    }

    #[test]
    fn montgomery_single_point() {
        let f = q();
        let p3 = f.split_prime(3).remove(0);
        let p5 = f.split_prime(5).remove(0);
        let a = vec![(f.element(7, 0), Complex64::new(1.0, 0.0))];
        // 7 ≡ 1 mod 3 and 2 mod 5, so classes 0 are free to declare
        let r = montgomery_check(&f.ring(), &[(p3, vec![0]), (p5, vec![0])], &a).unwrap();
        assert!((r.h - 0.5 * 0.25).abs() < 1e-15);
        assert!((r.rhs - 8.0).abs() < 1e-9);
        assert!(r.holds);
    }
}
