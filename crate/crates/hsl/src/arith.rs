//! Multiplicative functions on integral ideals, Ramanujan's `τ`, smooth-ideal
//! counting and the Dickman function.

use crate::field::{factor_integer, primes_up_to, sqrt_mod, FieldDescriptor, IdealFactorization, PrimeIdeal};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArithError {
    #[error("n = {n} is beyond the series cutoff {cutoff}")]
    BeyondCutoff { n: u64, cutoff: u64 },
    #[error("{0} is only defined over Q")]
    RationalOnly(&'static str),
    #[error("ideal is not integral")]
    NotIntegral,
    #[error("bad multiplicative function specification {0:?}")]
    BadSpec(String),
    #[error("need t >= 2 and 2 <= z <= t")]
    BadRange,
    #[error("t = {t} is above the enumeration cutoff {cutoff}")]
    TooLarge { t: u64, cutoff: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundTag {
    DivisorBounded,
    HeckeBounded,
    Unbounded,
}

pub type PrimePowerRule = dyn Fn(&PrimeIdeal, u32) -> Result<f64, ArithError> + Send + Sync;

/// A weakly multiplicative function given by its values on prime powers.
#[derive(Clone)]
pub struct MultiplicativeFunction {
    pub name: String,
    pub bound: BoundTag,
    rule: Arc<PrimePowerRule>,
}

impl std::fmt::Debug for MultiplicativeFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MultiplicativeFunction").field("name", &self.name).field("bound", &self.bound).finish()
    }
}

impl MultiplicativeFunction {
    pub fn new(
        name: impl Into<String>,
        bound: BoundTag,
        rule: impl Fn(&PrimeIdeal, u32) -> Result<f64, ArithError> + Send + Sync + 'static,
    ) -> Self {
        MultiplicativeFunction { name: name.into(), bound, rule: Arc::new(rule) }
    }

    pub fn at_prime_power(&self, p: &PrimeIdeal, k: u32) -> Result<f64, ArithError> {
        if k == 0 {
            return Ok(1.0);
        }
        (self.rule)(p, k)
    }

    pub fn eval(&self, a: &IdealFactorization) -> Result<f64, ArithError> {
        let mut acc = 1.0;
        for (p, e) in &a.factors {
            if *e < 0 {
                return Err(ArithError::NotIntegral);
            }
            acc *= self.at_prime_power(p, *e as u32)?;
        }
        Ok(acc)
    }

    /// The divisor function `τ`.
    pub fn divisor() -> Self {
        Self::new("tau", BoundTag::DivisorBounded, |_, k| Ok(k as f64 + 1.0))
    }

    /// Euler's `φ`.
    pub fn phi() -> Self {
        Self::new("phi", BoundTag::Unbounded, |p, k| {
            let n = p.norm() as f64;
            Ok(n.powi(k as i32 - 1) * (n - 1.0))
        })
    }

    /// Vanishes on every prime ideal and satisfies the Hecke recursion above.
    pub fn zero_on_primes() -> Self {
        Self::new("zero", BoundTag::DivisorBounded, |_, k| {
            Ok(match k % 4 {
                0 => 1.0,
                2 => -1.0,
                _ => 0.0,
            })
        })
    }

    /// Normalized Ramanujan `τ(n)/n^{11/2}`, over `Q` only.
    pub fn ramanujan(table: Arc<RamanujanTable>) -> Self {
        Self::new("ramanujan", BoundTag::DivisorBounded, move |p, k| {
            if p.ideal.ctx.degree != 1 {
                return Err(ArithError::RationalOnly("ramanujan"));
            }
            let n = p.p.checked_pow(k).ok_or(ArithError::BeyondCutoff { n: u64::MAX, cutoff: table.cutoff() })?;
            table.lambda(n)
        })
    }

    /// Synthetic Hecke eigenvalues `λ(𝔭) = 2 cos θ_𝔭`.
    pub fn synthetic(spec: SyntheticSpec) -> Self {
        Self::new(format!("synthetic:{}:seed={}", spec.dist.name(), spec.seed), BoundTag::DivisorBounded, move |p, k| {
            Ok(hecke_power(2.0 * spec.angle(p).cos(), k))
        })
    }

    /// `|f|`.
    pub fn abs(self) -> Self {
        let inner = self.rule.clone();
        MultiplicativeFunction {
            name: format!("abs:{}", self.name),
            bound: self.bound,
            rule: Arc::new(move |p, k| inner(p, k).map(f64::abs)),
        }
    }
}

/// `λ(𝔭^k)` from `λ(𝔭)` via `λ(𝔭^{k+1}) = λ(𝔭)λ(𝔭^k) - λ(𝔭^{k-1})`.
pub fn hecke_power(lp: f64, k: u32) -> f64 {
    let (mut prev, mut cur) = (1.0, lp);
    if k == 0 {
        return 1.0;
    }
    for _ in 1..k {
        let next = lp * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AngleDistribution {
    SatoTate,
    Uniform,
}

impl AngleDistribution {
    pub fn name(&self) -> &'static str {
        match self {
            AngleDistribution::SatoTate => "sato-tate",
            AngleDistribution::Uniform => "uniform",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dist: AngleDistribution,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Angle of `𝔭`, drawn from a stream keyed by `(seed, p, index)` alone.
    pub fn angle(&self, p: &PrimeIdeal) -> f64 {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&p.p.to_le_bytes());
        key[16] = p.index;
        let mut rng = ChaCha20Rng::from_seed(key);
        let pi = std::f64::consts::PI;
        match self.dist {
            AngleDistribution::Uniform => rng.gen::<f64>() * pi,
            AngleDistribution::SatoTate => loop {
                // density (2/π) sin²θ by rejection
                let th = rng.gen::<f64>() * pi;
                if rng.gen::<f64>() <= th.sin().powi(2) {
                    break th;
                }
            },
        }
    }
}

/// Which multiplicative function a configuration names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LambdaSpec {
    Divisor,
    Ramanujan,
    Synthetic(SyntheticSpec),
    Abs(Box<LambdaSpec>),
}

impl LambdaSpec {
    /// Parses `tau`, `ramanujan`, `synthetic:<sato-tate|uniform>:seed=N`, or `abs:<spec>`.
    pub fn parse(s: &str) -> Result<Self, ArithError> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("abs:") {
            return Ok(LambdaSpec::Abs(Box::new(Self::parse(rest)?)));
        }
        match s {
            "tau" | "divisor" => return Ok(LambdaSpec::Divisor),
            "ramanujan" => return Ok(LambdaSpec::Ramanujan),
            _ => {}
        }
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 3 && parts[0] == "synthetic" {
            let dist = match parts[1] {
                "sato-tate" => AngleDistribution::SatoTate,
                "uniform" => AngleDistribution::Uniform,
                _ => return Err(ArithError::BadSpec(s.to_string())),
            };
            let seed = parts[2]
                .strip_prefix("seed=")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| ArithError::BadSpec(s.to_string()))?;
            return Ok(LambdaSpec::Synthetic(SyntheticSpec { dist, seed }));
        }
        Err(ArithError::BadSpec(s.to_string()))
    }

    pub fn build(&self, table: &Arc<RamanujanTable>) -> MultiplicativeFunction {
        match self {
            LambdaSpec::Divisor => MultiplicativeFunction::divisor(),
            LambdaSpec::Ramanujan => MultiplicativeFunction::ramanujan(table.clone()),
            LambdaSpec::Synthetic(s) => MultiplicativeFunction::synthetic(*s),
            LambdaSpec::Abs(inner) => inner.build(table).abs(),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        matches!(self, LambdaSpec::Divisor | LambdaSpec::Abs(_))
    }

    pub fn needs_rational_field(&self) -> bool {
        match self {
            LambdaSpec::Ramanujan => true,
            LambdaSpec::Abs(inner) => inner.needs_rational_field(),
            _ => false,
        }
    }
}

/// `∏ (k_i + 1)`.
pub fn tau(a: &IdealFactorization) -> u64 {
    a.factors.iter().map(|(_, e)| (*e).max(0) as u64 + 1).product()
}

/// `∏ N(𝔭)^{k-1}(N(𝔭) - 1)`.
pub fn euler_phi(a: &IdealFactorization) -> BigInt {
    let mut acc = BigInt::one();
    for (p, e) in &a.factors {
        let n = BigInt::from(p.norm());
        acc *= num_traits::pow(n.clone(), (*e as usize).saturating_sub(1)) * (n - 1);
    }
    acc
}

// ---------------------------------------------------------------------------
// Ramanujan τ via q ∏ (1 - q^n)^24 = q (E³)^8, with E³ = Σ (-1)^k (2k+1) q^{k(k+1)/2}.

const NTT_PRIMES: [u32; 5] = [2013265921, 2281701377, 3221225473, 3489660929, 3892314113];
const NTT_ROOTS: [u32; 5] = [31, 3, 5, 3, 3];

#[inline(always)]
fn mulm<const P: u32>(a: u32, b: u32) -> u32 {
    ((a as u64 * b as u64) % P as u64) as u32
}

fn powm<const P: u32>(mut b: u32, mut e: u64) -> u32 {
    let mut r = 1u32;
    while e > 0 {
        if e & 1 == 1 {
            r = mulm::<P>(r, b);
        }
        b = mulm::<P>(b, b);
        e >>= 1;
    }
    r
}

/// `-P⁻¹ mod 2³²` for odd `P`.
const fn neg_inv32(p: u32) -> u32 {
    let mut inv = 1u32;
    let mut i = 0;
    while i < 5 {
        inv = inv.wrapping_mul(2u32.wrapping_sub(p.wrapping_mul(inv)));
        i += 1;
    }
    inv.wrapping_neg()
}

/// Montgomery product `a b 2⁻³² mod P` for `a, b < P`.
#[inline(always)]
fn redc<const P: u32>(a: u32, b: u32) -> u32 {
    let t = a as u64 * b as u64;
    let m = (t as u32).wrapping_mul(neg_inv32(P));
    let u = (t >> 32) + ((m as u64 * P as u64) >> 32) + ((t as u32 != 0) as u64);
    if u >= P as u64 {
        (u - P as u64) as u32
    } else {
        u as u32
    }
}

/// `x 2³² mod P`.
fn to_mont<const P: u32>(x: u32) -> u32 {
    (((x as u64) << 32) % P as u64) as u32
}

#[inline(always)]
fn add_mod<const P: u32>(u: u32, v: u32) -> u32 {
    let s = u as u64 + v as u64;
    let t = s.wrapping_sub(P as u64);
    // branch-free select: t underflowed iff s < P
    (if (t as i64) < 0 { s } else { t }) as u32
}

#[inline(always)]
fn sub_mod<const P: u32>(u: u32, v: u32) -> u32 {
    let d = (u as u64).wrapping_sub(v as u64);
    (if (d as i64) < 0 { d.wrapping_add(P as u64) } else { d }) as u32
}

/// Powers `1, w, w², …, w^{len/2-1}` of a primitive `len`-th root, in Montgomery form.
fn twiddles<const P: u32>(g: u32, len: usize, invert: bool, tw: &mut [u32]) {
    let mut w = powm::<P>(g, ((P - 1) as u64) / len as u64);
    if invert {
        w = powm::<P>(w, (P - 2) as u64);
    }
    let wm = to_mont::<P>(w);
    tw[0] = to_mont::<P>(1);
    for k in 1..len / 2 {
        tw[k] = redc::<P>(tw[k - 1], wm);
    }
}

/// Stages up to this length run block by block so that a block stays in cache.
const NTT_BLOCK: usize = 1 << 15;

/// Twiddle tables for every stage length `2..=min(n, NTT_BLOCK)`, indexed by `log₂ len`.
fn small_twiddles<const P: u32>(g: u32, n: usize, invert: bool) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    let mut len = 2;
    while len <= n.min(NTT_BLOCK) {
        let mut tw = vec![0u32; len / 2];
        twiddles::<P>(g, len, invert, &mut tw);
        out.push(tw);
        len <<= 1;
    }
    out
}

#[inline(always)]
fn dif_stage<const P: u32>(a: &mut [u32], len: usize, tw: &[u32]) {
    let half = len / 2;
    for chunk in a.chunks_mut(len) {
        let (lo, hi) = chunk.split_at_mut(half);
        for ((x, y), &w) in lo.iter_mut().zip(hi.iter_mut()).zip(tw) {
            let (u, v) = (*x, *y);
            *x = add_mod::<P>(u, v);
            *y = redc::<P>(sub_mod::<P>(u, v), w);
        }
    }
}

#[inline(always)]
fn dit_stage<const P: u32>(a: &mut [u32], len: usize, tw: &[u32]) {
    let half = len / 2;
    for chunk in a.chunks_mut(len) {
        let (lo, hi) = chunk.split_at_mut(half);
        for ((x, y), &w) in lo.iter_mut().zip(hi.iter_mut()).zip(tw) {
            let u = *x;
            let v = redc::<P>(*y, w);
            *x = add_mod::<P>(u, v);
            *y = sub_mod::<P>(u, v);
        }
    }
}

/// Forward NTT by decimation in frequency: natural order in, bit-reversed order out.
fn ntt_forward<const P: u32>(a: &mut [u32], g: u32) {
    let n = a.len();
    let mut len = n;
    if n > NTT_BLOCK {
        let mut tw = vec![0u32; n / 2];
        while len > NTT_BLOCK {
            twiddles::<P>(g, len, false, &mut tw);
            dif_stage::<P>(a, len, &tw[..len / 2]);
            len /= 2;
        }
    }
    let small = small_twiddles::<P>(g, n, false);
    for block in a.chunks_mut(len) {
        let mut l = len;
        while l >= 2 {
            dif_stage::<P>(block, l, &small[l.trailing_zeros() as usize]);
            l /= 2;
        }
    }
}

/// Inverse NTT by decimation in time: bit-reversed order in, natural order out, scaled by `1/n`.
fn ntt_inverse<const P: u32>(a: &mut [u32], g: u32) {
    let n = a.len();
    let top = n.min(NTT_BLOCK);
    let small = small_twiddles::<P>(g, n, true);
    for block in a.chunks_mut(top) {
        let mut l = 2;
        while l <= top {
            dit_stage::<P>(block, l, &small[l.trailing_zeros() as usize]);
            l <<= 1;
        }
    }
    if n > NTT_BLOCK {
        let mut tw = vec![0u32; n / 2];
        let mut len = top * 2;
        while len <= n {
            twiddles::<P>(g, len, true, &mut tw);
            dit_stage::<P>(a, len, &tw[..len / 2]);
            len <<= 1;
        }
    }
    let inv_n = to_mont::<P>(powm::<P>(n as u32 % P, (P - 2) as u64));
    for x in a.iter_mut() {
        *x = redc::<P>(*x, inv_n);
    }
}

/// Coefficients `0..n` of `(E³)²` reduced mod `P`.
fn e3_squared_mod<const P: u32>(n: usize) -> Vec<u32> {
    let mut tri = Vec::new();
    let mut k = 0u64;
    loop {
        let t = (k * (k + 1) / 2) as usize;
        if t >= n {
            break;
        }
        let c = (2 * k + 1) as i64 * if k.is_multiple_of(2) { 1 } else { -1 };
        tri.push((t, c));
        k += 1;
    }
    let mut out = vec![0u32; n];
    for &(ti, ci) in &tri {
        for &(tj, cj) in &tri {
            let idx = ti + tj;
            if idx >= n {
                break;
            }
            let v = (ci * cj).rem_euclid(P as i64) as u64;
            out[idx] = ((out[idx] as u64 + v) % P as u64) as u32;
        }
    }
    out
}

/// `f² mod q^n`, splitting `f` at `h = ⌈n/2⌉` so that transforms of length
/// `L >= n` suffice: `f² = f_lo² + 2 q^h f_lo f_hi + O(q^n)`.
fn square_truncated<const P: u32>(f: &[u32], g: u32) -> Vec<u32> {
    let n = f.len();
    let h = n.div_ceil(2);
    let l = n.next_power_of_two().max(2);
    let mut lo = vec![0u32; l];
    lo[..h].copy_from_slice(&f[..h]);
    let mut hi = vec![0u32; l];
    hi[..n - h].copy_from_slice(&f[h..]);
    ntt_forward::<P>(&mut lo, g);
    ntt_forward::<P>(&mut hi, g);
    // one factor in Montgomery form keeps the products plain
    for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
        let xm = to_mont::<P>(*x);
        *y = redc::<P>(xm, *y);
        *x = redc::<P>(xm, *x);
    }
    ntt_inverse::<P>(&mut lo, g);
    ntt_inverse::<P>(&mut hi, g);
    drop(hi.split_off(n - h));
    for i in h..n {
        let t = (lo[i] as u64 + 2 * hi[i - h] as u64) % P as u64;
        lo[i] = t as u32;
    }
    lo.truncate(n);
    lo
}

/// `τ(m+1) mod P` for `m` in `0..n`, i.e. coefficients of `(E³)^8`.
fn delta_mod<const P: u32>(n: usize, g: u32) -> Vec<u32> {
    let c = e3_squared_mod::<P>(n);
    let b = square_truncated::<P>(&c, g);
    drop(c);
    square_truncated::<P>(&b, g)
}

fn delta_mod_indexed(which: usize, n: usize) -> Vec<u32> {
    let g = NTT_ROOTS[which];
    match which {
        0 => delta_mod::<{ NTT_PRIMES[0] }>(n, g),
        1 => delta_mod::<{ NTT_PRIMES[1] }>(n, g),
        2 => delta_mod::<{ NTT_PRIMES[2] }>(n, g),
        3 => delta_mod::<{ NTT_PRIMES[3] }>(n, g),
        _ => delta_mod::<{ NTT_PRIMES[4] }>(n, g),
    }
}

/// Symmetric CRT reconstruction from residues modulo [`NTT_PRIMES`].
fn crt_symmetric(residues: &[u32]) -> BigInt {
    let mut x = BigInt::zero();
    let mut m = BigInt::one();
    for (&r, &p) in residues.iter().zip(NTT_PRIMES.iter()) {
        let pb = BigInt::from(p);
        // x + m t ≡ r (mod p)
        let diff = (BigInt::from(r) - &x).mod_floor(&pb);
        let inv = m.modpow(&(&pb - 2u32), &pb);
        let t = (diff * inv).mod_floor(&pb);
        x += &m * t;
        m *= pb;
    }
    if &x * 2 > m {
        x - m
    } else {
        x
    }
}

/// `log₂` of the product of the NTT moduli.
pub fn crt_modulus_bits() -> f64 {
    NTT_PRIMES.iter().map(|&p| (p as f64).log2()).sum()
}

/// Exact `τ(n)` for every `n` in `targets`, by the modular series to `max(targets)`.
///
/// Memory is about `8·2^⌈log₂ N⌉` bytes; `N ≈ 10^8` needs roughly 1 GiB.
pub fn ramanujan_tau_exact(targets: &[u64]) -> Vec<BigInt> {
    let Some(&n_max) = targets.iter().max() else { return Vec::new() };
    let n = n_max as usize; // indices 0..n hold τ(1..=n)
    let mut residues = vec![[0u32; 5]; targets.len()];
    for which in 0..NTT_PRIMES.len() {
        let d = delta_mod_indexed(which, n);
        for (slot, &t) in residues.iter_mut().zip(targets) {
            slot[which] = d[t as usize - 1];
        }
    }
    residues.iter().map(|r| crt_symmetric(r)).collect()
}

/// Cached `τ(n)` for `1 <= n <= cutoff`.
#[derive(Debug)]
pub struct RamanujanTable {
    values: Vec<i128>,
}

pub const DEFAULT_TAU_CUTOFF: u64 = 1_000_000;

impl RamanujanTable {
    pub fn new(cutoff: u64) -> Self {
        let n = cutoff as usize;
        let per_prime: Vec<Vec<u32>> = (0..NTT_PRIMES.len()).map(|w| delta_mod_indexed(w, n)).collect();
        let values = (0..n)
            .map(|i| {
                let r: Vec<u32> = per_prime.iter().map(|v| v[i]).collect();
                crt_symmetric(&r).to_i128().expect("τ(n) fits in i128 below 10^6")
            })
            .collect();
        RamanujanTable { values }
    }

    pub fn cutoff(&self) -> u64 {
        self.values.len() as u64
    }

    pub fn tau(&self, n: u64) -> Result<i128, ArithError> {
        if n == 0 || n > self.cutoff() {
            return Err(ArithError::BeyondCutoff { n, cutoff: self.cutoff() });
        }
        Ok(self.values[n as usize - 1])
    }

    /// `τ(n)/n^{11/2}`.
    pub fn lambda(&self, n: u64) -> Result<f64, ArithError> {
        let t = self.tau(n)? as f64;
        Ok(t / (n as f64).powf(5.5))
    }
}

/// `τ(n)/n^{11/2}`, caching the table on first use.
pub fn ramanujan_lambda(n: u64) -> Result<f64, ArithError> {
    default_table().lambda(n)
}

pub fn default_table() -> Arc<RamanujanTable> {
    static TABLE: std::sync::OnceLock<Arc<RamanujanTable>> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| Arc::new(RamanujanTable::new(DEFAULT_TAU_CUTOFF))).clone()
}

// ---------------------------------------------------------------------------
// Smooth ideals.

/// `χ(p)` for the quadratic character of the field: `1` split, `-1` inert, `0` ramified.
pub fn splitting_sign(f: &FieldDescriptor, p: u64) -> i32 {
    if f.degree() == 1 {
        return 1;
    }
    let disc = f.disc();
    if disc.rem_euclid(p as i64) == 0 {
        return 0;
    }
    if p == 2 {
        return if disc.rem_euclid(8) == 1 { 1 } else { -1 };
    }
    if sqrt_mod(disc.rem_euclid(p as i64) as u64, p).is_some() {
        1
    } else {
        -1
    }
}

/// Norms of all prime ideals with norm `<= x`, one entry per prime ideal, ascending.
pub fn prime_ideal_norms(f: &FieldDescriptor, x: u64) -> Vec<u64> {
    let mut out = Vec::new();
    for p in primes_up_to(x) {
        match splitting_sign(f, p) {
            1 if f.degree() == 2 => {
                out.push(p);
                out.push(p);
            }
            -1 => {
                if p.saturating_mul(p) <= x {
                    out.push(p * p);
                }
            }
            _ => out.push(p),
        }
    }
    out.sort_unstable();
    out
}

/// Prime ideals of norm `<= x`, sorted by `(p, index)`.
pub fn prime_ideals_up_to(f: &FieldDescriptor, x: u64) -> Vec<PrimeIdeal> {
    let mut out = Vec::new();
    for p in primes_up_to(x) {
        for pr in f.split_prime(p) {
            if pr.norm() <= x {
                out.push(pr);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothCountResult {
    pub t: u64,
    pub z: u64,
    pub count: u64,
    pub total_ideals: u64,
    pub u: f64,
    pub dickman_prediction: f64,
    /// `count / (t ρ(u))`.
    pub ratio: f64,
    pub relative_deviation: f64,
}

pub const SMOOTH_COUNT_CUTOFF: u64 = 100_000_000;

fn count_products(norms: &[u64], start: usize, limit: u64) -> u64 {
    // the empty product (norm 1) is counted by the caller
    let mut total = 0;
    for i in start..norms.len() {
        let p = norms[i];
        if p > limit {
            break;
        }
        let mut pk = p;
        while pk <= limit {
            total += 1 + count_products(norms, i + 1, limit / pk);
            match pk.checked_mul(p) {
                Some(v) => pk = v,
                None => break,
            }
        }
    }
    total
}

/// Number of integral ideals of norm `<= t`.
pub fn ideal_count(f: &FieldDescriptor, t: u64) -> u64 {
    if f.degree() == 1 {
        return t;
    }
    // a(n) = Σ_{d | n} χ(d) with χ completely multiplicative
    let n = t as usize;
    let mut chi = vec![0i8; n + 1];
    chi[1] = 1;
    let mut spf = vec![0u32; n + 1];
    for i in 2..=n {
        if spf[i] == 0 {
            let mut j = i;
            while j <= n {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
    }
    let mut prime_chi = std::collections::HashMap::new();
    for i in 2..=n {
        let p = spf[i] as u64;
        let cp = *prime_chi.entry(p).or_insert_with(|| splitting_sign(f, p)) as i8;
        chi[i] = chi[i / p as usize] * cp;
    }
    // Σ_{n<=t} a(n) = Σ_{d<=t} χ(d) ⌊t/d⌋
    let s: i64 = (1..=n).map(|d| chi[d] as i64 * (t / d as u64) as i64).sum();
    s as u64
}

/// `Ψ(t, z)` over the field, with the Dickman prediction `t ρ(log t / log z)`.
pub fn smooth_ideal_count(f: &FieldDescriptor, t: u64, z: u64) -> Result<SmoothCountResult, ArithError> {
    if t < 2 || z < 2 || z > t {
        return Err(ArithError::BadRange);
    }
    if t > SMOOTH_COUNT_CUTOFF {
        return Err(ArithError::TooLarge { t, cutoff: SMOOTH_COUNT_CUTOFF });
    }
    let norms: Vec<u64> = prime_ideal_norms(f, z).into_iter().filter(|&n| n <= z).collect();
    let count = 1 + count_products(&norms, 0, t);
    let u = (t as f64).ln() / (z as f64).ln();
    let prediction = t as f64 * dickman_rho(u);
    let ratio = count as f64 / prediction;
    Ok(SmoothCountResult {
        t,
        z,
        count,
        total_ideals: ideal_count(f, t),
        u,
        dickman_prediction: prediction,
        ratio,
        relative_deviation: ratio - 1.0,
    })
}

/// Dickman's `ρ` on a grid of step `h`.
///
/// Stores `log ρ`, zero on `[0, 1]` and continued by RK4 on
/// `g'(u) = -exp(g(u - 1) - g(u)) / u`, so the error stays relative in the tail.
#[derive(Clone, Debug)]
pub struct Dickman {
    h: f64,
    log_grid: Vec<f64>,
}

impl Dickman {
    pub fn new(h: f64, u_max: f64) -> Self {
        let s = (1.0 / h).round() as usize;
        let h = 1.0 / s as f64;
        let n = (((u_max.max(1.0) / h).ceil() as usize) + 2).max(s + 1);
        let mut g = vec![0.0; n];
        let rhs = |delayed: f64, u: f64, gu: f64| -(delayed - gu).exp() / u;
        for i in s..n - 1 {
            let u = i as f64 * h;
            let j = i - s;
            // cubic interpolation at the half step, one-sided next to the kink at 1
            let mid = if j < s {
                0.0
            } else if j <= s {
                (5.0 * g[j] + 15.0 * g[j + 1] - 5.0 * g[j + 2] + g[j + 3]) / 16.0
            } else {
                (9.0 * (g[j] + g[j + 1]) - g[j - 1] - g[j + 2]) / 16.0
            };
            let k1 = rhs(g[j], u, g[i]);
            let k2 = rhs(mid, u + h / 2.0, g[i] + h / 2.0 * k1);
            let k3 = rhs(mid, u + h / 2.0, g[i] + h / 2.0 * k2);
            let k4 = rhs(g[j + 1], u + h, g[i] + h * k3);
            g[i + 1] = g[i] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        Dickman { h, log_grid: g }
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u <= 1.0 {
            return 1.0;
        }
        let x = u / self.h;
        let i = x.floor() as usize;
        let g = &self.log_grid;
        if i + 1 >= g.len() {
            return g.last().expect("grid is nonempty").exp();
        }
        let frac = x - i as f64;
        (g[i] * (1.0 - frac) + g[i + 1] * frac).exp()
    }
}

/// `ρ(u)` with step `10⁻³`.
pub fn dickman_rho(u: f64) -> f64 {
    if u <= 1.0 {
        return 1.0;
    }
    Dickman::new(1e-3, u + 1.0).eval(u)
}

/// `log(x)⁻² L⁻¹ ∏_{N𝔭 <= x} (1 + 2|λ(𝔭)|/N𝔭)`.
pub fn eulerproduct_m(f: &FieldDescriptor, lambda: &MultiplicativeFunction, x: f64, l_adj: f64) -> Result<f64, ArithError> {
    Ok(euler_product(f, lambda, x)? / (x.ln().powi(2) * l_adj))
}

/// `∏_{N𝔭 <= x} (1 + 2|λ(𝔭)|/N𝔭)`.
pub fn euler_product(f: &FieldDescriptor, lambda: &MultiplicativeFunction, x: f64) -> Result<f64, ArithError> {
    let mut logsum = 0.0;
    for p in prime_ideals_up_to(f, x.floor() as u64) {
        let v = lambda.at_prime_power(&p, 1)?.abs();
        logsum += (2.0 * v / p.norm() as f64).ln_1p();
    }
    Ok(logsum.exp())
}

/// `τ(n)` of a positive rational integer.
pub fn divisor_count(n: u64) -> u64 {
    factor_integer(&BigInt::from(n)).iter().map(|&(_, k)| k as u64 + 1).product()
}

/// Bound `d(n) n^{11/2}` in bits, used to size the CRT reconstruction.
pub fn deligne_bound_bits(n: u64) -> f64 {
    (divisor_count(n) as f64).log2() + 5.5 * (n as f64).log2()
}

/// Whether `x` has absolute value below `2^bits`.
pub fn fits_bits(x: &BigInt, bits: f64) -> bool {
    x.abs().bits() as f64 <= bits
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn montgomery_product_matches_plain() {
        const P: u32 = NTT_PRIMES[4];
        let mut rng = 0x9e3779b97f4a7c15u64;
        for _ in 0..10_000 {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((rng >> 32) as u32) % P;
            let b = (rng as u32) % P;
            assert_eq!(redc::<P>(to_mont::<P>(a), b), mulm::<P>(a, b));
        }
        let r_inv = powm::<P>(powm::<P>(2, 32), (P - 2) as u64);
        assert_eq!(redc::<P>(P - 1, P - 1), mulm::<P>(mulm::<P>(P - 1, P - 1), r_inv));
    }
    use crate::field::{make_field, FieldSpec};

    /// τ(n) by the σ-recurrence `n c_n = -24 Σ σ(k) c_{n-k}` for `∏(1-q^n)^{24}`.
    fn tau_by_recurrence(n_max: usize) -> Vec<i128> {
        let sigma: Vec<i128> = (0..=n_max).map(|k| if k == 0 { 0 } else { (1..=k).filter(|d| k % d == 0).map(|d| d as i128).sum() }).collect();
        let mut c = vec![0i128; n_max + 1];
        c[0] = 1;
        for n in 1..=n_max {
            let s: i128 = (1..=n).map(|k| sigma[k] * c[n - k]).sum();
            c[n] = -24 * s / n as i128;
        }
        // τ(n) = c_{n-1}
        (1..=n_max).map(|n| c[n - 1]).collect()
    }

    #[test]
    fn tau_table_matches_recurrence() {
        let table = RamanujanTable::new(400);
        let oracle = tau_by_recurrence(400);
        for n in 1..=400u64 {
            assert_eq!(table.tau(n).unwrap(), oracle[n as usize - 1], "n = {n}");
        }
        assert_eq!(table.tau(2).unwrap(), -24);
        assert_eq!(table.tau(3).unwrap(), 252);
        assert_eq!(table.tau(6).unwrap(), -6048);
        assert!(table.tau(401).is_err());
    }

    #[test]
    fn lambda_examples() {
        let table = RamanujanTable::new(10);
        assert_eq!(table.lambda(1).unwrap(), 1.0);
        assert!((table.lambda(2).unwrap() + 0.530330).abs() < 1e-6);
        assert!((table.lambda(6).unwrap() - table.lambda(2).unwrap() * table.lambda(3).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn exact_tau_at_large_index() {
        // τ(9999) from the LMFDB-free identity τ(p²) = τ(p)² - p^11 at p = 97 (97² = 9409)
        let v = ramanujan_tau_exact(&[97, 9409]);
        let p11 = num_traits::pow(BigInt::from(97), 11);
        assert_eq!(&v[0] * &v[0] - &v[1], p11);
    }

    #[test]
    fn tau_and_phi() {
        let f = make_field(&FieldSpec::Quadratic(5), None).unwrap();
        assert_eq!(tau(&IdealFactorization::one()), 1);
        assert_eq!(euler_phi(&IdealFactorization::one()), BigInt::one());
        let p2 = f.split_prime(2)[0].clone();
        assert_eq!(p2.norm(), 4);
        let fac = IdealFactorization::from_factors(vec![(p2.clone(), 1)]);
        assert_eq!(euler_phi(&fac), BigInt::from(3));
        let p11 = f.split_prime(11);
        let sq = IdealFactorization::from_factors(vec![(p11[0].clone(), 2)]);
        assert_eq!(tau(&sq), 3);
        assert_eq!(euler_phi(&sq), BigInt::from(110));
        let mixed = IdealFactorization::from_factors(vec![(p11[0].clone(), 1), (p11[1].clone(), 2)]);
        assert_eq!(tau(&mixed), 6);
    }

    #[test]
    fn smooth_counts() {
        let q = make_field(&FieldSpec::Rational, None).unwrap();
        assert_eq!(smooth_ideal_count(&q, 10, 10).unwrap().count, 10);
        assert_eq!(smooth_ideal_count(&q, 100, 3).unwrap().count, 20);
        assert_eq!(ideal_count(&q, 100), 100);
        assert!(smooth_ideal_count(&q, 10, 11).is_err());
    }

    #[test]
    fn dickman_closed_form() {
        assert_eq!(dickman_rho(0.5), 1.0);
        for &u in &[1.1, 1.5, 1.9, 2.0] {
            assert!((dickman_rho(u) - (1.0 - f64::ln(u))).abs() < 1e-6, "u = {u}");
        }
        let fine = Dickman::new(1e-5, 4.0).eval(3.0);
        assert!((dickman_rho(3.0) - fine).abs() < 1e-6);
    }

    #[test]
    fn dickman_matches_reference_values() {
        let table = [
            (3.0, 4.860_838_829_113_157e-2, 1e-6),
            (4.0, 4.910_925_647_760_832e-3, 1e-6),
            (5.0, 3.547_247_004_560_397e-4, 1e-6),
            (6.0, 1.964_969_635_395_529e-5, 1e-6),
            (8.0, 3.232_069_304_226_104e-8, 1e-6),
            // f64 round-off near u = 1 persists as an absolute error of about 1e-16
            (9.0, 1.016_248_282_737_837e-9, 1e-5),
            (10.0, 2.770_171_837_725_959e-11, 1e-4),
        ];
        for (u, want, tol) in table {
            let got = dickman_rho(u);
            assert!(((got - want) / want).abs() < tol, "u = {u}: {got} vs {want}");
        }
    }

    #[test]
    fn euler_product_examples() {
        let q = make_field(&FieldSpec::Rational, None).unwrap();
        let zero = MultiplicativeFunction::zero_on_primes();
        assert!((eulerproduct_m(&q, &zero, std::f64::consts::E, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((eulerproduct_m(&q, &zero, 50.0, 1.0).unwrap() - 50f64.ln().powi(-2)).abs() < 1e-15);
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(LambdaSpec::parse("ramanujan").unwrap(), LambdaSpec::Ramanujan);
        assert_eq!(
            LambdaSpec::parse("synthetic:sato-tate:seed=42").unwrap(),
            LambdaSpec::Synthetic(SyntheticSpec { dist: AngleDistribution::SatoTate, seed: 42 })
        );
        assert_eq!(LambdaSpec::parse("abs:ramanujan").unwrap(), LambdaSpec::Abs(Box::new(LambdaSpec::Ramanujan)));
        assert!(LambdaSpec::parse("synthetic:gauss:seed=1").is_err());
    }

    #[test]
    fn synthetic_is_keyed_by_prime() {
        let f = make_field(&FieldSpec::Quadratic(5), None).unwrap();
        let spec = SyntheticSpec { dist: AngleDistribution::SatoTate, seed: 42 };
        let p = f.split_prime(11);
        assert_eq!(spec.angle(&p[0]), spec.angle(&p[0].clone()));
        assert_ne!(spec.angle(&p[0]), spec.angle(&p[1]));
        let lam = MultiplicativeFunction::synthetic(spec);
        let l1 = lam.at_prime_power(&p[0], 1).unwrap();
        let l2 = lam.at_prime_power(&p[0], 2).unwrap();
        assert!((l1 * l1 - l2 - 1.0).abs() < 1e-12);
        assert!(l1.abs() <= 2.0);
    }
}
