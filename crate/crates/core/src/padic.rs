//! Exact arithmetic in Q_p at a fixed relative-precision cap.
//!
//! A nonzero number is stored as p^v * u with u a unit known modulo p^rel,
//! 1 <= rel <= M (the context cap), so its absolute precision is v + rel.
//! Additive cancellation shrinks `rel` honestly; when every known digit
//! cancels the result degrades to `Bounded`, i.e. "zero to precision
//! O(p^k)". Exact zero is a separate state.

use crate::error::{Defect, Error, Rat, Result};
use num::bigint::Sign;
use num::rational::Ratio;
use num::{BigInt, BigRational, BigUint, Integer, One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

#[derive(Debug)]
struct CtxInner {
    p: u64,
    max_rel: u32,
    /// p^0 .. p^max_rel
    powers: Vec<BigUint>,
    allow_p2: bool,
}

/// Prime and relative-precision cap; cheap to clone and share.
#[derive(Clone, Debug)]
pub struct PadicContext(Arc<CtxInner>);

impl PartialEq for PadicContext {
    fn eq(&self, other: &Self) -> bool {
        self.0.p == other.0.p && self.0.max_rel == other.0.max_rel
    }
}
impl Eq for PadicContext {}

fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl PadicContext {
    pub fn new(p: u64, precision: u32) -> Result<Self> {
        Self::build(p, precision, false)
    }

    /// Expert entry point that also accepts p = 2 (admissibility then
    /// requires v(q-1) >= 2).
    pub fn new_allow_p2(p: u64, precision: u32) -> Result<Self> {
        Self::build(p, precision, true)
    }

    fn build(p: u64, precision: u32, allow_p2: bool) -> Result<Self> {
        if !is_prime_u64(p) {
            return Err(Error::InvalidArgument(format!("p = {} is not prime", p)));
        }
        if p == 2 && !allow_p2 {
            return Err(Error::InvalidArgument(
                "p = 2 is disabled by default; use new_allow_p2".into(),
            ));
        }
        if precision == 0 {
            return Err(Error::InvalidArgument("precision must be >= 1".into()));
        }
        let mut powers = Vec::with_capacity(precision as usize + 1);
        let mut acc = BigUint::one();
        let pb = BigUint::from(p);
        for _ in 0..=precision {
            powers.push(acc.clone());
            acc *= &pb;
        }
        Ok(PadicContext(Arc::new(CtxInner {
            p,
            max_rel: precision,
            powers,
            allow_p2,
        })))
    }

    pub fn p(&self) -> u64 {
        self.0.p
    }

    pub fn precision(&self) -> u32 {
        self.0.max_rel
    }

    pub fn allows_p2(&self) -> bool {
        self.0.allow_p2
    }

    /// p^k for 0 <= k <= precision.
    pub fn pk(&self, k: u32) -> &BigUint {
        &self.0.powers[k as usize]
    }

    pub fn modulus(&self) -> &BigUint {
        self.pk(self.0.max_rel)
    }

    /// Minimal admissible valuation of q - 1 (1 for odd p, 2 for p = 2).
    pub fn admissibility_floor(&self) -> i64 {
        if self.0.p == 2 {
            2
        } else {
            1
        }
    }

    pub fn zero(&self) -> PadicNumber {
        PadicNumber {
            ctx: self.clone(),
            repr: Repr::ExactZero,
        }
    }

    /// p^k as a full-precision number.
    pub fn pk_number(&self, k: u32) -> PadicNumber {
        PadicNumber::unit(self.clone(), k as i64, BigUint::one(), self.0.max_rel)
    }

    /// The zero-to-precision marker O(p^k): v(x) >= k with no digits known.
    pub fn big_oh(&self, k: i64) -> PadicNumber {
        PadicNumber::bounded(self.clone(), k)
    }

    pub fn one(&self) -> PadicNumber {
        self.from_u64(1)
    }

    pub fn from_u64(&self, n: u64) -> PadicNumber {
        self.from_bigint(&BigInt::from(n))
    }

    pub fn from_i64(&self, n: i64) -> PadicNumber {
        self.from_bigint(&BigInt::from(n))
    }

    pub fn from_bigint(&self, n: &BigInt) -> PadicNumber {
        if n.is_zero() {
            return self.zero();
        }
        let (val, unit) = strip_p(n, self.0.p);
        let unit = reduce_signed(&unit, self.pk(self.0.max_rel));
        PadicNumber::unit(self.clone(), val, unit, self.0.max_rel)
    }

    /// p^v(num/den) decomposition with the unit part inverted mod p^M.
    pub fn from_rational(&self, num: &BigInt, den: &BigInt) -> Result<PadicNumber> {
        if den.is_zero() {
            return Err(Error::InvalidArgument("zero denominator".into()));
        }
        if num.is_zero() {
            return Ok(self.zero());
        }
        let (vn, un) = strip_p(num, self.0.p);
        let (vd, ud) = strip_p(den, self.0.p);
        let modulus = self.pk(self.0.max_rel);
        let un = reduce_signed(&un, modulus);
        let ud = reduce_signed(&ud, modulus);
        let inv = mod_inverse(&ud, modulus).expect("p-free denominator is invertible");
        let unit = (un * inv) % modulus;
        Ok(PadicNumber::unit(self.clone(), vn - vd, unit, self.0.max_rel))
    }

    pub fn from_big_rational(&self, r: &BigRational) -> Result<PadicNumber> {
        self.from_rational(r.numer(), r.denom())
    }
}

fn strip_p(n: &BigInt, p: u64) -> (i64, BigInt) {
    let pb = BigInt::from(p);
    let mut v = 0i64;
    let mut m = n.clone();
    loop {
        let (q, r) = m.div_rem(&pb);
        if r.is_zero() {
            v += 1;
            m = q;
        } else {
            break;
        }
    }
    (v, m)
}

fn reduce_signed(n: &BigInt, modulus: &BigUint) -> BigUint {
    let m = BigInt::from_biguint(Sign::Plus, modulus.clone());
    let r = n.mod_floor(&m);
    r.to_biguint().expect("mod_floor is nonnegative")
}

pub(crate) fn mod_inverse(a: &BigUint, modulus: &BigUint) -> Option<BigUint> {
    let a = BigInt::from_biguint(Sign::Plus, a.clone());
    let m = BigInt::from_biguint(Sign::Plus, modulus.clone());
    let ext = a.extended_gcd(&m);
    if !ext.gcd.is_one() {
        return None;
    }
    Some(reduce_signed(&ext.x, modulus))
}

pub(crate) fn vp_u64(mut n: u64, p: u64) -> u32 {
    assert!(n != 0);
    let mut v = 0;
    while n % p == 0 {
        v += 1;
        n /= p;
    }
    v
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Repr {
    ExactZero,
    /// Zero to precision: only v(x) >= min_val is known.
    Bounded { min_val: i64 },
    /// p^val * unit with unit known mod p^rel, unit not divisible by p.
    Unit { val: i64, unit: BigUint, rel: u32 },
}

/// Knowledge about a p-adic valuation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Valuation {
    /// Exact zero.
    Infinite,
    /// Zero to precision; true valuation is >= this.
    AtLeast(i64),
    Exact(i64),
}

#[derive(Clone, Debug)]
pub struct PadicNumber {
    ctx: PadicContext,
    repr: Repr,
}

impl PartialEq for PadicNumber {
    /// Representation equality (used for bit-determinism checks); for
    /// mathematical comparison to precision use [`defect`].
    fn eq(&self, other: &Self) -> bool {
        self.ctx == other.ctx && self.repr == other.repr
    }
}
impl Eq for PadicNumber {}

impl PadicNumber {
    fn unit(ctx: PadicContext, val: i64, unit: BigUint, rel: u32) -> Self {
        debug_assert!(rel >= 1);
        let rel = rel.min(ctx.precision());
        let unit = unit % ctx.pk(rel);
        debug_assert!(!unit.is_zero());
        debug_assert!(!(unit.clone() % BigUint::from(ctx.p())).is_zero());
        PadicNumber {
            ctx,
            repr: Repr::Unit { val, unit, rel },
        }
    }

    fn bounded(ctx: PadicContext, min_val: i64) -> Self {
        PadicNumber {
            ctx,
            repr: Repr::Bounded { min_val },
        }
    }

    pub fn context(&self) -> &PadicContext {
        &self.ctx
    }

    pub fn is_exact_zero(&self) -> bool {
        matches!(self.repr, Repr::ExactZero)
    }

    /// True when no digit is known (exact zero or zero-to-precision).
    pub fn is_zero_to_precision(&self) -> bool {
        !matches!(self.repr, Repr::Unit { .. })
    }

    pub fn valuation(&self) -> Valuation {
        match &self.repr {
            Repr::ExactZero => Valuation::Infinite,
            Repr::Bounded { min_val } => Valuation::AtLeast(*min_val),
            Repr::Unit { val, .. } => Valuation::Exact(*val),
        }
    }

    /// Absolute precision: the number is known modulo p^(this). `None` means
    /// exact (the exact-zero state).
    pub fn abs_precision(&self) -> Option<i64> {
        match &self.repr {
            Repr::ExactZero => None,
            Repr::Bounded { min_val } => Some(*min_val),
            Repr::Unit { val, rel, .. } => Some(val + *rel as i64),
        }
    }

    pub fn rel_precision(&self) -> u32 {
        match &self.repr {
            Repr::Unit { rel, .. } => *rel,
            _ => 0,
        }
    }

    /// Unit part reduced mod p^k (requires k <= rel).
    pub fn unit_mod(&self, k: u32) -> Option<BigUint> {
        match &self.repr {
            Repr::Unit { unit, rel, .. } if *rel >= k => Some(unit.clone() % self.ctx.pk(k)),
            _ => None,
        }
    }

    pub fn is_unit(&self) -> bool {
        matches!(self.repr, Repr::Unit { val: 0, .. })
    }

    fn assert_same_ctx(&self, other: &Self) {
        assert!(
            self.ctx == other.ctx,
            "mixed p-adic contexts: ({}, {}) vs ({}, {})",
            self.ctx.p(),
            self.ctx.precision(),
            other.ctx.p(),
            other.ctx.precision()
        );
    }

    fn add_impl(&self, other: &Self) -> Self {
        self.assert_same_ctx(other);
        let ctx = self.ctx.clone();
        match (&self.repr, &other.repr) {
            (Repr::ExactZero, _) => other.clone(),
            (_, Repr::ExactZero) => self.clone(),
            (Repr::Bounded { min_val: a }, Repr::Bounded { min_val: b }) => {
                Self::bounded(ctx, (*a).min(*b))
            }
            (Repr::Bounded { min_val }, Repr::Unit { val, unit, rel })
            | (Repr::Unit { val, unit, rel }, Repr::Bounded { min_val }) => {
                if *min_val <= *val {
                    Self::bounded(ctx, *min_val)
                } else {
                    let window = ((*min_val - *val) as u32).min(*rel);
                    Self::unit(ctx, *val, unit.clone(), window)
                }
            }
            (
                Repr::Unit {
                    val: v1,
                    unit: u1,
                    rel: r1,
                },
                Repr::Unit {
                    val: v2,
                    unit: u2,
                    rel: r2,
                },
            ) => {
                let (v1, u1, r1, v2, u2, r2) = if v1 <= v2 {
                    (*v1, u1, *r1, *v2, u2, *r2)
                } else {
                    (*v2, u2, *r2, *v1, u1, *r1)
                };
                let abs = (v1 + r1 as i64).min(v2 + r2 as i64);
                debug_assert!(abs > v1);
                let window = ((abs - v1) as u32).min(ctx.precision());
                let modulus = ctx.pk(window);
                let shift = (v2 - v1) as u32;
                let mut s = u1.clone() % modulus;
                if (shift as i64) < window as i64 {
                    s = (s + (u2 * ctx.pk(shift)) % modulus) % modulus;
                }
                if s.is_zero() {
                    return Self::bounded(ctx, v1 + window as i64);
                }
                let mut k = 0u32;
                let pb = BigUint::from(ctx.p());
                let mut s2 = s;
                while (s2.clone() % &pb).is_zero() {
                    s2 /= &pb;
                    k += 1;
                }
                Self::unit(ctx, v1 + k as i64, s2, window - k)
            }
        }
    }

    fn mul_impl(&self, other: &Self) -> Self {
        self.assert_same_ctx(other);
        let ctx = self.ctx.clone();
        match (&self.repr, &other.repr) {
            (Repr::ExactZero, _) | (_, Repr::ExactZero) => ctx.zero(),
            (Repr::Bounded { min_val: a }, Repr::Bounded { min_val: b }) => {
                Self::bounded(ctx, a + b)
            }
            (Repr::Bounded { min_val }, Repr::Unit { val, .. })
            | (Repr::Unit { val, .. }, Repr::Bounded { min_val }) => {
                Self::bounded(ctx, min_val + val)
            }
            (
                Repr::Unit {
                    val: v1,
                    unit: u1,
                    rel: r1,
                },
                Repr::Unit {
                    val: v2,
                    unit: u2,
                    rel: r2,
                },
            ) => {
                let rel = (*r1).min(*r2);
                let modulus = self.ctx.pk(rel);
                let u = ((u1 % modulus) * (u2 % modulus)) % modulus;
                Self::unit(ctx, v1 + v2, u, rel)
            }
        }
    }

    fn neg_impl(&self) -> Self {
        match &self.repr {
            Repr::ExactZero | Repr::Bounded { .. } => self.clone(),
            Repr::Unit { val, unit, rel } => {
                let modulus = self.ctx.pk(*rel);
                Self::unit(self.ctx.clone(), *val, modulus - unit, *rel)
            }
        }
    }

    pub fn inv(&self) -> Result<Self> {
        match &self.repr {
            Repr::ExactZero => Err(Error::DivisionByZero),
            Repr::Bounded { min_val } => Err(Error::PrecisionLoss(format!(
                "cannot invert a quantity only known to be O(p^{})",
                min_val
            ))),
            Repr::Unit { val, unit, rel } => {
                let inv = mod_inverse(unit, self.ctx.pk(*rel)).expect("unit is invertible");
                Ok(Self::unit(self.ctx.clone(), -val, inv, *rel))
            }
        }
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self * &other.inv()?)
    }

    /// Division by an exact nonzero integer (no relative-precision loss).
    pub fn div_exact_int(&self, n: &BigInt) -> Result<Self> {
        if n.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(self * &self.ctx.from_bigint(n).inv()?)
    }

    pub fn pow_i64(&self, e: i64) -> Result<Self> {
        if e == 0 {
            return Ok(self.ctx.one());
        }
        if e < 0 {
            return self.inv()?.pow_i64(-e);
        }
        Ok(self.pow_u64(e as u64))
    }

    pub fn pow_u64(&self, e: u64) -> Self {
        self.pow_biguint(&BigUint::from(e))
    }

    pub fn pow_biguint(&self, e: &BigUint) -> Self {
        if e.is_zero() {
            return self.ctx.one();
        }
        let bits = e.bits();
        let mut acc = self.clone();
        for i in (0..bits - 1).rev() {
            acc = &acc * &acc;
            if e.bit(i) {
                acc = &acc * self;
            }
        }
        acc
    }

    pub fn pow_bigint(&self, e: &BigInt) -> Result<Self> {
        if e.is_negative() {
            Ok(self.inv()?.pow_biguint(&e.magnitude().clone()))
        } else {
            Ok(self.pow_biguint(e.magnitude()))
        }
    }

    /// Truncated p-adic logarithm; requires v(x - 1) >= 1 (>= 2 for p = 2).
    pub fn log_p(&self) -> Result<Self> {
        let ctx = &self.ctx;
        let z = self - &ctx.one();
        let floor = ctx.admissibility_floor();
        let (c, rel) = match &z.repr {
            Repr::ExactZero => return Ok(ctx.zero()),
            Repr::Bounded { min_val } => {
                if *min_val >= floor {
                    // log(1 + O(p^k)) = O(p^k)
                    return Ok(Self::bounded(ctx.clone(), *min_val));
                }
                return Err(Error::ConvergenceDomain(format!(
                    "log requires v(x-1) >= {}, input only known to O(p^{})",
                    floor, min_val
                )));
            }
            Repr::Unit { val, rel, .. } => {
                if *val < floor {
                    return Err(Error::ConvergenceDomain(format!(
                        "log requires v(x-1) >= {}, got v = {}",
                        floor, val
                    )));
                }
                (*val, *rel)
            }
        };
        let target = c + rel as i64;
        let mut acc = ctx.zero();
        let mut zpow = z.clone();
        let mut n: u64 = 1;
        loop {
            let term = zpow.div_exact_int(&BigInt::from(n))?;
            if n % 2 == 1 {
                acc = &acc + &term;
            } else {
                acc = &acc - &term;
            }
            n += 1;
            // all terms from n on have valuation >= n*c - log_p(n) which is
            // increasing in n; stop once that lower bound clears the target
            let ilog = (n as f64).log(ctx.p() as f64).floor() as i64;
            if n as i64 * c - (ilog + 1) >= target {
                break;
            }
            zpow = &zpow * &z;
        }
        Ok(&acc + &Self::bounded(ctx.clone(), target))
    }

    /// Truncated p-adic exponential; requires v(x) >= 1 (>= 2 for p = 2).
    pub fn exp_p(&self) -> Result<Self> {
        let ctx = &self.ctx;
        let floor = ctx.admissibility_floor();
        let (c, rel) = match &self.repr {
            Repr::ExactZero => return Ok(ctx.one()),
            Repr::Bounded { min_val } => {
                if *min_val >= floor {
                    return Ok(&ctx.one() + &Self::bounded(ctx.clone(), *min_val));
                }
                return Err(Error::ConvergenceDomain(format!(
                    "exp requires v(x) >= {}, input only known to O(p^{})",
                    floor, min_val
                )));
            }
            Repr::Unit { val, rel, .. } => {
                if *val < floor {
                    return Err(Error::ConvergenceDomain(format!(
                        "exp requires v(x) >= {}, got v = {}",
                        floor, val
                    )));
                }
                (*val, *rel)
            }
        };
        let target = c + rel as i64;
        let p = ctx.p() as i64;
        let mut acc = ctx.one();
        let mut term = self.clone();
        let mut n: u64 = 1;
        loop {
            acc = &acc + &term;
            n += 1;
            // v(x^n / n!) >= n*c - (n-1)/(p-1), increasing since c > 1/(p-1)
            if (n as i64) * (c * (p - 1) - 1) + 1 >= target * (p - 1) {
                break;
            }
            term = &(&term * self) * &ctx.from_u64(n).inv()?;
        }
        Ok(&acc + &Self::bounded(ctx.clone(), target))
    }
}

impl Add for &PadicNumber {
    type Output = PadicNumber;
    fn add(self, rhs: &PadicNumber) -> PadicNumber {
        self.add_impl(rhs)
    }
}
impl Sub for &PadicNumber {
    type Output = PadicNumber;
    fn sub(self, rhs: &PadicNumber) -> PadicNumber {
        self.add_impl(&rhs.neg_impl())
    }
}
impl Mul for &PadicNumber {
    type Output = PadicNumber;
    fn mul(self, rhs: &PadicNumber) -> PadicNumber {
        self.mul_impl(rhs)
    }
}
impl Neg for &PadicNumber {
    type Output = PadicNumber;
    fn neg(self) -> PadicNumber {
        self.neg_impl()
    }
}

/// Valuation of x - y, as far as the representations allow.
pub fn defect(x: &PadicNumber, y: &PadicNumber) -> Defect {
    let d = x - y;
    match d.repr {
        Repr::ExactZero => Defect::ExactZero,
        Repr::Bounded { min_val } => Defect::AtLeast(Rat::from_integer(min_val)),
        Repr::Unit { val, .. } => Defect::Exact(Rat::from_integer(val)),
    }
}

/// Joint absolute-precision floor of two numbers, used as the "working
/// precision" reference in identity checks.
pub fn working_floor(x: &PadicNumber, y: &PadicNumber) -> Option<i64> {
    match (x.abs_precision(), y.abs_precision()) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (Some(a), None) | (None, Some(a)) => Some(a),
        (None, None) => None,
    }
}

/// [x; q] = (1 - q^x)/(1 - q) for unsigned integer x, computed by binary
/// splitting of the geometric sum (exact, no division).
pub fn q_number_u64(q: &PadicNumber, n: u64) -> PadicNumber {
    let ctx = q.context();
    if n == 0 {
        return ctx.zero();
    }
    // invariants: val = [m; q], qm = q^m for the prefix m of n's bits
    let bits = 64 - n.leading_zeros();
    let mut val = ctx.one();
    let mut qm = q.clone();
    for i in (0..bits - 1).rev() {
        val = &val * &(&ctx.one() + &qm);
        qm = &qm * &qm;
        if (n >> i) & 1 == 1 {
            val = &val + &qm;
            qm = &qm * q;
        }
    }
    val
}

/// [x; q] for signed integer x, using [-k; q] = -q^{-k} [k; q].
pub fn q_number_i64(q: &PadicNumber, n: i64) -> Result<PadicNumber> {
    if n >= 0 {
        return Ok(q_number_u64(q, n as u64));
    }
    let k = n.unsigned_abs();
    let qk = q.pow_u64(k).inv()?;
    Ok(-&(&qk * &q_number_u64(q, k)))
}

/// Whether q lies in the admissible disk: v(q - 1) >= 1 (>= 2 for p = 2).
pub fn q_admissible(q: &PadicNumber) -> bool {
    let d = q - &q.context().one();
    let floor = q.context().admissibility_floor();
    match d.valuation() {
        Valuation::Infinite => true,
        Valuation::AtLeast(k) => k >= floor,
        Valuation::Exact(v) => v >= floor,
    }
}

/// q^x = exp(x log q) for p-adic x; requires v(x log q) in the exp domain.
pub fn q_pow_padic(q: &PadicNumber, x: &PadicNumber) -> Result<PadicNumber> {
    if !q_admissible(q) {
        return Err(Error::Domain("q is not admissible".into()));
    }
    (&q.log_p()? * x).exp_p()
}

/// q^r for exact rational r: integer exponents go through powmod, fractional
/// ones through exp/log.
pub fn q_pow_rational(q: &PadicNumber, r: &BigRational) -> Result<PadicNumber> {
    if r.is_integer() {
        return q.pow_bigint(&r.to_integer());
    }
    let ctx = q.context();
    let x = ctx.from_big_rational(r)?;
    q_pow_padic(q, &x)
}

/// [x; q] for p-adic x via (1 - q^x)/(1 - q).
pub fn q_number_padic(q: &PadicNumber, x: &PadicNumber) -> Result<PadicNumber> {
    let ctx = q.context();
    let qx = q_pow_padic(q, x)?;
    let num = &ctx.one() - &qx;
    let den = &ctx.one() - q;
    if den.is_zero_to_precision() {
        return Err(Error::PrecisionLoss(
            "q - 1 is zero to precision; use the exact q = 1 path".into(),
        ));
    }
    num.div(&den)
}

/// Teichmuller lift: the unique (p-1)-th root of unity congruent to a mod p,
/// computed by iterating x -> x^p to its fixed point mod p^M.
pub fn teichmuller(ctx: &PadicContext, a: &BigInt) -> Result<PadicNumber> {
    let p = BigUint::from(ctx.p());
    let modulus = ctx.modulus();
    let a_red = reduce_signed(a, modulus);
    if (a_red.clone() % &p).is_zero() {
        return Err(Error::Domain(format!(
            "teichmuller requires gcd(a, p) = 1, got a = {}",
            a
        )));
    }
    let mut x = a_red;
    for _ in 0..=ctx.precision() + 1 {
        let next = x.modpow(&p, modulus);
        if next == x {
            break;
        }
        x = next;
    }
    debug_assert_eq!(x.modpow(&p, modulus), x);
    Ok(PadicNumber::unit(ctx.clone(), 0, x, ctx.precision()))
}

/// <a> = [a; q] / w(a) for an integer p-adic unit a.
pub fn angle(q: &PadicNumber, a: &BigInt) -> Result<PadicNumber> {
    let ctx = q.context();
    if !q_admissible(q) {
        return Err(Error::Domain("q is not admissible".into()));
    }
    let w = teichmuller(ctx, a)?;
    let qa = if a.is_negative() {
        q_number_i64(q, a.to_i64().ok_or_else(|| {
            Error::InvalidArgument("angle argument out of i64 range".into())
        })?)?
    } else {
        q_number_u64(
            q,
            a.to_u64()
                .ok_or_else(|| Error::InvalidArgument("angle argument out of u64 range".into()))?,
        )
    };
    qa.div(&w)
}

/// <a>^s for p-adic s via exp(s log<a>).
pub fn angle_pow(q: &PadicNumber, a: &BigInt, s: &PadicNumber) -> Result<PadicNumber> {
    let base = angle(q, a)?;
    (&base.log_p()? * s).exp_p()
}

/// Little-endian digit expansion with an O(p^k) precision marker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitExpansion {
    pub p: u64,
    /// Exponent of the first digit (the valuation); meaningless for zero.
    pub start: i64,
    pub digits: Vec<u64>,
    /// Precision marker exponent; `None` for an exact zero.
    pub precision: Option<i64>,
}

impl DigitExpansion {
    pub fn of(x: &PadicNumber) -> Self {
        let p = x.context().p();
        match &x.repr {
            Repr::ExactZero => DigitExpansion {
                p,
                start: 0,
                digits: vec![],
                precision: None,
            },
            Repr::Bounded { min_val } => DigitExpansion {
                p,
                start: *min_val,
                digits: vec![],
                precision: Some(*min_val),
            },
            Repr::Unit { val, unit, rel } => {
                let pb = BigUint::from(p);
                let mut digits = Vec::with_capacity(*rel as usize);
                let mut u = unit.clone();
                for _ in 0..*rel {
                    let (q, r) = u.div_rem(&pb);
                    digits.push(r.to_u64().unwrap());
                    u = q;
                }
                DigitExpansion {
                    p,
                    start: *val,
                    digits,
                    precision: Some(val + *rel as i64),
                }
            }
        }
    }
}

impl fmt::Display for DigitExpansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        for (i, d) in self.digits.iter().enumerate() {
            if *d == 0 {
                continue;
            }
            if wrote {
                write!(f, " + ")?;
            }
            let e = self.start + i as i64;
            match e {
                0 => write!(f, "{}", d)?,
                1 => write!(f, "{}*{}", d, self.p)?,
                _ => write!(f, "{}*{}^{}", d, self.p, e)?,
            }
            wrote = true;
        }
        match self.precision {
            Some(k) => {
                if wrote {
                    write!(f, " + ")?;
                }
                write!(f, "O({}^{})", self.p, k)
            }
            None => {
                if !wrote {
                    write!(f, "0")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for PadicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        DigitExpansion::of(self).fmt(f)
    }
}

/// Valuation as a rational (for uniformity with extension elements).
pub fn valuation_rat(x: &PadicNumber) -> Option<Rat> {
    match x.valuation() {
        Valuation::Infinite => None,
        Valuation::AtLeast(k) | Valuation::Exact(k) => Some(Ratio::from_integer(k)),
    }
}
