//! Arithmetic in the extension tower K = Q_p(zeta_m', zeta_{p^r}).
//!
//! Elements are p^shift * sum c_ij x^i y^j with x a Hensel-lifted root of a
//! factor of Phi_m' (unramified part, degree f) and y a root of Phi_{p^r}
//! (totally ramified part, degree e = phi(p^r)). Coefficients are tracked
//! modulo p^rel like the scalar model, so the pi-adic absolute precision of
//! an element is e*(shift + rel).
//!
//! Valuations and inverses go through the Galois norm: the full conjugate
//! set x -> x^(p^i), y -> y^k is available exactly, so Norm(z) lands in Z_p
//! and z^{-1} = (prod of other conjugates) / Norm(z).

use crate::cyclotomic::exact::ExactCyclotomic;
use crate::cyclotomic::polys::{
    cyclotomic_polynomial, euler_phi, factor_cyclotomic_mod_p, hensel_lift_factor,
    multiplicative_order,
};
use crate::error::{Defect, Error, Rat, Result};
use crate::padic::{teichmuller, PadicContext, PadicNumber, Valuation};
use num::rational::Ratio;
use num::{BigInt, BigUint, Integer, One, Zero};
use std::fmt;
use std::sync::Arc;

#[derive(Debug)]
struct TowerInner {
    ctx: PadicContext,
    m_prime: u64,
    r: u32,
    f: usize,
    e: usize,
    d: usize,
    /// chosen irreducible factor of Phi_m' mod p (seed of the Hensel lift)
    u_seed: Vec<u64>,
    /// lifted monic factor, coefficients mod p^M
    u_poly: Vec<BigUint>,
    /// x^(f+t) = sum_i x_red[t][i] x^i, mod p^M
    x_red: Vec<Vec<BigUint>>,
    /// y^(e+t) = sum_j y_red[t][j] y^j, mod p^M
    y_red: Vec<Vec<BigUint>>,
    /// x^(p^i) mod (u, p^M), i = 0..f-1 (Frobenius images, length-f vectors)
    frob: Vec<Vec<BigUint>>,
    /// units of Z/p^r in increasing order ([1] when r = 0)
    y_units: Vec<u64>,
    /// largest divisor of p-1 coprime to m_prime (extra prime-to-p roots
    /// realized through Teichmuller scalars)
    b_star: u64,
    /// scalar of exact order b_star
    teich_gen: PadicNumber,
}

/// Shared, immutable extension tower.
#[derive(Clone, Debug)]
pub struct ExtensionTower(Arc<TowerInner>);

impl PartialEq for ExtensionTower {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.ctx == other.0.ctx
                && self.0.m_prime == other.0.m_prime
                && self.0.r == other.0.r
                && self.0.u_seed == other.0.u_seed)
    }
}
impl Eq for ExtensionTower {}

/// Reproducibility metadata echoed into CLI output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TowerMetadata {
    pub p: u64,
    pub precision: u32,
    pub m_prime: u64,
    pub r: u32,
    pub f: usize,
    pub e: usize,
    pub b_star: u64,
    pub supported_root_order: u64,
    pub chosen_factor_mod_p: Vec<u64>,
}

impl ExtensionTower {
    pub fn build(ctx: &PadicContext, m_prime: u64, r: u32) -> Result<Self> {
        let p = ctx.p();
        if m_prime == 0 || num::integer::gcd(m_prime, p) != 1 {
            return Err(Error::InvalidArgument(format!(
                "m' = {} must be positive and prime to p = {}",
                m_prime, p
            )));
        }
        let max_rel = ctx.precision();
        let modulus = ctx.modulus().clone();

        // unramified layer: canonical (lexicographically smallest) factor
        let factors = factor_cyclotomic_mod_p(m_prime, p);
        let u_seed = factors[0].clone();
        let f = u_seed.degree();
        debug_assert_eq!(f as u64, multiplicative_order(p % m_prime.max(1), m_prime));
        let u_poly = if factors.len() == 1 {
            // Phi_m' itself; reduce its integer coefficients mod p^M
            let phi = cyclotomic_polynomial(m_prime);
            let m_int = BigInt::from_biguint(num::bigint::Sign::Plus, modulus.clone());
            phi.iter()
                .map(|c| c.mod_floor(&m_int).to_biguint().unwrap())
                .collect()
        } else {
            let cofactor = {
                // product of the remaining factors mod p
                let mut acc = factors[1].clone();
                for g in &factors[2..] {
                    acc = acc.mul(g);
                }
                acc
            };
            hensel_lift_factor(
                &cyclotomic_polynomial(m_prime),
                &u_seed,
                &cofactor,
                p,
                max_rel,
            )?
        };

        let e = if r == 0 { 1 } else { euler_phi(p.pow(r)) as usize };
        let d = f * e;

        // x^(f+t) reduction rows
        let mut x_red: Vec<Vec<BigUint>> = Vec::new();
        if f > 1 {
            let mut row: Vec<BigUint> = (0..f)
                .map(|i| (&modulus - &u_poly[i] % &modulus) % &modulus)
                .collect();
            x_red.push(row.clone());
            for _ in 1..(f - 1) {
                // multiply by x: shift up, fold the overflow through row 0
                let top = row[f - 1].clone();
                let mut next = vec![BigUint::zero(); f];
                for i in (1..f).rev() {
                    next[i] = row[i - 1].clone();
                }
                if !top.is_zero() {
                    for i in 0..f {
                        next[i] = (&next[i] + &top * &x_red[0][i]) % &modulus;
                    }
                }
                x_red.push(next.clone());
                row = next;
            }
        }

        // y^(e+t) reduction rows, enough for products (2e-2) and monomials
        // up to y^(p^r - 1)
        let mut y_red: Vec<Vec<BigUint>> = Vec::new();
        if e > 1 {
            let pr1 = p.pow(r - 1) as usize;
            let mut base = vec![BigUint::zero(); e];
            for t in 0..(p as usize - 1) {
                base[t * pr1] = &modulus - BigUint::one();
            }
            let max_pow = (2 * e - 2).max(p.pow(r) as usize - 1);
            let mut row = base.clone();
            y_red.push(row.clone());
            for _ in (e + 1)..=max_pow {
                let top = row[e - 1].clone();
                let mut next = vec![BigUint::zero(); e];
                for j in (1..e).rev() {
                    next[j] = row[j - 1].clone();
                }
                if !top.is_zero() {
                    for j in 0..e {
                        next[j] = (&next[j] + &top * &y_red[0][j]) % &modulus;
                    }
                }
                y_red.push(next.clone());
                row = next;
            }
        }

        // Frobenius images of x
        let mut frob: Vec<Vec<BigUint>> = Vec::new();
        let mut cur = vec![BigUint::zero(); f.max(1)];
        if f > 1 {
            cur[1] = BigUint::one();
        } else {
            // x is congruent to the root of the linear factor u = x - root
            cur[0] = (&modulus - &u_poly[0] % &modulus) % &modulus;
        }
        frob.push(cur.clone());
        let inner_proto = TowerInnerProto {
            f,
            x_red: &x_red,
            modulus: &modulus,
        };
        for _ in 1..f {
            cur = inner_proto.ru_pow_u64(&cur, p);
            frob.push(cur.clone());
        }

        let y_units: Vec<u64> = if r == 0 {
            vec![1]
        } else {
            (1..p.pow(r)).filter(|k| k % p != 0).collect()
        };
        debug_assert_eq!(y_units.len(), e);

        // Teichmuller scalar of order b_star = (p-1)-part coprime to m'
        let mut b_star = 1u64;
        let mut rem = p - 1;
        let mut ell = 2u64;
        while ell * ell <= rem || rem > 1 {
            if rem % ell == 0 {
                let mut le = 1u64;
                while rem % ell == 0 {
                    rem /= ell;
                    le *= ell;
                }
                if m_prime % ell != 0 {
                    b_star *= le;
                }
            }
            ell += 1;
            if ell * ell > rem && rem > 1 {
                if m_prime % rem != 0 {
                    b_star *= rem;
                }
                rem = 1;
            }
        }
        let g = smallest_primitive_root(p);
        let teich_gen = if b_star == 1 {
            ctx.one()
        } else {
            let w = teichmuller(ctx, &BigInt::from(g))?;
            w.pow_u64((p - 1) / b_star)
        };

        let inner = TowerInner {
            ctx: ctx.clone(),
            m_prime,
            r,
            f,
            e,
            d,
            u_seed: u_seed.coeffs.clone(),
            u_poly,
            x_red,
            y_red,
            frob,
            y_units,
            b_star,
            teich_gen,
        };
        let tower = ExtensionTower(Arc::new(inner));

        // structural invariant: x has exact multiplicative order m'
        debug_assert!(tower.check_x_order());
        Ok(tower)
    }

    fn check_x_order(&self) -> bool {
        let t = &self.0;
        if t.m_prime == 1 {
            return true;
        }
        let one = ExtElement::one(self);
        let x = self.x_element();
        if x.pow_u64(t.m_prime) != one {
            return false;
        }
        for ell in prime_divisors(t.m_prime) {
            if x.pow_u64(t.m_prime / ell) == one {
                return false;
            }
        }
        true
    }

    pub fn context(&self) -> &PadicContext {
        &self.0.ctx
    }

    pub fn m_prime(&self) -> u64 {
        self.0.m_prime
    }

    pub fn ramification_exponent(&self) -> u32 {
        self.0.r
    }

    pub fn unramified_degree(&self) -> usize {
        self.0.f
    }

    pub fn ramified_degree(&self) -> usize {
        self.0.e
    }

    pub fn degree(&self) -> usize {
        self.0.d
    }

    /// Largest root-of-unity order realizable canonically in this tower.
    pub fn supported_root_order(&self) -> u64 {
        self.0.m_prime * self.0.b_star * self.0.ctx.p().pow(self.0.r)
    }

    pub fn metadata(&self) -> TowerMetadata {
        TowerMetadata {
            p: self.0.ctx.p(),
            precision: self.0.ctx.precision(),
            m_prime: self.0.m_prime,
            r: self.0.r,
            f: self.0.f,
            e: self.0.e,
            b_star: self.0.b_star,
            supported_root_order: self.supported_root_order(),
            chosen_factor_mod_p: self.0.u_seed.clone(),
        }
    }

    fn x_element(&self) -> ExtElement {
        let t = &self.0;
        let mut coeffs = vec![BigUint::zero(); t.d];
        if t.f > 1 {
            coeffs[1] = BigUint::one();
        } else {
            coeffs[0] = (t.ctx.modulus() - &t.u_poly[0] % t.ctx.modulus()) % t.ctx.modulus();
        }
        ExtElement::normalize(self.clone(), 0, t.ctx.precision(), coeffs)
    }

    fn y_element(&self, k: u64) -> ExtElement {
        let t = &self.0;
        let k = if t.r == 0 { 0 } else { k % t.ctx.p().pow(t.r) };
        let mut coeffs = vec![BigUint::zero(); t.d];
        if (k as usize) < t.e {
            coeffs[t.f * k as usize] = BigUint::one();
        } else {
            let row = &t.y_red[k as usize - t.e];
            for (j, c) in row.iter().enumerate() {
                coeffs[t.f * j] = c.clone();
            }
        }
        ExtElement::normalize(self.clone(), 0, t.ctx.precision(), coeffs)
    }

    /// The canonical primitive order-N root: a fixed power of the master
    /// root x * teich_gen * y, so canonical roots are power-compatible
    /// across all divisor orders.
    pub fn canonical_root_element(&self, order: u64) -> Result<ExtElement> {
        let t = &self.0;
        if order == 0 || self.supported_root_order() % order != 0 {
            return Err(Error::UnsupportedOrder {
                order,
                supported: self.supported_root_order(),
            });
        }
        let l_star = self.supported_root_order();
        let texp = l_star / order;
        let pr = t.ctx.p().pow(t.r);
        let x_part = self.x_element().pow_u64(texp % t.m_prime);
        let y_part = self.y_element(if t.r == 0 { 0 } else { texp % pr });
        let s_part = t.teich_gen.pow_u64(texp % t.b_star);
        Ok(x_part.mul(&y_part).scalar_mul(&s_part))
    }

    pub fn root_of_unity(&self, order: u64) -> Result<RootOfUnity> {
        let elem = self.canonical_root_element(order)?;
        RootOfUnity::from_element_with(self, elem, order, Some((order, 1)))
    }

    pub fn zero(&self) -> ExtElement {
        ExtElement {
            tower: self.clone(),
            repr: ExtRepr::ExactZero,
        }
    }

    pub fn one(&self) -> ExtElement {
        ExtElement::one(self)
    }

    pub fn from_scalar(&self, x: &PadicNumber) -> ExtElement {
        ExtElement::from_scalar(self, x)
    }

    pub fn from_i64(&self, n: i64) -> ExtElement {
        self.from_scalar(&self.0.ctx.from_i64(n))
    }

    pub fn from_rational(&self, num: i64, den: i64) -> Result<ExtElement> {
        Ok(self.from_scalar(&self.0.ctx.from_rational(&BigInt::from(num), &BigInt::from(den))?))
    }

    /// Ring homomorphism Q(zeta_m) -> K sending zeta_m to the canonical
    /// order-m root. Denominators divisible by p become valuation shifts.
    pub fn embed_exact(&self, z: &ExactCyclotomic) -> Result<ExtElement> {
        let m = z.field().order();
        let zeta = self.canonical_root_element(m)?;
        let mut acc = self.zero();
        for c in z.coeffs().iter().rev() {
            acc = acc.mul(&zeta);
            if !c.is_zero() {
                let s = self.0.ctx.from_big_rational(c)?;
                acc = acc.add(&self.from_scalar(&s));
            }
        }
        Ok(acc)
    }
}

fn prime_divisors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn smallest_primitive_root(p: u64) -> u64 {
    if p == 2 {
        return 1;
    }
    let divs = prime_divisors(p - 1);
    'outer: for g in 2..p {
        for ell in &divs {
            if pow_mod_u64(g, (p - 1) / ell, p) == 1 {
                continue 'outer;
            }
        }
        return g;
    }
    unreachable!("no primitive root found")
}

pub(crate) fn pow_mod_u64(b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u128;
    let mm = m as u128;
    let mut bb = (b % m) as u128;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * bb % mm;
        }
        bb = bb * bb % mm;
        e >>= 1;
    }
    acc as u64
}

/// Helper view used during tower construction, before TowerInner exists.
struct TowerInnerProto<'a> {
    f: usize,
    x_red: &'a [Vec<BigUint>],
    modulus: &'a BigUint,
}

impl TowerInnerProto<'_> {
    fn ru_mul(&self, a: &[BigUint], b: &[BigUint]) -> Vec<BigUint> {
        let f = self.f;
        let mut raw = vec![BigUint::zero(); 2 * f - 1];
        for (i, ai) in a.iter().enumerate() {
            if ai.is_zero() {
                continue;
            }
            for (j, bj) in b.iter().enumerate() {
                if !bj.is_zero() {
                    raw[i + j] = (&raw[i + j] + ai * bj) % self.modulus;
                }
            }
        }
        for k in (f..raw.len()).rev() {
            let c = raw[k].clone();
            if !c.is_zero() {
                let row = &self.x_red[k - f];
                for i in 0..f {
                    raw[i] = (&raw[i] + &c * &row[i]) % self.modulus;
                }
            }
        }
        raw.truncate(f);
        raw
    }

    fn ru_pow_u64(&self, a: &[BigUint], e: u64) -> Vec<BigUint> {
        if self.f == 1 {
            return vec![a[0].modpow(&BigUint::from(e), self.modulus)];
        }
        let mut acc = vec![BigUint::zero(); self.f];
        acc[0] = BigUint::one();
        let bits = 64 - e.leading_zeros();
        for i in (0..bits).rev() {
            if i != bits - 1 {
                acc = self.ru_mul(&acc, &acc);
            } else {
                acc = a.to_vec();
                continue;
            }
            if (e >> i) & 1 == 1 {
                acc = self.ru_mul(&acc, a);
            }
        }
        acc
    }
}

/// Valuation knowledge for a tower element, in p-units (so values lie in
/// (1/e) Z).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtValuation {
    Infinite,
    AtLeast(Rat),
    Exact(Rat),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum ExtRepr {
    ExactZero,
    Bounded { min_val: Rat },
    Elem {
        shift: i64,
        rel: u32,
        /// length f*e, index i + f*j for x^i y^j, each < p^rel, some unit
        coeffs: Vec<BigUint>,
    },
}

#[derive(Clone, Debug)]
pub struct ExtElement {
    tower: ExtensionTower,
    repr: ExtRepr,
}

impl PartialEq for ExtElement {
    /// Representation equality (determinism checks); use [`ext_defect`] for
    /// comparison to precision.
    fn eq(&self, other: &Self) -> bool {
        self.tower == other.tower && self.repr == other.repr
    }
}
impl Eq for ExtElement {}

impl ExtElement {
    fn one(tower: &ExtensionTower) -> Self {
        let mut coeffs = vec![BigUint::zero(); tower.0.d];
        coeffs[0] = BigUint::one();
        ExtElement {
            tower: tower.clone(),
            repr: ExtRepr::Elem {
                shift: 0,
                rel: tower.0.ctx.precision(),
                coeffs,
            },
        }
    }

    fn from_scalar(tower: &ExtensionTower, x: &PadicNumber) -> Self {
        assert!(x.context() == tower.context(), "scalar from a different context");
        match x.valuation() {
            Valuation::Infinite => tower.zero(),
            Valuation::AtLeast(k) => ExtElement {
                tower: tower.clone(),
                repr: ExtRepr::Bounded {
                    min_val: Ratio::from_integer(k),
                },
            },
            Valuation::Exact(v) => {
                let rel = x.rel_precision();
                let mut coeffs = vec![BigUint::zero(); tower.0.d];
                coeffs[0] = x.unit_mod(rel).unwrap();
                ExtElement {
                    tower: tower.clone(),
                    repr: ExtRepr::Elem { shift: v, rel, coeffs },
                }
            }
        }
    }

    fn normalize(tower: ExtensionTower, shift: i64, rel: u32, mut coeffs: Vec<BigUint>) -> Self {
        debug_assert_eq!(coeffs.len(), tower.0.d);
        if rel == 0 {
            return ExtElement {
                tower,
                repr: ExtRepr::Bounded {
                    min_val: Ratio::from_integer(shift),
                },
            };
        }
        let modulus = tower.0.ctx.pk(rel);
        let p = BigUint::from(tower.0.ctx.p());
        let mut min_v = u32::MAX;
        for c in coeffs.iter_mut() {
            *c %= modulus;
            if !c.is_zero() {
                let mut v = 0u32;
                let mut t = c.clone();
                while (&t % &p).is_zero() {
                    t /= &p;
                    v += 1;
                }
                min_v = min_v.min(v);
            }
        }
        if min_v == u32::MAX {
            return ExtElement {
                tower,
                repr: ExtRepr::Bounded {
                    min_val: Ratio::from_integer(shift + rel as i64),
                },
            };
        }
        if min_v > 0 {
            let pk = tower.0.ctx.pk(min_v).clone();
            for c in coeffs.iter_mut() {
                *c /= &pk;
            }
        }
        ExtElement {
            tower,
            repr: ExtRepr::Elem {
                shift: shift + min_v as i64,
                rel: rel - min_v,
                coeffs,
            },
        }
    }

    pub fn tower(&self) -> &ExtensionTower {
        &self.tower
    }

    pub fn is_exact_zero(&self) -> bool {
        matches!(self.repr, ExtRepr::ExactZero)
    }

    pub fn is_zero_to_precision(&self) -> bool {
        !matches!(self.repr, ExtRepr::Elem { .. })
    }

    /// Absolute precision floor in p-units (None for exact zero).
    pub fn abs_floor(&self) -> Option<Rat> {
        match &self.repr {
            ExtRepr::ExactZero => None,
            ExtRepr::Bounded { min_val } => Some(*min_val),
            ExtRepr::Elem { shift, rel, .. } => Some(Ratio::from_integer(shift + *rel as i64)),
        }
    }

    /// The scalar value when the element lies in Q_p.
    pub fn as_scalar(&self) -> Option<PadicNumber> {
        let ctx = self.tower.context();
        match &self.repr {
            ExtRepr::ExactZero => Some(ctx.zero()),
            ExtRepr::Bounded { min_val } => {
                let k = min_val.floor().to_integer();
                Some(&ctx.from_i64(0) + &bounded_scalar(ctx, k))
            }
            ExtRepr::Elem { shift, rel, coeffs } => {
                if coeffs[1..].iter().any(|c| !c.is_zero()) {
                    return None;
                }
                let unit = coeffs[0].clone();
                let base = ctx
                    .from_bigint(&BigInt::from_biguint(num::bigint::Sign::Plus, unit));
                // base has full precision; trim to rel then apply the shift
                let trimmed = &base + &bounded_scalar(ctx, *rel as i64);
                let p_shift = match shift.cmp(&0) {
                    std::cmp::Ordering::Equal => return Some(trimmed),
                    std::cmp::Ordering::Greater => ctx.pk_number(*shift as u32),
                    std::cmp::Ordering::Less => ctx
                        .pk_number((-*shift) as u32)
                        .inv()
                        .expect("power of p is invertible"),
                };
                Some(&trimmed * &p_shift)
            }
        }
    }

    fn check_tower(&self, other: &Self) {
        assert!(self.tower == other.tower, "mixed towers");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_tower(other);
        let tower = self.tower.clone();
        match (&self.repr, &other.repr) {
            (ExtRepr::ExactZero, _) => other.clone(),
            (_, ExtRepr::ExactZero) => self.clone(),
            (ExtRepr::Bounded { min_val: a }, ExtRepr::Bounded { min_val: b }) => ExtElement {
                tower,
                repr: ExtRepr::Bounded {
                    min_val: (*a).min(*b),
                },
            },
            (ExtRepr::Bounded { min_val }, ExtRepr::Elem { shift, rel, coeffs })
            | (ExtRepr::Elem { shift, rel, coeffs }, ExtRepr::Bounded { min_val }) => {
                let floor = min_val.floor().to_integer();
                if floor <= *shift {
                    return ExtElement {
                        tower,
                        repr: ExtRepr::Bounded {
                            min_val: (*min_val).min(Ratio::from_integer(*shift)),
                        },
                    };
                }
                let window = ((floor - shift) as u32).min(*rel);
                ExtElement::normalize(tower, *shift, window, coeffs.clone())
            }
            (
                ExtRepr::Elem {
                    shift: s1,
                    rel: r1,
                    coeffs: c1,
                },
                ExtRepr::Elem {
                    shift: s2,
                    rel: r2,
                    coeffs: c2,
                },
            ) => {
                let (s1, c1, r1, s2, c2, r2) = if s1 <= s2 {
                    (*s1, c1, *r1, *s2, c2, *r2)
                } else {
                    (*s2, c2, *r2, *s1, c1, *r1)
                };
                let abs = (s1 + r1 as i64).min(s2 + r2 as i64);
                debug_assert!(abs > s1);
                let window = (abs - s1) as u32;
                let modulus = self.tower.0.ctx.pk(window);
                let scale = self.tower.0.ctx.pk((s2 - s1) as u32).clone();
                let mut out = Vec::with_capacity(c1.len());
                for (a, b) in c1.iter().zip(c2.iter()) {
                    let mut v = a % modulus;
                    if (s2 - s1) < window as i64 {
                        v = (v + (b * &scale) % modulus) % modulus;
                    }
                    out.push(v);
                }
                ExtElement::normalize(tower, s1, window, out)
            }
        }
    }

    pub fn neg(&self) -> Self {
        match &self.repr {
            ExtRepr::ExactZero | ExtRepr::Bounded { .. } => self.clone(),
            ExtRepr::Elem { shift, rel, coeffs } => {
                let modulus = self.tower.0.ctx.pk(*rel);
                let out = coeffs
                    .iter()
                    .map(|c| {
                        if c.is_zero() {
                            BigUint::zero()
                        } else {
                            modulus - c
                        }
                    })
                    .collect();
                ExtElement {
                    tower: self.tower.clone(),
                    repr: ExtRepr::Elem {
                        shift: *shift,
                        rel: *rel,
                        coeffs: out,
                    },
                }
            }
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Lower bound on the valuation, cheap (no norm computation).
    fn val_floor(&self) -> Option<Rat> {
        match &self.repr {
            ExtRepr::ExactZero => None,
            ExtRepr::Bounded { min_val } => Some(*min_val),
            ExtRepr::Elem { shift, .. } => Some(Ratio::from_integer(*shift)),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check_tower(other);
        let tower = self.tower.clone();
        match (&self.repr, &other.repr) {
            (ExtRepr::ExactZero, _) | (_, ExtRepr::ExactZero) => tower.zero(),
            (ExtRepr::Bounded { min_val: a }, ExtRepr::Bounded { min_val: b }) => ExtElement {
                tower,
                repr: ExtRepr::Bounded { min_val: a + b },
            },
            (ExtRepr::Bounded { min_val }, e @ ExtRepr::Elem { .. })
            | (e @ ExtRepr::Elem { .. }, ExtRepr::Bounded { min_val }) => {
                let shift = match e {
                    ExtRepr::Elem { shift, .. } => *shift,
                    _ => unreachable!(),
                };
                ExtElement {
                    tower,
                    repr: ExtRepr::Bounded {
                        min_val: min_val + Ratio::from_integer(shift),
                    },
                }
            }
            (
                ExtRepr::Elem {
                    shift: s1,
                    rel: r1,
                    coeffs: c1,
                },
                ExtRepr::Elem {
                    shift: s2,
                    rel: r2,
                    coeffs: c2,
                },
            ) => {
                let rel = (*r1).min(*r2);
                let raw = self.tower.raw_mul(c1, c2, rel);
                ExtElement::normalize(tower, s1 + s2, rel, raw)
            }
        }
    }

    pub fn scalar_mul(&self, s: &PadicNumber) -> Self {
        self.mul(&ExtElement::from_scalar(&self.tower, s))
    }

    pub fn scalar_div(&self, s: &PadicNumber) -> Result<Self> {
        Ok(self.mul(&ExtElement::from_scalar(&self.tower, &s.inv()?)))
    }

    pub fn pow_u64(&self, e: u64) -> Self {
        if e == 0 {
            return ExtElement::one(&self.tower);
        }
        let bits = 64 - e.leading_zeros();
        let mut acc = self.clone();
        for i in (0..bits - 1).rev() {
            acc = acc.mul(&acc);
            if (e >> i) & 1 == 1 {
                acc = acc.mul(self);
            }
        }
        acc
    }

    pub fn pow_i64(&self, e: i64) -> Result<Self> {
        if e >= 0 {
            Ok(self.pow_u64(e as u64))
        } else {
            Ok(self.inv()?.pow_u64(e.unsigned_abs()))
        }
    }

    /// Galois conjugate x -> x^(p^i), y -> y^k (k must be a unit mod p^r).
    pub fn conjugate(&self, frob_power: usize, y_exp: u64) -> Self {
        let t = &self.tower.0;
        match &self.repr {
            ExtRepr::ExactZero | ExtRepr::Bounded { .. } => self.clone(),
            ExtRepr::Elem { shift, rel, coeffs } => {
                let raw = self.tower.raw_conjugate(coeffs, *rel, frob_power, y_exp);
                debug_assert!(frob_power < t.f);
                ExtElement::normalize(self.tower.clone(), *shift, *rel, raw)
            }
        }
    }

    /// Norm to Q_p: product over the full Galois orbit.
    pub fn norm(&self) -> Result<PadicNumber> {
        let ctx = self.tower.context();
        match &self.repr {
            ExtRepr::ExactZero => Ok(ctx.zero()),
            ExtRepr::Bounded { min_val } => {
                let d = self.tower.0.d as i64;
                let bound = (min_val * Ratio::from_integer(d)).floor().to_integer();
                Ok(bounded_scalar(ctx, bound))
            }
            ExtRepr::Elem { shift, rel, coeffs } => {
                let (w, unit) = self.tower.raw_norm(coeffs, *rel).ok_or_else(|| {
                    Error::PrecisionLoss("norm vanishes to working precision".into())
                })?;
                let d = self.tower.0.d as i64;
                let base = ctx.from_bigint(&BigInt::from_biguint(
                    num::bigint::Sign::Plus,
                    unit,
                ));
                let trimmed = &base + &bounded_scalar(ctx, (*rel - w) as i64);
                let shift_pow = d * *shift + w as i64;
                Ok(&trimmed * &pk_signed(ctx, shift_pow))
            }
        }
    }

    /// Valuation in p-units, via the norm: v(z) = v_p(Norm z) / d.
    pub fn valuation(&self) -> ExtValuation {
        match &self.repr {
            ExtRepr::ExactZero => ExtValuation::Infinite,
            ExtRepr::Bounded { min_val } => ExtValuation::AtLeast(*min_val),
            ExtRepr::Elem { shift, rel, coeffs } => {
                let d = self.tower.0.d as i64;
                match self.tower.raw_norm(coeffs, *rel) {
                    Some((w, _)) => ExtValuation::Exact(
                        Ratio::from_integer(*shift) + Ratio::new(w as i64, d),
                    ),
                    None => ExtValuation::AtLeast(
                        Ratio::from_integer(*shift) + Ratio::new(*rel as i64, d),
                    ),
                }
            }
        }
    }

    /// Inverse via the Galois cofactor: z^{-1} = (prod of other conjugates)
    /// / Norm(z).
    pub fn inv(&self) -> Result<Self> {
        let t = &self.tower.0;
        match &self.repr {
            ExtRepr::ExactZero => Err(Error::DivisionByZero),
            ExtRepr::Bounded { min_val } => Err(Error::PrecisionLoss(format!(
                "cannot invert a tower element only known to be O(p^{})",
                min_val
            ))),
            ExtRepr::Elem { shift, rel, coeffs } => {
                let rel = *rel;
                if coeffs[1..].iter().all(|c| c.is_zero()) {
                    // scalar fast path
                    let modulus = t.ctx.pk(rel);
                    let inv = crate::padic::mod_inverse(&coeffs[0], modulus)
                        .expect("normalized scalar coefficient is a unit");
                    let mut out = vec![BigUint::zero(); t.d];
                    out[0] = inv;
                    return Ok(ExtElement::normalize(self.tower.clone(), -shift, rel, out));
                }
                let mut cof: Option<Vec<BigUint>> = None;
                for i in 0..t.f {
                    for &k in &t.y_units {
                        if i == 0 && k == 1 {
                            continue;
                        }
                        let c = self.tower.raw_conjugate(coeffs, rel, i, k);
                        cof = Some(match cof {
                            None => c,
                            Some(acc) => self.tower.raw_mul(&acc, &c, rel),
                        });
                    }
                }
                let cof = cof.unwrap_or_else(|| {
                    let mut one = vec![BigUint::zero(); t.d];
                    one[0] = BigUint::one();
                    one
                });
                let nvec = self.tower.raw_mul(coeffs, &cof, rel);
                debug_assert!(nvec[1..].iter().all(|c| c.is_zero()), "norm not scalar");
                let n = &nvec[0];
                if n.is_zero() {
                    return Err(Error::PrecisionLoss(
                        "norm vanishes to working precision; increase M".into(),
                    ));
                }
                let p = BigUint::from(t.ctx.p());
                let mut w = 0u32;
                let mut unit = n.clone();
                while (&unit % &p).is_zero() {
                    unit /= &p;
                    w += 1;
                }
                if w >= rel {
                    return Err(Error::PrecisionLoss(
                        "norm valuation reaches working precision".into(),
                    ));
                }
                let inv_rel = rel;
                let modulus = t.ctx.pk(inv_rel);
                let unit_inv = crate::padic::mod_inverse(&(unit % modulus), modulus)
                    .expect("unit part of norm is invertible");
                let out: Vec<BigUint> = cof
                    .iter()
                    .map(|c| (c * &unit_inv) % modulus)
                    .collect();
                let result =
                    ExtElement::normalize(self.tower.clone(), -shift - w as i64, inv_rel, out);
                Ok(result)
            }
        }
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.inv()?))
    }
}

fn bounded_scalar(ctx: &PadicContext, min_val: i64) -> PadicNumber {
    ctx.big_oh(min_val)
}

fn pk_signed(ctx: &PadicContext, k: i64) -> PadicNumber {
    if k >= 0 {
        ctx.pk_number(k as u32)
    } else {
        ctx.pk_number((-k) as u32).inv().expect("p power invertible")
    }
}

impl ExtensionTower {
    fn raw_mul(&self, a: &[BigUint], b: &[BigUint], rel: u32) -> Vec<BigUint> {
        let t = &self.0;
        let modulus = t.ctx.pk(rel);
        let f = t.f;
        let e = t.e;
        let wx = 2 * f - 1;
        let wy = 2 * e - 1;
        let mut grid = vec![BigUint::zero(); wx * wy];
        for j1 in 0..e {
            for i1 in 0..f {
                let av = &a[i1 + f * j1];
                if av.is_zero() {
                    continue;
                }
                for j2 in 0..e {
                    for i2 in 0..f {
                        let bv = &b[i2 + f * j2];
                        if !bv.is_zero() {
                            let idx = (i1 + i2) + wx * (j1 + j2);
                            grid[idx] = (&grid[idx] + av * bv) % modulus;
                        }
                    }
                }
            }
        }
        // fold y-degrees >= e
        for jj in (e..wy).rev() {
            let row = &t.y_red[jj - e];
            for ii in 0..wx {
                let c = std::mem::take(&mut grid[ii + wx * jj]);
                if c.is_zero() {
                    continue;
                }
                for (j, rc) in row.iter().enumerate() {
                    if !rc.is_zero() {
                        let idx = ii + wx * j;
                        grid[idx] = (&grid[idx] + &c * (rc % modulus)) % modulus;
                    }
                }
            }
        }
        // fold x-degrees >= f within the surviving y-rows
        for j in 0..e {
            for ii in (f..wx).rev() {
                let c = std::mem::take(&mut grid[ii + wx * j]);
                if c.is_zero() {
                    continue;
                }
                let row = &t.x_red[ii - f];
                for (i, rc) in row.iter().enumerate() {
                    if !rc.is_zero() {
                        let idx = i + wx * j;
                        grid[idx] = (&grid[idx] + &c * (rc % modulus)) % modulus;
                    }
                }
            }
        }
        let mut out = vec![BigUint::zero(); t.d];
        for j in 0..e {
            for i in 0..f {
                out[i + f * j] = std::mem::take(&mut grid[i + wx * j]);
            }
        }
        out
    }

    fn raw_y_pow(&self, k: u64, rel: u32) -> Vec<BigUint> {
        let t = &self.0;
        let modulus = t.ctx.pk(rel);
        let mut out = vec![BigUint::zero(); t.d];
        let k = if t.r == 0 { 0 } else { (k % t.ctx.p().pow(t.r)) as usize };
        if k < t.e {
            out[t.f * k] = BigUint::one();
        } else {
            let row = &t.y_red[k - t.e];
            for (j, c) in row.iter().enumerate() {
                out[t.f * j] = c % modulus;
            }
        }
        out
    }

    /// substitute x -> x^(p^i), y -> y^k in the raw coefficient matrix
    fn raw_conjugate(&self, coeffs: &[BigUint], rel: u32, i: usize, k: u64) -> Vec<BigUint> {
        let t = &self.0;
        let modulus = t.ctx.pk(rel);
        let f = t.f;
        let e = t.e;
        // substitute in x slice-by-slice (Horner over R_u)
        let xi: Vec<BigUint> = t.frob[i].iter().map(|c| c % modulus).collect();
        let mut slices: Vec<Vec<BigUint>> = Vec::with_capacity(e);
        for j in 0..e {
            let mut acc = vec![BigUint::zero(); f];
            for deg in (0..f).rev() {
                acc = self.ru_mul_mod(&acc, &xi, rel);
                let c = &coeffs[deg + f * j];
                if !c.is_zero() {
                    acc[0] = (&acc[0] + c) % modulus;
                }
            }
            slices.push(acc);
        }
        // Horner over the full ring in Y = y^k
        let ypow = self.raw_y_pow(k, rel);
        let mut acc = vec![BigUint::zero(); t.d];
        for j in (0..e).rev() {
            acc = self.raw_mul(&acc, &ypow, rel);
            for i2 in 0..f {
                if !slices[j][i2].is_zero() {
                    acc[i2] = (&acc[i2] + &slices[j][i2]) % modulus;
                }
            }
        }
        acc
    }

    fn ru_mul_mod(&self, a: &[BigUint], b: &[BigUint], rel: u32) -> Vec<BigUint> {
        let t = &self.0;
        let modulus = t.ctx.pk(rel);
        let f = t.f;
        if f == 1 {
            return vec![(&a[0] * &b[0]) % modulus];
        }
        let mut raw = vec![BigUint::zero(); 2 * f - 1];
        for (i, ai) in a.iter().enumerate() {
            if ai.is_zero() {
                continue;
            }
            for (j, bj) in b.iter().enumerate() {
                if !bj.is_zero() {
                    raw[i + j] = (&raw[i + j] + ai * bj) % modulus;
                }
            }
        }
        for kk in (f..raw.len()).rev() {
            let c = raw[kk].clone();
            if !c.is_zero() {
                let row = &t.x_red[kk - f];
                for i in 0..f {
                    raw[i] = (&raw[i] + &c * (&row[i] % modulus)) % modulus;
                }
            }
        }
        raw.truncate(f);
        raw
    }

    /// (v_p, unit) of the norm of a normalized coefficient matrix, or None
    /// when the norm vanishes mod p^rel.
    fn raw_norm(&self, coeffs: &[BigUint], rel: u32) -> Option<(u32, BigUint)> {
        let t = &self.0;
        let mut acc: Option<Vec<BigUint>> = None;
        for i in 0..t.f {
            for &k in &t.y_units {
                let c = if i == 0 && k == 1 {
                    coeffs.to_vec()
                } else {
                    self.raw_conjugate(coeffs, rel, i, k)
                };
                acc = Some(match acc {
                    None => c,
                    Some(a) => self.raw_mul(&a, &c, rel),
                });
            }
        }
        let acc = acc.unwrap();
        debug_assert!(
            acc[1..].iter().all(|c| c.is_zero()),
            "norm has non-scalar coordinates"
        );
        let n = &acc[0];
        if n.is_zero() {
            return None;
        }
        let p = BigUint::from(t.ctx.p());
        let mut w = 0u32;
        let mut unit = n.clone();
        while (&unit % &p).is_zero() {
            unit /= &p;
            w += 1;
        }
        Some((w, unit))
    }
}

/// Valuation of a - b, as far as the representations allow.
pub fn ext_defect(a: &ExtElement, b: &ExtElement) -> Defect {
    let d = a.sub(b);
    match &d.repr {
        ExtRepr::ExactZero => Defect::ExactZero,
        ExtRepr::Bounded { min_val } => Defect::AtLeast(*min_val),
        ExtRepr::Elem { .. } => match d.valuation() {
            ExtValuation::Exact(v) => Defect::Exact(v),
            ExtValuation::AtLeast(v) => Defect::AtLeast(v),
            ExtValuation::Infinite => Defect::ExactZero,
        },
    }
}

/// Joint absolute-precision floor (p-units) for identity checks.
pub fn ext_working_floor(a: &ExtElement, b: &ExtElement) -> Option<Rat> {
    match (a.abs_floor(), b.abs_floor()) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    }
}

/// A root of unity of known exact order, with a power table for cheap
/// exponent-reduced lookups (exponents reduce mod the order, never by
/// repeated multiplication at use sites).
#[derive(Clone, Debug)]
pub struct RootOfUnity {
    order: u64,
    powers: Arc<Vec<ExtElement>>,
    /// (N, k) when this root is canonical_root(N)^k, which lets exact-side
    /// oracles use the matching zeta_N^k in Q(zeta_N)
    canonical: Option<(u64, u64)>,
}

impl RootOfUnity {
    pub fn from_element(tower: &ExtensionTower, elem: ExtElement, order: u64) -> Result<Self> {
        Self::from_element_with(tower, elem, order, None)
    }

    fn from_element_with(
        tower: &ExtensionTower,
        elem: ExtElement,
        order: u64,
        canonical: Option<(u64, u64)>,
    ) -> Result<Self> {
        let mut powers = Vec::with_capacity(order as usize);
        powers.push(ExtElement::one(tower));
        let mut acc = ExtElement::one(tower);
        for _ in 1..order {
            acc = acc.mul(&elem);
            powers.push(acc.clone());
        }
        let last = powers.last().unwrap().mul(&elem);
        if order > 1 && last != powers[0] {
            return Err(Error::VerificationFailure(format!(
                "element does not have order {}",
                order
            )));
        }
        for ell in prime_divisors(order) {
            if powers[(order / ell) as usize] == powers[0] {
                return Err(Error::VerificationFailure(format!(
                    "element order divides {} properly",
                    order
                )));
            }
        }
        Ok(RootOfUnity {
            order,
            powers: Arc::new(powers),
            canonical,
        })
    }

    /// Canonical coordinates (N, k) with self = canonical_root(N)^k.
    pub fn canonical_coords(&self) -> Option<(u64, u64)> {
        self.canonical
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn element(&self) -> &ExtElement {
        &self.powers[1 % self.order as usize]
    }

    pub fn tower(&self) -> &ExtensionTower {
        self.powers[0].tower()
    }

    pub fn is_one(&self) -> bool {
        self.order == 1
    }

    /// xi^k with the exponent reduced mod the order.
    pub fn pow_elem(&self, k: i64) -> &ExtElement {
        let idx = k.rem_euclid(self.order as i64) as usize;
        &self.powers[idx]
    }

    pub fn pow_elem_u64(&self, k: u64) -> &ExtElement {
        &self.powers[(k % self.order) as usize]
    }

    /// xi^k as a root of unity in its own right (order shrinks by gcd).
    pub fn power(&self, k: i64) -> RootOfUnity {
        let kk = k.rem_euclid(self.order as i64) as u64;
        let g = num::integer::gcd(kk, self.order);
        let new_order = self.order / g.max(1);
        let elem = self.powers[kk as usize].clone();
        let canonical = self
            .canonical
            .map(|(n, e)| (n, (e as u128 * kk as u128 % n as u128) as u64));
        RootOfUnity::from_element_with(self.tower(), elem, new_order.max(1), canonical)
            .expect("power of a verified root has the predicted order")
    }

    /// xi^(1/alpha) = xi^(alpha^{-1} mod order); alpha must be prime to the
    /// order.
    pub fn power_inv(&self, alpha: u64) -> Result<RootOfUnity> {
        let a = alpha % self.order.max(1);
        if self.order == 1 {
            return Ok(self.clone());
        }
        if num::integer::gcd(a, self.order) != 1 {
            return Err(Error::Domain(format!(
                "alpha = {} not invertible mod root order {}",
                alpha, self.order
            )));
        }
        let inv = mod_inverse_u64_general(a, self.order);
        Ok(self.power(inv as i64))
    }
}

fn mod_inverse_u64_general(a: u64, m: u64) -> u64 {
    // extended Euclid on u64 (m not necessarily prime)
    let (mut old_r, mut r) = (a as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    debug_assert_eq!(old_r, 1);
    old_s.rem_euclid(m as i128) as u64
}

impl fmt::Display for ExtElement {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            ExtRepr::ExactZero => write!(out, "0"),
            ExtRepr::Bounded { min_val } => write!(out, "O(p^{})", min_val),
            ExtRepr::Elem { shift, rel, coeffs } => {
                let t = &self.tower.0;
                write!(out, "p^{} * (", shift)?;
                let mut wrote = false;
                for j in 0..t.e {
                    for i in 0..t.f {
                        let c = &coeffs[i + t.f * j];
                        if c.is_zero() {
                            continue;
                        }
                        if wrote {
                            write!(out, " + ")?;
                        }
                        write!(out, "{}", c)?;
                        if i > 0 {
                            write!(out, "*x^{}", i)?;
                        }
                        if j > 0 {
                            write!(out, "*y^{}", j)?;
                        }
                        wrote = true;
                    }
                }
                if !wrote {
                    write!(out, "0")?;
                }
                write!(out, ") + O(p^{})", shift + *rel as i64)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tower_3_1_r1() -> ExtensionTower {
        let ctx = PadicContext::new(3, 12).unwrap();
        ExtensionTower::build(&ctx, 1, 1).unwrap()
    }

    #[test]
    fn trivial_tower_is_qp() {
        let ctx = PadicContext::new(3, 8).unwrap();
        let t = ExtensionTower::build(&ctx, 1, 0).unwrap();
        assert_eq!(t.degree(), 1);
        let a = t.from_i64(7);
        let b = t.from_i64(5);
        let prod = a.mul(&b);
        assert_eq!(prod.as_scalar().unwrap().unit_mod(3).unwrap(), BigUint::from(35u32 % 27));
    }

    #[test]
    fn unramified_quadratic_for_p3_m4() {
        let ctx = PadicContext::new(3, 10).unwrap();
        let t = ExtensionTower::build(&ctx, 4, 0).unwrap();
        assert_eq!(t.unramified_degree(), 2);
        assert_eq!(t.ramified_degree(), 1);
        // zeta_4 has exact order 4
        let z = t.root_of_unity(4).unwrap();
        assert_eq!(z.order(), 4);
        let sq = z.pow_elem(2);
        assert_eq!(ext_defect(sq, &t.from_i64(-1)), Defect::AtLeast(Ratio::from_integer(10)));
    }

    #[test]
    fn ramified_layer_phi3() {
        let t = tower_3_1_r1();
        assert_eq!(t.ramified_degree(), 2);
        let z = t.root_of_unity(3).unwrap();
        // zeta_3^3 = 1 exactly
        let one = t.one();
        assert_eq!(z.pow_elem_u64(3), &one);
        // (1 - zeta)(1 - zeta^2) = 3
        let a = one.sub(z.pow_elem(1));
        let b = one.sub(z.pow_elem(2));
        let prod = a.mul(&b);
        assert!(ext_defect(&prod, &t.from_i64(3)).meets(Ratio::from_integer(12)));
    }

    #[test]
    fn valuations() {
        let t = tower_3_1_r1();
        // v(p) = 1
        assert_eq!(
            t.from_i64(3).valuation(),
            ExtValuation::Exact(Ratio::from_integer(1))
        );
        // v(zeta_3 - 1) = 1/2
        let z = t.root_of_unity(3).unwrap();
        let pi = z.pow_elem(1).sub(&t.one());
        assert_eq!(pi.valuation(), ExtValuation::Exact(Ratio::new(1, 2)));
        // v(zeta_4 - 1) = 0 in an unramified tower
        let ctx = PadicContext::new(3, 10).unwrap();
        let t2 = ExtensionTower::build(&ctx, 4, 0).unwrap();
        let z4 = t2.root_of_unity(4).unwrap();
        let u = z4.pow_elem(1).sub(&t2.one());
        assert_eq!(u.valuation(), ExtValuation::Exact(Ratio::from_integer(0)));
    }

    #[test]
    fn inverse_of_uniformizer() {
        let t = tower_3_1_r1();
        let z = t.root_of_unity(3).unwrap();
        let pi = z.pow_elem(1).sub(&t.one());
        let inv = pi.inv().unwrap();
        let prod = pi.mul(&inv);
        assert!(ext_defect(&prod, &t.one()).meets(Ratio::from_integer(10)));
        assert_eq!(inv.valuation(), ExtValuation::Exact(Ratio::new(-1, 2)));
    }

    #[test]
    fn norm_multiplicativity_and_valuation_additivity() {
        let ctx = PadicContext::new(3, 12).unwrap();
        let t = ExtensionTower::build(&ctx, 4, 1).unwrap();
        assert_eq!(t.degree(), 4);
        let z12 = t.root_of_unity(12).unwrap();
        let samples = [
            t.from_i64(5),
            z12.pow_elem(1).add(&t.from_i64(2)),
            z12.pow_elem(7).sub(&t.from_i64(1)),
            t.from_i64(3).mul(z12.pow_elem(5)),
        ];
        for a in &samples {
            for b in &samples {
                let (ExtValuation::Exact(va), ExtValuation::Exact(vb)) =
                    (a.valuation(), b.valuation())
                else {
                    continue;
                };
                match a.mul(b).valuation() {
                    ExtValuation::Exact(vab) => assert_eq!(vab, va + vb),
                    other => panic!("valuation lost exactness: {:?}", other),
                }
            }
        }
    }

    #[test]
    fn ultrametric_for_ext_valuation() {
        let t = tower_3_1_r1();
        let z = t.root_of_unity(3).unwrap();
        let a = z.pow_elem(1).sub(&t.one()); // v = 1/2
        let b = t.from_i64(3); // v = 1
        let s = a.add(&b);
        match s.valuation() {
            ExtValuation::Exact(v) => assert_eq!(v, Ratio::new(1, 2)),
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn root_orders_and_powers() {
        let t = tower_3_1_r1();
        let one = t.root_of_unity(1).unwrap();
        assert!(one.is_one());
        // order 2 realized through the Teichmuller scalar -1
        let m1 = t.root_of_unity(2).unwrap();
        assert!(ext_defect(m1.pow_elem(1), &t.from_i64(-1)).meets(Ratio::from_integer(12)));
        // xi of order 3, exponent 1/2 -> xi^2
        let z3 = t.root_of_unity(3).unwrap();
        let halved = z3.power_inv(2).unwrap();
        assert_eq!(halved.pow_elem(1), z3.pow_elem(2));
        // xi^order = 1
        assert_eq!(z3.pow_elem_u64(z3.order()), &t.one());
        // unsupported order rejected
        assert!(t.root_of_unity(5).is_err());
    }

    #[test]
    fn embed_exact_is_a_ring_hom() {
        use crate::cyclotomic::exact::CycField;
        let ctx = PadicContext::new(3, 12).unwrap();
        let t = ExtensionTower::build(&ctx, 4, 1).unwrap();
        let field = CycField::new(12);
        let x = field.zeta_pow(5).add(&field.from_i64(2));
        let y = field.zeta_pow(7).sub(&field.from_i64(1));
        let ex = t.embed_exact(&x).unwrap();
        let ey = t.embed_exact(&y).unwrap();
        let exy = t.embed_exact(&x.mul(&y)).unwrap();
        assert!(ext_defect(&ex.mul(&ey), &exy).meets(Ratio::from_integer(11)));
        // embed(1/2) is the scalar inverse of 2
        let field1 = CycField::new(1);
        let half = field1.from_rational(&num::BigRational::new(BigInt::from(1), BigInt::from(2)));
        let eh = t.embed_exact(&half).unwrap();
        let two_eh = eh.scalar_mul(&ctx.from_i64(2));
        assert!(ext_defect(&two_eh, &t.one()).meets(Ratio::from_integer(12)));
        // embed(zeta_3)^3 = 1
        let f3 = CycField::new(3);
        let ez = t.embed_exact(&f3.zeta()).unwrap();
        assert!(ext_defect(&ez.pow_u64(3), &t.one()).meets(Ratio::from_integer(12)));
    }

    #[test]
    fn scalar_round_trip() {
        let t = tower_3_1_r1();
        let s = t.context().from_rational(&BigInt::from(5), &BigInt::from(7)).unwrap();
        let e = t.from_scalar(&s);
        let back = e.as_scalar().unwrap();
        assert_eq!(back, s);
        // non-scalar detection
        let z = t.root_of_unity(3).unwrap();
        assert!(z.pow_elem(1).as_scalar().is_none());
    }
}
