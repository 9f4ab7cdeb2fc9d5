//! Polynomial helpers behind the extension tower: cyclotomic polynomials
//! over Z, factorization of Phi_m mod p into its equal-degree irreducible
//! factors, and quadratic Hensel lifting of one factor to mod p^M.

use crate::error::{Error, Result};
use num::{BigInt, BigUint, Integer, One, Zero};

pub fn euler_phi(mut n: u64) -> u64 {
    let mut result = n;
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            while n % d == 0 {
                n /= d;
            }
            result -= result / d;
        }
        d += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

/// Multiplicative order of a modulo m (requires gcd(a, m) = 1, m >= 1).
pub fn multiplicative_order(a: u64, m: u64) -> u64 {
    if m == 1 {
        return 1;
    }
    assert_eq!(num::integer::gcd(a, m), 1);
    let mut x = a % m;
    let mut ord = 1;
    while x != 1 {
        x = (x as u128 * a as u128 % m as u128) as u64;
        ord += 1;
    }
    ord
}

// --- exact polynomials over Z (dense, little-endian coefficients) ---

fn zpoly_trim(p: &mut Vec<BigInt>) {
    while p.len() > 1 && p.last().map_or(false, |c| c.is_zero()) {
        p.pop();
    }
}

fn zpoly_mul(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Exact division (panics if not exact); divisor need not be monic but the
/// division must come out even, which holds for cyclotomic quotients.
fn zpoly_div_exact(num: &[BigInt], den: &[BigInt]) -> Vec<BigInt> {
    let mut rem: Vec<BigInt> = num.to_vec();
    zpoly_trim(&mut rem);
    let mut den = den.to_vec();
    zpoly_trim(&mut den);
    let dd = den.len() - 1;
    let lead = den[dd].clone();
    assert!(!lead.is_zero());
    if rem.len() < den.len() {
        assert!(rem.iter().all(|c| c.is_zero()));
        return vec![BigInt::zero()];
    }
    let mut quot = vec![BigInt::zero(); rem.len() - dd];
    for k in (0..quot.len()).rev() {
        let c = &rem[k + dd] / &lead;
        assert_eq!(&c * &lead, rem[k + dd], "division not exact");
        for (j, dj) in den.iter().enumerate() {
            let sub = &c * dj;
            rem[k + j] -= sub;
        }
        quot[k] = c;
    }
    assert!(rem.iter().all(|c| c.is_zero()), "nonzero remainder");
    quot
}

/// The m-th cyclotomic polynomial over Z: (x^m - 1) / prod_{d | m, d < m} Phi_d.
pub fn cyclotomic_polynomial(m: u64) -> Vec<BigInt> {
    assert!(m >= 1);
    if m == 1 {
        return vec![BigInt::from(-1), BigInt::one()];
    }
    let mut num = vec![BigInt::zero(); m as usize + 1];
    num[0] = BigInt::from(-1);
    num[m as usize] = BigInt::one();
    let mut den = vec![BigInt::one()];
    for d in 1..m {
        if m % d == 0 {
            den = zpoly_mul(&den, &cyclotomic_polynomial(d));
        }
    }
    let mut q = zpoly_div_exact(&num, &den);
    zpoly_trim(&mut q);
    q
}

// --- dense polynomials over F_p (p < 2^32), little-endian u64 coefficients ---

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FpPoly {
    pub p: u64,
    pub coeffs: Vec<u64>,
}

impl FpPoly {
    pub fn new(p: u64, mut coeffs: Vec<u64>) -> Self {
        for c in coeffs.iter_mut() {
            *c %= p;
        }
        let mut out = FpPoly { p, coeffs };
        out.trim();
        out
    }

    pub fn zero(p: u64) -> Self {
        FpPoly { p, coeffs: vec![] }
    }

    pub fn one(p: u64) -> Self {
        FpPoly { p, coeffs: vec![1] }
    }

    pub fn from_bigints(p: u64, coeffs: &[BigInt]) -> Self {
        let pb = BigInt::from(p);
        Self::new(
            p,
            coeffs
                .iter()
                .map(|c| {
                    let r = c.mod_floor(&pb);
                    r.to_biguint().unwrap().to_u64_digits().first().copied().unwrap_or(0)
                })
                .collect(),
        )
    }

    fn trim(&mut self) {
        while self.coeffs.last() == Some(&0) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        assert!(!self.is_zero());
        self.coeffs.len() - 1
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero(self.p);
        }
        let p = self.p as u128;
        let mut out = vec![0u128; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] = (out[i + j] + a as u128 * b as u128) % p;
            }
        }
        Self::new(self.p, out.into_iter().map(|c| c as u64).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0u64; n];
        for i in 0..n {
            let a = self.coeffs.get(i).copied().unwrap_or(0);
            let b = other.coeffs.get(i).copied().unwrap_or(0);
            out[i] = (a + self.p - b) % self.p;
        }
        Self::new(self.p, out)
    }

    pub fn scale(&self, c: u64) -> Self {
        let p = self.p as u128;
        Self::new(
            self.p,
            self.coeffs
                .iter()
                .map(|&a| (a as u128 * c as u128 % p) as u64)
                .collect(),
        )
    }

    pub fn make_monic(&self) -> Self {
        assert!(!self.is_zero());
        let lead = *self.coeffs.last().unwrap();
        if lead == 1 {
            return self.clone();
        }
        self.scale(mod_inverse_u64(lead, self.p))
    }

    pub fn rem(&self, modulus: &Self) -> Self {
        assert!(!modulus.is_zero());
        let m = modulus.make_monic();
        let dm = m.degree();
        let mut r = self.coeffs.clone();
        let p = self.p as u128;
        while r.len() > dm {
            let k = r.len() - 1;
            let c = r[k];
            if c != 0 {
                for j in 0..=dm {
                    let sub = c as u128 * m.coeffs[j] as u128 % p;
                    r[k - dm + j] = ((r[k - dm + j] as u128 + p - sub) % p) as u64;
                }
            }
            r.pop();
        }
        Self::new(self.p, r)
    }

    pub fn gcd(&self, other: &Self) -> Self {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        if a.is_zero() {
            a
        } else {
            a.make_monic()
        }
    }

    pub fn powmod(&self, e: &BigUint, modulus: &Self) -> Self {
        let mut acc = Self::one(self.p);
        let base = self.rem(modulus);
        if e.is_zero() {
            return acc;
        }
        let bits = e.bits();
        acc = base.clone();
        for i in (0..bits - 1).rev() {
            acc = acc.mul(&acc).rem(modulus);
            if e.bit(i) {
                acc = acc.mul(&base).rem(modulus);
            }
        }
        acc
    }
}

pub fn mod_inverse_u64(a: u64, p: u64) -> u64 {
    // Fermat; p prime, a != 0 mod p
    let mut acc = 1u128;
    let mut base = (a % p) as u128;
    let mut e = p - 2;
    let pm = p as u128;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % pm;
        }
        base = base * base % pm;
        e >>= 1;
    }
    acc as u64
}

/// All monic irreducible factors of Phi_m mod p (each of degree
/// ord_m(p)), deterministically ordered by coefficient list. Requires
/// gcd(m, p) = 1 so the factorization is squarefree and equal-degree.
pub fn factor_cyclotomic_mod_p(m: u64, p: u64) -> Vec<FpPoly> {
    assert_eq!(num::integer::gcd(m, p), 1);
    let phi = FpPoly::from_bigints(p, &cyclotomic_polynomial(m)).make_monic();
    let f = multiplicative_order(p % m.max(1), m.max(1)) as usize;
    let mut done = Vec::new();
    let mut work = vec![phi];
    while let Some(g) = work.pop() {
        if g.degree() == f {
            done.push(g);
            continue;
        }
        let piece = split_equal_degree(&g, f);
        let other = exact_quotient(&g, &piece);
        work.push(piece);
        work.push(other);
    }
    done.sort_by(|a, b| a.coeffs.cmp(&b.coeffs));
    done
}

fn exact_quotient(num: &FpPoly, den: &FpPoly) -> FpPoly {
    // num = q * den with den monic
    let den = den.make_monic();
    let p = num.p as u128;
    let dd = den.degree();
    let mut r = num.coeffs.clone();
    let mut q = vec![0u64; r.len() - dd];
    for k in (0..q.len()).rev() {
        let c = r[k + dd];
        q[k] = c;
        if c != 0 {
            for j in 0..=dd {
                let sub = c as u128 * den.coeffs[j] as u128 % p;
                r[k + j] = ((r[k + j] as u128 + p - sub) % p) as u64;
            }
        }
    }
    assert!(r.iter().all(|&c| c == 0), "quotient not exact");
    FpPoly::new(num.p, q)
}

/// Split a product of distinct degree-f irreducibles into a proper factor.
/// Deterministic Cantor-Zassenhaus: candidate polynomials are enumerated in
/// a fixed order, so the factorization is reproducible.
fn split_equal_degree(g: &FpPoly, f: usize) -> FpPoly {
    let p = g.p;
    if p == 2 {
        // trace-map splitting for characteristic 2
        for trial in 1u64.. {
            let a = candidate_poly(p, trial, g.degree());
            let mut trace = a.rem(g);
            let mut sq = a.rem(g);
            for _ in 1..f {
                sq = sq.mul(&sq).rem(g);
                trace = trace.sub(&sq.scale(p - 1)); // add in char 2
            }
            let d = trace.gcd(g);
            if !d.is_zero() && d.degree() > 0 && d.degree() < g.degree() {
                return d;
            }
        }
        unreachable!()
    }
    let exp = (BigUint::from(p).pow(f as u32) - BigUint::one()) / BigUint::from(2u32);
    for trial in 1u64.. {
        let a = candidate_poly(p, trial, g.degree());
        let d0 = a.gcd(g);
        if !d0.is_zero() && d0.degree() > 0 && d0.degree() < g.degree() {
            return d0;
        }
        let b = a.powmod(&exp, g);
        let bm1 = b.sub(&FpPoly::one(p));
        let d = bm1.gcd(g);
        if !d.is_zero() && d.degree() > 0 && d.degree() < g.degree() {
            return d;
        }
    }
    unreachable!()
}

/// trial-th candidate in the fixed enumeration x+0, x+1, ..., 2x, 2x+1, ...
fn candidate_poly(p: u64, trial: u64, max_deg: usize) -> FpPoly {
    // interpret trial in base p as coefficients [c0, c1, ...] and add x
    let mut coeffs = Vec::new();
    let mut t = trial;
    while t > 0 {
        coeffs.push(t % p);
        t /= p;
    }
    while coeffs.len() < 2 {
        coeffs.push(0);
    }
    coeffs[1] = (coeffs[1] + 1) % p;
    if coeffs.iter().all(|&c| c == 0) {
        coeffs[1] = 1;
    }
    coeffs.truncate(max_deg.max(2));
    FpPoly::new(p, coeffs)
}

// --- polynomials over Z/p^M for Hensel lifting (BigUint coefficients) ---

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZqPoly {
    pub coeffs: Vec<BigUint>,
}

impl ZqPoly {
    fn new(mut coeffs: Vec<BigUint>, modulus: &BigUint) -> Self {
        for c in coeffs.iter_mut() {
            *c %= modulus;
        }
        while coeffs.last().map_or(false, |c| c.is_zero()) {
            coeffs.pop();
        }
        ZqPoly { coeffs }
    }

    fn from_fp(p: &FpPoly) -> Self {
        ZqPoly {
            coeffs: p.coeffs.iter().map(|&c| BigUint::from(c)).collect(),
        }
    }

    fn from_bigints(coeffs: &[BigInt], modulus: &BigUint) -> Self {
        let m = BigInt::from_biguint(num::bigint::Sign::Plus, modulus.clone());
        ZqPoly::new(
            coeffs
                .iter()
                .map(|c| c.mod_floor(&m).to_biguint().unwrap())
                .collect(),
            modulus,
        )
    }

    fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn degree(&self) -> usize {
        assert!(!self.is_zero());
        self.coeffs.len() - 1
    }

    fn mul(&self, other: &Self, modulus: &BigUint) -> Self {
        if self.is_zero() || other.is_zero() {
            return ZqPoly { coeffs: vec![] };
        }
        let mut out = vec![BigUint::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = (&out[i + j] + a * b) % modulus;
            }
        }
        ZqPoly::new(out, modulus)
    }

    fn add(&self, other: &Self, modulus: &BigUint) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![BigUint::zero(); n];
        for (i, slot) in out.iter_mut().enumerate() {
            let a = self.coeffs.get(i).cloned().unwrap_or_default();
            let b = other.coeffs.get(i).cloned().unwrap_or_default();
            *slot = (a + b) % modulus;
        }
        ZqPoly::new(out, modulus)
    }

    fn sub(&self, other: &Self, modulus: &BigUint) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![BigUint::zero(); n];
        for (i, slot) in out.iter_mut().enumerate() {
            let a = self.coeffs.get(i).cloned().unwrap_or_default();
            let b = other.coeffs.get(i).cloned().unwrap_or_default();
            *slot = (a + modulus - b % modulus) % modulus;
        }
        ZqPoly::new(out, modulus)
    }

    /// quotient and remainder by a monic divisor.
    fn quorem(&self, den: &Self, modulus: &BigUint) -> (Self, Self) {
        assert!(den.coeffs.last().map_or(false, |c| c.is_one()), "divisor must be monic");
        let dd = den.degree();
        let mut r = self.coeffs.clone();
        if r.len() <= dd {
            return (ZqPoly { coeffs: vec![] }, self.clone());
        }
        let mut q = vec![BigUint::zero(); r.len() - dd];
        for k in (0..q.len()).rev() {
            let c = r[k + dd].clone();
            q[k] = c.clone();
            if !c.is_zero() {
                for j in 0..=dd {
                    let sub = (&c * &den.coeffs[j]) % modulus;
                    r[k + j] = (&r[k + j] + modulus - sub) % modulus;
                }
            }
        }
        r.truncate(dd);
        (ZqPoly::new(q, modulus), ZqPoly::new(r, modulus))
    }
}

/// Quadratic Hensel lifting of the coprime monic factorization
/// phi = keep * cofactor (mod p) to modulus p^target_prec.
/// Returns the lifted `keep` factor (monic, coefficients mod p^target_prec).
pub fn hensel_lift_factor(
    phi: &[BigInt],
    keep0: &FpPoly,
    cofactor0: &FpPoly,
    p: u64,
    target_prec: u32,
) -> Result<Vec<BigUint>> {
    let target = BigUint::from(p).pow(target_prec);
    if keep0.degree() + cofactor0.degree() != phi.len() - 1 {
        return Err(Error::InvalidArgument("factor degrees do not add up".into()));
    }
    // Bezout pair over F_p: s*cofactor + t*keep = 1
    let (s0, t0) = fp_bezout(cofactor0, keep0)?;

    // vzGG Hensel-step convention: f = g*h with h monic getting remainder
    // updates; here h := keep (stays monic) and g := cofactor.
    let mut modulus = BigUint::from(p);
    let mut g = ZqPoly::from_fp(cofactor0);
    let mut h = ZqPoly::from_fp(keep0);
    let mut s = ZqPoly::from_fp(&s0);
    let mut t = ZqPoly::from_fp(&t0);

    while modulus < target {
        let next = (&modulus * &modulus).min(target.clone());
        let f = ZqPoly::from_bigints(phi, &next);
        let e = f.sub(&g.mul(&h, &next), &next);
        let (q, r) = s.mul(&e, &next).quorem(&h, &next);
        let g_new = g.add(&t.mul(&e, &next), &next).add(&q.mul(&g, &next), &next);
        let h_new = h.add(&r, &next);
        let b = s
            .mul(&g_new, &next)
            .add(&t.mul(&h_new, &next), &next)
            .sub(&ZqPoly { coeffs: vec![BigUint::one()] }, &next);
        let (c, d) = s.mul(&b, &next).quorem(&h_new, &next);
        let s_new = s.sub(&d, &next);
        let t_new = t.sub(&t.mul(&b, &next), &next).sub(&c.mul(&g_new, &next), &next);
        g = g_new;
        h = h_new;
        s = s_new;
        t = t_new;
        modulus = next;
    }

    // sanity: keep * cofactor = phi mod p^M
    debug_assert_eq!(
        g.mul(&h, &target),
        ZqPoly::from_bigints(phi, &target),
        "hensel lift verification failed"
    );
    let mut coeffs = h.coeffs;
    coeffs.resize(keep0.degree() + 1, BigUint::zero());
    Ok(coeffs)
}

/// Extended Euclid over F_p[x]: returns (s, t) with s*a + t*b = 1.
fn fp_bezout(a: &FpPoly, b: &FpPoly) -> Result<(FpPoly, FpPoly)> {
    let p = a.p;
    let (mut r0, mut r1) = (a.clone(), b.clone());
    let (mut s0, mut s1) = (FpPoly::one(p), FpPoly::zero(p));
    let (mut t0, mut t1) = (FpPoly::zero(p), FpPoly::one(p));
    while !r1.is_zero() {
        // r0 = q*r1 + r
        let q = {
            let r1m = r1.make_monic();
            let lead_inv = mod_inverse_u64(*r1.coeffs.last().unwrap(), p);
            let mut rr = r0.coeffs.clone();
            let dd = r1m.degree();
            let mut qq = vec![0u64; rr.len().saturating_sub(dd)];
            let pm = p as u128;
            for k in (0..qq.len()).rev() {
                let c = rr[k + dd] as u128 * lead_inv as u128 % pm;
                qq[k] = c as u64;
                if c != 0 {
                    for j in 0..=dd {
                        let sub = c * r1.coeffs[j] as u128 % pm;
                        rr[k + j] = ((rr[k + j] as u128 + pm - sub) % pm) as u64;
                    }
                }
            }
            FpPoly::new(p, qq)
        };
        let r = r0.sub(&q.mul(&r1));
        let s = s0.sub(&q.mul(&s1));
        let t = t0.sub(&q.mul(&t1));
        r0 = r1;
        s0 = s1;
        t0 = t1;
        r1 = r;
        s1 = s;
        t1 = t;
    }
    if r0.is_zero() || r0.degree() != 0 {
        return Err(Error::InvalidArgument("factors are not coprime".into()));
    }
    let inv = mod_inverse_u64(r0.coeffs[0], p);
    Ok((s0.scale(inv), t0.scale(inv)))
}
