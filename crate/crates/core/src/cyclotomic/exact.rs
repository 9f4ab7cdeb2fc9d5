//! Exact arithmetic in Q(zeta_m): rational-coefficient polynomials reduced
//! modulo the m-th cyclotomic polynomial. This is the classical-side oracle
//! ring; no precision is ever lost here.

use crate::cyclotomic::polys::{cyclotomic_polynomial, euler_phi};
use crate::error::{Error, Result};
use num::{BigInt, BigRational, One, Zero};
use std::fmt;
use std::sync::Arc;

#[derive(Debug)]
struct FieldInner {
    m: u64,
    /// monic Phi_m over Z
    phi: Vec<BigInt>,
    deg: usize,
}

/// The field Q(zeta_m), shared by its elements.
#[derive(Clone, Debug)]
pub struct CycField(Arc<FieldInner>);

impl PartialEq for CycField {
    fn eq(&self, other: &Self) -> bool {
        self.0.m == other.0.m
    }
}
impl Eq for CycField {}

impl CycField {
    pub fn new(m: u64) -> Self {
        let phi = cyclotomic_polynomial(m);
        let deg = euler_phi(m) as usize;
        debug_assert_eq!(phi.len() - 1, deg);
        CycField(Arc::new(FieldInner { m, phi, deg }))
    }

    pub fn order(&self) -> u64 {
        self.0.m
    }

    pub fn degree(&self) -> usize {
        self.0.deg
    }

    pub fn zero(&self) -> ExactCyclotomic {
        ExactCyclotomic {
            field: self.clone(),
            coeffs: vec![BigRational::zero(); self.0.deg],
        }
    }

    pub fn one(&self) -> ExactCyclotomic {
        self.from_rational(&BigRational::one())
    }

    pub fn from_rational(&self, r: &BigRational) -> ExactCyclotomic {
        let mut coeffs = vec![BigRational::zero(); self.0.deg];
        coeffs[0] = r.clone();
        ExactCyclotomic {
            field: self.clone(),
            coeffs,
        }
    }

    pub fn from_i64(&self, n: i64) -> ExactCyclotomic {
        self.from_rational(&BigRational::from_integer(BigInt::from(n)))
    }

    /// zeta_m^k, reduced mod Phi_m.
    pub fn zeta_pow(&self, k: i64) -> ExactCyclotomic {
        let m = self.0.m as i64;
        let k = k.rem_euclid(m) as usize;
        let mut raw = vec![BigRational::zero(); k + 1];
        raw[k] = BigRational::one();
        self.reduce(raw)
    }

    pub fn zeta(&self) -> ExactCyclotomic {
        self.zeta_pow(1)
    }

    fn reduce(&self, mut raw: Vec<BigRational>) -> ExactCyclotomic {
        let deg = self.0.deg;
        let phi = &self.0.phi;
        while raw.len() > deg {
            let k = raw.len() - 1;
            let c = raw[k].clone();
            if !c.is_zero() {
                for j in 0..deg {
                    let sub = &c * BigRational::from_integer(phi[j].clone());
                    raw[k - deg + j] -= sub;
                }
            }
            raw.pop();
        }
        raw.resize(deg, BigRational::zero());
        ExactCyclotomic {
            field: self.clone(),
            coeffs: raw,
        }
    }
}

/// An element of Q(zeta_m), coefficients in the power basis 1, zeta, ...,
/// zeta^(phi(m)-1). Arithmetic is exact.
#[derive(Clone, Debug)]
pub struct ExactCyclotomic {
    field: CycField,
    coeffs: Vec<BigRational>,
}

impl PartialEq for ExactCyclotomic {
    fn eq(&self, other: &Self) -> bool {
        self.field == other.field && self.coeffs == other.coeffs
    }
}
impl Eq for ExactCyclotomic {}

impl ExactCyclotomic {
    pub fn field(&self) -> &CycField {
        &self.field
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// The rational value, if the element is in Q.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.coeffs[1..].iter().all(|c| c.is_zero()) {
            Some(self.coeffs[0].clone())
        } else {
            None
        }
    }

    fn check_field(&self, other: &Self) {
        assert!(
            self.field == other.field,
            "mixed cyclotomic fields: Q(zeta_{}) vs Q(zeta_{})",
            self.field.order(),
            other.field.order()
        );
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_field(other);
        ExactCyclotomic {
            field: self.field.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check_field(other);
        ExactCyclotomic {
            field: self.field.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn neg(&self) -> Self {
        ExactCyclotomic {
            field: self.field.clone(),
            coeffs: self.coeffs.iter().map(|a| -a).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check_field(other);
        let deg = self.field.degree();
        let mut raw = vec![BigRational::zero(); 2 * deg - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if !b.is_zero() {
                    raw[i + j] += a * b;
                }
            }
        }
        self.field.reduce(raw)
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        ExactCyclotomic {
            field: self.field.clone(),
            coeffs: self.coeffs.iter().map(|a| a * r).collect(),
        }
    }

    /// Inverse via extended Euclid against Phi_m (irreducible over Q, so
    /// every nonzero element is invertible).
    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let phi: Vec<BigRational> = self
            .field
            .0
            .phi
            .iter()
            .map(|c| BigRational::from_integer(c.clone()))
            .collect();
        let (mut r0, mut r1) = (phi, trim(self.coeffs.clone()));
        let (mut t0, mut t1) = (
            vec![BigRational::zero()],
            vec![BigRational::one()],
        );
        while !is_zero_poly(&r1) {
            let (q, r) = q_quorem(&r0, &r1);
            let t = poly_sub(&t0, &poly_mul(&q, &t1));
            r0 = r1;
            r1 = r;
            t0 = t1;
            t1 = t;
        }
        // r0 = gcd, a nonzero constant
        assert_eq!(r0.len(), 1, "element shares a factor with Phi_m");
        let c = r0[0].recip();
        let inv: Vec<BigRational> = t0.iter().map(|a| a * &c).collect();
        Ok(self.field.reduce(inv))
    }

    pub fn pow(&self, e: i64) -> Result<Self> {
        if e == 0 {
            return Ok(self.field.one());
        }
        if e < 0 {
            return self.inv()?.pow(-e);
        }
        let mut acc = self.clone();
        let bits = 64 - (e as u64).leading_zeros();
        for i in (0..bits - 1).rev() {
            acc = acc.mul(&acc);
            if (e as u64 >> i) & 1 == 1 {
                acc = acc.mul(self);
            }
        }
        Ok(acc)
    }
}

fn trim(mut v: Vec<BigRational>) -> Vec<BigRational> {
    while v.len() > 1 && v.last().map_or(false, |c| c.is_zero()) {
        v.pop();
    }
    v
}

fn is_zero_poly(v: &[BigRational]) -> bool {
    v.iter().all(|c| c.is_zero())
}

fn poly_mul(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    trim(out)
}

fn poly_sub(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let n = a.len().max(b.len());
    let mut out = vec![BigRational::zero(); n];
    for (i, slot) in out.iter_mut().enumerate() {
        let x = a.get(i).cloned().unwrap_or_else(BigRational::zero);
        let y = b.get(i).cloned().unwrap_or_else(BigRational::zero);
        *slot = x - y;
    }
    trim(out)
}

fn q_quorem(num: &[BigRational], den: &[BigRational]) -> (Vec<BigRational>, Vec<BigRational>) {
    let den = trim(den.to_vec());
    let dd = den.len() - 1;
    let lead = den[dd].clone();
    let mut r = num.to_vec();
    if r.len() <= dd {
        return (vec![BigRational::zero()], trim(r));
    }
    let mut q = vec![BigRational::zero(); r.len() - dd];
    for k in (0..q.len()).rev() {
        let c = &r[k + dd] / &lead;
        q[k] = c.clone();
        if !c.is_zero() {
            for j in 0..=dd {
                let sub = &c * &den[j];
                r[k + j] -= sub;
            }
        }
    }
    r.truncate(dd);
    (trim(q), trim(r))
}

impl fmt::Display for ExactCyclotomic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if wrote {
                write!(f, " + ")?;
            }
            match i {
                0 => write!(f, "{}", c)?,
                1 => write!(f, "({})*z{}", c, self.field.order())?,
                _ => write!(f, "({})*z{}^{}", c, self.field.order(), i)?,
            }
            wrote = true;
        }
        if !wrote {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn zeta_has_exact_order() {
        for m in [1u64, 2, 3, 4, 5, 6, 8, 12] {
            let field = CycField::new(m);
            let z = field.zeta();
            let mut acc = field.one();
            for k in 1..=m {
                acc = acc.mul(&z);
                if k < m {
                    assert_ne!(acc, field.one(), "zeta_{} had order {}", m, k);
                }
            }
            assert_eq!(acc, field.one());
        }
    }

    #[test]
    fn field_inverse_round_trip() {
        let field = CycField::new(12);
        let x = field.zeta_pow(5).add(&field.from_rational(&rat(3, 7)));
        let xi = x.inv().unwrap();
        assert_eq!(x.mul(&xi), field.one());
        assert!(field.zero().inv().is_err());
    }

    #[test]
    fn phi3_at_one_is_three() {
        // (1 - zeta_3)(1 - zeta_3^2) = 3
        let field = CycField::new(3);
        let a = field.one().sub(&field.zeta());
        let b = field.one().sub(&field.zeta_pow(2));
        assert_eq!(a.mul(&b), field.from_i64(3));
    }

    #[test]
    fn minus_one_as_power() {
        let field = CycField::new(6);
        let z3 = field.zeta_pow(2); // order 3
        assert_eq!(z3.pow(3).unwrap(), field.one());
        let m1 = field.zeta_pow(3); // order 2
        assert_eq!(m1, field.from_i64(-1));
    }

    #[test]
    fn rational_detection() {
        let field = CycField::new(4);
        let z = field.zeta();
        assert!(z.as_rational().is_none());
        assert_eq!(z.mul(&z).as_rational().unwrap(), rat(-1, 1));
    }
}
