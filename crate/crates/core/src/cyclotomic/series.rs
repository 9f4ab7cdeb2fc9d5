//! Truncated formal power series in q with exact cyclotomic coefficients.
//! Used to state q-expansion identities coefficientwise over Q(zeta); the
//! divergent p-adic reading of those identities is never evaluated here.

use crate::cyclotomic::exact::{CycField, ExactCyclotomic};
use crate::error::{Error, Result};
use num::{BigInt, BigRational};

/// Coefficients c_0..c_D of a series known modulo q^(D+1).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormalQSeries {
    field: CycField,
    coeffs: Vec<ExactCyclotomic>,
}

impl FormalQSeries {
    pub fn zero(field: &CycField, trunc_degree: usize) -> Self {
        FormalQSeries {
            field: field.clone(),
            coeffs: vec![field.zero(); trunc_degree + 1],
        }
    }

    pub fn one(field: &CycField, trunc_degree: usize) -> Self {
        let mut s = Self::zero(field, trunc_degree);
        s.coeffs[0] = field.one();
        s
    }

    pub fn monomial(field: &CycField, c: &ExactCyclotomic, degree: usize, trunc: usize) -> Self {
        let mut s = Self::zero(field, trunc);
        if degree <= trunc {
            s.coeffs[degree] = c.clone();
        }
        s
    }

    pub fn constant(field: &CycField, c: &ExactCyclotomic, trunc: usize) -> Self {
        Self::monomial(field, c, 0, trunc)
    }

    pub fn trunc_degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> &ExactCyclotomic {
        assert!(
            k < self.coeffs.len(),
            "coefficient of q^{} beyond truncation degree {}",
            k,
            self.trunc_degree()
        );
        &self.coeffs[k]
    }

    pub fn field(&self) -> &CycField {
        &self.field
    }

    fn check(&self, other: &Self) {
        assert!(self.field == other.field, "mixed coefficient fields");
        assert_eq!(
            self.coeffs.len(),
            other.coeffs.len(),
            "mixed truncation degrees"
        );
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check(other);
        FormalQSeries {
            field: self.field.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check(other);
        FormalQSeries {
            field: self.field.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check(other);
        let n = self.coeffs.len();
        let mut out = vec![self.field.zero(); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if i + j >= n {
                    break;
                }
                if !b.is_zero() {
                    out[i + j] = out[i + j].add(&a.mul(b));
                }
            }
        }
        FormalQSeries {
            field: self.field.clone(),
            coeffs: out,
        }
    }

    pub fn scale(&self, c: &ExactCyclotomic) -> Self {
        FormalQSeries {
            field: self.field.clone(),
            coeffs: self.coeffs.iter().map(|a| a.mul(c)).collect(),
        }
    }

    pub fn scale_rational(&self, r: &BigRational) -> Self {
        FormalQSeries {
            field: self.field.clone(),
            coeffs: self.coeffs.iter().map(|a| a.scale(r)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one(&self.field, self.trunc_degree());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// 1 / (1 - c q^j): geometric expansion for j >= 1; for j = 0 this is the
    /// constant 1/(1 - c), computed by exact cyclotomic inversion.
    pub fn geometric(field: &CycField, c: &ExactCyclotomic, j: usize, trunc: usize) -> Result<Self> {
        if j == 0 {
            let one_minus_c = field.one().sub(c);
            if one_minus_c.is_zero() {
                return Err(Error::Domain(
                    "geometric series 1/(1 - c) with c = 1 has no expansion".into(),
                ));
            }
            return Ok(Self::constant(field, &one_minus_c.inv()?, trunc));
        }
        let mut s = Self::zero(field, trunc);
        let mut cp = field.one();
        let mut deg = 0usize;
        while deg <= trunc {
            s.coeffs[deg] = cp.clone();
            cp = cp.mul(c);
            deg += j;
        }
        Ok(s)
    }

    /// General inverse when the constant term is invertible.
    pub fn inverse(&self) -> Result<Self> {
        let c0 = &self.coeffs[0];
        if c0.is_zero() {
            return Err(Error::Domain(
                "series with zero constant term has no inverse".into(),
            ));
        }
        let c0i = c0.inv()?;
        let n = self.coeffs.len();
        let mut out = vec![self.field.zero(); n];
        out[0] = c0i.clone();
        for k in 1..n {
            let mut acc = self.field.zero();
            for j in 1..=k {
                if !self.coeffs[j].is_zero() {
                    acc = acc.add(&self.coeffs[j].mul(&out[k - j]));
                }
            }
            out[k] = acc.neg().mul(&c0i);
        }
        Ok(FormalQSeries {
            field: self.field.clone(),
            coeffs: out,
        })
    }

    /// [n; q] = 1 + q + ... + q^(n-1) as an exact polynomial.
    pub fn q_number(field: &CycField, n: u64, trunc: usize) -> Self {
        let mut s = Self::zero(field, trunc);
        for k in 0..n.min(trunc as u64 + 1) {
            s.coeffs[k as usize] = field.one();
        }
        s
    }

    /// 1 - q.
    pub fn one_minus_q(field: &CycField, trunc: usize) -> Self {
        let mut s = Self::one(field, trunc);
        if trunc >= 1 {
            s.coeffs[1] = field.from_i64(-1);
        }
        s
    }
}

/// Exact binomial coefficient as a rational (0 when k > n).
pub fn binomial(n: u32, k: u32) -> BigRational {
    if k > n {
        return BigRational::from_integer(BigInt::from(0));
    }
    let k = k.min(n - k);
    let mut num = BigInt::from(1);
    let mut den = BigInt::from(1);
    for i in 0..k {
        num *= BigInt::from(n - i);
        den *= BigInt::from(i + 1);
    }
    BigRational::new(num, den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::One;

    #[test]
    fn square_of_one_plus_q() {
        let field = CycField::new(1);
        let one_plus_q = FormalQSeries::one(&field, 3).add(&FormalQSeries::monomial(
            &field,
            &field.one(),
            1,
            3,
        ));
        let sq = one_plus_q.mul(&one_plus_q);
        assert_eq!(sq.coeff(0), &field.one());
        assert_eq!(sq.coeff(1), &field.from_i64(2));
        assert_eq!(sq.coeff(2), &field.one());
        assert_eq!(sq.coeff(3), &field.zero());
    }

    #[test]
    fn geometric_expansion() {
        let field = CycField::new(1);
        let g = FormalQSeries::geometric(&field, &field.one(), 1, 3).unwrap();
        for k in 0..=3 {
            assert_eq!(g.coeff(k), &field.one());
        }
        // j = 0 scalar route: 1/(1 - 1/2) = 2
        let half = field.from_rational(&BigRational::new(BigInt::from(1), BigInt::from(2)));
        let c = FormalQSeries::geometric(&field, &half, 0, 2).unwrap();
        assert_eq!(c.coeff(0), &field.from_i64(2));
        // c = 1 at j = 0 rejected
        assert!(FormalQSeries::geometric(&field, &field.one(), 0, 2).is_err());
    }

    #[test]
    fn inverse_matches_geometric() {
        let field = CycField::new(3);
        let s = FormalQSeries::one(&field, 8).sub(&FormalQSeries::monomial(
            &field,
            &field.zeta(),
            2,
            8,
        ));
        let inv = s.inverse().unwrap();
        let geo = FormalQSeries::geometric(&field, &field.zeta(), 2, 8).unwrap();
        assert_eq!(inv, geo);
        assert_eq!(s.mul(&inv), FormalQSeries::one(&field, 8));
    }

    #[test]
    fn series_mul_matches_polynomial_mul_below_truncation() {
        let field = CycField::new(1);
        // (1 + 2q + 3q^2)(2 + q) = 2 + 5q + 8q^2 + 3q^3
        let mut a = FormalQSeries::zero(&field, 5);
        a.coeffs[0] = field.one();
        a.coeffs[1] = field.from_i64(2);
        a.coeffs[2] = field.from_i64(3);
        let mut b = FormalQSeries::zero(&field, 5);
        b.coeffs[0] = field.from_i64(2);
        b.coeffs[1] = field.one();
        let prod = a.mul(&b);
        let expect = [2i64, 5, 8, 3, 0, 0];
        for (k, e) in expect.iter().enumerate() {
            assert_eq!(prod.coeff(k), &field.from_i64(*e));
        }
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), BigRational::from_integer(BigInt::from(10)));
        assert_eq!(binomial(5, 0), BigRational::one());
        assert_eq!(binomial(3, 3), BigRational::one());
    }
}
