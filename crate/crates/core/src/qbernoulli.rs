//! Bernoulli-type quantities: exact classical twisted/generalized Bernoulli
//! numbers via generating functions, twisted q-Bernoulli polynomials from
//! their closed form, the formal q-series identity, the generalized
//! (character) variant through the splitting relation, and the level-N
//! Riemann-sum integral that serves as the independent oracle for all of
//! them.

use crate::characters::{CharTable, DirichletCharacter};
use crate::cyclotomic::exact::{CycField, ExactCyclotomic};
use crate::cyclotomic::series::{binomial, FormalQSeries};
use crate::cyclotomic::tower::{ext_defect, ExtElement, ExtensionTower, RootOfUnity};
use crate::error::{Defect, Error, Result};
use crate::padic::{
    q_admissible, q_number_u64, q_pow_rational, PadicContext, PadicNumber,
};
use crate::par;
use num::{BigInt, BigRational, One, Zero};

/// q together with its exact rational provenance when available. The exact
/// value routes q = 1 to the classical side and lets measure checks run in
/// plain rational arithmetic.
#[derive(Clone, Debug)]
pub struct QValue {
    padic: PadicNumber,
    exact: Option<BigRational>,
}

impl QValue {
    pub fn from_rational(ctx: &PadicContext, r: &BigRational) -> Result<Self> {
        let padic = ctx.from_big_rational(r)?;
        if !q_admissible(&padic) {
            return Err(Error::Domain(format!(
                "q = {} is not admissible: v(q-1) < {}",
                r,
                ctx.admissibility_floor()
            )));
        }
        Ok(QValue {
            padic,
            exact: Some(r.clone()),
        })
    }

    pub fn one(ctx: &PadicContext) -> Self {
        QValue {
            padic: ctx.one(),
            exact: Some(BigRational::one()),
        }
    }

    pub fn from_padic(padic: PadicNumber) -> Result<Self> {
        if !q_admissible(&padic) {
            return Err(Error::Domain("q is not admissible".into()));
        }
        Ok(QValue { padic, exact: None })
    }

    pub fn padic(&self) -> &PadicNumber {
        &self.padic
    }

    pub fn exact(&self) -> Option<&BigRational> {
        self.exact.as_ref()
    }

    pub fn is_exactly_one(&self) -> bool {
        self.exact.as_ref().map_or(false, |r| r.is_one())
    }
}

/// Shared parameters of the q-side: the tower, q, the weight h and the
/// auxiliary modulus l (prime to p).
#[derive(Clone, Debug)]
pub struct QSetting {
    pub tower: ExtensionTower,
    pub q: QValue,
    pub h: i64,
    pub l: u64,
}

impl QSetting {
    pub fn new(tower: ExtensionTower, q: QValue, h: i64, l: u64) -> Result<Self> {
        if l == 0 || num::integer::gcd(l, tower.context().p()) != 1 {
            return Err(Error::InvalidArgument(format!(
                "l = {} must be positive and prime to p = {}",
                l,
                tower.context().p()
            )));
        }
        Ok(QSetting { tower, q, h, l })
    }

    pub fn ctx(&self) -> &PadicContext {
        self.tower.context()
    }

    pub fn p(&self) -> u64 {
        self.tower.context().p()
    }

    /// l * p^level, the number of residues at a given level.
    pub fn span(&self, level: u32) -> u64 {
        self.l * self.p().pow(level)
    }
}

/// The integrand family f(y) = chi(y) xi^y [shift + y]^moment q^(q_weight*y).
#[derive(Clone, Debug)]
pub struct IntegrandSpec {
    pub chi: Option<DirichletCharacter>,
    pub xi: RootOfUnity,
    pub shift: BigRational,
    pub moment: u32,
    pub q_weight: i64,
}

impl IntegrandSpec {
    /// The integrand of the q-Bernoulli polynomial of degree n at x:
    /// q^((h-1)y) xi^y [x+y]^n.
    pub fn q_bernoulli(xi: &RootOfUnity, x: &BigRational, n: u32, h: i64) -> Self {
        IntegrandSpec {
            chi: None,
            xi: xi.clone(),
            shift: x.clone(),
            moment: n,
            q_weight: h - 1,
        }
    }

    pub fn with_character(mut self, chi: DirichletCharacter) -> Self {
        self.chi = Some(chi);
        self
    }
}

/// Classical Bernoulli numbers (B_1 = -1/2 convention), by the defining
/// recurrence.
pub fn classical_bernoulli(n: u32) -> BigRational {
    let mut b: Vec<BigRational> = Vec::with_capacity(n as usize + 1);
    for m in 0..=n {
        if m == 0 {
            b.push(BigRational::one());
            continue;
        }
        // sum_{k=0}^{m} C(m+1,k) B_k = 0
        let mut acc = BigRational::zero();
        for (k, bk) in b.iter().enumerate() {
            acc += binomial(m + 1, k as u32) * bk;
        }
        let denom = binomial(m + 1, m);
        b.push(-acc / denom);
    }
    b.pop().unwrap()
}

/// B_n(x) = sum C(n,k) B_k x^(n-k).
pub fn bernoulli_polynomial(n: u32, x: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    for k in 0..=n {
        let xp = pow_rational(x, (n - k) as i64);
        acc += binomial(n, k) * classical_bernoulli(k) * xp;
    }
    acc
}

fn pow_rational(x: &BigRational, e: i64) -> BigRational {
    let mut acc = BigRational::one();
    let neg = e < 0;
    for _ in 0..e.unsigned_abs() {
        acc *= x;
    }
    if neg {
        acc.recip()
    } else {
        acc
    }
}

fn factorial(n: u32) -> BigRational {
    let mut acc = BigInt::one();
    for i in 1..=n as u64 {
        acc *= BigInt::from(i);
    }
    BigRational::from_integer(acc)
}

/// Truncated series division num/den over a cyclotomic field; both inputs
/// indexed by t-degree, den[0] must be invertible.
fn series_divide(
    field: &CycField,
    num: &[ExactCyclotomic],
    den: &[ExactCyclotomic],
    upto: usize,
) -> Result<Vec<ExactCyclotomic>> {
    let d0 = den[0].inv()?;
    let mut out: Vec<ExactCyclotomic> = Vec::with_capacity(upto + 1);
    for k in 0..=upto {
        let mut acc = num.get(k).cloned().unwrap_or_else(|| field.zero());
        for (j, c) in out.iter().enumerate() {
            let dk = den.get(k - j).cloned().unwrap_or_else(|| field.zero());
            if j < k || !dk.is_zero() {
                // j ranges over 0..k; the den index is k - j >= 1 here only
                // when j < k, but including j = k contributes den[0]*out[k]
                // which is not yet defined, so skip it
            }
            if j == k {
                break;
            }
            if !dk.is_zero() && !c.is_zero() {
                acc = acc.sub(&c.mul(&dk));
            }
        }
        out.push(acc.mul(&d0));
    }
    Ok(out)
}

/// Twisted Bernoulli polynomial value B_{n,xi}(x) over Q(zeta): the t^n
/// coefficient of e^{xt} t/(xi e^t - 1), times n!.
pub fn twisted_bernoulli_exact(
    n: u32,
    xi: &ExactCyclotomic,
    x: &BigRational,
) -> Result<ExactCyclotomic> {
    let field = xi.field().clone();
    let upto = n as usize;
    // numerator e^{xt} * t, denominator xi e^t - 1
    let xi_is_one = *xi == field.one();
    let (num, den): (Vec<ExactCyclotomic>, Vec<ExactCyclotomic>) = if xi_is_one {
        // both have a factor t: divide it out
        let num: Vec<_> = (0..=upto)
            .map(|j| field.from_rational(&(pow_rational(x, j as i64) / factorial(j as u32))))
            .collect();
        let den: Vec<_> = (0..=upto)
            .map(|j| field.from_rational(&factorial(j as u32 + 1).recip()))
            .collect();
        (num, den)
    } else {
        let mut num = vec![field.zero()];
        for j in 1..=upto {
            num.push(
                field.from_rational(&(pow_rational(x, (j - 1) as i64) / factorial(j as u32 - 1))),
            );
        }
        let mut den = vec![xi.sub(&field.one())];
        for j in 1..=upto {
            den.push(xi.scale(&factorial(j as u32).recip()));
        }
        (num, den)
    };
    let series = series_divide(&field, &num, &den, upto)?;
    Ok(series[upto].scale(&factorial(n)))
}

/// Generalized twisted Bernoulli value B_{n,xi,chi}(x) over Q(zeta): the
/// t^n coefficient of t * sum_{a=0}^{l-1} chi(a) xi^a e^{(a+x)t} /
/// (xi^l e^{lt} - 1), times n!. The a = 0..l-1 range is the convention
/// validated by the Riemann-sum oracle.
pub fn generalized_bernoulli_exact(
    n: u32,
    chi: &DirichletCharacter,
    xi: &ExactCyclotomic,
    x: &BigRational,
) -> Result<ExactCyclotomic> {
    let field = xi.field().clone();
    let l = chi.modulus();
    let upto = n as usize;
    // weighted exponential sum coefficients: s_j = sum_a chi(a) xi^a (a+x)^j / j!
    let mut svals: Vec<ExactCyclotomic> = Vec::with_capacity(upto + 1);
    let chi_xi: Vec<ExactCyclotomic> = (0..l)
        .map(|a| {
            let c = chi.evaluate_exact(a as i64, &field)?;
            Ok(c.mul(&xi.pow(a as i64)?))
        })
        .collect::<Result<Vec<_>>>()?;
    for j in 0..=upto {
        let mut acc = field.zero();
        for (a, w) in chi_xi.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            let base = BigRational::from_integer(BigInt::from(a)) + x;
            acc = acc.add(&w.scale(&pow_rational(&base, j as i64)));
        }
        svals.push(acc.scale(&factorial(j as u32).recip()));
    }
    let xi_l = xi.pow(l as i64)?;
    let xi_l_is_one = xi_l == field.one();
    let (num, den): (Vec<ExactCyclotomic>, Vec<ExactCyclotomic>) = if xi_l_is_one {
        // denominator e^{lt} - 1 = t * (l + l^2 t/2 + ...): cancel the t
        // against the numerator prefactor
        let num = svals;
        let den: Vec<_> = (0..=upto)
            .map(|j| {
                field.from_rational(
                    &(pow_rational(&BigRational::from_integer(BigInt::from(l)), j as i64 + 1)
                        / factorial(j as u32 + 1)),
                )
            })
            .collect();
        (num, den)
    } else {
        let mut num = vec![field.zero()];
        for j in 1..=upto {
            num.push(svals[j - 1].clone());
        }
        let mut den = vec![xi_l.sub(&field.one())];
        for j in 1..=upto {
            den.push(xi_l.scale(
                &(pow_rational(&BigRational::from_integer(BigInt::from(l)), j as i64)
                    / factorial(j as u32)),
            ));
        }
        (num, den)
    };
    let series = series_divide(&field, &num, &den, upto)?;
    Ok(series[upto].scale(&factorial(n)))
}

/// beta^(h)_{n, xi^scale}(x_scaled/scale, q^scale) by the closed form, with
/// exact integer q-powers whenever x_scaled * k is an integer. The
/// degenerate pair (xi^scale = 1, h + k = 0) takes the limit value
/// -1/log(q^scale); at exact q = 1 the whole value routes to the classical
/// generating function.
pub fn twisted_q_bernoulli_scaled(
    n: u32,
    x_scaled: &BigRational,
    scale: u64,
    setting: &QSetting,
    xi: &RootOfUnity,
) -> Result<ExtElement> {
    let tower = &setting.tower;
    let ctx = setting.ctx();
    let h = setting.h;

    if setting.q.is_exactly_one() {
        let (c_ord, c_exp) = xi.canonical_coords().ok_or_else(|| {
            Error::InvalidArgument("classical route requires a canonical root of unity".into())
        })?;
        let field = CycField::new(c_ord);
        let xi_scaled =
            field.zeta_pow(((c_exp as u128 * scale as u128) % c_ord as u128) as i64);
        let x = x_scaled / BigRational::from_integer(BigInt::from(scale));
        let value = twisted_bernoulli_exact(n, &xi_scaled, &x)?;
        return tower.embed_exact(&value);
    }

    let q = setting.q.padic();
    let xi_s_trivial = scale % xi.order() == 0;
    let mut sum = tower.zero();
    for k in 0..=n {
        let hk = h + k as i64;
        let coeff_rat = binomial(n, k)
            * if k % 2 == 0 {
                BigRational::one()
            } else {
                -BigRational::one()
            };
        // q^{scale * x * k} = q^{x_scaled * k}
        let qxk = q_pow_rational(q, &(x_scaled * BigRational::from_integer(BigInt::from(k))))?;
        let scalar_base = &ctx.from_big_rational(&coeff_rat)? * &qxk;

        let term = if xi_s_trivial && hk == 0 {
            // limit of (k+h)/(1 - q_s^{h+k}) as h+k -> 0: -1/log(q_s)
            let log_qs = &q.log_p()? * &ctx.from_u64(scale);
            let val = &scalar_base * &log_qs.inv()?;
            tower.from_scalar(&(-&val))
        } else {
            let qpow = q.pow_i64(scale as i64 * hk)?;
            let root = xi.pow_elem((scale as i64) * 1).clone();
            let denom = tower.one().sub(&root.scalar_mul(&qpow));
            let kh_scalar = ctx.from_i64(hk);
            denom
                .inv()?
                .scalar_mul(&kh_scalar)
                .scalar_mul(&scalar_base)
        };
        sum = sum.add(&term);
    }
    // divide by (1 - q^scale)^(n-1)
    let one_minus_qs = &ctx.one() - &q.pow_u64(scale);
    match n {
        0 => Ok(sum.scalar_mul(&one_minus_qs)),
        1 => Ok(sum),
        _ => {
            let inv = one_minus_qs.inv()?.pow_u64(n as u64 - 1);
            Ok(sum.scalar_mul(&inv))
        }
    }
}

/// Twisted q-Bernoulli polynomial beta^(h)_{n,xi}(x, q) (Carlitz h-extension).
pub fn twisted_q_bernoulli(
    n: u32,
    x: &BigRational,
    setting: &QSetting,
    xi: &RootOfUnity,
) -> Result<ExtElement> {
    twisted_q_bernoulli_scaled(n, x, 1, setting, xi)
}

/// The splitting reduction behind the generalized polynomials:
/// [L]^(n-1) * sum_{a<L} table(a) xi^a q^(h a) beta^(h)_{n, xi^L}((a+x)/L, q^L).
/// `table` is any locally constant factor (a character or its omega twist).
pub fn beta_with_table(
    n: u32,
    x: &BigRational,
    setting: &QSetting,
    xi: &RootOfUnity,
    table: &CharTable,
    split: u64,
) -> Result<ExtElement> {
    let tower = &setting.tower;
    let q = setting.q.padic();
    let mut sum = tower.zero();
    for a in 0..split {
        let cval = table.value(a);
        if cval.is_exact_zero() {
            continue;
        }
        let arg = BigRational::from_integer(BigInt::from(a)) + x;
        let inner = twisted_q_bernoulli_scaled(n, &arg, split, setting, xi)?;
        let qha = q.pow_i64(setting.h * a as i64)?;
        let term = inner
            .mul(cval)
            .mul(xi.pow_elem_u64(a))
            .scalar_mul(&qha);
        sum = sum.add(&term);
    }
    let qn_l = q_number_u64(q, split);
    let prefactor = match n {
        0 => qn_l.inv()?,
        1 => return Ok(sum),
        _ => qn_l.pow_u64(n as u64 - 1),
    };
    Ok(sum.scalar_mul(&prefactor))
}

/// Generalized twisted q-Bernoulli polynomial beta^(h)_{n,xi,chi}(x, q),
/// splitting at the character modulus.
pub fn generalized_q_bernoulli(
    n: u32,
    x: &BigRational,
    setting: &QSetting,
    xi: &RootOfUnity,
    chi: &DirichletCharacter,
) -> Result<ExtElement> {
    if chi.modulus() != setting.l {
        return Err(Error::InvalidArgument(format!(
            "character modulus {} does not match setting l = {}",
            chi.modulus(),
            setting.l
        )));
    }
    let table = CharTable::plain(chi, &setting.tower)?;
    beta_with_table(n, x, setting, xi, &table, setting.l)
}

/// Level-N Riemann sum of the p-adic q-integral:
/// (1/[l p^N]) sum_{y < l p^N} f(y) q^y, with the q = 1 measure falling out
/// of the same formula ([L; 1] = L).
pub fn q_integral(spec: &IntegrandSpec, setting: &QSetting, level: u32) -> Result<ExtElement> {
    if level == 0 {
        return Err(Error::InsufficientLevel {
            level,
            reason: "integration level must be >= 1".into(),
        });
    }
    let tower = &setting.tower;
    let ctx = setting.ctx();
    let q = setting.q.padic().clone();
    let total = setting.span(level);

    // locally constant part: chi(y) xi^y has period lcm(l_chi, ord xi)
    let chi_table = match &spec.chi {
        Some(chi) => CharTable::plain(chi, tower)?,
        None => CharTable::trivial(tower),
    };
    let period = num::integer::lcm(chi_table.modulus(), spec.xi.order());
    let mut lc = Vec::with_capacity(period as usize);
    for y in 0..period {
        lc.push(chi_table.value(y).mul(spec.xi.pow_elem_u64(y)));
    }

    // scalar weights per residue class mod `period`, accumulated in blocks
    let qw1 = q.pow_i64(spec.q_weight + 1)?;
    let c_is_zero = spec.shift.is_zero();
    let (qc, base_c) = if c_is_zero {
        (ctx.one(), ctx.zero())
    } else if setting.q.is_exactly_one() {
        (ctx.one(), ctx.from_big_rational(&spec.shift)?)
    } else {
        let qc = q_pow_rational(&q, &spec.shift)?;
        let den = &ctx.one() - &q;
        let num = &ctx.one() - &qc;
        (qc.clone(), num.div(&den)?)
    };

    let block = 4096u64;
    let buckets = par::block_sum(
        total,
        block,
        |range| -> Result<Vec<PadicNumber>> {
            let mut buckets = vec![ctx.zero(); period as usize];
            let y0 = range.start;
            // q^{(w+1) y0} and [y0; q], then incremental updates
            let mut qy = qw1.pow_biguint(&num::BigUint::from(y0));
            let mut qn = q_number_u64(&q, y0);
            for y in range {
                // [c + y] = [c] + q^c [y]
                let bracket = if c_is_zero {
                    qn.clone()
                } else {
                    &base_c + &(&qc * &qn)
                };
                let weight = &bracket.pow_i64(spec.moment as i64)? * &qy;
                let idx = (y % period) as usize;
                buckets[idx] = &buckets[idx] + &weight;
                qn = &(&q * &qn) + &ctx.one();
                qy = &qy * &qw1;
            }
            Ok(buckets)
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                *x = &*x + y;
            }
            a
        },
    )?;

    let mut sum = tower.zero();
    for (res, weight) in buckets.iter().enumerate() {
        if weight.is_exact_zero() {
            continue;
        }
        if lc[res].is_exact_zero() {
            continue;
        }
        sum = sum.add(&lc[res].scalar_mul(weight));
    }
    let norm = q_number_u64(&q, total);
    sum.scalar_div(&norm)
}

/// Defect of the index-shift identity for the q = 1 integral:
/// I_1(f(.+1)) - I_1(f) - f'(0) at level N. Only meaningful for l = 1
/// integrands (the character factor cannot be argument-shifted).
pub fn shift_identity_check(
    spec: &IntegrandSpec,
    setting: &QSetting,
    level: u32,
) -> Result<Defect> {
    if setting.l != 1 || spec.chi.as_ref().map_or(false, |c| c.modulus() != 1) {
        return Err(Error::InvalidArgument(
            "shift identity check requires l = 1".into(),
        ));
    }
    let one_setting = QSetting {
        q: QValue::one(setting.ctx()),
        ..setting.clone()
    };
    let i_f = q_integral(spec, &one_setting, level)?;
    let shifted = IntegrandSpec {
        shift: &spec.shift + BigRational::one(),
        ..spec.clone()
    };
    // f(y+1) = xi * (shifted spec)(y)
    let i_f1 = q_integral(&shifted, &one_setting, level)?.mul(spec.xi.pow_elem(1));
    // f'(0) = m * c^(m-1) (the locally constant xi^y factor has zero
    // derivative)
    let deriv = if spec.moment == 0 {
        BigRational::zero()
    } else {
        BigRational::from_integer(BigInt::from(spec.moment))
            * pow_rational(&spec.shift, spec.moment as i64 - 1)
    };
    let fprime = setting.tower.from_scalar(&setting.ctx().from_big_rational(&deriv)?);
    let defect_elem = i_f1.sub(&i_f).sub(&fprime);
    Ok(ext_defect(&defect_elem, &setting.tower.zero()))
}

/// Both sides of the q-expansion identity for beta^(h)_{m,xi}(q) as formal
/// series over Q(zeta): the closed form expanded geometrically against the
/// partial sums -m sum [t]^(m-1) q^(ht) xi^t - (q-1)(m+h) sum [t]^m q^(ht)
/// xi^t. Coefficients 0..=trunc are stable (complete) iff h >= 1 or m = 0.
pub fn q_bernoulli_series_identity(
    m: u32,
    h: i64,
    field: &CycField,
    xi_exp: i64,
    trunc: usize,
) -> Result<(FormalQSeries, FormalQSeries)> {
    if h < 0 {
        return Err(Error::Domain(
            "formal identity requires h >= 0 (negative powers of q)".into(),
        ));
    }
    let xi = field.zeta_pow(xi_exp);
    let xi_is_one = xi == field.one();

    // left side: (1-q)^(1-m) sum_k C(m,k)(-1)^k (k+h) / (1 - xi q^(h+k))
    let mut lhs = FormalQSeries::zero(field, trunc);
    for k in 0..=m {
        let hk = h + k as i64;
        if hk == 0 {
            if xi_is_one {
                return Err(Error::Domain(
                    "term with xi = 1 and h + k = 0 has no q-power-series expansion".into(),
                ));
            }
            // numerator factor (k+h) = 0 kills the term
            continue;
        }
        let geo = FormalQSeries::geometric(field, &xi, hk as usize, trunc)?;
        let sign = if k % 2 == 0 { 1 } else { -1 };
        let c = binomial(m, k) * BigRational::from_integer(BigInt::from(sign * hk));
        lhs = lhs.add(&geo.scale_rational(&c));
    }
    if m == 0 {
        lhs = lhs.mul(&FormalQSeries::one_minus_q(field, trunc));
    } else if m >= 2 {
        let inv = FormalQSeries::geometric(field, &field.one(), 1, trunc)?.pow(m - 1);
        lhs = lhs.mul(&inv);
    }

    // right side: partial sums up to t = trunc
    let mut rhs = FormalQSeries::zero(field, trunc);
    for t in 0..=(trunc as u64) {
        let xt = xi.pow(t as i64)?;
        let shift = (h * t as i64) as usize;
        if h > 0 && shift > trunc {
            break;
        }
        let qn = FormalQSeries::q_number(field, t, trunc);
        if m >= 1 {
            let term = qn
                .pow(m - 1)
                .scale(&xt)
                .mul(&FormalQSeries::monomial(field, &field.one(), shift, trunc));
            rhs = rhs.sub(&term.scale_rational(&BigRational::from_integer(BigInt::from(m))));
        }
        let term2 = qn
            .pow(m)
            .scale(&xt)
            .mul(&FormalQSeries::monomial(field, &field.one(), shift, trunc));
        let c2 = BigRational::from_integer(BigInt::from(m as i64 + h));
        // -(q-1) = (1-q)
        rhs = rhs.add(
            &term2
                .mul(&FormalQSeries::one_minus_q(field, trunc))
                .scale_rational(&c2),
        );
    }
    Ok((lhs, rhs))
}

/// Whether every coefficient 0..=trunc of the partial-sum side is stable
/// under extending the sum.
pub fn series_identity_is_stable(m: u32, h: i64) -> bool {
    h >= 1 || m == 0
}

/// Defects of the two printed variants of the order-d splitting relation
/// for beta^(h)_{n,xi}(x, q): the [d]^(n-1) weight (the proof pattern) and
/// the plain d^(n-1) weight, checked against the unsplit value.
#[derive(Debug)]
pub struct DistributionCheck {
    pub qnum_weight: Defect,
    pub integer_weight: Defect,
}

pub fn distribution_defects(
    n: u32,
    d: u64,
    x: &BigRational,
    setting: &QSetting,
    xi: &RootOfUnity,
) -> Result<DistributionCheck> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument("need n >= 1 and d >= 1".into()));
    }
    let q = setting.q.padic();
    let lhs = twisted_q_bernoulli(n, x, setting, xi)?;
    let mut inner = setting.tower.zero();
    for a in 0..d {
        let arg = BigRational::from_integer(BigInt::from(a)) + x;
        let b = twisted_q_bernoulli_scaled(n, &arg, d, setting, xi)?;
        let qha = q.pow_i64(setting.h * a as i64)?;
        inner = inner.add(&b.mul(xi.pow_elem_u64(a)).scalar_mul(&qha));
    }
    let qnum_rhs = inner.scalar_mul(&q_number_u64(q, d).pow_u64(n as u64 - 1));
    let int_rhs = inner.scalar_mul(&setting.ctx().from_u64(d).pow_u64(n as u64 - 1));
    Ok(DistributionCheck {
        qnum_weight: ext_defect(&lhs, &qnum_rhs),
        integer_weight: ext_defect(&lhs, &int_rhs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclotomic::tower::{ext_working_floor, ExtValuation};
    use crate::error::Rat;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn setting(p: u64, prec: u32, q_num: i64, q_den: i64, h: i64, l: u64, r: u32) -> QSetting {
        let ctx = PadicContext::new(p, prec).unwrap();
        let tower = ExtensionTower::build(&ctx, 1, r).unwrap();
        let q = QValue::from_rational(&ctx, &rat(q_num, q_den)).unwrap();
        QSetting::new(tower, q, h, l).unwrap()
    }

    #[test]
    fn classical_bernoulli_values() {
        assert_eq!(classical_bernoulli(0), rat(1, 1));
        assert_eq!(classical_bernoulli(1), rat(-1, 2));
        assert_eq!(classical_bernoulli(2), rat(1, 6));
        assert_eq!(classical_bernoulli(3), rat(0, 1));
        assert_eq!(classical_bernoulli(12), rat(-691, 2730));
    }

    #[test]
    fn twisted_bernoulli_at_minus_one() {
        // series-expansion oracle values for xi = -1
        let field = CycField::new(2);
        let xi = field.from_i64(-1);
        let zero = BigRational::zero();
        assert_eq!(
            twisted_bernoulli_exact(0, &xi, &zero).unwrap(),
            field.zero()
        );
        assert_eq!(
            twisted_bernoulli_exact(1, &xi, &zero).unwrap(),
            field.from_rational(&rat(-1, 2))
        );
        assert_eq!(
            twisted_bernoulli_exact(2, &xi, &zero).unwrap(),
            field.from_rational(&rat(1, 2))
        );
        assert_eq!(
            twisted_bernoulli_exact(4, &xi, &zero).unwrap(),
            field.from_rational(&rat(-1, 2))
        );
    }

    #[test]
    fn twisted_bernoulli_at_one_reduces_to_classical() {
        let field = CycField::new(1);
        let one = field.one();
        for n in 0..=8u32 {
            let b = twisted_bernoulli_exact(n, &one, &BigRational::zero()).unwrap();
            assert_eq!(b.as_rational().unwrap(), classical_bernoulli(n));
        }
        // polynomial case
        let x = rat(1, 3);
        let b3 = twisted_bernoulli_exact(3, &one, &x).unwrap();
        assert_eq!(b3.as_rational().unwrap(), bernoulli_polynomial(3, &x));
    }

    #[test]
    fn generalized_bernoulli_mod4() {
        use crate::characters::character;
        let field = CycField::new(4);
        let chi = character(4, 1).unwrap();
        let one = field.one();
        let zero = BigRational::zero();
        // B_{1,chi} = -1/2 = (1/4)(1*1 + (-1)*3)
        let b1 = generalized_bernoulli_exact(1, &chi, &one, &zero).unwrap();
        assert_eq!(b1, field.from_rational(&rat(-1, 2)));
        // nontrivial chi has B_0 = 0
        let b0 = generalized_bernoulli_exact(0, &chi, &one, &zero).unwrap();
        assert!(b0.is_zero());
        // xi = -1 variant also has B_0 = 0 (orthogonality with signs)
        let ximinus = field.zeta_pow(2);
        assert_eq!(ximinus, field.from_i64(-1));
        let b0m = generalized_bernoulli_exact(0, &chi, &ximinus, &zero).unwrap();
        assert!(b0m.is_zero());
    }

    #[test]
    fn generalized_trivial_mod1_reduces_to_twisted() {
        use crate::characters::character;
        let field = CycField::new(2);
        let chi = character(1, 0).unwrap();
        let xi = field.from_i64(-1);
        for n in 0..=5u32 {
            let a = generalized_bernoulli_exact(n, &chi, &xi, &BigRational::zero()).unwrap();
            let b = twisted_bernoulli_exact(n, &xi, &BigRational::zero()).unwrap();
            assert_eq!(a, b, "n = {}", n);
        }
    }

    #[test]
    fn pinned_beta_one_fifth() {
        // p=3, q=4, h=1, xi=1, x=0, m=1: 1/(1-4) - 2/(1-16) = -1/5
        let s = setting(3, 16, 4, 1, 1, 1, 0);
        let xi = s.tower.root_of_unity(1).unwrap();
        let beta = twisted_q_bernoulli(1, &BigRational::zero(), &s, &xi).unwrap();
        let expect = s.tower.from_rational(-1, 5).unwrap();
        assert!(ext_defect(&beta, &expect).meets(Rat::from_integer(14)));
    }

    #[test]
    fn beta_m0_closed_form() {
        // m=0: beta = (1-q) h / (1 - q^h xi)
        let s = setting(3, 14, 4, 1, 2, 1, 1);
        let xi = s.tower.root_of_unity(3).unwrap();
        let beta = twisted_q_bernoulli(0, &BigRational::zero(), &s, &xi).unwrap();
        let ctx = s.ctx();
        let q = s.q.padic();
        let denom = s
            .tower
            .one()
            .sub(&xi.pow_elem(1).scalar_mul(&q.pow_u64(2)));
        let expect = denom
            .inv()
            .unwrap()
            .scalar_mul(&(&(&ctx.one() - q) * &ctx.from_i64(2)));
        assert!(ext_defect(&beta, &expect).meets(Rat::from_integer(12)));
    }

    #[test]
    fn q_integral_of_constant_is_one() {
        let s = setting(3, 12, 4, 1, 1, 1, 0);
        let xi = s.tower.root_of_unity(1).unwrap();
        let spec = IntegrandSpec {
            chi: None,
            xi,
            shift: BigRational::zero(),
            moment: 0,
            q_weight: 0,
        };
        for level in 1..=3 {
            let v = q_integral(&spec, &s, level).unwrap();
            // dividing by [l p^N] (valuation N) costs N digits of headroom
            assert!(
                ext_defect(&v, &s.tower.one()).meets(Rat::from_integer(12 - level as i64)),
                "level {}",
                level
            );
        }
    }

    #[test]
    fn q_integral_converges_to_beta() {
        // p=3, q=4, h=1, xi=1, f(y) = q^{(h-1)y}[y]: integral -> -1/5
        let s = setting(3, 20, 4, 1, 1, 1, 0);
        let xi = s.tower.root_of_unity(1).unwrap();
        let spec = IntegrandSpec::q_bernoulli(&xi, &BigRational::zero(), 1, 1);
        let expect = s.tower.from_rational(-1, 5).unwrap();
        let mut last = -1i64;
        for level in 2..=5 {
            let v = q_integral(&spec, &s, level).unwrap();
            let d = ext_defect(&v, &expect);
            let bound = d.bound().expect("nonzero defect expected");
            assert!(
                d.meets(Rat::from_integer(level as i64 - 2)),
                "level {}: defect {}",
                level,
                d
            );
            assert!(*bound.numer() >= last, "defect not nondecreasing");
            last = *bound.numer();
        }
    }

    #[test]
    fn q_integral_classical_witt() {
        // q = 1, f(y) = y^2: converges to B_2 = 1/6
        let ctx = PadicContext::new(3, 16).unwrap();
        let tower = ExtensionTower::build(&ctx, 1, 0).unwrap();
        let s = QSetting::new(tower.clone(), QValue::one(&ctx), 1, 1).unwrap();
        let xi = tower.root_of_unity(1).unwrap();
        let spec = IntegrandSpec {
            chi: None,
            xi,
            shift: BigRational::zero(),
            moment: 2,
            q_weight: 0,
        };
        let expect = tower.from_rational(1, 6).unwrap();
        for level in 3..=5 {
            let v = q_integral(&spec, &s, level).unwrap();
            assert!(
                ext_defect(&v, &expect).meets(Rat::from_integer(level as i64 - 1)),
                "level {} defect {}",
                level,
                ext_defect(&v, &expect)
            );
        }
    }

    #[test]
    fn shift_identity_examples() {
        let ctx = PadicContext::new(3, 16).unwrap();
        let tower = ExtensionTower::build(&ctx, 1, 0).unwrap();
        let s = QSetting::new(tower.clone(), QValue::one(&ctx), 1, 1).unwrap();
        let xi = tower.root_of_unity(1).unwrap();
        // f = 1: defect exactly the working floor
        let f0 = IntegrandSpec {
            chi: None,
            xi: xi.clone(),
            shift: BigRational::zero(),
            moment: 0,
            q_weight: 0,
        };
        assert!(shift_identity_check(&f0, &s, 3)
            .unwrap()
            .meets(Rat::from_integer(10)));
        // f = y and f = y^2 at growing levels
        for moment in [1u32, 2] {
            let spec = IntegrandSpec {
                chi: None,
                xi: xi.clone(),
                shift: BigRational::zero(),
                moment,
                q_weight: 0,
            };
            for level in 3..=4 {
                let d = shift_identity_check(&spec, &s, level).unwrap();
                assert!(
                    d.meets(Rat::from_integer(level as i64 - 1)),
                    "moment {} level {}: {}",
                    moment,
                    level,
                    d
                );
            }
        }
    }

    #[test]
    fn formal_series_identity_small() {
        // m=1, h=1, xi=-1, D=10: coefficientwise equal
        let field = CycField::new(2);
        let (lhs, rhs) = q_bernoulli_series_identity(1, 1, &field, 1, 10).unwrap();
        for k in 0..=10 {
            assert_eq!(lhs.coeff(k), rhs.coeff(k), "coefficient of q^{}", k);
        }
        // m=0 constant term: h/(1-xi) * (1-q) expansion
        let (l0, r0) = q_bernoulli_series_identity(0, 1, &field, 1, 6).unwrap();
        for k in 0..=6 {
            assert_eq!(l0.coeff(k), r0.coeff(k));
        }
        // degenerate xi=1, h=0 rejected for m >= 1
        let f1 = CycField::new(1);
        assert!(q_bernoulli_series_identity(1, 0, &f1, 0, 4).is_err());
    }

    #[test]
    fn generalized_matches_twisted_for_trivial_character() {
        use crate::characters::character;
        let s = setting(3, 14, 4, 1, 1, 1, 1);
        let xi = s.tower.root_of_unity(3).unwrap();
        let chi = character(1, 0).unwrap();
        for n in 0..=3u32 {
            let a = generalized_q_bernoulli(n, &BigRational::zero(), &s, &xi, &chi).unwrap();
            let b = twisted_q_bernoulli(n, &BigRational::zero(), &s, &xi).unwrap();
            assert_eq!(a, b, "bitwise equality expected at n = {}", n);
        }
    }

    #[test]
    fn generalized_limit_matches_exact() {
        use crate::characters::character;
        // q -> 1: beta^(h)_{n,xi,chi}(1+p^k) approaches the exact value
        let ctx = PadicContext::new(3, 24).unwrap();
        let tower = ExtensionTower::build(&ctx, 2, 0).unwrap();
        let chi = character(4, 1).unwrap();
        let field = CycField::new(2);
        let xi_exact = field.one();
        let exact = generalized_bernoulli_exact(1, &chi, &xi_exact, &BigRational::zero()).unwrap();
        let expect = tower.embed_exact(&exact).unwrap();
        for k in 1..=4u32 {
            let q = QValue::from_rational(&ctx, &rat(1 + 3i64.pow(k), 1)).unwrap();
            let s = QSetting::new(tower.clone(), q, 1, 4).unwrap();
            let xi = tower.root_of_unity(1).unwrap();
            let b = generalized_q_bernoulli(1, &BigRational::zero(), &s, &xi, &chi).unwrap();
            let d = ext_defect(&b, &expect);
            assert!(
                d.meets(Rat::from_integer(k as i64 - 1)),
                "k = {}: defect {}",
                k,
                d
            );
        }
    }

    #[test]
    fn generalized_agrees_with_riemann_sums() {
        use crate::characters::character;
        // p=3, chi mod 4 nontrivial, xi=1, h=1, n=1, x=0
        let ctx = PadicContext::new(3, 20).unwrap();
        let tower = ExtensionTower::build(&ctx, 2, 0).unwrap();
        let q = QValue::from_rational(&ctx, &rat(4, 1)).unwrap();
        let s = QSetting::new(tower.clone(), q, 1, 4).unwrap();
        let xi = tower.root_of_unity(1).unwrap();
        let chi = character(4, 1).unwrap();
        let closed = generalized_q_bernoulli(1, &BigRational::zero(), &s, &xi, &chi).unwrap();
        for level in 2..=4 {
            let spec = IntegrandSpec::q_bernoulli(&xi, &BigRational::zero(), 1, 1)
                .with_character(chi.clone());
            let riemann = q_integral(&spec, &s, level).unwrap();
            let d = ext_defect(&riemann, &closed);
            assert!(
                d.meets(Rat::from_integer(level as i64 - 2)),
                "level {}: {}",
                level,
                d
            );
        }
    }

    #[test]
    fn distribution_relation_variants() {
        let s = setting(3, 16, 4, 1, 1, 1, 0);
        let xi = s.tower.root_of_unity(1).unwrap();
        let zero = BigRational::zero();
        // d = 1: both defects vanish identically
        let c1 = distribution_defects(1, 1, &zero, &s, &xi).unwrap();
        assert!(c1.qnum_weight.meets(Rat::from_integer(14)));
        assert!(c1.integer_weight.meets(Rat::from_integer(14)));
        // n = 1: the weight exponent is 0, both variants coincide
        let c2 = distribution_defects(1, 2, &zero, &s, &xi).unwrap();
        assert!(c2.qnum_weight.meets(Rat::from_integer(13)));
        assert!(c2.integer_weight.meets(Rat::from_integer(13)));
        // n = 2, d = 2: the [d] weight is the one that vanishes
        let c3 = distribution_defects(2, 2, &zero, &s, &xi).unwrap();
        assert!(
            c3.qnum_weight.meets(Rat::from_integer(12)),
            "qnum variant defect {}",
            c3.qnum_weight
        );
        assert!(
            !c3.integer_weight.meets(Rat::from_integer(6)),
            "integer variant should visibly fail: {}",
            c3.integer_weight
        );
    }

    #[test]
    fn q_to_one_continuity_of_twisted_beta() {
        // v(beta(1+p^k) - exact) >= k - c on a small grid
        let ctx = PadicContext::new(3, 24).unwrap();
        let tower = ExtensionTower::build(&ctx, 1, 1).unwrap();
        let field = CycField::new(3);
        for n in 1..=3u32 {
            let exact = twisted_bernoulli_exact(n, &field.zeta(), &BigRational::zero()).unwrap();
            let expect = tower.embed_exact(&exact).unwrap();
            for k in 1..=4u32 {
                let q = QValue::from_rational(&ctx, &rat(1 + 3i64.pow(k), 1)).unwrap();
                let s = QSetting::new(tower.clone(), q, 1, 1).unwrap();
                let xi = tower.root_of_unity(3).unwrap();
                let b = twisted_q_bernoulli(n, &BigRational::zero(), &s, &xi).unwrap();
                let d = ext_defect(&b, &expect);
                assert!(
                    d.meets(Rat::from_integer(k as i64 - 2)),
                    "n = {}, k = {}: defect {}",
                    n,
                    k,
                    d
                );
            }
        }
    }

    #[test]
    fn beta_at_exact_q_one_routes_to_classical() {
        let ctx = PadicContext::new(5, 12).unwrap();
        let tower = ExtensionTower::build(&ctx, 1, 0).unwrap();
        let s = QSetting::new(tower.clone(), QValue::one(&ctx), 3, 1).unwrap();
        let xi = tower.root_of_unity(1).unwrap();
        // independent route: exact Bernoulli polynomial embedded
        for n in 0..=4u32 {
            let b = twisted_q_bernoulli(n, &rat(1, 2), &s, &xi).unwrap();
            let exact = bernoulli_polynomial(n, &rat(1, 2));
            let expect = tower
                .from_scalar(&ctx.from_big_rational(&exact).unwrap());
            assert!(ext_defect(&b, &expect).meets(Rat::from_integer(11)));
        }
    }

    #[test]
    fn working_floor_reporting() {
        let s = setting(3, 10, 4, 1, 1, 1, 0);
        let a = s.tower.from_i64(7);
        let b = s.tower.from_rational(1, 3).unwrap();
        let floor = ext_working_floor(&a, &b).unwrap();
        assert_eq!(floor, Rat::from_integer(9));
        match b.valuation() {
            ExtValuation::Exact(v) => assert_eq!(v, Rat::from_integer(-1)),
            other => panic!("{:?}", other),
        }
    }
}
