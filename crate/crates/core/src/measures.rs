//! Ball-indexed p-adic measures: the base q-measure, the twisted-moment
//! distribution, its alpha-regularized (bounded) variant, and the
//! Mazur-type bracket, together with the level-N integrator over X, X^*
//! and pX, additivity checkers and a boundedness probe.

use crate::characters::{CharTable, DirichletCharacter, TwistedCharacter};
use crate::cyclotomic::tower::{ext_defect, ExtElement, ExtValuation, RootOfUnity};
use crate::error::{Defect, Error, Rat, Result};
use crate::padic::{angle, q_number_u64, PadicNumber};
use crate::par;
use crate::qbernoulli::{twisted_q_bernoulli_scaled, QSetting, QValue};
use num::rational::Ratio;
use num::{BigInt, BigRational, Integer, One, ToPrimitive, Zero};

/// The compact-open ball residue + l p^level Z_p inside X.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ball {
    pub residue: u64,
    pub level: u32,
}

impl Ball {
    pub fn new(residue: u64, level: u32) -> Self {
        Ball { residue, level }
    }

    /// The p disjoint sub-balls whose union is this ball.
    pub fn children(&self, setting: &QSetting) -> Vec<Ball> {
        let span = setting.span(self.level);
        (0..setting.p())
            .map(|i| Ball::new(self.residue + i * span, self.level + 1))
            .collect()
    }
}

/// Least nonnegative residue {x}_N mod l p^N and the complement
/// [x]_N = x - {x}_N (which lies in l p^N Z).
pub fn residue_parts(x: &BigInt, l: u64, p: u64, level: u32) -> (u64, BigInt) {
    let span = BigInt::from(l) * BigInt::from(p).pow(level);
    let rem = num::Integer::mod_floor(x, &span);
    let whole = x - &rem;
    (rem.to_u64().expect("residue fits"), whole)
}

/// The Mazur bracket ((1/alpha - 1)/(h+1) + (h/alpha) [a alpha]_N / (l p^N)),
/// an exact rational.
pub fn mazur_weight(a: u64, alpha: u64, span: u64, h: i64) -> BigRational {
    let alpha_r = BigRational::from_integer(BigInt::from(alpha));
    let first = (alpha_r.recip() - BigRational::one())
        / BigRational::from_integer(BigInt::from(h + 1));
    // [a alpha]_N / (l p^N) = floor(a * alpha / span)
    let floor = BigRational::from_integer(BigInt::from(a as u128 * alpha as u128 / span as u128));
    first + BigRational::from_integer(BigInt::from(h)) / alpha_r * floor
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureKind {
    /// mu_q(a + lp^N Z) = q^a / [lp^N]
    BaseQ,
    /// [lp^N]^(n-1) q^(ha) xi^a beta^(h)_{n, xi^(lp^N)}(a/lp^N, q^(lp^N))
    TwistedMoment { n: u32 },
    /// TwistedMoment minus its alpha-composed companion (Euler-regularized)
    Regularized { n: u32, alpha: u64 },
    /// The Mazur-type bracket (rational-valued)
    MazurType { alpha: u64 },
}

/// A measure bound to its q-setting and twist.
#[derive(Clone, Debug)]
pub struct Measure {
    pub kind: MeasureKind,
    setting: QSetting,
    xi: RootOfUnity,
    reg: Option<RegData>,
}

#[derive(Clone, Debug)]
struct RegData {
    setting_prime: QSetting,
    xi_prime: RootOfUnity,
    /// alpha^{-1} [1/alpha; q]^(n-1)
    scalar: PadicNumber,
    alpha: u64,
}

fn inv_mod_u64(a: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let quo = old_r / r;
        (old_r, r) = (r, old_r - quo * r);
        (old_s, s) = (s, old_s - quo * s);
    }
    assert_eq!(old_r.abs(), 1, "not invertible");
    (old_s * old_r.signum()).rem_euclid(m as i128) as u64
}

/// q^{1/alpha} = exp((1/alpha) log q), exact when q = 1.
pub fn q_root_alpha(q: &QValue, alpha: u64, setting: &QSetting) -> Result<QValue> {
    if q.is_exactly_one() {
        return Ok(QValue::one(setting.ctx()));
    }
    let ctx = setting.ctx();
    let ainv = ctx.from_rational(&BigInt::one(), &BigInt::from(alpha))?;
    let qp = (&q.padic().log_p()? * &ainv).exp_p()?;
    QValue::from_padic(qp)
}

/// [1/alpha; q] = (1 - q^{1/alpha})/(1 - q), with the exact value 1/alpha at
/// q = 1.
pub fn bracket_inv_alpha(q: &QValue, q_prime: &QValue, alpha: u64, setting: &QSetting) -> Result<PadicNumber> {
    let ctx = setting.ctx();
    if q.is_exactly_one() {
        return ctx.from_rational(&BigInt::one(), &BigInt::from(alpha));
    }
    let num = &ctx.one() - q_prime.padic();
    let den = &ctx.one() - q.padic();
    num.div(&den)
}

impl Measure {
    pub fn new(kind: MeasureKind, setting: QSetting, xi: RootOfUnity) -> Result<Self> {
        let alpha = match kind {
            MeasureKind::Regularized { alpha, .. } | MeasureKind::MazurType { alpha } => {
                Some(alpha)
            }
            _ => None,
        };
        if let Some(alpha) = alpha {
            let p = setting.p();
            if alpha <= 1 || num::integer::gcd(alpha, setting.l * p) != 1 {
                return Err(Error::InvalidArgument(format!(
                    "alpha = {} must be > 1 and prime to l*p = {}",
                    alpha,
                    setting.l * p
                )));
            }
        }
        if matches!(kind, MeasureKind::MazurType { .. }) && setting.h == -1 {
            return Err(Error::Domain("Mazur bracket is singular at h = -1".into()));
        }
        let reg = if let MeasureKind::Regularized { n, alpha } = kind {
            let q_prime = q_root_alpha(&setting.q, alpha, &setting)?;
            let bracket = bracket_inv_alpha(&setting.q, &q_prime, alpha, &setting)?;
            let ainv = setting
                .ctx()
                .from_rational(&BigInt::one(), &BigInt::from(alpha))?;
            let scalar = &ainv * &bracket.pow_i64(n as i64 - 1)?;
            let setting_prime = QSetting {
                q: q_prime,
                ..setting.clone()
            };
            let xi_prime = xi.power_inv(alpha)?;
            Some(RegData {
                setting_prime,
                xi_prime,
                scalar,
                alpha,
            })
        } else {
            None
        };
        Ok(Measure {
            kind,
            setting,
            xi,
            reg,
        })
    }

    pub fn setting(&self) -> &QSetting {
        &self.setting
    }

    pub fn xi(&self) -> &RootOfUnity {
        &self.xi
    }

    pub fn value(&self, ball: Ball) -> Result<ExtElement> {
        let span = self.setting.span(ball.level);
        if ball.residue >= span {
            return Err(Error::InvalidArgument(format!(
                "residue {} out of range for level {}",
                ball.residue, ball.level
            )));
        }
        match self.kind {
            MeasureKind::BaseQ => {
                let q = self.setting.q.padic();
                let qa = q.pow_u64(ball.residue);
                let norm = q_number_u64(q, span);
                Ok(self
                    .setting
                    .tower
                    .from_scalar(&qa.div(&norm)?))
            }
            MeasureKind::TwistedMoment { n } => {
                twisted_moment_value(n, &self.setting, &self.xi, ball)
            }
            MeasureKind::Regularized { n, .. } => {
                let reg = self.reg.as_ref().expect("regularized data present");
                let main = twisted_moment_value(n, &self.setting, &self.xi, ball)?;
                let composed = Ball::new(
                    ((ball.residue as u128 * reg.alpha as u128) % span as u128) as u64,
                    ball.level,
                );
                let shadow =
                    twisted_moment_value(n, &reg.setting_prime, &reg.xi_prime, composed)?;
                Ok(main.sub(&shadow.scalar_mul(&reg.scalar)))
            }
            MeasureKind::MazurType { alpha } => {
                let w = mazur_weight(ball.residue, alpha, span, self.setting.h);
                Ok(self
                    .setting
                    .tower
                    .from_scalar(&self.setting.ctx().from_big_rational(&w)?))
            }
        }
    }

    /// Exact rational value where the measure is rational-valued (BaseQ with
    /// rational q of manageable size, and MazurType).
    pub fn value_rational(&self, ball: Ball) -> Option<BigRational> {
        let span = self.setting.span(ball.level);
        match self.kind {
            MeasureKind::MazurType { alpha } => {
                Some(mazur_weight(ball.residue, alpha, span, self.setting.h))
            }
            MeasureKind::BaseQ => {
                let q = self.setting.q.exact()?;
                if span > 20_000 {
                    return None;
                }
                let qa = rational_pow(q, ball.residue);
                let norm = if q.is_one() {
                    BigRational::from_integer(BigInt::from(span))
                } else {
                    (BigRational::one() - rational_pow(q, span)) / (BigRational::one() - q)
                };
                Some(qa / norm)
            }
            _ => None,
        }
    }
}

fn rational_pow(q: &BigRational, e: u64) -> BigRational {
    let mut acc = BigRational::one();
    let mut base = q.clone();
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc *= &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    acc
}

fn twisted_moment_value(
    n: u32,
    setting: &QSetting,
    xi: &RootOfUnity,
    ball: Ball,
) -> Result<ExtElement> {
    let span = setting.span(ball.level);
    let q = setting.q.padic();
    let a = ball.residue;
    let beta = twisted_q_bernoulli_scaled(
        n,
        &BigRational::from_integer(BigInt::from(a)),
        span,
        setting,
        xi,
    )?;
    let qha = q.pow_i64(setting.h * a as i64)?;
    let bracket = q_number_u64(q, span).pow_i64(n as i64 - 1)?;
    Ok(beta
        .mul(xi.pow_elem_u64(a))
        .scalar_mul(&qha)
        .scalar_mul(&bracket))
}

/// v(sum of child values - parent value). BaseQ with rational q reports the
/// exact zero; everything else reports to working precision.
pub fn additivity_defect(measure: &Measure, ball: Ball) -> Result<Defect> {
    if let MeasureKind::BaseQ | MeasureKind::MazurType { .. } = measure.kind {
        let exact: Option<(BigRational, Vec<BigRational>)> = measure
            .value_rational(ball)
            .and_then(|parent| {
                let children: Option<Vec<BigRational>> = ball
                    .children(&measure.setting)
                    .into_iter()
                    .map(|c| measure.value_rational(c))
                    .collect();
                children.map(|c| (parent, c))
            });
        if let Some((parent, children)) = exact {
            let total: BigRational = children.into_iter().sum();
            let diff = total - parent;
            if diff.is_zero() {
                return Ok(Defect::ExactZero);
            }
            let p = measure.setting.p();
            let v = rational_valuation(&diff, p);
            return Ok(Defect::Exact(Ratio::from_integer(v)));
        }
    }
    let parent = measure.value(ball)?;
    let mut total = measure.setting.tower.zero();
    for child in ball.children(&measure.setting) {
        total = total.add(&measure.value(child)?);
    }
    Ok(ext_defect(&total, &parent))
}

fn rational_valuation(x: &BigRational, p: u64) -> i64 {
    let pb = BigInt::from(p);
    let mut v = 0i64;
    let mut num = x.numer().clone();
    while Integer::is_multiple_of(&num, &pb) {
        num /= &pb;
        v += 1;
    }
    let mut den = x.denom().clone();
    while Integer::is_multiple_of(&den, &pb) {
        den /= &pb;
        v -= 1;
    }
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    FullX,
    UnitsX,
    PTimesX,
}

impl Domain {
    fn admits(&self, a: u64, p: u64) -> bool {
        match self {
            Domain::FullX => true,
            Domain::UnitsX => a % p != 0,
            Domain::PTimesX => a % p == 0,
        }
    }
}

/// sum over admissible residues a < l p^level of f(a) * mu(a + lp^N Z).
pub fn riemann_integrate<F>(
    f: F,
    measure: &Measure,
    level: u32,
    domain: Domain,
) -> Result<ExtElement>
where
    F: Fn(u64) -> Result<ExtElement> + Sync,
{
    if level == 0 {
        return Err(Error::InsufficientLevel {
            level,
            reason: "integration level must be >= 1".into(),
        });
    }
    let span = measure.setting.span(level);
    let p = measure.setting.p();
    let tower = measure.setting.tower.clone();
    par::block_sum(
        span,
        256,
        |range| -> Result<ExtElement> {
            let mut acc = tower.zero();
            for a in range {
                if !domain.admits(a, p) {
                    continue;
                }
                let fv = f(a)?;
                if fv.is_exact_zero() {
                    continue;
                }
                let mv = measure.value(Ball::new(a, level))?;
                acc = acc.add(&fv.mul(&mv));
            }
            Ok(acc)
        },
        |a, b| a.add(&b),
    )
}

/// Both sides of the Euler-factor identity: the regularized integral of chi
/// over X^* at the given level, and the four-term closed form.
pub fn euler_factor_eval(
    n: u32,
    chi: &DirichletCharacter,
    xi: &RootOfUnity,
    alpha: u64,
    setting: &QSetting,
    level: u32,
) -> Result<(ExtElement, ExtElement)> {
    let tower = &setting.tower;
    let ctx = setting.ctx();
    let p = setting.p();
    let measure = Measure::new(
        MeasureKind::Regularized { n, alpha },
        setting.clone(),
        xi.clone(),
    )?;
    let table = CharTable::plain(chi, tower)?;
    let lhs = riemann_integrate(
        |a| Ok(table.value(a).clone()),
        &measure,
        level,
        Domain::UnitsX,
    )?;

    // closed form
    let q = setting.q.padic();
    let zero = BigRational::zero();
    let t1 = crate::qbernoulli::generalized_q_bernoulli(n, &zero, setting, xi, chi)?;

    // [p; q]^(n-1) chi(p) beta^(h)_{n, xi^p, chi}(q^p)
    let setting_p = QSetting {
        q: q_pow_value(&setting.q, p, setting)?,
        ..setting.clone()
    };
    let xi_p = xi.power(p as i64);
    let beta_p = crate::qbernoulli::generalized_q_bernoulli(n, &zero, &setting_p, &xi_p, chi)?;
    let chi_p = chi.evaluate(p as i64, tower)?;
    let t2 = beta_p
        .mul(&chi_p)
        .scalar_mul(&q_number_u64(q, p).pow_i64(n as i64 - 1)?);

    // alpha^{-1} [1/alpha; q]^(n-1) chi(1/alpha) beta(q^{1/alpha}, xi^{1/alpha})
    let q_prime = q_root_alpha(&setting.q, alpha, setting)?;
    let bracket_a = bracket_inv_alpha(&setting.q, &q_prime, alpha, setting)?;
    let ainv_scalar = ctx.from_rational(&BigInt::one(), &BigInt::from(alpha))?;
    let setting_a = QSetting {
        q: q_prime.clone(),
        ..setting.clone()
    };
    let xi_a = xi.power_inv(alpha)?;
    let a_inv_mod_l = inv_mod_u64(alpha % setting.l.max(1), setting.l);
    let chi_ainv = chi.evaluate(a_inv_mod_l as i64, tower)?;
    let beta_a = crate::qbernoulli::generalized_q_bernoulli(n, &zero, &setting_a, &xi_a, chi)?;
    let t3 = beta_a
        .mul(&chi_ainv)
        .scalar_mul(&(&ainv_scalar * &bracket_a.pow_i64(n as i64 - 1)?));

    // alpha^{-1} [p/alpha; q]^(n-1) chi(p/alpha) beta(q^{p/alpha}, xi^{p/alpha})
    let setting_pa = QSetting {
        q: q_pow_value(&q_prime, p, setting)?,
        ..setting.clone()
    };
    let xi_pa = xi_a.power(p as i64);
    let chi_pa = chi.evaluate(((p as u128 * a_inv_mod_l as u128) % setting.l.max(1) as u128) as i64, tower)?;
    let beta_pa = crate::qbernoulli::generalized_q_bernoulli(n, &zero, &setting_pa, &xi_pa, chi)?;
    // [p/alpha; q] = [p; q^{1/alpha}] [1/alpha; q]
    let bracket_pa = &q_number_u64(q_prime.padic(), p) * &bracket_a;
    let t4 = beta_pa
        .mul(&chi_pa)
        .scalar_mul(&(&ainv_scalar * &bracket_pa.pow_i64(n as i64 - 1)?));

    let rhs = t1.sub(&t2).sub(&t3).add(&t4);
    Ok((lhs, rhs))
}

fn q_pow_value(q: &QValue, e: u64, setting: &QSetting) -> Result<QValue> {
    match q.exact() {
        Some(r) if r.is_one() => Ok(QValue::one(setting.ctx())),
        Some(r) if e <= 64 && size_ok(r, e) => {
            QValue::from_rational(setting.ctx(), &rational_pow(r, e))
        }
        _ => QValue::from_padic(q.padic().pow_u64(e)),
    }
}

fn size_ok(r: &BigRational, e: u64) -> bool {
    (r.numer().bits() + r.denom().bits()) * e < 4096
}

/// Defect between the regularized integral of chi_n over X^* and the same
/// integral computed against the Mazur measure with the density
/// ((h+n) q^{(h+1)x} - h q^{hx}) <x>^{n-1} xi^x chi_1(x).
pub fn mazur_density_defect(
    n: u32,
    chi: &DirichletCharacter,
    xi: &RootOfUnity,
    alpha: u64,
    setting: &QSetting,
    level: u32,
) -> Result<Defect> {
    let tower = &setting.tower;
    let ctx = setting.ctx();
    let q = setting.q.padic().clone();
    let h = setting.h;

    let reg = Measure::new(
        MeasureKind::Regularized { n, alpha },
        setting.clone(),
        xi.clone(),
    )?;
    let chi_n = TwistedCharacter::new(chi.clone(), ctx, n as i64);
    let table_n = CharTable::twisted(&chi_n, tower)?;
    let lhs = riemann_integrate(
        |a| Ok(table_n.value(a).clone()),
        &reg,
        level,
        Domain::UnitsX,
    )?;

    let mazur = Measure::new(
        MeasureKind::MazurType { alpha },
        setting.clone(),
        xi.clone(),
    )?;
    let chi_1 = TwistedCharacter::new(chi.clone(), ctx, 1);
    let table_1 = CharTable::twisted(&chi_1, tower)?;
    let hn = ctx.from_i64(h + n as i64);
    let hs = ctx.from_i64(h);
    let rhs = riemann_integrate(
        |a| {
            let c = table_1.value(a);
            if c.is_exact_zero() {
                return Ok(tower.zero());
            }
            let q_h1a = q.pow_i64((h + 1) * a as i64)?;
            let q_ha = q.pow_i64(h * a as i64)?;
            let density_scalar = &(&hn * &q_h1a) - &(&hs * &q_ha);
            let ang = angle(&q, &BigInt::from(a))?.pow_i64(n as i64 - 1)?;
            Ok(c
                .mul(xi.pow_elem_u64(a))
                .scalar_mul(&(&density_scalar * &ang)))
        },
        &mazur,
        level,
        Domain::UnitsX,
    )?;
    Ok(ext_defect(&lhs, &rhs))
}

/// Per-level minimum valuation of the measure over all balls of each level
/// 1..=max_level (the empirical boundedness probe). Enumeration is capped
/// at 2e5 balls per level.
pub fn boundedness_probe(measure: &Measure, max_level: u32) -> Result<Vec<Rat>> {
    let mut out = Vec::new();
    for level in 1..=max_level {
        let span = measure.setting.span(level);
        if span > 200_000 {
            return Err(Error::InvalidArgument(format!(
                "level {} needs {} evaluations, above the 2e5 cap",
                level, span
            )));
        }
        let p = measure.setting.p();
        let min = par::block_sum(
            span,
            1024,
            |range| -> Result<Option<Rat>> {
                let mut min: Option<Rat> = None;
                for a in range {
                    let _ = p;
                    let v = measure.value(Ball::new(a, level))?;
                    let val = match v.valuation() {
                        ExtValuation::Infinite => continue,
                        ExtValuation::AtLeast(k) | ExtValuation::Exact(k) => k,
                    };
                    min = Some(match min {
                        None => val,
                        Some(m) => m.min(val),
                    });
                }
                Ok(min)
            },
            |a, b| match (a, b) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, None) | (None, x) => x,
            },
        )?;
        out.push(min.unwrap_or_else(|| Ratio::from_integer(i64::MAX)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::character;
    use crate::cyclotomic::tower::ExtensionTower;
    use crate::padic::PadicContext;
    use crate::qbernoulli::generalized_q_bernoulli;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn setting(p: u64, prec: u32, q_num: i64, h: i64, l: u64, r: u32, m_prime: u64) -> QSetting {
        let ctx = PadicContext::new(p, prec).unwrap();
        let tower = ExtensionTower::build(&ctx, m_prime, r).unwrap();
        let q = QValue::from_rational(&ctx, &rat(q_num, 1)).unwrap();
        QSetting::new(tower, q, h, l).unwrap()
    }

    #[test]
    fn refinement_partitions_the_ball() {
        let s = setting(3, 10, 4, 1, 2, 0, 1);
        let ball = Ball::new(5, 1);
        let children = ball.children(&s);
        assert_eq!(children.len(), 3);
        let span_child = s.span(2);
        let mut residues: Vec<u64> = children.iter().map(|c| c.residue).collect();
        residues.sort();
        assert_eq!(residues, vec![5, 11, 17]);
        for c in &children {
            assert!(c.residue < span_child);
            assert_eq!(c.residue % s.span(1), ball.residue);
        }
    }

    #[test]
    fn base_q_at_level_one() {
        // p=3, l=1, q=4: mu(0 + 3Z) = 1/[3;4] = 1/21
        let s = setting(3, 12, 4, 1, 1, 0, 1);
        let xi = s.tower.root_of_unity(1).unwrap();
        let m = Measure::new(MeasureKind::BaseQ, s.clone(), xi).unwrap();
        assert_eq!(m.value_rational(Ball::new(0, 1)).unwrap(), rat(1, 21));
    }

    #[test]
    fn base_q_additivity_pinned_instance() {
        // mu(0+9Z)+mu(3+9Z)+mu(6+9Z) = (1+4^3+4^6)/[9;4] = 4161/87381 = 1/21
        let s = setting(3, 12, 4, 1, 1, 0, 1);
        let xi = s.tower.root_of_unity(1).unwrap();
        let m = Measure::new(MeasureKind::BaseQ, s.clone(), xi).unwrap();
        let total: BigRational = [0u64, 3, 6]
            .iter()
            .map(|&a| m.value_rational(Ball::new(a, 2)).unwrap())
            .sum();
        assert_eq!(total, rat(4161, 87381));
        assert_eq!(total, rat(1, 21));
        assert_eq!(
            additivity_defect(&m, Ball::new(0, 1)).unwrap(),
            Defect::ExactZero
        );
    }

    #[test]
    fn base_q_additivity_exact_everywhere_small() {
        for p in [3u64, 5] {
            let s = setting(p, 12, 1 + p as i64, 1, 1, 0, 1);
            let xi = s.tower.root_of_unity(1).unwrap();
            let m = Measure::new(MeasureKind::BaseQ, s.clone(), xi).unwrap();
            for level in 1..=3 {
                for a in 0..s.span(level) {
                    assert_eq!(
                        additivity_defect(&m, Ball::new(a, level)).unwrap(),
                        Defect::ExactZero,
                        "p={} level={} a={}",
                        p,
                        level,
                        a
                    );
                }
            }
        }
    }

    #[test]
    fn twisted_moment_additivity() {
        // p=3, l=1, q=4, h=1, n=1, xi=1
        let s = setting(3, 20, 4, 1, 1, 0, 1);
        let xi = s.tower.root_of_unity(1).unwrap();
        let m = Measure::new(MeasureKind::TwistedMoment { n: 1 }, s.clone(), xi).unwrap();
        let d = additivity_defect(&m, Ball::new(0, 1)).unwrap();
        assert!(d.meets(Rat::from_integer(13)), "defect {}", d);
    }

    #[test]
    fn twisted_moment_additivity_ramified_twist() {
        let s = setting(3, 20, 4, 1, 1, 1, 1);
        let xi = s.tower.root_of_unity(3).unwrap();
        let m = Measure::new(MeasureKind::TwistedMoment { n: 1 }, s.clone(), xi).unwrap();
        for ball in [Ball::new(0, 1), Ball::new(2, 1), Ball::new(4, 2)] {
            let d = additivity_defect(&m, ball).unwrap();
            assert!(d.meets(Rat::from_integer(12)), "ball {:?}: {}", ball, d);
        }
    }

    #[test]
    fn riemann_constant_against_base_q_is_one() {
        let s = setting(3, 14, 4, 1, 1, 0, 1);
        let xi = s.tower.root_of_unity(1).unwrap();
        let m = Measure::new(MeasureKind::BaseQ, s.clone(), xi).unwrap();
        let one = s.tower.one();
        for level in 1..=3u32 {
            let v = riemann_integrate(|_| Ok(one.clone()), &m, level, Domain::FullX).unwrap();
            // dividing by [l p^N] costs ~2N digits of headroom here
            assert!(
                ext_defect(&v, &one).meets(Rat::from_integer(14 - 2 * level as i64)),
                "level {}: {}",
                level,
                ext_defect(&v, &one)
            );
        }
    }

    #[test]
    fn domain_partition_is_exact() {
        let s = setting(3, 14, 4, 2, 2, 0, 1);
        let xi = s.tower.root_of_unity(1).unwrap();
        let m = Measure::new(MeasureKind::TwistedMoment { n: 2 }, s.clone(), xi).unwrap();
        let one = s.tower.one();
        let f = |_a: u64| Ok(one.clone());
        for level in 1..=2 {
            let full = riemann_integrate(f, &m, level, Domain::FullX).unwrap();
            let units = riemann_integrate(f, &m, level, Domain::UnitsX).unwrap();
            let ptimes = riemann_integrate(f, &m, level, Domain::PTimesX).unwrap();
            assert_eq!(full, units.add(&ptimes), "level {}", level);
        }
    }

    #[test]
    fn character_integral_recovers_generalized_beta() {
        // integrating chi against the twisted-moment measure gives
        // beta^(h)_{n, xi, chi}(q) exactly at every level
        let ctx = PadicContext::new(3, 20).unwrap();
        let tower = ExtensionTower::build(&ctx, 2, 0).unwrap();
        let q = QValue::from_rational(&ctx, &rat(4, 1)).unwrap();
        let s = QSetting::new(tower.clone(), q, 1, 4).unwrap();
        let xi = tower.root_of_unity(1).unwrap();
        let chi = character(4, 1).unwrap();
        let closed = generalized_q_bernoulli(1, &BigRational::zero(), &s, &xi, &chi).unwrap();
        let m = Measure::new(MeasureKind::TwistedMoment { n: 1 }, s.clone(), xi).unwrap();
        let table = CharTable::plain(&chi, &tower).unwrap();
        for level in 1..=3 {
            let v = riemann_integrate(
                |a| Ok(table.value(a).clone()),
                &m,
                level,
                Domain::FullX,
            )
            .unwrap();
            let d = ext_defect(&v, &closed);
            assert!(
                d.meets(Rat::from_integer(20 - 2 * level as i64 - 2)),
                "level {}: {}",
                level,
                d
            );
        }
    }

    #[test]
    fn euler_factor_trivial_grid_point() {
        let s = setting(3, 24, 4, 1, 1, 0, 1);
        let xi = s.tower.root_of_unity(1).unwrap();
        let chi = character(1, 0).unwrap();
        for level in 2..=4 {
            let (lhs, rhs) = euler_factor_eval(1, &chi, &xi, 2, &s, level).unwrap();
            let d = ext_defect(&lhs, &rhs);
            assert!(
                d.meets(Rat::from_integer(level as i64 + 1)),
                "level {}: {}",
                level,
                d
            );
        }
    }

    #[test]
    fn euler_factor_twisted_grid_point() {
        // p=3, chi mod 4 nontrivial, xi of order 3, h=1, n=1, alpha=5
        let ctx = PadicContext::new(3, 24).unwrap();
        let tower = ExtensionTower::build(&ctx, 2, 1).unwrap();
        let q = QValue::from_rational(&ctx, &rat(4, 1)).unwrap();
        let s = QSetting::new(tower.clone(), q, 1, 4).unwrap();
        let xi = tower.root_of_unity(3).unwrap();
        let chi = character(4, 1).unwrap();
        for level in 2..=3 {
            let (lhs, rhs) = euler_factor_eval(1, &chi, &xi, 5, &s, level).unwrap();
            let d = ext_defect(&lhs, &rhs);
            assert!(
                d.meets(Rat::from_integer(level as i64 + 1)),
                "level {}: {}",
                level,
                d
            );
        }
    }

    #[test]
    fn mazur_density_converges() {
        // n=1, xi=1, trivial chi: density (h+1) q^{(h+1)x} - h q^{hx}
        let s = setting(3, 24, 4, 1, 1, 0, 1);
        let xi = s.tower.root_of_unity(1).unwrap();
        let chi = character(1, 0).unwrap();
        let mut bounds = Vec::new();
        for level in 2..=4 {
            let d = mazur_density_defect(1, &chi, &xi, 2, &s, level).unwrap();
            let b = d.bound().map(|b| *b.numer()).unwrap_or(i64::MAX);
            bounds.push(b);
        }
        assert!(
            bounds.windows(2).all(|w| w[1] >= w[0]),
            "defect bounds not nondecreasing: {:?}",
            bounds
        );
        assert!(bounds[0] >= 1, "level-2 defect too small: {:?}", bounds);
    }

    #[test]
    fn mazur_density_h_zero() {
        let s = setting(3, 20, 4, 0, 1, 0, 1);
        let xi = s.tower.root_of_unity(1).unwrap();
        let chi = character(1, 0).unwrap();
        let d3 = mazur_density_defect(1, &chi, &xi, 2, &s, 3).unwrap();
        eprintln!("mazur h=0 level 3 defect: {}", d3);
        let d4 = mazur_density_defect(1, &chi, &xi, 2, &s, 4).unwrap();
        eprintln!("mazur h=0 level 4 defect: {}", d4);
        assert!(d3.meets(Rat::from_integer(2)), "defect {}", d3);
    }

    #[test]
    fn boundedness_probe_contrasts_kinds() {
        let s = setting(3, 20, 4, 1, 1, 0, 1);
        let xi = s.tower.root_of_unity(1).unwrap();
        // BaseQ minima decrease like -N (distribution, not a measure)
        let base = Measure::new(MeasureKind::BaseQ, s.clone(), xi.clone()).unwrap();
        let mins = boundedness_probe(&base, 4).unwrap();
        for w in mins.windows(2) {
            assert!(w[1] < w[0], "BaseQ minima should strictly decrease: {:?}", mins);
        }
        // Regularized minima stabilize
        let reg = Measure::new(
            MeasureKind::Regularized { n: 1, alpha: 2 },
            s.clone(),
            xi.clone(),
        )
        .unwrap();
        let mins = boundedness_probe(&reg, 4).unwrap();
        let floor = mins.iter().min().unwrap();
        assert!(
            *floor >= Rat::from_integer(-1),
            "regularized minima unbounded: {:?}",
            mins
        );
        // Mazur values sit above a fixed floor
        let maz = Measure::new(MeasureKind::MazurType { alpha: 2 }, s.clone(), xi).unwrap();
        let mins = boundedness_probe(&maz, 4).unwrap();
        assert!(mins.iter().all(|m| *m >= Rat::from_integer(-1)), "{:?}", mins);
    }

    #[test]
    fn residue_parts_contract() {
        let x = BigInt::from(1234567);
        let (rem, whole) = residue_parts(&x, 4, 3, 3);
        assert!(rem < 4 * 27);
        assert_eq!(BigInt::from(rem) + &whole, x);
        let span = BigInt::from(4 * 27);
        assert!(num::Integer::is_multiple_of(&whole, &span));
        // negative inputs
        let y = BigInt::from(-5);
        let (rem, whole) = residue_parts(&y, 1, 3, 2);
        assert_eq!(rem, 4);
        assert_eq!(whole, BigInt::from(-9));
    }

    #[test]
    fn twisted_moment_at_exponent_zero() {
        // n = 1: [lp^N]^0 = 1, value reduces to q^{ha} beta(a/lp^N, q^{lp^N})
        let s = setting(3, 16, 4, 2, 1, 0, 1);
        let xi = s.tower.root_of_unity(1).unwrap();
        let m = Measure::new(MeasureKind::TwistedMoment { n: 1 }, s.clone(), xi.clone()).unwrap();
        let ball = Ball::new(2, 2);
        let direct = m.value(ball).unwrap();
        let beta = twisted_q_bernoulli_scaled(1, &rat(2, 1), 9, &s, &xi).unwrap();
        let expected = beta.scalar_mul(&s.q.padic().pow_i64(2 * 2).unwrap());
        assert_eq!(direct, expected);
    }
}
