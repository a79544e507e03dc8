//! Points attached to real quadratic geodesics: the order and automorph of
//! an RM point, the multiplicative double integral defining the point in
//! K_p^x modulo Tate-parameter powers, the Tate-curve parametrization back
//! to Weierstrass coordinates, and exact algebraic recognition over the
//! real quadratic field.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_integer::Integer as _;
use num_traits::{One, Signed, Zero};

use crate::ball::GammaElement;
use crate::lfun::{mobius_quad, TatePeriod};
use crate::measure::{mult_integral, HarmonicMeasure, MultIntegral, MultKernel, Region};
use crate::modsym::{CurveData, EigenSymbol};
use crate::padic::{embed_quadratic, PadicNumber, QuadExtNumber};
use crate::quadfield::{CurveOverK, QD};
use crate::rat::{legendre, pow_p, Cusp, PRat};
use crate::{Error, Result};

/// An RM point: a root of an integral binary quadratic form of positive
/// non-square discriminant, inert at p, embedded into K_p.
#[derive(Debug, Clone)]
pub struct RMPoint {
    pub p: u64,
    pub form: (i64, i64, i64),
    pub disc: i64,
    /// root (-B + sqrt(D))/(2A), or the conjugate when `conjugate` is set
    pub conjugate: bool,
    pub tau: QuadExtNumber,
}

impl RMPoint {
    pub fn new(p: u64, form: (i64, i64, i64), prec: u32, conjugate: bool) -> Result<Self> {
        let (a, b, c) = form;
        if a == 0 {
            return Err(Error::Invariant("leading form coefficient must be nonzero"));
        }
        if num_integer::gcd(num_integer::gcd(a, b), c) != 1 {
            return Err(Error::Invariant("form must be primitive"));
        }
        let disc = b * b - 4 * a * c;
        if disc <= 0 {
            return Err(Error::Invariant("need a positive discriminant"));
        }
        let sq = BigInt::from(disc).sqrt();
        if &sq * &sq == BigInt::from(disc) {
            return Err(Error::Invariant("discriminant must not be a square"));
        }
        if legendre(&BigInt::from(disc), p) != -1 {
            return Err(Error::SplitPrime { d: disc, p });
        }
        // maximal Z[1/p]-order: the conductor of the discriminant must be a
        // p-power
        let f = form_conductor(disc);
        let mut ff = f;
        while ff % p == 0 {
            ff /= p;
        }
        if ff != 1 {
            return Err(Error::Invariant(
                "order is not maximal away from p (conductor not a p-power)",
            ));
        }
        let root = embed_quadratic(p, disc, prec)?;
        let root = if conjugate { root.neg() } else { root };
        let minus_b = QuadExtNumber::from_int(p, -b, prec);
        let inv2a = QuadExtNumber::from_padic(PadicNumber::from_ratio(
            p,
            &BigInt::one(),
            &BigInt::from(2 * a),
            prec,
        ));
        let tau = minus_b.add(&root)?.mul(&inv2a)?;
        Ok(RMPoint { p, form, disc, conjugate, tau })
    }

    pub fn conjugate_point(&self, prec: u32) -> Result<Self> {
        RMPoint::new(self.p, self.form, prec, !self.conjugate)
    }
}

/// conductor f with disc = f^2 * (fundamental discriminant)
fn form_conductor(disc: i64) -> u64 {
    let mut m = disc.unsigned_abs();
    let mut f = 1u64;
    let mut q = 2u64;
    while q * q <= m {
        while m % (q * q) == 0 {
            m /= q * q;
            f *= q;
        }
        q += 1;
    }
    // disc = f^2 m with m squarefree; fundamental part is m or 4m
    if m % 4 == 1 {
        f
    } else {
        // 4m is the fundamental discriminant; f must absorb a factor 2
        debug_assert_eq!(f % 2, 0, "disc = 0 mod 4 with m != 1 mod 4");
        f / 2
    }
}

/// Fundamental solution of x^2 - N y^2 = +-1 by the continued fraction of
/// sqrt(N); N must be a positive non-square.
fn pell_fundamental(n: u64) -> (BigInt, BigInt, i32) {
    let a0 = {
        let s = BigUint::from(n).sqrt();
        s.to_u64_digits().first().copied().unwrap_or(0)
    };
    debug_assert!(a0 * a0 != n);
    let (mut m, mut d, mut a) = (0i64, 1i64, a0 as i64);
    let (mut h0, mut k0) = (BigInt::one(), BigInt::zero());
    let (mut h1, mut k1) = (BigInt::from(a), BigInt::one());
    let nn = BigInt::from(n);
    loop {
        let val: BigInt = &h1 * &h1 - &nn * &k1 * &k1;
        if val.magnitude().is_one() {
            let sign = if val.is_negative() { -1 } else { 1 };
            return (h1, k1, sign);
        }
        m = d * a - m;
        d = (n as i64 - m * m) / d;
        a = (a0 as i64 + m) / d;
        let h2 = BigInt::from(a) * &h1 + &h0;
        let k2 = BigInt::from(a) * &k1 + &k0;
        h0 = h1;
        k0 = k1;
        h1 = h2;
        k1 = k2;
    }
}

/// Least (t, u) with t, u >= 1 and t^2 - D u^2 = 4: the fundamental
/// norm-one unit (t + u sqrt(D))/2 of the order of discriminant D.
pub fn fundamental_plus_unit(disc: i64) -> (BigInt, BigInt) {
    let d = disc as u64;
    if d % 4 == 0 {
        let (x, y, sign) = pell_fundamental(d / 4);
        let (x, y) = if sign == -1 {
            // square the norm minus-one unit
            let n = BigInt::from(d / 4);
            (&x * &x + &n * &y * &y, BigInt::from(2) * &x * &y)
        } else {
            (x, y)
        };
        (BigInt::from(2) * x, y)
    } else {
        debug_assert_eq!(d % 4, 1);
        let (x, y, sign) = pell_fundamental(d);
        let (x, y) = if sign == -1 {
            let n = BigInt::from(d);
            (&x * &x + &n * &y * &y, BigInt::from(2) * &x * &y)
        } else {
            (x, y)
        };
        // (2x, 2y) is a norm-one unit of Z[sqrt(D)]; the fundamental unit of
        // the half-integer order may be its cube root
        let t_big = BigInt::from(2) * &x;
        let u_big = BigInt::from(2) * &y;
        if let Some(t0) = integer_root_of(&(BigInt::from(2) * &x)) {
            // t0^3 - 3 t0 = 2x; recover u0 from the norm equation
            let u0sq: BigInt = (&t0 * &t0 - 4) / BigInt::from(disc);
            let u0 = u0sq.sqrt();
            if &u0 * &u0 == u0sq && !u0.is_zero() {
                // verify ((t0 + u0 sqrt(D))/2)^3 = x + y sqrt(D) exactly
                let dd = BigInt::from(disc);
                let a3: BigInt = (&t0 * &t0 * &t0 + BigInt::from(3) * &t0 * &u0 * &u0 * &dd) / 8;
                let b3: BigInt =
                    (BigInt::from(3) * &t0 * &t0 * &u0 + &u0 * &u0 * &u0 * &dd) / 8;
                if a3 == x && b3 == y {
                    return (t0, u0);
                }
            }
        }
        (t_big, u_big)
    }
}

/// Integer solution of t^3 - 3t = target, if one exists.
fn integer_root_of(target: &BigInt) -> Option<BigInt> {
    let f = |t: &BigInt| -> BigInt { t * t * t - BigInt::from(3) * t };
    let mut lo = BigInt::from(2);
    let mut hi: BigInt = target.magnitude().clone().into();
    hi += 2;
    if &f(&lo) > target {
        return (f(&lo) == *target).then_some(lo);
    }
    while &hi - &lo > BigInt::one() {
        let mid: BigInt = (&lo + &hi) / 2;
        if &f(&mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (f(&lo) == *target).then_some(lo)
}

/// The automorph of the RM point: the generator (modulo torsion) of its
/// stabilizer, built from the fundamental norm-one unit.
#[derive(Debug, Clone)]
pub struct AutomorphGamma {
    pub gamma: GammaElement,
    pub t: BigInt,
    pub u: BigInt,
}

pub fn order_and_gamma(rm: &RMPoint) -> Result<AutomorphGamma> {
    let (a, b, c) = rm.form;
    let (t, u) = fundamental_plus_unit(rm.disc);
    let half = |x: BigInt| -> BigInt {
        debug_assert!(x.is_even());
        x / 2
    };
    let gamma = GammaElement::new(
        PRat::new(rm.p, half(&t - BigInt::from(b) * &u), 0),
        PRat::new(rm.p, BigInt::from(-c) * &u, 0),
        PRat::new(rm.p, BigInt::from(a) * &u, 0),
        PRat::new(rm.p, half(&t + BigInt::from(b) * &u), 0),
    );
    if !gamma.is_unimodular() {
        return Err(Error::Invariant("automorph must have determinant one"));
    }
    // fixed-point check at working precision
    let prec = rm.tau.abs_prec().unwrap_or(20).max(4) as u32;
    let img = mobius_quad(&gamma, &rm.tau, prec)?;
    if !img.agrees_with(&rm.tau, img.abs_prec().unwrap_or(1)) {
        return Err(Error::Invariant("automorph does not fix the RM point"));
    }
    Ok(AutomorphGamma { gamma, t, u })
}

/// A point value in K_p^x tensor the symbol lattice, well defined modulo
/// Tate-parameter powers and the torsion scale.
#[derive(Debug, Clone)]
pub struct StarkHeegnerPoint {
    pub p: u64,
    /// full representatives p^ord * unit per lattice coordinate
    pub value: (QuadExtNumber, QuadExtNumber),
    pub ord: (i64, i64),
    pub depth: u32,
    pub base: Cusp,
}

impl StarkHeegnerPoint {
    /// The ord pair reduced into [0, v(q)) per coordinate.
    pub fn ord_mod_q(&self, ord_q: i64) -> (i64, i64) {
        (self.ord.0.rem_euclid(ord_q), self.ord.1.rem_euclid(ord_q))
    }
}

/// The multiplicative Riemann product over the depth-n covering for the
/// symbol pair (r, gamma_tau r), evaluated at tau: the finite-level
/// approximation to the point attached to the RM geodesic.
pub fn stark_heegner(
    symbol: &EigenSymbol,
    rm: &RMPoint,
    aut: &AutomorphGamma,
    base: &Cusp,
    depth: u32,
    prec: u32,
) -> Result<StarkHeegnerPoint> {
    let s = aut.gamma.act_cusp(base);
    if s == *base {
        return Err(Error::Invariant("base cusp is fixed by the automorph"));
    }
    let mu = HarmonicMeasure::new(symbol, base.clone(), s);
    let m: MultIntegral = mult_integral(
        &mu,
        Region::Full,
        &MultKernel::Linear(rm.tau.clone()),
        depth,
        prec,
    )?;
    let vp = m.u.0.shift(m.ord.0);
    let vm = m.u.1.shift(m.ord.1);
    Ok(StarkHeegnerPoint {
        p: symbol.p,
        value: (vp, vm),
        ord: m.ord,
        depth,
        base: base.clone(),
    })
}

/// Power sums s_k(q) = sum_{n>=1} n^k q^n / (1 - q^n), truncated at the
/// working precision.
fn tate_sk(q: &PadicNumber, k: u32, prec: u32) -> Result<PadicNumber> {
    let p = q.prime();
    let vq = q.val().ok_or(Error::DivisionByZero)?;
    debug_assert!(vq >= 1);
    let terms = (prec as i64 / vq + 2) as u32;
    let mut acc = PadicNumber::zero(p);
    let mut qn = PadicNumber::one(p, prec + 4);
    for n in 1..=terms {
        qn = qn.mul(q)?;
        let nk = PadicNumber::from_int(p, (n as i64).pow(k), prec + 4);
        let one = PadicNumber::one(p, prec + 4);
        let den = one.sub(&qn)?;
        acc = acc.add(&nk.mul(&qn)?.div(&den)?)?;
    }
    Ok(acc)
}

/// a4 and a6 of the Tate curve y^2 + xy = x^3 + a4 x + a6.
pub fn tate_curve_coefficients(q: &PadicNumber, prec: u32) -> Result<(PadicNumber, PadicNumber)> {
    let p = q.prime();
    let s3 = tate_sk(q, 3, prec)?;
    let s5 = tate_sk(q, 5, prec)?;
    let a4 = s3.mul_int(-5);
    let inv12 = PadicNumber::from_ratio(p, &BigInt::one(), &BigInt::from(12), prec + 2);
    let a6 = s3.mul_int(-5).sub(&s5.mul_int(7))?.mul(&inv12)?;
    Ok((a4, a6))
}

/// The affine point of the Tate curve attached to a parameter u with
/// 0 <= v(u) < v(q) (reduce by q-powers first).
pub fn tate_series_point(
    u: &QuadExtNumber,
    q: &PadicNumber,
    prec: u32,
) -> Result<(QuadExtNumber, QuadExtNumber)> {
    let p = q.prime();
    let vq = q.val().ok_or(Error::DivisionByZero)?;
    let one = QuadExtNumber::one(p, prec + 4);
    if u.sub(&one)?.is_zero() {
        return Err(Error::IdentityPoint);
    }
    let qq = QuadExtNumber::from_padic(q.clone());
    let uinv = u.inv()?;
    // n = 0 terms
    let omu = one.sub(u)?;
    let mut x = u.div(&omu.mul(&omu)?)?;
    let mut y = u.mul(u)?.div(&omu.mul(&omu)?.mul(&omu)?)?;
    let terms = (prec as i64 / vq + 2) as u32;
    let mut qn = one.clone();
    for _ in 1..=terms {
        qn = qn.mul(&qq)?;
        for (w, y_sign) in [(qn.mul(u)?, 1i64), (qn.mul(&uinv)?, -1)] {
            let omw = one.sub(&w)?;
            let omw2 = omw.mul(&omw)?;
            x = x.add(&w.div(&omw2)?)?;
            let num = if y_sign == 1 { w.mul(&w)? } else { w.clone() };
            let term = num.div(&omw2.mul(&omw)?)?;
            y = if y_sign == 1 { y.add(&term)? } else { y.sub(&term)? };
        }
    }
    let s1 = QuadExtNumber::from_padic(tate_sk(q, 1, prec)?);
    x = x.sub(&s1.mul_int(2))?;
    y = y.add(&s1)?;
    Ok((x, y))
}

/// Exact change of coordinates from the Tate curve to the input model over
/// K_p: match c4, c6 through the short forms, taking the square-root
/// scaling in the unramified quadratic extension (this absorbs the
/// non-split twist).
pub fn tate_to_curve(
    xy: &(QuadExtNumber, QuadExtNumber),
    q: &PadicNumber,
    curve: &CurveData,
    prec: u32,
) -> Result<(QuadExtNumber, QuadExtNumber)> {
    let p = q.prime();
    let (a4q, a6q) = tate_curve_coefficients(q, prec)?;
    // Tate model: a1 = 1, a2 = a3 = 0
    let one = PadicNumber::one(p, prec + 4);
    let b2q = one.clone(); // a1^2
    let b4q = a4q.mul_int(2);
    let b6q = a6q.mul_int(4);
    let c4q = b2q.mul(&b2q)?.sub(&b4q.mul_int(24))?;
    let c6q = b2q
        .mul(&b2q)?
        .mul(&b2q)?
        .neg()
        .add(&b2q.mul(&b4q)?.mul_int(36))?
        .sub(&b6q.mul_int(216))?;
    let c4e = PadicNumber::from_bigint(p, &curve.c4, prec + 4);
    let c6e = PadicNumber::from_bigint(p, &curve.c6, prec + 4);
    // w^2 = (c6E c4q)/(c6q c4E); verify w^4 = c4E/c4q afterwards
    let w2 = c6e.mul(&c4q)?.div(&c6q.mul(&c4e)?)?;
    let w = QuadExtNumber::from_padic(w2).sqrt_unit()?;
    let w2q = w.mul(&w)?;
    let w4 = w2q.mul(&w2q)?;
    let ratio = QuadExtNumber::from_padic(c4e.div(&c4q)?);
    if !w4.agrees_with(&ratio, w4.abs_prec().unwrap_or(2) - 1) {
        return Err(Error::Invariant("c4/c6 scaling mismatch: curves not a quadratic twist"));
    }
    // Tate short form: X_s = 36 x + 3 b2q, Y_s = 108 (2y + x)
    let (x, y) = xy;
    let b2q_ext = QuadExtNumber::from_padic(b2q);
    let xs = x.mul_int(36).add(&b2q_ext.mul_int(3))?;
    let ys = y.mul_int(2).add(x)?.mul_int(108);
    // scale to the target short form
    let xe_s = xs.mul(&w2q)?;
    let ye_s = ys.mul(&w2q)?.mul(&w)?;
    // target short form back to the input model:
    // X = 36 x + 3 b2, Y = 108 (2y + a1 x + a3)
    let [a1, a2, a3, _, _] = curve.coeffs;
    let b2e = PadicNumber::from_int(p, a1 * a1 + 4 * a2, prec + 4);
    let inv36 = PadicNumber::from_ratio(p, &BigInt::one(), &BigInt::from(36), prec + 4);
    let xq = xe_s
        .sub(&QuadExtNumber::from_padic(b2e).mul_int(3))?
        .mul(&QuadExtNumber::from_padic(inv36))?;
    let inv108 = PadicNumber::from_ratio(p, &BigInt::one(), &BigInt::from(108), prec + 4);
    let eta = ye_s.mul(&QuadExtNumber::from_padic(inv108))?;
    // eta = 2y + a1 x + a3
    let inv2 = PadicNumber::from_ratio(p, &BigInt::one(), &BigInt::from(2), prec + 4);
    let a1x = xq.mul_int(a1);
    let a3c = QuadExtNumber::from_int(p, a3, prec + 4);
    let yq = eta.sub(&a1x)?.sub(&a3c)?.mul(&QuadExtNumber::from_padic(inv2))?;
    Ok((xq, yq))
}

/// Reduce u into the fundamental annulus 0 <= v(u) < v(q) and apply the
/// Tate series followed by the coordinate change to the input model.
pub fn tate_parametrize(
    u: &QuadExtNumber,
    tate: &TatePeriod,
    curve: &CurveData,
    prec: u32,
) -> Result<(QuadExtNumber, QuadExtNumber)> {
    let vq = tate.ord_q;
    let vu = u.val().ok_or(Error::DivisionByZero)?;
    let k = vu.div_euclid(vq);
    let qinv_k = QuadExtNumber::from_padic(tate.q.clone()).pow(-k)?;
    let u_red = u.mul(&qinv_k)?;
    debug_assert!(u_red.val().map_or(false, |v| v >= 0 && v < vq));
    let xy = tate_series_point(&u_red, &tate.q, prec)?;
    tate_to_curve(&xy, &tate.q, curve, prec)
}

/// Check a point against the Tate model y^2 + xy = x^3 + a4 x + a6,
/// returning the valuation of the defect.
pub fn tate_model_defect(
    xy: &(QuadExtNumber, QuadExtNumber),
    q: &PadicNumber,
    prec: u32,
) -> Result<Option<i64>> {
    let (a4, a6) = tate_curve_coefficients(q, prec)?;
    let (x, y) = xy;
    let lhs = y.mul(y)?.add(&x.mul(y)?)?;
    let rhs = x
        .mul(x)?
        .mul(x)?
        .add(&QuadExtNumber::from_padic(a4).mul(x)?)?
        .add(&QuadExtNumber::from_padic(a6))?;
    let d = lhs.sub(&rhs)?;
    Ok(d.val())
}

/// Formal-group logarithm of the Tate model at the parameter z = -x/y,
/// used as an independent series route back to log(u).
pub fn tate_formal_log(
    z: &QuadExtNumber,
    q: &PadicNumber,
    prec: u32,
    terms: usize,
) -> Result<QuadExtNumber> {
    let p = q.prime();
    let (a4, a6) = tate_curve_coefficients(q, prec)?;
    // w(z) = z^3 + a1 z w + a4 z w^2 + a6 w^3 with a1 = 1 here
    let zero = PadicNumber::zero(p);
    let one = PadicNumber::one(p, prec + 4);
    let n = terms;
    // compute w to degree n + 3 so that v = w/z^3 is honest to degree n
    let nw = n + 4;
    let mut w = vec![zero.clone(); nw];
    w[3] = one.clone();
    for _ in 0..nw {
        // w <- z^3 + z*w + a4 z w^2 + a6 w^3
        let zw = shift_series(&w, 1, nw);
        let w2 = series_mul(&w, &w, nw);
        let zw2 = shift_series(&w2, 1, nw);
        let w3 = series_mul(&w2, &w, nw);
        let mut next = vec![zero.clone(); nw];
        next[3] = one.clone();
        for i in 0..nw {
            next[i] = next[i]
                .add(&zw[i])?
                .add(&zw2[i].mul(&a4)?)?
                .add(&w3[i].mul(&a6)?)?;
        }
        if next == w {
            break;
        }
        w = next;
    }
    // v = w / z^3 has constant term 1; x = z/w = z^{-2} v^{-1}
    let v: Vec<PadicNumber> = (0..n).map(|i| w.get(i + 3).cloned().unwrap_or(zero.clone())).collect();
    let vinv = series_inv(&v, n)?;
    // omega = d(z/w)/(2y + x) with y = -1/w:
    // numerator sum (k-2) b_k z^(k-3) dz, denominator z^{-3}(v^{-1}(-2 + z))
    // so omega = [sum (k-2) b_k z^k] / [v^{-1} (-2 + z)] dz
    let mut num = vec![zero.clone(); n];
    for (k, b) in vinv.iter().enumerate() {
        num[k] = b.mul_int(k as i64 - 2);
    }
    let mut den = vec![zero.clone(); n];
    for (k, b) in vinv.iter().enumerate() {
        den[k] = den[k].add(&b.mul_int(-2))?;
        if k + 1 < n {
            den[k + 1] = den[k + 1].add(b)?;
        }
    }
    let omega = series_div(&num, &den, n)?;
    // integrate: log(z) = sum omega_k z^(k+1)/(k+1)
    let mut acc = QuadExtNumber::zero(p);
    let mut zpow = QuadExtNumber::one(p, prec + 4);
    for (k, c) in omega.iter().enumerate() {
        zpow = zpow.mul(z)?;
        let kinv = PadicNumber::from_ratio(p, &BigInt::one(), &BigInt::from(k as i64 + 1), prec + 4);
        acc = acc.add(&zpow.mul(&QuadExtNumber::from_padic(c.mul(&kinv)?))?)?;
    }
    Ok(acc)
}

fn shift_series(a: &[PadicNumber], k: usize, n: usize) -> Vec<PadicNumber> {
    let p = a[0].prime();
    let mut out = vec![PadicNumber::zero(p); n];
    for i in 0..n.saturating_sub(k) {
        out[i + k] = a[i].clone();
    }
    out
}

fn series_mul(a: &[PadicNumber], b: &[PadicNumber], n: usize) -> Vec<PadicNumber> {
    let p = a[0].prime();
    let mut out = vec![PadicNumber::zero(p); n];
    for i in 0..n {
        if a[i].is_zero() {
            continue;
        }
        for j in 0..n - i {
            if !b[j].is_zero() {
                out[i + j] = out[i + j].add(&a[i].mul(&b[j]).expect("same prime")).expect("same prime");
            }
        }
    }
    out
}

fn series_inv(a: &[PadicNumber], n: usize) -> Result<Vec<PadicNumber>> {
    let p = a[0].prime();
    let mut out = vec![PadicNumber::zero(p); n];
    out[0] = a[0].inv()?;
    for i in 1..n {
        let mut acc = PadicNumber::zero(p);
        for j in 1..=i {
            acc = acc.add(&a[j].mul(&out[i - j])?)?;
        }
        out[i] = acc.neg().mul(&out[0])?;
    }
    Ok(out)
}

fn series_div(a: &[PadicNumber], b: &[PadicNumber], n: usize) -> Result<Vec<PadicNumber>> {
    Ok(series_mul(a, &series_inv(b, n)?, n))
}

/// Rational reconstruction: the unique fraction num/den congruent to u mod
/// m with |num|, den <= bound, when it exists.
pub fn rational_reconstruct(u: &BigUint, modulus: &BigUint, bound: &BigInt) -> Option<(BigInt, BigInt)> {
    let mut r0 = BigInt::from(modulus.clone());
    let mut r1 = BigInt::from(u.clone());
    let mut t0 = BigInt::zero();
    let mut t1 = BigInt::one();
    while &r1 > bound {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        let t2 = &t0 - &q * &t1;
        r0 = r1;
        r1 = r2;
        t0 = t1;
        t1 = t2;
    }
    if t1.is_zero() || t1.magnitude() > bound.magnitude() {
        return None;
    }
    let (num, den) = if t1.is_negative() {
        (-r1, -t1)
    } else {
        (r1, t1)
    };
    if num_integer::gcd(num.clone(), den.clone()).is_one() {
        Some((num, den))
    } else {
        None
    }
}

/// Reconstruct a p-adic number as p^v times a small rational.
fn reconstruct_padic(x: &PadicNumber, height: &BigInt) -> Option<BigRational> {
    let p = x.prime();
    match x.val() {
        None => Some(BigRational::zero()),
        Some(v) => {
            let prec = x.rel_prec()?;
            let m = pow_p(p, prec);
            // the product of numerator and denominator must stay under m/2
            let cap = {
                let half = BigInt::from(&m / 2u32).sqrt();
                half.min(height.clone())
            };
            let (num, den) = rational_reconstruct(x.unit_part()?, &m, &cap)?;
            let scale = BigRational::new(BigInt::from(pow_p(p, v.unsigned_abs() as u32)), BigInt::one());
            let base = BigRational::new(num, den);
            Some(if v >= 0 { base * scale } else { base / scale })
        }
    }
}

/// Recognize a K_p coordinate as an element of Q(sqrt(D)) of bounded
/// height, certified by exact substitution into the curve equation.
pub fn recognize(
    x_p: &QuadExtNumber,
    d: i64,
    height: u64,
    curve: &CurveData,
) -> Result<(QD, QD)> {
    let p = x_p.p;
    let prec = x_p
        .abs_prec()
        .ok_or(Error::PrecisionExhausted("recognition input"))?
        .max(2) as u32;
    let root = embed_quadratic(p, d, prec)?;
    let h = BigInt::from(height);
    let e1 = reconstruct_padic(&x_p.a, &h).ok_or(Error::RecognitionFailed)?;
    let b_ratio = x_p.b.div(&root.b).map_err(|_| Error::RecognitionFailed)?;
    let e2 = reconstruct_padic(&b_ratio, &h).ok_or(Error::RecognitionFailed)?;
    let x = QD::new(d, e1, e2);
    let curve_k = CurveOverK::new(d, curve.coeffs);
    let (y, _) = curve_k.lift_x(&x).ok_or(Error::RecognitionFailed)?;
    // re-validate
    if !curve_k.on_curve(&crate::quadfield::KPoint::Affine(x.clone(), y.clone())) {
        return Err(Error::RecognitionFailed);
    }
    Ok((x, y))
}

/// Consistency data for a base-symbol change: the ord discrepancy of the
/// two runs, which must lie in v(q) Z per coordinate up to the torsion
/// scale.
pub fn base_change_ord_defect(
    a: &StarkHeegnerPoint,
    b: &StarkHeegnerPoint,
) -> (i64, i64) {
    (a.ord.0 - b.ord.0, a.ord.1 - b.ord.1)
}
