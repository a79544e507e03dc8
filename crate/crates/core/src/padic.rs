//! Fixed relative-precision arithmetic in Q_p and in the unramified
//! quadratic extension K_p = Q_p(s), s^2 = r for the least non-residue r.
//!
//! A nonzero element is stored as p^val * unit with the unit tracked modulo
//! p^prec, so products and quotients lose nothing: the relative precision of
//! a product is the minimum of the operands'. Zero carries the absolute
//! precision to which it is known (or is exact).

use alloc::vec::Vec;
use core::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero as NumZero};

use crate::rat::{least_nonresidue, legendre, mod_pos, modinv, pow_p, vp_int, PRat};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Repr {
    /// Exact zero (`abs == None`) or zero modulo p^abs.
    Zero { abs: Option<i64> },
    /// p^val * unit with 1 <= unit < p^prec and p not dividing unit.
    Unit { val: i64, unit: BigUint, prec: u32 },
}

/// An element of Q_p at fixed relative precision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PadicNumber {
    p: u64,
    repr: Repr,
}

impl PadicNumber {
    pub fn zero(p: u64) -> Self {
        PadicNumber { p, repr: Repr::Zero { abs: None } }
    }

    pub fn zero_to(p: u64, abs: i64) -> Self {
        PadicNumber { p, repr: Repr::Zero { abs: Some(abs) } }
    }

    pub fn one(p: u64, prec: u32) -> Self {
        PadicNumber { p, repr: Repr::Unit { val: 0, unit: BigUint::one(), prec } }
    }

    /// Build p^val * unit, normalizing p-powers out of `unit` while keeping
    /// the absolute precision val + prec fixed.
    pub fn from_unit(p: u64, val: i64, unit: BigUint, prec: u32) -> Self {
        let modulus = pow_p(p, prec);
        let mut u = unit % &modulus;
        if u.is_zero() {
            return PadicNumber { p, repr: Repr::Zero { abs: Some(val + prec as i64) } };
        }
        let shift = vp_int(&BigInt::from(u.clone()), p);
        if shift == 0 {
            return PadicNumber { p, repr: Repr::Unit { val, unit: u, prec } };
        }
        if shift >= prec {
            return PadicNumber { p, repr: Repr::Zero { abs: Some(val + prec as i64) } };
        }
        u /= pow_p(p, shift);
        PadicNumber {
            p,
            repr: Repr::Unit { val: val + shift as i64, unit: u, prec: prec - shift },
        }
    }

    /// Interpret `residue` as a value known modulo p^abs.
    pub fn from_residue(p: u64, residue: BigUint, abs: i64) -> Self {
        assert!(abs >= 0, "from_residue wants nonnegative absolute precision");
        let x = PadicNumber::from_unit(p, 0, residue, abs as u32);
        x.truncate_abs(abs)
    }

    pub fn from_bigint(p: u64, n: &BigInt, prec: u32) -> Self {
        if n.is_zero() {
            return PadicNumber::zero(p);
        }
        let v = vp_int(n, p) as i64;
        let reduced = n / BigInt::from(pow_p(p, v as u32));
        let m = pow_p(p, prec);
        PadicNumber::from_unit(p, v, mod_pos(&reduced, &m), prec)
    }

    pub fn from_int(p: u64, n: i64, prec: u32) -> Self {
        PadicNumber::from_bigint(p, &BigInt::from(n), prec)
    }

    /// num/den as a p-adic number; `den` may carry any p-power but its
    /// prime-to-p part is inverted modulo p^prec.
    pub fn from_ratio(p: u64, num: &BigInt, den: &BigInt, prec: u32) -> Self {
        assert!(!den.is_zero());
        if num.is_zero() {
            return PadicNumber::zero(p);
        }
        let vn = vp_int(num, p) as i64;
        let vd = vp_int(den, p) as i64;
        let n0 = num / BigInt::from(pow_p(p, vn as u32));
        let d0 = den / BigInt::from(pow_p(p, vd as u32));
        let m = pow_p(p, prec);
        let u = mod_pos(&n0, &m) * modinv(&mod_pos(&d0, &m), &m) % &m;
        PadicNumber::from_unit(p, vn - vd, u, prec)
    }

    pub fn from_prat(x: &PRat, prec: u32) -> Self {
        PadicNumber::from_ratio(x.p, &x.num, &BigInt::from(pow_p(x.p, x.exp)), prec)
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero { .. })
    }

    pub fn is_exact_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero { abs: None })
    }

    /// Valuation; `None` for zero (exact or indistinguishable from it).
    pub fn val(&self) -> Option<i64> {
        match &self.repr {
            Repr::Zero { .. } => None,
            Repr::Unit { val, .. } => Some(*val),
        }
    }

    /// Absolute precision: the element is known modulo p^abs. `None` means
    /// known exactly (only exact zero).
    pub fn abs_prec(&self) -> Option<i64> {
        match &self.repr {
            Repr::Zero { abs } => *abs,
            Repr::Unit { val, prec, .. } => Some(val + *prec as i64),
        }
    }

    /// Relative precision of a nonzero element.
    pub fn rel_prec(&self) -> Option<u32> {
        match &self.repr {
            Repr::Zero { .. } => None,
            Repr::Unit { prec, .. } => Some(*prec),
        }
    }

    pub fn unit_part(&self) -> Option<&BigUint> {
        match &self.repr {
            Repr::Zero { .. } => None,
            Repr::Unit { unit, .. } => Some(unit),
        }
    }

    /// Residue of the element modulo p^k (element must be integral enough).
    pub fn residue(&self, k: u32) -> BigUint {
        match &self.repr {
            Repr::Zero { abs } => {
                if let Some(a) = abs {
                    assert!(*a >= k as i64, "residue beyond known precision");
                }
                BigUint::zero()
            }
            Repr::Unit { val, unit, prec } => {
                assert!(*val >= 0, "residue of non-integral element");
                assert!(val + *prec as i64 >= k as i64, "residue beyond known precision");
                unit * pow_p(self.p, *val as u32) % pow_p(self.p, k)
            }
        }
    }

    fn check_prime(&self, other: &Self) -> Result<()> {
        if self.p != other.p {
            return Err(Error::PrimeMismatch { left: self.p, right: other.p });
        }
        Ok(())
    }

    pub fn truncate_abs(&self, abs: i64) -> Self {
        match &self.repr {
            Repr::Zero { abs: a } => {
                let new = match a {
                    None => Some(abs),
                    Some(old) => Some((*old).min(abs)),
                };
                PadicNumber { p: self.p, repr: Repr::Zero { abs: new } }
            }
            Repr::Unit { val, unit, prec } => {
                let cur = val + *prec as i64;
                if cur <= abs {
                    return self.clone();
                }
                if abs <= *val {
                    return PadicNumber { p: self.p, repr: Repr::Zero { abs: Some(abs) } };
                }
                let np = (abs - val) as u32;
                PadicNumber::from_unit(self.p, *val, unit % pow_p(self.p, np), np)
            }
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_prime(other)?;
        match (&self.repr, &other.repr) {
            (Repr::Zero { abs: None }, _) => Ok(other.clone()),
            (_, Repr::Zero { abs: None }) => Ok(self.clone()),
            (Repr::Zero { abs: Some(a) }, _) => Ok(other.truncate_abs(*a)),
            (_, Repr::Zero { abs: Some(a) }) => Ok(self.truncate_abs(*a)),
            (
                Repr::Unit { val: v1, unit: u1, prec: n1 },
                Repr::Unit { val: v2, unit: u2, prec: n2 },
            ) => {
                let abs = (v1 + *n1 as i64).min(v2 + *n2 as i64);
                let v = (*v1).min(*v2);
                let width = (abs - v) as u32;
                let m = pow_p(self.p, width);
                let t1 = u1 * pow_p(self.p, (v1 - v) as u32) % &m;
                let t2 = u2 * pow_p(self.p, (v2 - v) as u32) % &m;
                Ok(PadicNumber::from_unit(self.p, v, (t1 + t2) % &m, width))
            }
        }
    }

    pub fn neg(&self) -> Self {
        match &self.repr {
            Repr::Zero { .. } => self.clone(),
            Repr::Unit { val, unit, prec } => {
                let m = pow_p(self.p, *prec);
                PadicNumber {
                    p: self.p,
                    repr: Repr::Unit { val: *val, unit: &m - unit, prec: *prec },
                }
            }
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_prime(other)?;
        match (&self.repr, &other.repr) {
            (Repr::Zero { abs: None }, _) | (_, Repr::Zero { abs: None }) => {
                Ok(PadicNumber::zero(self.p))
            }
            (Repr::Zero { abs: Some(a) }, Repr::Zero { abs: Some(b) }) => {
                // O(p^a) * O(p^b): all we can say is O(p^(a+b)) at worst
                // when both are genuinely small; keep the weaker bound.
                Ok(PadicNumber::zero_to(self.p, (*a).min(*b)))
            }
            (Repr::Zero { abs: Some(a) }, Repr::Unit { val, .. })
            | (Repr::Unit { val, .. }, Repr::Zero { abs: Some(a) }) => {
                Ok(PadicNumber::zero_to(self.p, a + val))
            }
            (
                Repr::Unit { val: v1, unit: u1, prec: n1 },
                Repr::Unit { val: v2, unit: u2, prec: n2 },
            ) => {
                let prec = (*n1).min(*n2);
                let m = pow_p(self.p, prec);
                Ok(PadicNumber {
                    p: self.p,
                    repr: Repr::Unit { val: v1 + v2, unit: u1 * u2 % &m, prec },
                })
            }
        }
    }

    pub fn inv(&self) -> Result<Self> {
        match &self.repr {
            Repr::Zero { .. } => Err(Error::DivisionByZero),
            Repr::Unit { val, unit, prec } => {
                let m = pow_p(self.p, *prec);
                Ok(PadicNumber {
                    p: self.p,
                    repr: Repr::Unit { val: -val, unit: modinv(unit, &m), prec: *prec },
                })
            }
        }
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.mul(&other.inv()?)
    }

    pub fn mul_int(&self, k: i64) -> Self {
        if k == 0 {
            return PadicNumber::zero(self.p);
        }
        let prec = match self.rel_prec() {
            Some(n) => n,
            None => {
                let v = vp_int(&BigInt::from(k), self.p) as i64;
                return match self.abs_prec() {
                    None => self.clone(),
                    Some(a) => PadicNumber::zero_to(self.p, a + v),
                };
            }
        };
        let other = PadicNumber::from_int(self.p, k, prec);
        self.mul(&other).expect("same prime")
    }

    /// Multiply by p^k.
    pub fn shift(&self, k: i64) -> Self {
        match &self.repr {
            Repr::Zero { abs: None } => self.clone(),
            Repr::Zero { abs: Some(a) } => PadicNumber::zero_to(self.p, a + k),
            Repr::Unit { val, unit, prec } => PadicNumber {
                p: self.p,
                repr: Repr::Unit { val: val + k, unit: unit.clone(), prec: *prec },
            },
        }
    }

    pub fn pow(&self, k: i64) -> Result<Self> {
        if k == 0 {
            let prec = self.rel_prec().unwrap_or(1);
            return Ok(PadicNumber::one(self.p, prec));
        }
        let base = if k < 0 { self.inv()? } else { self.clone() };
        match &base.repr {
            Repr::Zero { abs: None } => Ok(base.clone()),
            Repr::Zero { abs: Some(a) } => Ok(PadicNumber::zero_to(self.p, a * k.unsigned_abs() as i64)),
            Repr::Unit { val, unit, prec } => {
                let m = pow_p(self.p, *prec);
                let e = BigUint::from(k.unsigned_abs());
                Ok(PadicNumber {
                    p: self.p,
                    repr: Repr::Unit {
                        val: val * k.unsigned_abs() as i64,
                        unit: unit.modpow(&e, &m),
                        prec: *prec,
                    },
                })
            }
        }
    }

    /// Teichmueller lift: the (p-1)-st root of unity congruent to the unit
    /// part of `self` mod p. Requires a unit.
    pub fn teichmuller(&self) -> Result<Self> {
        match &self.repr {
            Repr::Unit { val: 0, unit, prec } => {
                let m = pow_p(self.p, *prec);
                // x^(p^prec) stabilizes to the root of unity mod p^prec.
                let e = pow_p(self.p, *prec);
                let w = unit.modpow(&e, &m);
                Ok(PadicNumber { p: self.p, repr: Repr::Unit { val: 0, unit: w, prec: *prec } })
            }
            _ => Err(Error::NotAUnit),
        }
    }

    /// The 1-unit <x> = x * p^(-v) / teichmuller(x).
    pub fn angle(&self) -> Result<Self> {
        match &self.repr {
            Repr::Zero { .. } => Err(Error::DivisionByZero),
            Repr::Unit { unit, prec, .. } => {
                let u = PadicNumber {
                    p: self.p,
                    repr: Repr::Unit { val: 0, unit: unit.clone(), prec: *prec },
                };
                u.div(&u.teichmuller()?)
            }
        }
    }

    /// True when v(self - other) >= t (or the difference is zero to at
    /// least that precision).
    pub fn agrees_to(&self, other: &Self, t: i64) -> bool {
        let d = match self.sub(other) {
            Ok(d) => d,
            Err(_) => return false,
        };
        match d.repr {
            Repr::Zero { abs: None } => true,
            Repr::Zero { abs: Some(a) } => a >= t,
            Repr::Unit { val, .. } => val >= t,
        }
    }

    /// Base-p digits of the unit part, least significant first.
    pub fn digits(&self) -> Vec<u64> {
        match &self.repr {
            Repr::Zero { .. } => Vec::new(),
            Repr::Unit { unit, prec, .. } => {
                let mut out = Vec::with_capacity(*prec as usize);
                let p = BigUint::from(self.p);
                let mut u = unit.clone();
                for _ in 0..*prec {
                    let d = &u % &p;
                    out.push(d.to_u64_digits().first().copied().unwrap_or(0));
                    u /= &p;
                }
                out
            }
        }
    }
}

impl fmt::Display for PadicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Zero { abs: None } => write!(f, "0"),
            Repr::Zero { abs: Some(a) } => write!(f, "O({}^{})", self.p, a),
            Repr::Unit { val, unit, prec } => {
                write!(f, "{}^{}*{} + O({}^{})", self.p, val, unit, self.p, val + *prec as i64)
            }
        }
    }
}

/// Modular arithmetic in (Z/p^m)[s]/(s^2 - r); the workhorse behind the
/// convergent series and Hensel lifts below.
#[derive(Debug, Clone, PartialEq, Eq)]
struct ModQuad {
    a: BigUint,
    b: BigUint,
}

struct QuadCtx {
    r: u64,
    modulus: BigUint,
}

impl QuadCtx {
    fn new(p: u64, r: u64, m: u32) -> Self {
        QuadCtx { r, modulus: pow_p(p, m) }
    }

    fn mul(&self, x: &ModQuad, y: &ModQuad) -> ModQuad {
        let m = &self.modulus;
        let r = BigUint::from(self.r);
        ModQuad {
            a: (&x.a * &y.a + &x.b * &y.b % m * &r) % m,
            b: (&x.a * &y.b + &x.b * &y.a) % m,
        }
    }

    fn pow(&self, x: &ModQuad, e: &BigUint) -> ModQuad {
        let mut base = x.clone();
        let mut acc = ModQuad { a: BigUint::one(), b: BigUint::zero() };
        for i in 0..e.bits() {
            if e.bit(i) {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
        }
        acc
    }

    fn inv(&self, x: &ModQuad) -> ModQuad {
        // 1/(a + bs) = (a - bs)/(a^2 - r b^2)
        let m = &self.modulus;
        let r = BigUint::from(self.r);
        let norm = ((&x.a * &x.a + m - (&x.b * &x.b % m * &r) % m) % m) % m;
        let ninv = modinv(&norm, m);
        ModQuad { a: &x.a * &ninv % m, b: (m - &x.b) * &ninv % m }
    }
}

/// An element of the unramified quadratic extension K_p = Q_p(s), s^2 = r.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadExtNumber {
    pub p: u64,
    pub r: u64,
    pub a: PadicNumber,
    pub b: PadicNumber,
}

impl QuadExtNumber {
    pub fn new(a: PadicNumber, b: PadicNumber) -> Self {
        let p = a.prime();
        debug_assert_eq!(p, b.prime());
        QuadExtNumber { p, r: least_nonresidue(p), a, b }
    }

    pub fn from_padic(a: PadicNumber) -> Self {
        let p = a.prime();
        QuadExtNumber::new(a, PadicNumber::zero(p))
    }

    pub fn from_int(p: u64, n: i64, prec: u32) -> Self {
        QuadExtNumber::from_padic(PadicNumber::from_int(p, n, prec))
    }

    pub fn zero(p: u64) -> Self {
        QuadExtNumber::from_padic(PadicNumber::zero(p))
    }

    pub fn one(p: u64, prec: u32) -> Self {
        QuadExtNumber::from_padic(PadicNumber::one(p, prec))
    }

    /// The generator s itself.
    pub fn gen_s(p: u64, prec: u32) -> Self {
        QuadExtNumber::new(PadicNumber::zero(p), PadicNumber::one(p, prec))
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// Valuation (unramified: the min of the component valuations).
    pub fn val(&self) -> Option<i64> {
        match (self.a.val(), self.b.val()) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (Some(x), None) => Some(x),
            (None, Some(y)) => Some(y),
            (None, None) => None,
        }
    }

    pub fn abs_prec(&self) -> Option<i64> {
        match (self.a.abs_prec(), self.b.abs_prec()) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (Some(x), None) => Some(x),
            (None, y) => y,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(QuadExtNumber::new(self.a.add(&other.a)?, self.b.add(&other.b)?))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(QuadExtNumber::new(self.a.sub(&other.a)?, self.b.sub(&other.b)?))
    }

    pub fn neg(&self) -> Self {
        QuadExtNumber::new(self.a.neg(), self.b.neg())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        let rb = self.b.mul(&other.b)?.mul_int(self.r as i64);
        let a = self.a.mul(&other.a)?.add(&rb)?;
        let b = self.a.mul(&other.b)?.add(&self.b.mul(&other.a)?)?;
        Ok(QuadExtNumber::new(a, b))
    }

    pub fn mul_int(&self, k: i64) -> Self {
        QuadExtNumber::new(self.a.mul_int(k), self.b.mul_int(k))
    }

    pub fn shift(&self, k: i64) -> Self {
        QuadExtNumber::new(self.a.shift(k), self.b.shift(k))
    }

    /// Galois conjugation a + bs -> a - bs.
    pub fn conj(&self) -> Self {
        QuadExtNumber::new(self.a.clone(), self.b.neg())
    }

    /// Norm to Q_p.
    pub fn norm(&self) -> Result<PadicNumber> {
        let n = self.mul(&self.conj())?;
        debug_assert!(n.b.is_zero() || n.b.val().map_or(true, |v| {
            n.b.abs_prec().map_or(false, |a| v >= a)
        }));
        Ok(n.a)
    }

    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let n = self.norm()?;
        let ninv = QuadExtNumber::from_padic(n.inv()?);
        self.conj().mul(&ninv)
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.mul(&other.inv()?)
    }

    pub fn pow(&self, k: i64) -> Result<Self> {
        let prec = self.working_prec().unwrap_or(1);
        if k == 0 {
            return Ok(QuadExtNumber::one(self.p, prec));
        }
        let mut base = if k < 0 { self.inv()? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = QuadExtNumber::one(self.p, prec);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            base = base.mul(&base)?;
            e >>= 1;
        }
        Ok(acc)
    }

    /// Relative precision available for unit-level series work.
    fn working_prec(&self) -> Option<u32> {
        let v = self.val()?;
        let abs = self.abs_prec()?;
        let w = abs - v;
        if w <= 0 {
            None
        } else {
            Some(w as u32)
        }
    }

    fn to_modquad(&self, m: u32) -> ModQuad {
        let mm = pow_p(self.p, m);
        ModQuad { a: self.a.residue(m) % &mm, b: self.b.residue(m) % &mm }
    }

    fn from_modquad(p: u64, q: &ModQuad, abs: i64) -> Self {
        QuadExtNumber::new(
            PadicNumber::from_residue(p, q.a.clone(), abs),
            PadicNumber::from_residue(p, q.b.clone(), abs),
        )
    }

    /// Teichmueller lift in K_p: the (p^2 - 1)-st root of unity with the
    /// same residue. Requires a unit.
    pub fn teichmuller(&self) -> Result<Self> {
        let v = self.val().ok_or(Error::NotAUnit)?;
        if v != 0 {
            return Err(Error::NotAUnit);
        }
        let prec = self.working_prec().ok_or(Error::PrecisionExhausted("teichmuller"))?;
        let ctx = QuadCtx::new(self.p, self.r, prec);
        let mut w = self.to_modquad(prec);
        let psq = BigUint::from(self.p) * BigUint::from(self.p);
        for _ in 0..prec {
            w = ctx.pow(&w, &psq);
        }
        Ok(QuadExtNumber::from_modquad(self.p, &w, prec as i64))
    }

    /// <x>: the 1-unit part of a nonzero element; multiplicative.
    pub fn angle(&self) -> Result<Self> {
        let v = self.val().ok_or(Error::DivisionByZero)?;
        let u = self.shift(-v);
        u.div(&u.teichmuller()?)
    }

    /// Iwasawa logarithm log0: kills p and the Teichmueller part. Computed
    /// as log-series(x^(p^2 - 1)) / (p^2 - 1), which lands on a 1-unit
    /// without constructing the Teichmueller lift.
    pub fn log0(&self) -> Result<Self> {
        let v = self.val().ok_or(Error::DivisionByZero)?;
        let unit = self.shift(-v);
        let e = (self.p * self.p - 1) as i64;
        let one_unit = unit.pow(e)?;
        let series = one_unit.log_one_unit()?;
        let einv = PadicNumber::from_ratio(
            self.p,
            &BigInt::one(),
            &BigInt::from(e),
            series.abs_prec().unwrap_or(1).max(1) as u32,
        );
        series.mul(&QuadExtNumber::from_padic(einv))
    }

    /// The convergent log series on a 1-unit.
    fn log_one_unit(&self) -> Result<Self> {
        let one_unit = self;
        let abs = one_unit
            .abs_prec()
            .ok_or(Error::PrecisionExhausted("log0"))?;
        if abs <= 0 {
            return Err(Error::PrecisionExhausted("log0"));
        }
        let m = abs as u32;
        // headroom for the division by k in the series
        let guard = {
            let mut g = 0u32;
            let mut q = 1u64;
            while let Some(nq) = q.checked_mul(self.p) {
                if nq > 2 * m as u64 + 2 {
                    break;
                }
                q = nq;
                g += 1;
            }
            g + 1
        };
        let wide = m + guard;
        let ctx = QuadCtx::new(self.p, self.r, wide);
        let big_m = pow_p(self.p, m);
        // w = <x> - 1, v(w) >= 1. The residues are only known mod p^m; any
        // lift mod p^wide computes each w^k/k correctly mod p^m because the
        // lift ambiguity O(p^m) is damped by v(w^(k-1)) >= v_p(k).
        let mut w = one_unit.to_modquad(m);
        debug_assert!(!w.a.is_zero());
        w.a -= BigUint::one();
        let mut term = ModQuad { a: BigUint::one(), b: BigUint::zero() };
        let mut acc_a = BigUint::zero();
        let mut acc_b = BigUint::zero();
        // stop once k - v_p(k) >= m, so the tail vanishes mod p^m
        let kmax = m as u64 + guard as u64 + 2;
        for k in 1..=kmax {
            term = ctx.mul(&term, &w);
            // term = w^k known mod p^wide; divide by k = p^j * k' exactly
            let j = {
                let mut j = 0u32;
                let mut kk = k;
                while kk % self.p == 0 {
                    kk /= self.p;
                    j += 1;
                }
                j
            };
            let kprime = {
                let mut kk = k;
                for _ in 0..j {
                    kk /= self.p;
                }
                kk
            };
            let pj = pow_p(self.p, j);
            let kinv = modinv(&BigUint::from(kprime), &big_m);
            let ta = (&term.a / &pj) % &big_m * &kinv % &big_m;
            let tb = (&term.b / &pj) % &big_m * &kinv % &big_m;
            if k % 2 == 1 {
                acc_a = (acc_a + ta) % &big_m;
                acc_b = (acc_b + tb) % &big_m;
            } else {
                acc_a = (acc_a + &big_m - ta) % &big_m;
                acc_b = (acc_b + &big_m - tb) % &big_m;
            }
        }
        Ok(QuadExtNumber::from_modquad(
            self.p,
            &ModQuad { a: acc_a, b: acc_b },
            m as i64,
        ))
    }

    /// p-adic exponential; requires v(x) >= 1 (p odd).
    pub fn exp(&self) -> Result<Self> {
        if self.is_zero() {
            let prec = self.abs_prec().map(|a| a.max(1) as u32).unwrap_or(1);
            return Ok(QuadExtNumber::one(self.p, prec));
        }
        let v = self.val().unwrap();
        if v < 1 {
            return Err(Error::Invariant("exp needs valuation >= 1"));
        }
        let abs = self.abs_prec().ok_or(Error::PrecisionExhausted("exp"))?;
        let m = abs as u32;
        // v_p(k!) <= (k-1)/(p-1), so a fixed guard of m/(p-2)+2 digits suffices
        let guard = m / (self.p as u32 - 2) + 2;
        let wide = m + guard;
        let ctx = QuadCtx::new(self.p, self.r, wide);
        let big_m = pow_p(self.p, m);
        let w = self.to_modquad(m);
        let mut term = ModQuad { a: BigUint::one(), b: BigUint::zero() };
        let mut fact_p = 0u32; // v_p(k!)
        let mut fact_u = BigUint::one(); // unit part of k! mod p^m
        let mut acc_a = BigUint::one();
        let mut acc_b = BigUint::zero();
        let kmax = (m as u64 + 2) * 2;
        for k in 1..=kmax {
            term = ctx.mul(&term, &w);
            let mut kk = k;
            while kk % self.p == 0 {
                kk /= self.p;
                fact_p += 1;
            }
            fact_u = fact_u * BigUint::from(kk) % &big_m;
            if fact_p > wide {
                break;
            }
            let pj = pow_p(self.p, fact_p);
            let finv = modinv(&fact_u, &big_m);
            let ta = (&term.a / &pj) % &big_m * &finv % &big_m;
            let tb = (&term.b / &pj) % &big_m * &finv % &big_m;
            acc_a = (acc_a + ta) % &big_m;
            acc_b = (acc_b + tb) % &big_m;
            if k as i64 * v - fact_p as i64 >= m as i64 {
                break;
            }
        }
        Ok(QuadExtNumber::from_modquad(
            self.p,
            &ModQuad { a: acc_a, b: acc_b },
            m as i64,
        ))
    }

    /// Square root of a unit of K_p, seeded by brute force in the residue
    /// field and lifted by Newton iteration. Errors if no root exists.
    pub fn sqrt_unit(&self) -> Result<Self> {
        let v = self.val().ok_or(Error::DivisionByZero)?;
        if v != 0 {
            return Err(Error::NotAUnit);
        }
        let m = self.working_prec().ok_or(Error::PrecisionExhausted("sqrt"))?;
        let p = self.p;
        let a0 = self.a.residue(1).to_u64_digits().first().copied().unwrap_or(0);
        let b0 = self.b.residue(1).to_u64_digits().first().copied().unwrap_or(0);
        // residue-field square root by exhaustion (p is small)
        let mut seed = None;
        'outer: for x in 0..p {
            for y in 0..p {
                let sa = (x * x + y * y % p * self.r) % p;
                let sb = 2 * x * y % p;
                if sa == a0 % p && sb == b0 % p {
                    seed = Some((x, y));
                    break 'outer;
                }
            }
        }
        let (x0, y0) = seed.ok_or(Error::Invariant("element is not a square in K_p"))?;
        let ctx = QuadCtx::new(p, self.r, m);
        let target = self.to_modquad(m);
        let mut x = ModQuad { a: BigUint::from(x0), b: BigUint::from(y0) };
        let two_inv = modinv(&BigUint::from(2u32), &ctx.modulus);
        // Newton: x <- (x + t/x)/2, doubling accuracy each step
        let steps = 64 - (m as u64).leading_zeros() + 2;
        for _ in 0..steps {
            let xinv = ctx.inv(&x);
            let t = ctx.mul(&target, &xinv);
            let sum = ModQuad {
                a: (&x.a + &t.a) % &ctx.modulus,
                b: (&x.b + &t.b) % &ctx.modulus,
            };
            x = ModQuad {
                a: &sum.a * &two_inv % &ctx.modulus,
                b: &sum.b * &two_inv % &ctx.modulus,
            };
        }
        let root = QuadExtNumber::from_modquad(p, &x, m as i64);
        let check = root.mul(&root)?;
        if !check.agrees_with(self, m as i64) {
            return Err(Error::Invariant("sqrt verification failed"));
        }
        Ok(root)
    }

    pub fn agrees_with(&self, other: &Self, t: i64) -> bool {
        self.a.agrees_to(&other.a, t) && self.b.agrees_to(&other.b, t)
    }
}

impl fmt::Display for QuadExtNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) + ({})*s", self.a, self.b)
    }
}

/// A branch of the p-adic logarithm, fixed by the assigned value of log(p).
#[derive(Debug, Clone)]
pub struct LogBranch {
    pub lambda: QuadExtNumber,
}

impl LogBranch {
    /// Iwasawa branch log(p) = 0.
    pub fn iwasawa(p: u64) -> Self {
        LogBranch { lambda: QuadExtNumber::zero(p) }
    }

    /// The branch with log(q) = 0 for a given nonzero q in Q_p.
    pub fn vanishing_at(q: &PadicNumber) -> Result<Self> {
        let v = q.val().ok_or(Error::DivisionByZero)?;
        if v == 0 {
            return Err(Error::Invariant("branch point must have nonzero valuation"));
        }
        let lq = QuadExtNumber::from_padic(q.clone()).log0()?;
        let vinv = PadicNumber::from_ratio(
            q.prime(),
            &BigInt::from(-1),
            &BigInt::from(v),
            lq.abs_prec().unwrap_or(1).max(1) as u32,
        );
        Ok(LogBranch { lambda: lq.mul(&QuadExtNumber::from_padic(vinv))? })
    }

    /// log(x) in this branch: lambda * v(x) + log0(x).
    pub fn log(&self, x: &QuadExtNumber) -> Result<QuadExtNumber> {
        let v = x.val().ok_or(Error::DivisionByZero)?;
        x.log0()?.add(&self.lambda.mul_int(v))
    }
}

/// sqrt(D) in K_p for D a non-residue mod p, as b*s with b in Z_p^x.
/// The Hensel lift is seeded from the smaller of the two square roots of
/// D/r mod p, which pins the sign convention.
pub fn embed_quadratic(p: u64, d: i64, prec: u32) -> Result<QuadExtNumber> {
    let r = least_nonresidue(p);
    let dd = BigInt::from(d);
    match legendre(&dd, p) {
        0 => return Err(Error::SplitPrime { d, p }),
        1 => return Err(Error::SplitPrime { d, p }),
        _ => {}
    }
    // b^2 = D/r, a residue mod p
    let m = pow_p(p, prec);
    let rinv = modinv(&BigUint::from(r), &m);
    let c = mod_pos(&dd, &m) * rinv % &m;
    let c_roots = {
        let c0 = (&c % BigUint::from(p)).to_u64_digits().first().copied().unwrap_or(0);
        let mut roots: Vec<u64> = (1..p).filter(|x| x * x % p == c0).collect();
        roots.sort_unstable();
        roots
    };
    let seed = *c_roots.first().ok_or(Error::Invariant("no residue root"))?;
    // Newton lift of b0^2 = c
    let mut b = BigUint::from(seed);
    let two_inv = modinv(&BigUint::from(2u32), &m);
    let steps = 64 - (prec as u64).leading_zeros() + 2;
    for _ in 0..steps {
        let binv = modinv(&b, &m);
        b = (&b + &c * &binv % &m) % &m * &two_inv % &m;
    }
    debug_assert_eq!(&b * &b % &m, c);
    let bq = PadicNumber::from_unit(p, 0, b, prec);
    Ok(QuadExtNumber::new(PadicNumber::zero(p), bq))
}
