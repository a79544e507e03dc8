//! Rationals with p-power denominators, boundary points of the upper half
//! plane, and small modular-arithmetic helpers shared across the crate.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// p^k as a `BigUint`.
pub fn pow_p(p: u64, k: u32) -> BigUint {
    BigUint::from(p).pow(k)
}

/// p-adic valuation of a nonzero integer.
pub fn vp_int(n: &BigInt, p: u64) -> u32 {
    debug_assert!(!n.is_zero());
    let p = BigInt::from(p);
    let mut n = n.clone();
    let mut v = 0u32;
    loop {
        let (q, r) = n.div_rem(&p);
        if !r.is_zero() {
            return v;
        }
        n = q;
        v += 1;
    }
}

/// Inverse of `a` modulo `m` (must be coprime).
pub fn modinv(a: &BigUint, m: &BigUint) -> BigUint {
    let a = BigInt::from(a.clone());
    let m_int = BigInt::from(m.clone());
    let ext = a.extended_gcd(&m_int);
    assert!(ext.gcd.is_one(), "modinv of non-unit");
    let r = ext.x.mod_floor(&m_int);
    r.to_biguint().expect("mod_floor is nonnegative")
}

/// Nonnegative residue of `n` modulo `m`.
pub fn mod_pos(n: &BigInt, m: &BigUint) -> BigUint {
    let m_int = BigInt::from(m.clone());
    n.mod_floor(&m_int).to_biguint().expect("nonnegative")
}

/// Legendre symbol (a|p) for odd prime p, in {-1, 0, 1}.
pub fn legendre(a: &BigInt, p: u64) -> i32 {
    let r = mod_pos(a, &BigUint::from(p));
    if r.is_zero() {
        return 0;
    }
    let e = BigUint::from((p - 1) / 2);
    let s = r.modpow(&e, &BigUint::from(p));
    if s.is_one() {
        1
    } else {
        -1
    }
}

/// Smallest positive quadratic non-residue mod p.
pub fn least_nonresidue(p: u64) -> u64 {
    (2..p)
        .find(|&r| legendre(&BigInt::from(r), p) == -1)
        .expect("p > 2 has a non-residue")
}

/// Deterministic trial-division primality test; inputs here are small.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// An element of Z[1/p]: `num / p^exp`, normalized so that either `exp == 0`
/// or p does not divide `num`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PRat {
    pub p: u64,
    pub num: BigInt,
    pub exp: u32,
}

impl PRat {
    pub fn new(p: u64, num: BigInt, exp: u32) -> Self {
        let mut r = PRat { p, num, exp };
        r.normalize();
        r
    }

    pub fn zero(p: u64) -> Self {
        PRat { p, num: BigInt::zero(), exp: 0 }
    }

    pub fn one(p: u64) -> Self {
        PRat { p, num: BigInt::one(), exp: 0 }
    }

    pub fn from_int(p: u64, n: i64) -> Self {
        PRat { p, num: BigInt::from(n), exp: 0 }
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.exp = 0;
            return;
        }
        let p = BigInt::from(self.p);
        while self.exp > 0 {
            let (q, r) = self.num.div_rem(&p);
            if r.is_zero() {
                self.num = q;
                self.exp -= 1;
            } else {
                break;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// p-adic valuation; `None` for zero.
    pub fn val(&self) -> Option<i64> {
        if self.num.is_zero() {
            return None;
        }
        if self.exp > 0 {
            Some(-(self.exp as i64))
        } else {
            Some(vp_int(&self.num, self.p) as i64)
        }
    }

    pub fn neg(&self) -> Self {
        PRat { p: self.p, num: -self.num.clone(), exp: self.exp }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.p, other.p);
        let e = self.exp.max(other.exp);
        let num = &self.num * BigInt::from(pow_p(self.p, e - self.exp))
            + &other.num * BigInt::from(pow_p(self.p, e - other.exp));
        PRat::new(self.p, num, e)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.p, other.p);
        PRat::new(self.p, &self.num * &other.num, self.exp + other.exp)
    }

    pub fn mul_int(&self, k: i64) -> Self {
        PRat::new(self.p, &self.num * BigInt::from(k), self.exp)
    }

    /// Multiply by p^k (k may be negative).
    pub fn shift(&self, k: i64) -> Self {
        if self.num.is_zero() {
            return self.clone();
        }
        if k >= 0 {
            PRat::new(self.p, &self.num * BigInt::from(pow_p(self.p, k as u32)), self.exp)
        } else {
            PRat::new(self.p, self.num.clone(), self.exp + (-k) as u32)
        }
    }

    /// Truncation of the p-adic expansion below p^m: the canonical
    /// representative a with 0 <= a < p^m and v(self - a) >= m.
    pub fn reduce_mod(&self, m: i64) -> Self {
        match self.val() {
            None => PRat::zero(self.p),
            Some(v) if v >= m => PRat::zero(self.p),
            Some(_) => {
                let k = m + self.exp as i64;
                debug_assert!(k > 0);
                let modulus = pow_p(self.p, k as u32);
                let r = mod_pos(&self.num, &modulus);
                PRat::new(self.p, BigInt::from(r), self.exp)
            }
        }
    }

    /// Exact comparison as rational numbers (shared p).
    pub fn cmp_rat(&self, other: &Self) -> Ordering {
        let d = self.sub(other);
        match d.num.sign() {
            Sign::Minus => Ordering::Less,
            Sign::NoSign => Ordering::Equal,
            Sign::Plus => Ordering::Greater,
        }
    }
}

impl fmt::Display for PRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}^{}", self.num, self.p, self.exp)
        }
    }
}

/// A point of P^1(Q): `num/den` with gcd 1, den >= 0, infinity = 1/0.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cusp {
    pub num: BigInt,
    pub den: BigInt,
}

impl Cusp {
    pub fn new(num: BigInt, den: BigInt) -> Self {
        if den.is_zero() {
            assert!(!num.is_zero(), "0/0 is not a point of P^1");
            return Cusp { num: BigInt::one(), den: BigInt::zero() };
        }
        let g = num.gcd(&den);
        let (mut num, mut den) = (num / &g, den / &g);
        if den.is_negative() {
            num = -num;
            den = -den;
        }
        Cusp { num, den }
    }

    pub fn infinity() -> Self {
        Cusp { num: BigInt::one(), den: BigInt::zero() }
    }

    pub fn from_int(n: i64) -> Self {
        Cusp { num: BigInt::from(n), den: BigInt::one() }
    }

    pub fn from_frac(n: i64, d: i64) -> Self {
        Cusp::new(BigInt::from(n), BigInt::from(d))
    }

    pub fn is_infinity(&self) -> bool {
        self.den.is_zero()
    }

    pub fn from_prat(x: &PRat) -> Self {
        Cusp::new(x.num.clone(), BigInt::from(pow_p(x.p, x.exp)))
    }
}

impl fmt::Display for Cusp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinity() {
            write!(f, "oo")
        } else if self.den.is_one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Continued-fraction convergents of num/den (den > 0), returned as the
/// sequence p_k/q_k including the final exact value.
pub fn convergents(num: &BigInt, den: &BigInt) -> Vec<(BigInt, BigInt)> {
    let mut out = Vec::new();
    let (mut a, mut b) = (num.clone(), den.clone());
    // h_{-2} = 0/1 and h_{-1} = 1/0
    let (mut p0, mut q0) = (BigInt::zero(), BigInt::one());
    let (mut p1, mut q1) = (BigInt::one(), BigInt::zero());
    while !b.is_zero() {
        let (q, r) = a.div_mod_floor(&b);
        let pk = &q * &p1 + &p0;
        let qk = &q * &q1 + &q0;
        out.push((pk.clone(), qk.clone()));
        p0 = p1;
        q0 = q1;
        p1 = pk;
        q1 = qk;
        a = b;
        b = r;
    }
    out
}
