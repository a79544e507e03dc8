//! Exact arithmetic in Q(sqrt(D)) and the Weierstrass group law over it,
//! used to certify recognized points and to run bounded point searches.

use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// An element a + b sqrt(D) of Q(sqrt(D)).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QD {
    pub d: i64,
    pub a: BigRational,
    pub b: BigRational,
}

impl QD {
    pub fn new(d: i64, a: BigRational, b: BigRational) -> Self {
        QD { d, a, b }
    }

    pub fn from_rational(d: i64, a: BigRational) -> Self {
        QD { d, a, b: BigRational::zero() }
    }

    pub fn from_int(d: i64, n: i64) -> Self {
        QD::from_rational(d, BigRational::from_integer(BigInt::from(n)))
    }

    pub fn zero(d: i64) -> Self {
        QD::from_int(d, 0)
    }

    pub fn one(d: i64) -> Self {
        QD::from_int(d, 1)
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn add(&self, o: &Self) -> Self {
        QD::new(self.d, &self.a + &o.a, &self.b + &o.b)
    }

    pub fn sub(&self, o: &Self) -> Self {
        QD::new(self.d, &self.a - &o.a, &self.b - &o.b)
    }

    pub fn neg(&self) -> Self {
        QD::new(self.d, -self.a.clone(), -self.b.clone())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let d = BigRational::from_integer(BigInt::from(self.d));
        QD::new(
            self.d,
            &self.a * &o.a + (&self.b * &o.b) * &d,
            &self.a * &o.b + &self.b * &o.a,
        )
    }

    pub fn mul_int(&self, n: i64) -> Self {
        let n = BigRational::from_integer(BigInt::from(n));
        QD::new(self.d, &self.a * &n, &self.b * &n)
    }

    pub fn conj(&self) -> Self {
        QD::new(self.d, self.a.clone(), -self.b.clone())
    }

    pub fn norm(&self) -> BigRational {
        let d = BigRational::from_integer(BigInt::from(self.d));
        &self.a * &self.a - (&self.b * &self.b) * &d
    }

    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.norm();
        debug_assert!(!n.is_zero(), "nonzero element of a field has nonzero norm");
        let c = self.conj();
        Some(QD::new(self.d, &c.a / &n, &c.b / &n))
    }

    pub fn div(&self, o: &Self) -> Option<Self> {
        Some(self.mul(&o.inv()?))
    }

    /// Exact square root in Q(sqrt(D)), if one exists.
    pub fn sqrt(&self) -> Option<Self> {
        if self.is_zero() {
            return Some(self.clone());
        }
        if self.b.is_zero() {
            // rational z: sqrt is rational or a pure sqrt(D) multiple
            if let Some(r) = sqrt_rational(&self.a) {
                return Some(QD::from_rational(self.d, r));
            }
            let d = BigRational::from_integer(BigInt::from(self.d));
            if let Some(r) = sqrt_rational(&(&self.a / &d)) {
                return Some(QD::new(self.d, BigRational::zero(), r));
            }
            return None;
        }
        // w = c + e sqrt(D): c^2 + D e^2 = a, 2ce = b
        // c^2 is a root of t^2 - a t + D b^2/4
        let disc = self.norm();
        let s = sqrt_rational(&disc)?;
        let two = BigRational::from_integer(BigInt::from(2));
        for sign in [1i64, -1] {
            let t = (&self.a + &s * BigRational::from_integer(BigInt::from(sign))) / &two;
            if t.is_zero() {
                continue;
            }
            if let Some(c) = sqrt_rational(&t) {
                if c.is_zero() {
                    continue;
                }
                let e = &self.b / (&two * &c);
                let cand = QD::new(self.d, c, e);
                if &cand.mul(&cand) == self {
                    return Some(cand);
                }
            }
        }
        None
    }

    /// Naive height: max of |numerator|, |denominator| over both
    /// coordinates put over a common denominator.
    pub fn height(&self) -> BigUint {
        let den = num_integer::lcm(self.a.denom().clone(), self.b.denom().clone());
        let na = (&self.a * BigRational::from_integer(den.clone())).to_integer();
        let nb = (&self.b * BigRational::from_integer(den.clone())).to_integer();
        let m = na.magnitude().max(nb.magnitude()).max(den.magnitude());
        m.clone()
    }
}

/// Exact square root of a rational, if it is a perfect square.
pub fn sqrt_rational(x: &BigRational) -> Option<BigRational> {
    if x.is_negative() {
        return None;
    }
    if x.is_zero() {
        return Some(BigRational::zero());
    }
    let n = x.numer().magnitude();
    let d = x.denom().magnitude();
    let sn = n.sqrt();
    let sd = d.sqrt();
    if &(&sn * &sn) == n && &(&sd * &sd) == d {
        Some(BigRational::new(BigInt::from(sn), BigInt::from(sd)))
    } else {
        None
    }
}

/// A point of E(Q(sqrt(D))) on a fixed integral Weierstrass model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KPoint {
    Infinity,
    Affine(QD, QD),
}

/// The Weierstrass group law over Q(sqrt(D)) for a curve with integer
/// coefficients.
#[derive(Debug, Clone)]
pub struct CurveOverK {
    pub d: i64,
    pub coeffs: [i64; 5],
}

impl CurveOverK {
    pub fn new(d: i64, coeffs: [i64; 5]) -> Self {
        CurveOverK { d, coeffs }
    }

    fn ai(&self, i: usize) -> QD {
        QD::from_int(self.d, self.coeffs[i])
    }

    pub fn on_curve(&self, pt: &KPoint) -> bool {
        match pt {
            KPoint::Infinity => true,
            KPoint::Affine(x, y) => {
                let [a1, a2, a3, a4, a6] =
                    [self.ai(0), self.ai(1), self.ai(2), self.ai(3), self.ai(4)];
                let lhs = y.mul(y).add(&a1.mul(x).mul(y)).add(&a3.mul(y));
                let rhs = x
                    .mul(x)
                    .mul(x)
                    .add(&a2.mul(x).mul(x))
                    .add(&a4.mul(x))
                    .add(&a6);
                lhs == rhs
            }
        }
    }

    pub fn neg_point(&self, pt: &KPoint) -> KPoint {
        match pt {
            KPoint::Infinity => KPoint::Infinity,
            KPoint::Affine(x, y) => {
                let [a1, _, a3, _, _] =
                    [self.ai(0), self.ai(1), self.ai(2), self.ai(3), self.ai(4)];
                KPoint::Affine(x.clone(), y.neg().sub(&a1.mul(x)).sub(&a3))
            }
        }
    }

    pub fn add_points(&self, p: &KPoint, q: &KPoint) -> KPoint {
        let [a1, a2, a3, a4, _a6] =
            [self.ai(0), self.ai(1), self.ai(2), self.ai(3), self.ai(4)];
        let (x1, y1) = match p {
            KPoint::Infinity => return q.clone(),
            KPoint::Affine(x, y) => (x.clone(), y.clone()),
        };
        let (x2, y2) = match q {
            KPoint::Infinity => return p.clone(),
            KPoint::Affine(x, y) => (x.clone(), y.clone()),
        };
        let lambda;
        let nu;
        if x1 != x2 {
            let dx = x2.sub(&x1);
            lambda = y2.sub(&y1).div(&dx).expect("dx nonzero");
            nu = y1.mul(&x2).sub(&y2.mul(&x1)).div(&dx).expect("dx nonzero");
        } else {
            // doubling or inverse pair
            let denom = y1.mul_int(2).add(&a1.mul(&x1)).add(&a3);
            if denom.is_zero() {
                return KPoint::Infinity;
            }
            let x1sq = x1.mul(&x1);
            let num = x1sq.mul_int(3).add(&a2.mul(&x1).mul_int(2)).add(&a4).sub(&a1.mul(&y1));
            lambda = num.div(&denom).expect("denominator nonzero");
            nu = y1.sub(&lambda.mul(&x1));
            if y1 != y2 {
                return KPoint::Infinity;
            }
        }
        let x3 = lambda
            .mul(&lambda)
            .add(&a1.mul(&lambda))
            .sub(&a2)
            .sub(&x1)
            .sub(&x2);
        let y3 = lambda.add(&a1).mul(&x3).neg().sub(&nu).sub(&a3);
        KPoint::Affine(x3, y3)
    }

    pub fn mul_point(&self, n: i64, p: &KPoint) -> KPoint {
        let mut base = if n < 0 { self.neg_point(p) } else { p.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = KPoint::Infinity;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.add_points(&acc, &base);
            }
            base = self.add_points(&base, &base);
            e >>= 1;
        }
        acc
    }

    /// Both y-coordinates over K for a given x, when the point exists.
    pub fn lift_x(&self, x: &QD) -> Option<(QD, QD)> {
        let [a1, a2, a3, a4, a6] =
            [self.ai(0), self.ai(1), self.ai(2), self.ai(3), self.ai(4)];
        let lin = a1.mul(x).add(&a3);
        let rhs = x
            .mul(x)
            .mul(x)
            .add(&a2.mul(x).mul(x))
            .add(&a4.mul(x))
            .add(&a6);
        // y^2 + lin y - rhs = 0
        let disc = lin.mul(&lin).add(&rhs.mul_int(4));
        let w = disc.sqrt()?;
        let two_inv = QD::new(
            self.d,
            BigRational::new(BigInt::one(), BigInt::from(2)),
            BigRational::zero(),
        );
        let y1 = lin.neg().add(&w).mul(&two_inv);
        let y2 = lin.neg().sub(&w).mul(&two_inv);
        Some((y1, y2))
    }

    /// True when some multiple n P with 1 <= n <= 24 is the identity.
    pub fn is_torsion(&self, p: &KPoint) -> bool {
        let mut acc = p.clone();
        for _ in 1..=24 {
            if acc == KPoint::Infinity {
                return true;
            }
            acc = self.add_points(&acc, p);
        }
        acc == KPoint::Infinity
    }

    /// Bounded search for affine points with x = (e + f sqrt(D))/g.
    pub fn search_points(&self, e_bound: i64, f_bound: i64, g_bound: i64) -> Vec<KPoint> {
        let mut out = Vec::new();
        for g in 1..=g_bound {
            for e in -e_bound..=e_bound {
                for f in -f_bound..=f_bound {
                    let x = QD::new(
                        self.d,
                        BigRational::new(BigInt::from(e), BigInt::from(g)),
                        BigRational::new(BigInt::from(f), BigInt::from(g)),
                    );
                    if let Some((y, _)) = self.lift_x(&x) {
                        let pt = KPoint::Affine(x, y);
                        debug_assert!(self.on_curve(&pt));
                        out.push(pt);
                    }
                }
            }
        }
        out
    }
}
