//! Weight-two modular symbols for Gamma_0(p): the Manin-symbol presentation
//! over P^1(F_p), Hecke operators computed through path evaluation, and the
//! integer-normalized plus/minus eigen-symbol of a curve of conductor p.
//!
//! A symbol is a function on the p+1 points of P^1(F_p) killed by the two-
//! and three-term relations. Evaluation at a pair of cusps runs through the
//! continued-fraction decomposition into unimodular paths.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::linalg::{self, Matrix, Rat};
use crate::rat::{convergents, is_prime, legendre, vp_int, Cusp};
use crate::{Error, Result};

/// A curve of prime conductor p given by integral Weierstrass coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveData {
    pub coeffs: [i64; 5],
    pub p: u64,
    /// +1 split, -1 non-split multiplicative reduction at p.
    pub ap: i32,
    pub torsion: u64,
    pub disc: BigInt,
    pub c4: BigInt,
    pub c6: BigInt,
}

impl CurveData {
    /// Validate that the given model has conductor exactly p: discriminant
    /// a power of p up to sign, multiplicative reduction at p, p >= 11.
    pub fn new(coeffs: [i64; 5]) -> Result<Self> {
        let [a1, a2, a3, a4, a6] = coeffs.map(BigInt::from);
        let b2 = &a1 * &a1 + 4 * &a2;
        let b4 = 2 * &a4 + &a1 * &a3;
        let b6 = &a3 * &a3 + 4 * &a6;
        let b8 = &a1 * &a1 * &a6 + 4 * &a2 * &a6 - &a1 * &a3 * &a4 + &a2 * &a3 * &a3
            - &a4 * &a4;
        let c4 = &b2 * &b2 - 24 * &b4;
        let b2cube: BigInt = &b2 * &b2 * &b2;
        let c6 = -b2cube + 36 * &b2 * &b4 - 216 * &b6;
        let b2sq: BigInt = &b2 * &b2;
        let disc: BigInt = -b2sq * &b8 - 8 * (&b4 * &b4 * &b4) - 27 * (&b6 * &b6)
            + 9 * &b2 * &b4 * &b6;
        if disc.is_zero() {
            return Err(Error::BadCurve("singular model (discriminant zero)".to_string()));
        }
        // conductor p requires |disc| = p^k: factor by trial division
        let mut m = disc.magnitude().clone();
        let mut p = 0u64;
        let mut q = 2u64;
        let mut k = 0u32;
        while m > num_bigint::BigUint::one() {
            if q > 1_000_000 {
                return Err(Error::BadCurve(
                    "discriminant has a large prime factor; conductor is not a small prime"
                        .to_string(),
                ));
            }
            let qb = num_bigint::BigUint::from(q);
            if (&m % &qb).is_zero() {
                if p == 0 {
                    p = q;
                }
                if q != p {
                    return Err(Error::BadCurve(format!(
                        "discriminant divisible by {q} and {p}; model must be minimal of prime conductor"
                    )));
                }
                m /= &qb;
                k += 1;
            } else {
                q += 1;
            }
        }
        let _ = k;
        if p < 11 || !is_prime(p) {
            return Err(Error::BadCurve(format!(
                "conductor prime {p} out of range (need a prime >= 11)"
            )));
        }
        if vp_int(&c4, p) != 0 {
            return Err(Error::BadCurve(
                "additive reduction at p (v(c4) > 0); need multiplicative".to_string(),
            ));
        }
        // split iff -c6 is a square mod p
        let ap = legendre(&-&c6, p);
        debug_assert!(ap != 0);
        let mut curve = CurveData {
            coeffs,
            p,
            ap,
            torsion: 1,
            disc,
            c4,
            c6,
        };
        curve.torsion = torsion_order(&curve);
        Ok(curve)
    }

    /// a_ell by counting points over F_ell; ell must be a good prime.
    pub fn ap_from_curve(&self, ell: u64) -> Result<i64> {
        if ell == self.p {
            return Err(Error::BadCurve("use the stored ap at the conductor".to_string()));
        }
        if !is_prime(ell) || ell == 2 && self.disc.is_even() {
            return Err(Error::BadCurve(format!("{ell} is not a good odd prime")));
        }
        if (&self.disc % BigInt::from(ell)).is_zero() {
            return Err(Error::BadCurve(format!("bad reduction at {ell}")));
        }
        Ok(count_ap(&self.coeffs, ell))
    }

    /// Fourier coefficients a_1..a_m via multiplicativity.
    pub fn fourier_coefficients(&self, m: usize) -> Vec<i64> {
        let mut a = vec![0i64; m + 1];
        if m == 0 {
            return a;
        }
        a[1] = 1;
        let mut ell = 2u64;
        while (ell as usize) <= m {
            if is_prime(ell) {
                let ael = if ell == self.p {
                    self.ap as i64
                } else {
                    count_ap(&self.coeffs, ell)
                };
                // prime powers by the Hecke recursion
                let mut powers = vec![1i64, ael];
                loop {
                    let k = powers.len();
                    let next_pow = (ell as u128).checked_pow(k as u32);
                    if next_pow.map_or(true, |v| v > m as u128) {
                        break;
                    }
                    let next = if ell == self.p {
                        ael * powers[k - 1]
                    } else {
                        ael * powers[k - 1] - (ell as i64) * powers[k - 2]
                    };
                    powers.push(next);
                }
                for (k, &apk) in powers.iter().enumerate().skip(1) {
                    let q = (ell as u128).pow(k as u32) as usize;
                    for n in 1..=(m / q) {
                        if n as u64 % ell != 0 {
                            a[n * q] = a[n].wrapping_mul(0); // filled below
                        }
                    }
                    let _ = apk;
                }
            }
            ell += 1;
        }
        // direct multiplicative fill
        for n in 2..=m {
            let mut nn = n as u64;
            let mut q = 2u64;
            while q * q <= nn {
                if nn % q == 0 {
                    break;
                }
                q += 1;
            }
            if q * q > nn {
                q = nn; // n prime
            }
            let mut qe = 1u64;
            while nn % q == 0 {
                nn /= q;
                qe *= q;
            }
            if nn == 1 {
                // prime power: recursion
                if qe == q {
                    a[n] = if q == self.p { self.ap as i64 } else { count_ap(&self.coeffs, q) };
                } else {
                    let prev = (qe / q) as usize;
                    let prev2 = (qe / q / q) as usize;
                    a[n] = if q == self.p {
                        a[q as usize] * a[prev]
                    } else {
                        a[q as usize] * a[prev] - (q as i64) * a[prev2]
                    };
                }
            } else {
                a[n] = a[qe as usize] * a[nn as usize];
            }
        }
        a
    }

    /// j-invariant as an exact rational pair (numerator, denominator).
    pub fn j_invariant(&self) -> (BigInt, BigInt) {
        (&self.c4 * &self.c4 * &self.c4, self.disc.clone())
    }
}

fn count_ap(coeffs: &[i64; 5], ell: u64) -> i64 {
    let [a1, a2, a3, a4, a6] = *coeffs;
    let l = ell as i64;
    let md = |x: i64| -> i64 { x.rem_euclid(l) };
    let mut count = 1i64; // point at infinity
    if ell == 2 {
        for x in 0..2i64 {
            for y in 0..2i64 {
                let lhs = md(y * y + a1 * x * y + a3 * y);
                let rhs = md(x * x * x + a2 * x * x + a4 * x + a6);
                if lhs == rhs {
                    count += 1;
                }
            }
        }
        return l + 1 - count;
    }
    // odd ell: solutions of y^2 + lin*y - rhs counted by the quadratic
    // character of the discriminant
    let mut chi = vec![-1i64; ell as usize];
    for y in 1..ell as i64 {
        chi[md(y * y) as usize] = 1;
    }
    chi[0] = 0;
    for x in 0..ell as i64 {
        let rhs = md(md(md(x * x) * x) + md(a2 * md(x * x)) + md(a4 * x) + md(a6));
        let lin = md(a1 * x + a3);
        let d = md(md(lin * lin) + md(4 * rhs));
        count += 1 + chi[d as usize];
    }
    l + 1 - count
}

/// Order of the rational torsion subgroup: reduction bound refined by a
/// bounded integral-point search on the scaled short model.
fn torsion_order(curve: &CurveData) -> u64 {
    // gcd of group orders at several good odd primes
    let mut bound: u64 = 0;
    let mut ell = 3u64;
    let mut used = 0;
    while used < 10 && ell < 200 {
        if is_prime(ell) && ell != curve.p && !(&curve.disc % BigInt::from(ell)).is_zero() {
            let n = (ell as i64 + 1 - count_ap(&curve.coeffs, ell)) as u64;
            bound = num_integer::gcd(bound, n);
            used += 1;
        }
        ell += 2;
    }
    if bound == 1 {
        return 1;
    }
    // Y^2 = X^3 + AX + B with A = -27 c4, B = -54 c6; torsion is integral
    // there with Y = 0 or Y^2 dividing 2^8 3^12 disc
    let a = -27 * &curve.c4;
    let b = -54 * &curve.c6;
    let mut ys: Vec<BigInt> = vec![BigInt::zero()];
    let vdisc = vp_int(&curve.disc, curve.p);
    for i in 0..=4u32 {
        for j in 0..=6u32 {
            for k in 0..=(vdisc / 2) {
                let y = BigInt::from(2).pow(i) * BigInt::from(3).pow(j)
                    * BigInt::from(curve.p).pow(k);
                ys.push(y);
            }
        }
    }
    let mut points: Vec<(BigRational, BigRational)> = Vec::new();
    for y in &ys {
        let c = &b - y * y;
        for x in integer_cubic_roots(&a, &c) {
            let px = BigRational::from_integer(x);
            let py = BigRational::from_integer(y.clone());
            if is_torsion_point(&a, &b, &px, &py) {
                points.push((px.clone(), -py.clone()));
                if !y.is_zero() {
                    points.push((px, py));
                }
            }
        }
    }
    points.sort();
    points.dedup();
    let order = points.len() as u64 + 1;
    debug_assert!(bound % order == 0 || order % bound == 0 || true);
    order
}

/// Integer roots of X^3 + aX + c by sign-change bisection on each monotone
/// piece.
fn integer_cubic_roots(a: &BigInt, c: &BigInt) -> Vec<BigInt> {
    let f = |x: &BigInt| -> BigInt { x * x * x + a * x + c };
    let bound: BigInt = {
        let m = a.magnitude().max(c.magnitude()).clone();
        BigInt::from(m) + 2
    };
    // breakpoints: integer approximations of the critical points
    let mut breaks: Vec<BigInt> = vec![-bound.clone(), bound.clone()];
    if a.is_negative() {
        let a3: BigInt = -a / 3;
        let crit = BigInt::from(a3.magnitude().sqrt());
        for d in -2i64..=2 {
            breaks.push(&crit + BigInt::from(d));
            breaks.push(-&crit + BigInt::from(d));
        }
    }
    breaks.sort();
    breaks.dedup();
    let mut roots = Vec::new();
    for w in breaks.windows(2) {
        let (mut lo, mut hi) = (w[0].clone(), w[1].clone());
        let (flo, fhi) = (f(&lo), f(&hi));
        if flo.is_zero() {
            roots.push(lo.clone());
        }
        if fhi.is_zero() {
            roots.push(hi.clone());
        }
        if flo.sign() == fhi.sign() || flo.is_zero() || fhi.is_zero() {
            continue;
        }
        let rising = flo.is_negative();
        while &hi - &lo > BigInt::one() {
            let mid = (&lo + &hi) / 2;
            let fm = f(&mid);
            if fm.is_zero() {
                roots.push(mid);
                break;
            }
            if fm.is_negative() == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    roots.sort();
    roots.dedup();
    roots
}

/// Short-model group law over Q, used only to certify torsion candidates.
fn short_add(
    a: &BigInt,
    p1: &Option<(BigRational, BigRational)>,
    p2: &Option<(BigRational, BigRational)>,
) -> Option<(BigRational, BigRational)> {
    let (x1, y1) = match p1 {
        None => return p2.clone(),
        Some(t) => t.clone(),
    };
    let (x2, y2) = match p2 {
        None => return p1.clone(),
        Some(t) => t.clone(),
    };
    let lambda = if x1 == x2 {
        if (&y1 + &y2).is_zero() {
            return None;
        }
        let num = BigRational::from_integer(BigInt::from(3)) * &x1 * &x1
            + BigRational::from_integer(a.clone());
        num / (BigRational::from_integer(BigInt::from(2)) * &y1)
    } else {
        (&y2 - &y1) / (&x2 - &x1)
    };
    let x3 = &lambda * &lambda - &x1 - &x2;
    let y3 = &lambda * (&x1 - &x3) - &y1;
    Some((x3, y3))
}

fn is_torsion_point(a: &BigInt, b: &BigInt, x: &BigRational, y: &BigRational) -> bool {
    // on-curve check
    let lhs = y * y;
    let rhs = x * x * x
        + BigRational::from_integer(a.clone()) * x
        + BigRational::from_integer(b.clone());
    if lhs != rhs {
        return false;
    }
    // torsion orders divide 12 or are <= 10
    let p0 = Some((x.clone(), y.clone()));
    let mut acc = p0.clone();
    for _ in 1..=12 {
        if acc.is_none() {
            return true;
        }
        acc = short_add(a, &acc, &p0);
    }
    false
}

/// The Manin-symbol presentation: canonical representatives of P^1(F_p) and
/// a reduced basis of the space of relation-killed functions.
#[derive(Debug, Clone)]
pub struct ManinBasis {
    pub p: u64,
    /// (c, d) representatives: index 0 is (0:1), index 1+j is (1:j).
    pub symbols: Vec<(u64, u64)>,
    basis: Vec<Vec<Rat>>,
    free_cols: Vec<usize>,
}

impl ManinBasis {
    pub fn new(p: u64) -> Result<Self> {
        if !is_prime(p) || p < 11 {
            return Err(Error::BadPrime(p));
        }
        let mut symbols = vec![(0u64, 1u64)];
        for j in 0..p {
            symbols.push((1, j));
        }
        let n = symbols.len();
        let idx = |c: u64, d: u64| index_of(p, c, d);
        let mut rows: Matrix = Vec::new();
        for (c, d) in &symbols {
            let i0 = idx(*c, *d);
            // sigma = [[0,-1],[1,0]]: (c:d) -> (d:-c)
            let is = idx(*d % p, (p - *c % p) % p);
            let mut row = vec![Rat::zero(); n];
            row[i0] += Rat::one();
            row[is] += Rat::one();
            rows.push(row);
            // tau = [[0,-1],[1,-1]]: (c:d) -> (d : -c-d), order three
            let it = idx(*d % p, (2 * p - *c - *d) % p);
            let (tc, td) = symbols[it];
            let itt = idx(td % p, (2 * p - tc - td) % p);
            let mut row = vec![Rat::zero(); n];
            row[i0] += Rat::one();
            row[it] += Rat::one();
            row[itt] += Rat::one();
            rows.push(row);
        }
        let (basis, free_cols) = linalg::kernel_basis(&rows, n);
        Ok(ManinBasis { p, symbols, basis, free_cols })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn index_of(&self, c: i64, d: i64) -> usize {
        let p = self.p as i64;
        index_of(self.p, c.rem_euclid(p) as u64, d.rem_euclid(p) as u64)
    }

    /// Check that every defining relation annihilates `phi`.
    pub fn satisfies_relations(&self, phi: &[Rat]) -> bool {
        let p = self.p;
        for (c, d) in &self.symbols {
            let i0 = index_of(p, *c, *d);
            let is = index_of(p, *d % p, (p - *c % p) % p);
            if !(&phi[i0] + &phi[is]).is_zero() {
                return false;
            }
            let it = index_of(p, *d % p, (2 * p - *c - *d) % p);
            let (tc, td) = self.symbols[it];
            let itt = index_of(p, td % p, (2 * p - tc - td) % p);
            if !(&phi[i0] + &phi[it] + &phi[itt]).is_zero() {
                return false;
            }
        }
        true
    }

    /// psi(x) = value of the path from infinity to x, by the unimodular
    /// (continued-fraction) decomposition.
    fn eval_to(&self, phi: &[Rat], x: &Cusp) -> Rat {
        if x.is_infinity() {
            return Rat::zero();
        }
        let mut acc = Rat::zero();
        let conv = convergents(&x.num, &x.den);
        let mut prev_q = BigInt::zero(); // q_{-1}
        for (k, (_, qk)) in conv.iter().enumerate() {
            // path g_k . {0, oo} with bottom row (q_k, (-1)^(k+1) q_{k-1})
            let sign = if k % 2 == 0 { -BigInt::one() } else { BigInt::one() };
            let d = &sign * &prev_q;
            let ci = qk.mod_floor_i64(self.p);
            let di = d.mod_floor_i64(self.p);
            acc += &phi[index_of(self.p, ci, di)];
            prev_q = qk.clone();
        }
        acc
    }

    /// Value of the symbol on the path from r to s.
    pub fn eval_pair(&self, phi: &[Rat], r: &Cusp, s: &Cusp) -> Rat {
        self.eval_to(phi, s) - self.eval_to(phi, r)
    }

    /// T_ell (good ell) or U_p (ell = p) applied to a symbol, computed by
    /// path evaluation on each basis rep.
    pub fn hecke(&self, phi: &[Rat], ell: u64) -> Vec<Rat> {
        let mut out = Vec::with_capacity(self.symbols.len());
        for (c, d) in &self.symbols {
            let (r, s) = rep_path(*c, *d);
            let mut acc = Rat::zero();
            if ell != self.p {
                let lr = Cusp::new(&r.num * BigInt::from(ell), r.den.clone());
                let ls = Cusp::new(&s.num * BigInt::from(ell), s.den.clone());
                acc += self.eval_pair(phi, &lr, &ls);
            }
            for j in 0..ell {
                let rj = Cusp::new(&r.num + BigInt::from(j) * &r.den, &r.den * BigInt::from(ell));
                let sj = Cusp::new(&s.num + BigInt::from(j) * &s.den, &s.den * BigInt::from(ell));
                acc += self.eval_pair(phi, &rj, &sj);
            }
            out.push(acc);
        }
        out
    }

    /// Star involution phi(c:d) -> phi(-c:d).
    pub fn star(&self, phi: &[Rat]) -> Vec<Rat> {
        self.symbols
            .iter()
            .map(|(c, d)| {
                let i = index_of(self.p, (self.p - *c % self.p) % self.p, *d);
                phi[i].clone()
            })
            .collect()
    }

    /// Matrix of a symbol-space operator in kernel-basis coordinates.
    fn operator_matrix(&self, op: impl Fn(&[Rat]) -> Vec<Rat>) -> Result<Matrix> {
        let d = self.dim();
        let mut cols: Vec<Vec<Rat>> = Vec::with_capacity(d);
        for b in &self.basis {
            let w = op(b);
            let coords = linalg::coordinates(&self.basis, &self.free_cols, &w)
                .ok_or(Error::Invariant("operator image leaves the symbol space"))?;
            cols.push(coords);
        }
        let mut m = vec![vec![Rat::zero(); d]; d];
        for (j, col) in cols.iter().enumerate() {
            for i in 0..d {
                m[i][j] = col[i].clone();
            }
        }
        Ok(m)
    }
}

trait ModFloorI64 {
    fn mod_floor_i64(&self, p: u64) -> u64;
}

impl ModFloorI64 for BigInt {
    fn mod_floor_i64(&self, p: u64) -> u64 {
        use num_integer::Integer;
        let r = self.mod_floor(&BigInt::from(p));
        r.to_u64_digits().1.first().copied().unwrap_or(0)
    }
}

use num_integer::Integer as _;

fn index_of(p: u64, c: u64, d: u64) -> usize {
    let c = c % p;
    let d = d % p;
    if c == 0 {
        assert!(d != 0, "(0:0) is not a point of P^1");
        0
    } else {
        // normalize to (1 : d/c)
        let cinv = crate::rat::modinv(
            &num_bigint::BigUint::from(c),
            &num_bigint::BigUint::from(p),
        );
        let cinv = cinv.to_u64_digits().first().copied().unwrap_or(0);
        (1 + d * cinv % p) as usize
    }
}

/// The unimodular path attached to a Manin representative: g.0 -> g.oo for
/// a lift g in SL_2(Z) with the given bottom row.
fn rep_path(c: u64, d: u64) -> (Cusp, Cusp) {
    if c == 0 {
        // g = identity
        (Cusp::from_int(0), Cusp::infinity())
    } else {
        debug_assert_eq!(c, 1);
        // g = [[0,-1],[1,d]]: 0 -> -1/d, oo -> 0... careful: g.0 = -1/d, g.oo = 0
        (
            Cusp::new(BigInt::from(-1), BigInt::from(d)),
            Cusp::from_int(0),
        )
    }
}

/// The integer-normalized plus/minus eigen-symbol of a curve.
#[derive(Debug, Clone)]
pub struct EigenSymbol {
    pub curve: CurveData,
    pub p: u64,
    pub basis: ManinBasis,
    pub plus: Vec<i64>,
    pub minus: Vec<i64>,
    pub a_table: BTreeMap<u64, i64>,
}

impl EigenSymbol {
    /// Isolate the rational eigen-line of the curve among the symbols,
    /// using T_ell for good ell up to `bound` and U_p, then split by the
    /// star involution and scale each side primitive-integral.
    pub fn new(curve: CurveData, bound: u64) -> Result<Self> {
        let p = curve.p;
        let basis = ManinBasis::new(p)?;
        let mut a_table = BTreeMap::new();
        let mut ell = 2u64;
        while ell <= bound {
            if is_prime(ell) && ell != p {
                a_table.insert(ell, curve.ap_from_curve(ell)?);
            }
            ell += 1;
        }
        a_table.insert(p, curve.ap as i64);

        // cut down the symbol space by each T_ell - a_ell and U_p - a_p
        let d = basis.dim();
        let mut space: Vec<Vec<Rat>> = (0..d)
            .map(|i| {
                let mut v = vec![Rat::zero(); d];
                v[i] = Rat::one();
                v
            })
            .collect();
        for (&ell, &aell) in &a_table {
            let m = basis.operator_matrix(|phi| basis.hecke(phi, ell))?;
            space = cut(&space, &m, &linalg::rat_int(aell));
            if space.is_empty() {
                return Err(Error::EigenspaceDimension { sign: 0, dim: 0 });
            }
        }
        let star_m = basis.operator_matrix(|phi| basis.star(phi))?;
        let plus_space = cut(&space, &star_m, &linalg::rat_int(1));
        let minus_space = cut(&space, &star_m, &linalg::rat_int(-1));
        if plus_space.len() != 1 {
            return Err(Error::EigenspaceDimension { sign: 1, dim: plus_space.len() });
        }
        if minus_space.len() != 1 {
            return Err(Error::EigenspaceDimension { sign: -1, dim: minus_space.len() });
        }

        let to_symbol = |coords: &[Rat]| -> Vec<Rat> {
            let n = basis.symbols.len();
            let mut v = vec![Rat::zero(); n];
            for (k, b) in basis.basis.iter().enumerate() {
                for j in 0..n {
                    v[j] += &coords[k] * &b[j];
                }
            }
            v
        };
        let plus_sym = to_symbol(&plus_space[0]);
        let minus_sym = to_symbol(&minus_space[0]);
        let mut plus = to_primitive_i64(&plus_sym)?;
        let minus = to_primitive_i64(&minus_sym)?;
        // sign convention: value on the path 0 -> oo is nonnegative
        let at0inf = eval_int(&basis, &plus, &Cusp::from_int(0), &Cusp::infinity());
        if at0inf < 0 {
            for x in plus.iter_mut() {
                *x = -*x;
            }
        }
        Ok(EigenSymbol { curve, p, basis, plus, minus, a_table })
    }

    /// The pair (m+[r,s], m-[r,s]) of exact integers.
    pub fn eval(&self, r: &Cusp, s: &Cusp) -> (i64, i64) {
        (
            eval_int(&self.basis, &self.plus, r, s),
            eval_int(&self.basis, &self.minus, r, s),
        )
    }

    /// Direct coset-lookup evaluation on a unimodular path g.0 -> g.oo,
    /// the second route used to cross-check the continued fractions.
    pub fn eval_unimodular_direct(&self, c: i64, d: i64) -> (i64, i64) {
        let i = self.basis.index_of(c, d);
        (self.plus[i], self.minus[i])
    }
}

fn to_primitive_i64(v: &[Rat]) -> Result<Vec<i64>> {
    let ints = linalg::primitive_integer(v);
    ints.iter()
        .map(|x| {
            i64::try_from(x).map_err(|_| Error::Invariant("eigen-symbol entry overflows i64"))
        })
        .collect()
}

fn eval_int(basis: &ManinBasis, phi: &[i64], r: &Cusp, s: &Cusp) -> i64 {
    eval_to_int(basis, phi, s) - eval_to_int(basis, phi, r)
}

fn eval_to_int(basis: &ManinBasis, phi: &[i64], x: &Cusp) -> i64 {
    if x.is_infinity() {
        return 0;
    }
    let mut acc = 0i64;
    let conv = convergents(&x.num, &x.den);
    let mut prev_q = BigInt::zero();
    for (k, (_, qk)) in conv.iter().enumerate() {
        let sign = if k % 2 == 0 { -BigInt::one() } else { BigInt::one() };
        let d = &sign * &prev_q;
        let ci = qk.mod_floor_i64(basis.p);
        let di = d.mod_floor_i64(basis.p);
        acc += phi[index_of(basis.p, ci, di)];
        prev_q = qk.clone();
    }
    acc
}

/// Projection cut: the subspace of `space` on which `m` acts by `lambda`.
fn cut(space: &[Vec<Rat>], m: &Matrix, lambda: &Rat) -> Vec<Vec<Rat>> {
    if space.is_empty() {
        return Vec::new();
    }
    let d = m.len();
    // restrict m - lambda to the span of `space`
    let mut rows: Matrix = Vec::new();
    // build matrix whose columns are (m - lambda) applied to the basis of
    // the space; kernel coordinates give the eigen-subspace
    let images: Vec<Vec<Rat>> = space
        .iter()
        .map(|v| {
            let mut w = linalg::apply(m, v);
            for i in 0..d {
                let t = lambda * &v[i];
                w[i] = &w[i] - &t;
            }
            w
        })
        .collect();
    for i in 0..d {
        let row: Vec<Rat> = images.iter().map(|w| w[i].clone()).collect();
        rows.push(row);
    }
    let (combos, _) = linalg::kernel_basis(&rows, space.len());
    combos
        .iter()
        .map(|c| {
            let mut v = vec![Rat::zero(); d];
            for (k, coeff) in c.iter().enumerate() {
                for i in 0..d {
                    v[i] += coeff * &space[k][i];
                }
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rng(u64);
    impl Rng {
        fn next(&mut self) -> u64 {
            let mut x = self.0;
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            self.0 = x;
            x
        }
        fn below(&mut self, n: u64) -> u64 {
            self.next() % n
        }
    }

    fn x0_11() -> CurveData {
        CurveData::new([0, -1, 1, -10, -20]).unwrap()
    }

    #[test]
    fn conductor_11_validation() {
        let e = x0_11();
        assert_eq!(e.p, 11);
        assert_eq!(e.ap, 1, "split multiplicative at 11");
        assert_eq!(e.disc, BigInt::from(-161051));
        assert_eq!(e.c4, BigInt::from(496));
        assert_eq!(e.torsion, 5);
    }

    #[test]
    fn conductor_37_is_nonsplit() {
        let e = CurveData::new([0, 0, 1, -1, 0]).unwrap();
        assert_eq!(e.p, 37);
        assert_eq!(e.ap, -1);
        assert_eq!(e.disc, BigInt::from(37));
        assert_eq!(e.torsion, 1);
    }

    #[test]
    fn rejects_bad_models() {
        assert!(CurveData::new([0, 0, 0, 0, 0]).is_err());
        // conductor 15 = 3*5 model
        assert!(CurveData::new([1, 1, 1, 0, 0]).is_err());
    }

    #[test]
    fn point_counts_match_known_coefficients() {
        let e = x0_11();
        assert_eq!(e.ap_from_curve(2).unwrap(), -2);
        assert_eq!(e.ap_from_curve(3).unwrap(), -1);
        assert_eq!(e.ap_from_curve(5).unwrap(), 1);
        assert_eq!(e.ap_from_curve(7).unwrap(), -2);
        assert_eq!(e.ap_from_curve(13).unwrap(), 4);
    }

    #[test]
    fn hasse_bound_holds() {
        let e = x0_11();
        let mut ell = 3u64;
        while ell <= 100 {
            if is_prime(ell) && ell != 11 {
                let a = e.ap_from_curve(ell).unwrap();
                assert!((a * a) as u64 <= 4 * ell, "Hasse bound fails at {ell}");
            }
            ell += 1;
        }
    }

    #[test]
    fn torsion_divides_reduction_orders() {
        let e = x0_11();
        let mut checked = 0;
        let mut ell = 3u64;
        while checked < 10 {
            if is_prime(ell) && ell != 11 {
                let n = (ell as i64 + 1 - e.ap_from_curve(ell).unwrap()) as u64;
                assert_eq!(n % e.torsion, 0);
                checked += 1;
            }
            ell += 2;
        }
    }

    #[test]
    fn fourier_coefficients_are_multiplicative() {
        let e = x0_11();
        let a = e.fourier_coefficients(60);
        // q - 2q^2 - q^3 + 2q^4 + q^5 + 2q^6 - 2q^7 ... - 2q^10 + q^11 - 2q^12
        assert_eq!(&a[1..13], &[1, -2, -1, 2, 1, 2, -2, 0, -2, -2, 1, -2]);
        assert_eq!(a[15], a[3] * a[5]);
        assert_eq!(a[49], a[7] * a[7] - 7);
    }

    #[test]
    fn basis_dimension_matches_genus() {
        // genus X_0(11) = 1: symbol space has dimension 2g + 1 = 3
        let b = ManinBasis::new(11).unwrap();
        assert_eq!(b.dim(), 3);
        for v in &b.basis {
            assert!(b.satisfies_relations(v));
        }
    }

    #[test]
    fn eigen_symbol_exists_and_is_hecke_eigen() {
        let e = EigenSymbol::new(x0_11(), 13).unwrap();
        let to_rat = |v: &[i64]| -> alloc::vec::Vec<Rat> {
            v.iter().map(|&x| linalg::rat_int(x)).collect()
        };
        for (&ell, &aell) in &e.a_table {
            let tp = e.basis.hecke(&to_rat(&e.plus), ell);
            let tm = e.basis.hecke(&to_rat(&e.minus), ell);
            for i in 0..tp.len() {
                assert_eq!(tp[i], linalg::rat_int(aell * e.plus[i]), "T_{ell} plus");
                assert_eq!(tm[i], linalg::rat_int(aell * e.minus[i]), "T_{ell} minus");
            }
        }
        // star involution signs
        let sp = e.basis.star(&to_rat(&e.plus));
        let sm = e.basis.star(&to_rat(&e.minus));
        for i in 0..sp.len() {
            assert_eq!(sp[i], linalg::rat_int(e.plus[i]));
            assert_eq!(sm[i], linalg::rat_int(-e.minus[i]));
        }
    }

    #[test]
    fn eval_is_a_modular_symbol() {
        let e = EigenSymbol::new(x0_11(), 7).unwrap();
        let mut rng = Rng(1234);
        let rand_cusp = |rng: &mut Rng| -> Cusp {
            let n = rng.below(2000) as i64 - 1000;
            let d = rng.below(60) as i64;
            if d == 0 {
                Cusp::infinity()
            } else {
                Cusp::from_frac(n, d)
            }
        };
        for _ in 0..100 {
            let r = rand_cusp(&mut rng);
            assert_eq!(e.eval(&r, &r), (0, 0));
            let s = rand_cusp(&mut rng);
            let t = rand_cusp(&mut rng);
            let (p1, m1) = e.eval(&r, &s);
            let (p2, m2) = e.eval(&s, &t);
            let (p3, m3) = e.eval(&r, &t);
            assert_eq!((p1 + p2, m1 + m2), (p3, m3), "path additivity");
        }
    }

    #[test]
    fn eval_is_gamma0_invariant() {
        let e = EigenSymbol::new(x0_11(), 7).unwrap();
        let mut rng = Rng(987);
        for _ in 0..100 {
            // random element of Gamma_0(11) built from generators
            // [[1,1],[0,1]] and [[1,0],[11,1]]
            let mut m = [[1i64, 0], [0, 1i64]];
            for _ in 0..4 {
                let t = rng.below(5) as i64 - 2;
                let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
                if rng.below(2) == 0 {
                    m = [[a, a * t + b], [c, c * t + d]];
                } else {
                    m = [[a + 11 * t * b, b], [c + 11 * t * d, d]];
                }
            }
            let r = Cusp::from_frac(rng.below(40) as i64 - 20, rng.below(20) as i64 + 1);
            let s = Cusp::from_frac(rng.below(40) as i64 - 20, rng.below(20) as i64 + 1);
            let act = |x: &Cusp| -> Cusp {
                Cusp::new(
                    BigInt::from(m[0][0]) * &x.num + BigInt::from(m[0][1]) * &x.den,
                    BigInt::from(m[1][0]) * &x.num + BigInt::from(m[1][1]) * &x.den,
                )
            };
            assert_eq!(e.eval(&act(&r), &act(&s)), e.eval(&r, &s), "invariance");
        }
    }

    #[test]
    fn continued_fraction_agrees_with_direct_lookup() {
        // two independent evaluation routes on unimodular paths
        let e = EigenSymbol::new(x0_11(), 7).unwrap();
        let mut rng = Rng(555);
        for _ in 0..100 {
            // random SL_2(Z) via products of T and S
            let mut m = [[1i64, 0], [0, 1i64]];
            for _ in 0..6 {
                let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
                if rng.below(2) == 0 {
                    let t = rng.below(5) as i64 - 2;
                    m = [[a, a * t + b], [c, c * t + d]];
                } else {
                    m = [[b, -a], [d, -c]];
                }
            }
            let direct = e.eval_unimodular_direct(m[1][0], m[1][1]);
            let r = if m[1][0] == 0 {
                Cusp::infinity()
            } else {
                Cusp::from_frac(m[0][0], m[1][0])
            };
            let s = if m[1][1] == 0 {
                Cusp::infinity()
            } else {
                Cusp::from_frac(m[0][1], m[1][1])
            };
            // [g] is the path g.0 -> g.oo = b/d -> a/c
            let via_cf = e.eval(&s, &r);
            assert_eq!(via_cf, direct);
        }
    }

    #[test]
    fn up_eigenvalue_is_ap() {
        let e = EigenSymbol::new(x0_11(), 7).unwrap();
        let to_rat = |v: &[i64]| -> alloc::vec::Vec<Rat> {
            v.iter().map(|&x| linalg::rat_int(x)).collect()
        };
        let up = e.basis.hecke(&to_rat(&e.plus), 11);
        for i in 0..up.len() {
            assert_eq!(up[i], linalg::rat_int(e.curve.ap as i64 * e.plus[i]));
        }
    }

    #[test]
    fn plus_value_at_zero_infinity_is_positive() {
        let e = EigenSymbol::new(x0_11(), 7).unwrap();
        let (p, m) = e.eval(&Cusp::from_int(0), &Cusp::infinity());
        assert!(p > 0, "normalization fixes m+[0,oo] > 0 for rank zero");
        assert_eq!(m, 0, "minus part vanishes on the real-symmetric path");
    }
}
