//! Canonical-form algebra of the compact open balls of P^1(Q_p), the
//! (p+1)-regular tree of lattice classes, and the action of SL_2(Z[1/p]).
//!
//! Everything in this module is exact integer arithmetic: balls carry
//! centers in Z[1/p] (truncated p-adic expansions) and the tree layer never
//! sees p-adic rounding. An affine ball is {x : v(x - a) >= m}; the other
//! balls of P^1 are complements of affine ones. Oriented edges of the tree
//! biject with balls: the edge from a vertex down to a child corresponds to
//! the child's ball, the edge up to the parent to the complement of the
//! vertex's own ball.

use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::padic::{PadicNumber, QuadExtNumber};
use crate::rat::{pow_p, Cusp, PRat};
use crate::{Error, Result};

/// A compact open ball of P^1(Q_p) in canonical form. `coaffine` means the
/// complement of the stored affine ball.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Ball {
    pub p: u64,
    pub coaffine: bool,
    pub level: i64,
    pub center: PRat,
}

impl Ball {
    pub fn affine(p: u64, center: PRat, level: i64) -> Self {
        Ball { p, coaffine: false, level, center: center.reduce_mod(level) }
    }

    pub fn coaffine(p: u64, center: PRat, level: i64) -> Self {
        Ball { p, coaffine: true, level, center: center.reduce_mod(level) }
    }

    /// Z_p as a ball.
    pub fn zp(p: u64) -> Self {
        Ball::affine(p, PRat::zero(p), 0)
    }

    /// P^1(Q_p) - Z_p, the ball of the distinguished edge.
    pub fn e_infinity(p: u64) -> Self {
        Ball::coaffine(p, PRat::zero(p), 0)
    }

    pub fn complement(&self) -> Self {
        Ball { p: self.p, coaffine: !self.coaffine, level: self.level, center: self.center.clone() }
    }

    /// Canonical sample point: the center for an affine ball, infinity for
    /// a coaffine one.
    pub fn sample(&self) -> SamplePoint {
        if self.coaffine {
            SamplePoint::Infinity
        } else {
            SamplePoint::Finite(self.center.clone())
        }
    }

    /// Exact membership for a point of Z[1/p] (or infinity).
    pub fn contains(&self, x: &SamplePoint) -> bool {
        match x {
            SamplePoint::Infinity => self.coaffine,
            SamplePoint::Finite(t) => {
                let inside = t
                    .sub(&self.center)
                    .val()
                    .map_or(true, |v| v >= self.level);
                inside != self.coaffine
            }
        }
    }

    /// Exact membership for any point of P^1(Q).
    pub fn contains_cusp(&self, x: &Cusp) -> bool {
        match x.den.is_zero() {
            true => self.coaffine,
            false => {
                // v_p(x - center) >= level?
                let scaled = &x.num * BigInt::from(pow_p(self.p, self.center.exp))
                    - &self.center.num * &x.den;
                let inside = if scaled.is_zero() {
                    true
                } else {
                    let v = crate::rat::vp_int(&scaled, self.p) as i64
                        - crate::rat::vp_int(&x.den, self.p) as i64
                        - self.center.exp as i64;
                    v >= self.level
                };
                inside != self.coaffine
            }
        }
    }

    /// Membership of a p-adic number, exact at tracked precision.
    pub fn contains_padic(&self, x: &PadicNumber) -> Result<bool> {
        let c = PadicNumber::from_prat(&self.center, 1);
        let d = x.sub(&c)?;
        let inside = match d.val() {
            Some(v) => v >= self.level,
            None => match d.abs_prec() {
                None => true,
                Some(a) if a >= self.level => true,
                Some(_) => return Err(Error::PrecisionExhausted("ball membership")),
            },
        };
        Ok(inside != self.coaffine)
    }

    /// The p balls one tree level deeper whose disjoint union is `self`.
    pub fn refine(&self) -> Vec<Ball> {
        let p = self.p;
        let mut out = Vec::with_capacity(p as usize);
        if !self.coaffine {
            // children of the target vertex (level, center)
            for j in 0..p {
                let c = self.center.add(&PRat::from_int(p, j as i64).shift(self.level));
                out.push(Ball::affine(p, c, self.level + 1));
            }
        } else {
            // the target vertex is (level-1, center mod p^(level-1)); all its
            // edges except the one pointing back into the complement
            let down = self.center.reduce_mod(self.level - 1);
            out.push(Ball::coaffine(p, down.clone(), self.level - 1));
            for j in 0..p {
                let c = down.add(&PRat::from_int(p, j as i64).shift(self.level - 1));
                let child = Ball::affine(p, c, self.level);
                if child.center != self.center {
                    out.push(child);
                }
            }
        }
        debug_assert_eq!(out.len(), p as usize);
        out
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coaffine {
            write!(f, "P1 - B({}, {})", self.center, self.level)
        } else {
            write!(f, "B({}, {})", self.center, self.level)
        }
    }
}

/// A point of P^1(Q_p) representable in the tree layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SamplePoint {
    Finite(PRat),
    Infinity,
}

impl fmt::Display for SamplePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplePoint::Finite(t) => write!(f, "{t}"),
            SamplePoint::Infinity => write!(f, "oo"),
        }
    }
}

/// A 2x2 matrix over Z[1/p]. Elements of the Ihara group have determinant 1;
/// the general constructor admits any invertible matrix (needed for ball
/// images under embedded tori).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GammaElement {
    pub a: PRat,
    pub b: PRat,
    pub c: PRat,
    pub d: PRat,
}

impl GammaElement {
    pub fn new(a: PRat, b: PRat, c: PRat, d: PRat) -> Self {
        GammaElement { a, b, c, d }
    }

    pub fn from_ints(p: u64, a: i64, b: i64, c: i64, d: i64) -> Self {
        GammaElement {
            a: PRat::from_int(p, a),
            b: PRat::from_int(p, b),
            c: PRat::from_int(p, c),
            d: PRat::from_int(p, d),
        }
    }

    pub fn identity(p: u64) -> Self {
        GammaElement::from_ints(p, 1, 0, 0, 1)
    }

    /// x -> x + n.
    pub fn translation(p: u64, n: &BigInt) -> Self {
        GammaElement {
            a: PRat::one(p),
            b: PRat::new(p, n.clone(), 0),
            c: PRat::zero(p),
            d: PRat::one(p),
        }
    }

    /// x -> -1/x.
    pub fn s_flip(p: u64) -> Self {
        GammaElement::from_ints(p, 0, -1, 1, 0)
    }

    /// x -> p^(2k) x, as diag(p^k, p^-k) of determinant one.
    pub fn p_scale(p: u64, k: i64) -> Self {
        GammaElement {
            a: PRat::one(p).shift(k),
            b: PRat::zero(p),
            c: PRat::zero(p),
            d: PRat::one(p).shift(-k),
        }
    }

    pub fn det(&self) -> PRat {
        self.a.mul(&self.d).sub(&self.b.mul(&self.c))
    }

    pub fn is_unimodular(&self) -> bool {
        let d = self.det();
        d.exp == 0 && d.num.is_one()
    }

    pub fn mul(&self, other: &Self) -> Self {
        GammaElement {
            a: self.a.mul(&other.a).add(&self.b.mul(&other.c)),
            b: self.a.mul(&other.b).add(&self.b.mul(&other.d)),
            c: self.c.mul(&other.a).add(&self.d.mul(&other.c)),
            d: self.c.mul(&other.b).add(&self.d.mul(&other.d)),
        }
    }

    /// Inverse of a determinant +-p^k matrix.
    pub fn inv(&self) -> Self {
        let det = self.det();
        let v = det.val().expect("invertible matrix");
        let unit = det.shift(-v);
        assert!(
            unit.num.abs() == BigInt::one(),
            "inverse requires determinant +-p^k"
        );
        let sign = if det.num.is_negative() { -1 } else { 1 };
        GammaElement {
            a: self.d.shift(-v).mul_int(sign),
            b: self.b.neg().shift(-v).mul_int(sign),
            c: self.c.neg().shift(-v).mul_int(sign),
            d: self.a.shift(-v).mul_int(sign),
        }
    }

    /// Image of a boundary point of P^1(Q).
    pub fn act_cusp(&self, x: &Cusp) -> Cusp {
        let p = self.a.p;
        let e = self.a.exp.max(self.b.exp).max(self.c.exp).max(self.d.exp);
        let scale = |r: &PRat| -> BigInt { &r.num * BigInt::from(pow_p(p, e - r.exp)) };
        let (sa, sb, sc, sd) = (scale(&self.a), scale(&self.b), scale(&self.c), scale(&self.d));
        Cusp::new(&sa * &x.num + &sb * &x.den, &sc * &x.num + &sd * &x.den)
    }

    /// Image ball under the Moebius action, in canonical form.
    pub fn act(&self, ball: &Ball) -> Ball {
        let p = self.a.p;
        let m = self.mul(&ball_matrix(ball));
        canonical_ball(p, &m)
    }
}

impl fmt::Display for GammaElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}; {}, {}]", self.a, self.b, self.c, self.d)
    }
}


/// Matrix whose image of Z_p is the given ball (for coaffine balls, the
/// affine matrix composed with the chart taking Z_p onto the complement).
fn ball_matrix(ball: &Ball) -> GammaElement {
    let p = ball.p;
    let aff = GammaElement {
        a: PRat::one(p).shift(ball.level),
        b: ball.center.clone(),
        c: PRat::zero(p),
        d: PRat::one(p),
    };
    if ball.coaffine {
        // N * [[0,1],[p,0]]
        aff.mul(&GammaElement {
            a: PRat::zero(p),
            b: PRat::one(p),
            c: PRat::one(p).shift(1),
            d: PRat::zero(p),
        })
    } else {
        aff
    }
}

/// Canonical form of the ball M(Z_p) for an invertible matrix M.
fn canonical_ball(p: u64, m: &GammaElement) -> Ball {
    let det = m.det();
    let vdet = det.val().expect("singular matrix");
    let vg = m.c.val();
    let vd = m.d.val();
    let coaffine = match (vg, vd) {
        (None, _) => false,
        (Some(_), None) => true,
        (Some(g), Some(d)) => d >= g,
    };
    if !coaffine {
        let vd = vd.expect("delta nonzero in affine case");
        let level = vdet - 2 * vd;
        let center = padic_quotient(&m.b, &m.d, level);
        Ball::affine(p, center, level)
    } else {
        let vg = vg.expect("gamma nonzero in coaffine case");
        let level = vdet + 1 - 2 * vg;
        let center = padic_quotient(&m.a, &m.c, level);
        Ball::coaffine(p, center, level)
    }
}

/// Truncation of the p-adic expansion of num/den below p^level. The
/// denominator may have prime-to-p content; it is inverted modulo a p-power.
fn padic_quotient(num: &PRat, den: &PRat, level: i64) -> PRat {
    let p = num.p;
    if num.is_zero() {
        return PRat::zero(p);
    }
    let v = num.val().unwrap() - den.val().unwrap();
    if v >= level {
        return PRat::zero(p);
    }
    let digits = (level - v) as u32;
    let modulus = pow_p(p, digits);
    let vn = if num.exp > 0 { 0 } else { crate::rat::vp_int(&num.num, p) };
    let vd = if den.exp > 0 { 0 } else { crate::rat::vp_int(&den.num, p) };
    let nu = &num.num / BigInt::from(pow_p(p, vn));
    let de = &den.num / BigInt::from(pow_p(p, vd));
    let n_res = crate::rat::mod_pos(&nu, &modulus);
    let d_inv = crate::rat::modinv(&crate::rat::mod_pos(&de, &modulus), &modulus);
    let u = n_res * d_inv % &modulus;
    PRat::new(p, BigInt::from(u), 0).shift(v)
}

/// A vertex of the tree: the lattice class spanned by (p^level, 0) and
/// (class, 1).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Vertex {
    pub p: u64,
    pub level: i64,
    pub class: PRat,
}

impl Vertex {
    pub fn new(p: u64, level: i64, class: PRat) -> Self {
        Vertex { p, level, class: class.reduce_mod(level) }
    }

    pub fn base(p: u64) -> Self {
        Vertex::new(p, 0, PRat::zero(p))
    }

    /// The p+1 edges with this vertex as source: first the edge toward the
    /// parent, then the p children in digit order.
    pub fn edges_at(&self) -> Vec<OrientedEdge> {
        let p = self.p;
        let mut out = Vec::with_capacity(p as usize + 1);
        out.push(OrientedEdge {
            ball: Ball::coaffine(p, self.class.clone(), self.level),
        });
        for j in 0..p {
            let c = self.class.add(&PRat::from_int(p, j as i64).shift(self.level));
            out.push(OrientedEdge { ball: Ball::affine(p, c, self.level + 1) });
        }
        out
    }

    /// Graph distance to the base vertex.
    pub fn distance_to_base(&self) -> i64 {
        if self.class.is_zero() {
            self.level.abs()
        } else {
            let e = -self.class.val().unwrap();
            debug_assert!(e > 0 || self.level > 0);
            self.level + 2 * e.max(0)
        }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v({}, {})", self.level, self.class)
    }
}

/// An oriented edge of the tree, identified with its ball.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OrientedEdge {
    pub ball: Ball,
}

impl OrientedEdge {
    pub fn from_ball(ball: Ball) -> Self {
        OrientedEdge { ball }
    }

    /// The distinguished edge, with ball P^1 - Z_p.
    pub fn distinguished(p: u64) -> Self {
        OrientedEdge { ball: Ball::e_infinity(p) }
    }

    pub fn reverse(&self) -> Self {
        OrientedEdge { ball: self.ball.complement() }
    }

    pub fn source(&self) -> Vertex {
        let b = &self.ball;
        if b.coaffine {
            Vertex::new(b.p, b.level, b.center.clone())
        } else {
            Vertex::new(b.p, b.level - 1, b.center.reduce_mod(b.level - 1))
        }
    }

    pub fn target(&self) -> Vertex {
        let b = &self.ball;
        if b.coaffine {
            Vertex::new(b.p, b.level - 1, b.center.reduce_mod(b.level - 1))
        } else {
            Vertex::new(b.p, b.level, b.center.clone())
        }
    }
}

impl fmt::Display for OrientedEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "edge[{}]", self.ball)
    }
}

/// Reduce an oriented edge to the distinguished edge: returns (gamma, o)
/// with gamma in SL_2(Z[1/p]) and gamma . e equal to e_infinity when o = +1,
/// to its reverse when o = -1.
pub fn reduce_edge(e: &OrientedEdge) -> (GammaElement, i32) {
    let p = e.ball.p;
    if e.ball.coaffine {
        let (g, o) = reduce_affine(p, Ball::affine(p, e.ball.center.clone(), e.ball.level));
        return (g, -o);
    }
    reduce_affine(p, e.ball.clone())
}

fn reduce_affine(p: u64, mut ball: Ball) -> (GammaElement, i32) {
    debug_assert!(!ball.coaffine);
    let mut acc = GammaElement::identity(p);
    loop {
        match ball.center.val() {
            None => {
                // centered at zero: pump the level toward 0 or 1
                if ball.level == 0 {
                    return (acc, -1);
                }
                if ball.level == 1 {
                    let s = GammaElement::s_flip(p);
                    return (s.mul(&acc), 1);
                }
                // p_scale(k) shifts the level by +2k; leave remainder 0 or 1
                let k = -ball.level.div_euclid(2);
                let g = GammaElement::p_scale(p, k);
                ball = g.act(&ball);
                acc = g.mul(&acc);
            }
            Some(v) if v >= 0 => {
                // integral center: translate it away
                debug_assert_eq!(ball.center.exp, 0);
                let g = GammaElement::translation(p, &(-ball.center.num.clone()));
                ball = g.act(&ball);
                acc = g.mul(&acc);
            }
            Some(_) => {
                // center has a pole: flip through x -> -1/x
                let g = GammaElement::s_flip(p);
                ball = g.act(&ball);
                acc = g.mul(&acc);
            }
        }
    }
}

/// The vertex whose affinoid contains an element of K_p - Q_p.
pub fn reduction_point(z: &QuadExtNumber) -> Result<Vertex> {
    let p = z.p;
    let m = match z.b.val() {
        Some(v) => v,
        None => return Err(Error::RationalPoint),
    };
    let class = truncate_padic(&z.a, m)?;
    Ok(Vertex::new(p, m, class))
}

/// The canonical representative of a p-adic number modulo p^m, as an
/// element of Z[1/p].
pub fn truncate_padic(x: &PadicNumber, m: i64) -> Result<PRat> {
    let p = x.prime();
    match x.val() {
        None => match x.abs_prec() {
            None => Ok(PRat::zero(p)),
            Some(a) if a >= m => Ok(PRat::zero(p)),
            Some(_) => Err(Error::PrecisionExhausted("truncate")),
        },
        Some(v) if v >= m => Ok(PRat::zero(p)),
        Some(v) => {
            let abs = x.abs_prec().unwrap();
            if abs < m {
                return Err(Error::PrecisionExhausted("truncate"));
            }
            let digits = (m - v) as u32;
            let u = x.unit_part().unwrap() % pow_p(p, digits);
            Ok(PRat::new(p, BigInt::from(u), 0).shift(v))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

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

    fn random_gamma(p: u64, rng: &mut Rng) -> GammaElement {
        // random word in the standard generators
        let mut g = GammaElement::identity(p);
        for _ in 0..6 {
            let h = match rng.below(3) {
                0 => GammaElement::translation(p, &BigInt::from(rng.below(7) as i64 - 3)),
                1 => GammaElement::s_flip(p),
                _ => GammaElement::p_scale(p, (rng.below(3) as i64) - 1),
            };
            g = g.mul(&h);
        }
        g
    }

    fn random_ball(p: u64, rng: &mut Rng) -> Ball {
        let level = rng.below(7) as i64 - 3;
        let num = rng.below(10_000) as i64;
        let exp = rng.below(3) as u32;
        let c = PRat::new(p, BigInt::from(num), exp);
        if rng.below(2) == 0 {
            Ball::affine(p, c, level)
        } else {
            Ball::coaffine(p, c, level)
        }
    }

    #[test]
    fn distinguished_edge_reverses_to_zp() {
        let e = OrientedEdge::distinguished(5);
        assert_eq!(e.reverse().ball, Ball::zp(5));
        assert_eq!(e.source(), Vertex::base(5));
    }

    #[test]
    fn reverse_is_an_involution() {
        let mut rng = Rng(11);
        for _ in 0..100 {
            let b = random_ball(5, &mut rng);
            let e = OrientedEdge::from_ball(b.clone());
            assert_eq!(e.reverse().reverse(), e);
            assert_eq!(e.reverse().source(), e.target());
        }
    }

    #[test]
    fn residue_disc_edges_reverse_to_complements() {
        for j in 0..5 {
            let b = Ball::affine(5, PRat::from_int(5, j), 1);
            let e = OrientedEdge::from_ball(b.clone());
            assert_eq!(e.reverse().ball, b.complement());
        }
    }

    #[test]
    fn s_flip_maps_complement_of_zp_to_pzp() {
        let s = GammaElement::s_flip(5);
        let img = s.act(&Ball::e_infinity(5));
        assert_eq!(img, Ball::affine(5, PRat::zero(5), 1));
        // sampled-point oracle: -1/x lands in pZ_p for x outside Z_p
        for x in [Cusp::infinity(), Cusp::from_frac(1, 5), Cusp::from_frac(7, 25)] {
            assert!(Ball::e_infinity(5).contains_cusp(&x));
            assert!(img.contains_cusp(&s.act_cusp(&x)));
        }
    }

    #[test]
    fn identity_fixes_every_ball() {
        let mut rng = Rng(5);
        let id = GammaElement::identity(7);
        for _ in 0..50 {
            let b = random_ball(7, &mut rng);
            assert_eq!(id.act(&b), b);
        }
    }

    #[test]
    fn action_is_compatible_with_products() {
        let mut rng = Rng(17);
        for _ in 0..100 {
            let g1 = random_gamma(5, &mut rng);
            let g2 = random_gamma(5, &mut rng);
            let b = random_ball(5, &mut rng);
            assert_eq!(g1.mul(&g2).act(&b), g1.act(&g2.act(&b)));
        }
    }

    #[test]
    fn membership_is_equivariant() {
        let mut rng = Rng(23);
        for _ in 0..100 {
            let g = random_gamma(5, &mut rng);
            let b = random_ball(5, &mut rng);
            let x = Cusp::new(
                BigInt::from(rng.below(500) as i64),
                BigInt::from(rng.below(300) as i64 + 1),
            );
            let gx = g.act_cusp(&x);
            assert_eq!(b.contains_cusp(&x), g.act(&b).contains_cusp(&gx));
        }
    }

    #[test]
    fn base_vertex_edges_partition_p1() {
        let v = Vertex::base(5);
        let edges = v.edges_at();
        assert_eq!(edges.len(), 6);
        assert_eq!(edges[0].ball, Ball::e_infinity(5));
        for j in 0..5u64 {
            assert_eq!(
                edges[(j + 1) as usize].ball,
                Ball::affine(5, PRat::from_int(5, j as i64), 1)
            );
        }
        // pairwise disjoint, union everything: each sample point lies in
        // exactly its own ball
        for (i, e) in edges.iter().enumerate() {
            let s = e.ball.sample();
            for (k, f) in edges.iter().enumerate() {
                assert_eq!(f.ball.contains(&s), i == k);
            }
        }
    }

    #[test]
    fn edge_count_and_partition_at_random_vertices() {
        let mut rng = Rng(31);
        for _ in 0..20 {
            let v = Vertex::new(
                7,
                rng.below(5) as i64 - 2,
                PRat::new(7, BigInt::from(rng.below(300) as i64), rng.below(2) as u32),
            );
            let edges = v.edges_at();
            assert_eq!(edges.len(), 8);
            for e in &edges {
                assert_eq!(e.source(), v);
            }
            for (i, e) in edges.iter().enumerate() {
                let s = e.ball.sample();
                for (k, f) in edges.iter().enumerate() {
                    assert_eq!(f.ball.contains(&s), i == k, "partition failure at {v}");
                }
            }
        }
    }

    #[test]
    fn reduce_edge_fixes_distinguished_edge() {
        let e = OrientedEdge::distinguished(11);
        let (g, o) = reduce_edge(&e);
        assert_eq!(o, 1);
        assert_eq!(g.act(&e.ball), e.ball);
        let (g2, o2) = reduce_edge(&e.reverse());
        assert_eq!(o2, -1);
        assert_eq!(g2.act(&e.reverse().ball), Ball::zp(11));
    }

    #[test]
    fn reduce_edge_self_verifies_on_random_edges() {
        let mut rng = Rng(101);
        for _ in 0..200 {
            let p = 5;
            let level = rng.below(13) as i64 - 6;
            let c = PRat::new(p, BigInt::from(rng.below(100_000) as i64), rng.below(4) as u32);
            let ball = if rng.below(2) == 0 {
                Ball::affine(p, c, level)
            } else {
                Ball::coaffine(p, c, level)
            };
            let e = OrientedEdge::from_ball(ball.clone());
            let (g, o) = reduce_edge(&e);
            assert!(g.is_unimodular(), "reduction must stay in the group");
            let img = g.act(&ball);
            if o == 1 {
                assert_eq!(img, Ball::e_infinity(p), "wrong image for {ball}");
            } else {
                assert_eq!(img, Ball::zp(p), "wrong image for {ball}");
            }
        }
    }

    #[test]
    fn refine_splits_zp_into_residue_discs() {
        let zp = Ball::zp(5);
        let kids = zp.refine();
        let expect: vec::Vec<Ball> = (0..5)
            .map(|j| Ball::affine(5, PRat::from_int(5, j), 1))
            .collect();
        assert_eq!(kids, expect);
    }

    #[test]
    fn refinement_children_stay_inside_parent() {
        let mut rng = Rng(77);
        for _ in 0..100 {
            let b = random_ball(5, &mut rng);
            let kids = b.refine();
            assert_eq!(kids.len(), 5);
            for k in &kids {
                assert!(b.contains(&k.sample()), "child {k} escapes parent {b}");
            }
            for (i, k) in kids.iter().enumerate() {
                for (j, l) in kids.iter().enumerate() {
                    if i != j {
                        assert!(!l.contains(&k.sample()));
                    }
                }
            }
        }
    }

    #[test]
    fn depth_n_covering_size() {
        // depth-n refinement of P^1 has (p+1) p^(n-1) balls
        let p = 5u64;
        let mut cover: vec::Vec<Ball> =
            Vertex::base(p).edges_at().into_iter().map(|e| e.ball).collect();
        for n in 1..=3u32 {
            assert_eq!(cover.len() as u64, (p + 1) * p.pow(n - 1));
            cover = cover.iter().flat_map(|b| b.refine()).collect();
        }
    }

    #[test]
    fn reduction_point_of_s_is_base_vertex() {
        let s = QuadExtNumber::gen_s(11, 20);
        assert_eq!(reduction_point(&s).unwrap(), Vertex::base(11));
        // p*s reduces to the level-1 vertex above zero
        let ps = s.shift(1);
        assert_eq!(
            reduction_point(&ps).unwrap(),
            Vertex::new(11, 1, PRat::zero(11))
        );
    }

    #[test]
    fn reduction_point_is_galois_stable() {
        let mut rng = Rng(13);
        for _ in 0..20 {
            let a = PadicNumber::from_int(11, rng.below(4000) as i64 + 1, 18);
            let b = PadicNumber::from_int(11, rng.below(4000) as i64 + 1, 18);
            let z = QuadExtNumber::new(a, b);
            if z.b.is_zero() {
                continue;
            }
            let v1 = reduction_point(&z).unwrap();
            let v2 = reduction_point(&z.conj()).unwrap();
            assert_eq!(v1, v2);
        }
    }

    #[test]
    fn affinoid_membership_oracle_for_ps() {
        // z = p*s satisfies v(z - a) >= 1 for sampled a in pZ_p, the
        // level-1 affinoid condition
        let p = 11u64;
        let s = QuadExtNumber::gen_s(p, 20);
        let z = s.shift(1);
        for k in 0..50i64 {
            let a = QuadExtNumber::from_int(p, k * p as i64, 20);
            let d = z.sub(&a).unwrap();
            assert!(d.val().unwrap() >= 1);
        }
    }

    #[test]
    fn membership_basics() {
        assert!(Ball::zp(5).contains(&SamplePoint::Finite(PRat::zero(5))));
        assert!(Ball::e_infinity(5).contains(&SamplePoint::Infinity));
        let x = PadicNumber::from_int(5, 10, 8);
        assert!(Ball::affine(5, PRat::zero(5), 1).contains_padic(&x).unwrap());
        assert!(!Ball::affine(5, PRat::from_int(5, 1), 1).contains_padic(&x).unwrap());
    }
}
