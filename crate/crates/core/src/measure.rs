//! The lattice-valued boundary measures attached to an eigen-symbol, and
//! Riemann integration of locally analytic kernels against them.
//!
//! A measure value on a ball is read off by reducing the corresponding edge
//! to the distinguished one and evaluating the modular symbol at the
//! transported cusps. Coverings of P^1(Q_p) are walked incrementally: each
//! node carries the matrix transporting it to standard position and the
//! transported cusp pair, so descending one level costs a handful of small
//! matrix products instead of a fresh reduction.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::ball::{reduce_edge, Ball, GammaElement, OrientedEdge, SamplePoint, Vertex};
use crate::modsym::EigenSymbol;
use crate::padic::{LogBranch, PadicNumber, QuadExtNumber};
use crate::rat::Cusp;
use crate::{Error, Result};

/// The measure mu_f[r,s] on P^1(Q_p), valued in pairs of integers (the
/// plus/minus coordinates of the symbol lattice).
pub struct HarmonicMeasure<'a> {
    pub symbol: &'a EigenSymbol,
    pub r: Cusp,
    pub s: Cusp,
    memo: RefCell<BTreeMap<Ball, (i64, i64)>>,
}

impl<'a> HarmonicMeasure<'a> {
    pub fn new(symbol: &'a EigenSymbol, r: Cusp, s: Cusp) -> Self {
        HarmonicMeasure { symbol, r, s, memo: RefCell::new(BTreeMap::new()) }
    }

    pub fn prime(&self) -> u64 {
        self.symbol.p
    }

    /// mu(U) for the ball of an oriented edge; memoized, write-once.
    pub fn ball_measure(&self, u: &Ball) -> (i64, i64) {
        if let Some(v) = self.memo.borrow().get(u) {
            return *v;
        }
        let e = OrientedEdge::from_ball(u.clone());
        let (g, o) = reduce_edge(&e);
        let (pl, mn) = self.symbol.eval(&g.act_cusp(&self.r), &g.act_cusp(&self.s));
        let val = (o as i64 * pl, o as i64 * mn);
        self.memo.borrow_mut().insert(u.clone(), val);
        val
    }

    /// Total measure of P^1 (zero, by the cocycle sign relation).
    pub fn total(&self) -> (i64, i64) {
        let e = Ball::e_infinity(self.prime());
        let a = self.ball_measure(&e);
        let b = self.ball_measure(&e.complement());
        (a.0 + b.0, a.1 + b.1)
    }

    /// True iff the p+1 edge values at the vertex sum to zero exactly.
    pub fn check_harmonic(&self, v: &Vertex) -> bool {
        let mut acc = (0i64, 0i64);
        for e in v.edges_at() {
            let m = self.ball_measure(&e.ball);
            acc.0 += m.0;
            acc.1 += m.1;
        }
        acc == (0, 0)
    }

    #[cfg(test)]
    fn corrupt_memo(&self, u: &Ball, val: (i64, i64)) {
        self.memo.borrow_mut().insert(u.clone(), val);
    }
}

/// Precomputed one-step descent data for covering walks at a fixed prime:
/// reducers of the standard children of the distinguished edge and of its
/// reverse, with their inverses.
pub struct WalkMoves {
    pub p: u64,
    from_complement: Vec<(GammaElement, GammaElement)>,
    from_zp: Vec<(GammaElement, GammaElement)>,
}

impl WalkMoves {
    pub fn new(p: u64) -> Self {
        let build = |std: &Ball, expect_orient: i32| -> Vec<(GammaElement, GammaElement)> {
            std.refine()
                .into_iter()
                .map(|c| {
                    let (g, o) = reduce_edge(&OrientedEdge::from_ball(c));
                    debug_assert_eq!(o, expect_orient);
                    let ginv = g.inv();
                    (g, ginv)
                })
                .collect()
        };
        WalkMoves {
            p,
            from_complement: build(&Ball::e_infinity(p), -1),
            from_zp: build(&Ball::zp(p), 1),
        }
    }
}

/// A node of a covering walk: a ball of the depth-n covering together with
/// the transport of the symbol's cusp pair. The measure of the ball is the
/// symbol evaluated at (rho, sigma).
#[derive(Debug, Clone)]
pub struct CoverNode {
    minv: GammaElement,
    at_complement: bool,
    pub ball: Ball,
    pub rho: Cusp,
    pub sigma: Cusp,
}

impl CoverNode {
    pub fn measure(&self, symbol: &EigenSymbol) -> (i64, i64) {
        symbol.eval(&self.rho, &self.sigma)
    }

    pub fn children(&self, moves: &WalkMoves) -> Vec<CoverNode> {
        let set = if self.at_complement { &moves.from_complement } else { &moves.from_zp };
        let std_child = if self.at_complement {
            Ball::zp(moves.p)
        } else {
            Ball::e_infinity(moves.p)
        };
        set.iter()
            .map(|(g, ginv)| {
                let minv = self.minv.mul(ginv);
                CoverNode {
                    ball: minv.act(&std_child),
                    minv,
                    at_complement: !self.at_complement,
                    // every descent flips the path orientation
                    rho: g.act_cusp(&self.sigma),
                    sigma: g.act_cusp(&self.rho),
                }
            })
            .collect()
    }
}

/// Which part of P^1(Q_p) a covering walk ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// All of P^1: depth n has (p+1) p^(n-1) balls.
    Full,
    /// The units Z_p^x: depth n has (p-1) p^(n-1) balls of level n.
    Units,
}

/// The depth-1 nodes of a covering walk for the region.
pub fn cover_roots(mu: &HarmonicMeasure<'_>, region: Region) -> Vec<CoverNode> {
    let p = mu.prime();
    let edges = Vertex::base(p).edges_at();
    let pick = |e: &OrientedEdge| -> bool {
        match region {
            Region::Full => true,
            Region::Units => {
                !e.ball.coaffine && e.ball.level == 1 && !e.ball.center.is_zero()
            }
        }
    };
    edges
        .iter()
        .filter(|e| pick(e))
        .map(|e| {
            let (g, o) = reduce_edge(e);
            debug_assert_eq!(o, 1);
            CoverNode {
                minv: g.inv(),
                at_complement: true,
                ball: e.ball.clone(),
                rho: g.act_cusp(&mu.r),
                sigma: g.act_cusp(&mu.s),
            }
        })
        .collect()
}

/// Expand nodes to the given depth (depth 1 = the nodes themselves).
pub fn expand_to_depth(nodes: Vec<CoverNode>, moves: &WalkMoves, depth: u32) -> Vec<CoverNode> {
    let mut cur = nodes;
    for _ in 1..depth {
        cur = cur.iter().flat_map(|n| n.children(moves)).collect();
    }
    cur
}

fn walk<F: FnMut(&CoverNode)>(node: &CoverNode, moves: &WalkMoves, remaining: u32, f: &mut F) {
    if remaining == 0 {
        f(node);
        return;
    }
    for child in node.children(moves) {
        walk(&child, moves, remaining - 1, f);
    }
}

/// Visit every depth-n covering node of the region in a fixed order.
pub fn walk_covering<F: FnMut(&CoverNode)>(
    mu: &HarmonicMeasure<'_>,
    region: Region,
    depth: u32,
    f: &mut F,
) {
    assert!(depth >= 1);
    let moves = WalkMoves::new(mu.prime());
    for root in cover_roots(mu, region) {
        walk(&root, &moves, depth - 1, f);
    }
}

/// Locally analytic kernels for the additive Riemann integrator.
#[derive(Debug, Clone)]
pub enum Kernel {
    /// Constant 1 (integrates to the total measure).
    Constant,
    /// Indicator of a ball; locally constant, integrated exactly once the
    /// covering refines the ball.
    CosetIndicator(Ball),
    /// log0((z2 - t)/(z1 - t)); the value at infinity is 0.
    LogCrossRatio(QuadExtNumber, QuadExtNumber),
    /// log0(<t>) on Z_p^x; singular off the units.
    LogAngle,
}

impl Kernel {
    /// Branch-free kernel value at a sample point; `None` means the factor
    /// is omitted (the divisor-at-infinity convention).
    fn eval(&self, p: u64, t: &SamplePoint, prec: u32) -> Result<Option<QuadExtNumber>> {
        match self {
            Kernel::Constant => Ok(Some(QuadExtNumber::one(p, prec))),
            Kernel::CosetIndicator(ball) => {
                let inside = ball.contains(t);
                if inside {
                    Ok(Some(QuadExtNumber::one(ball.p, prec)))
                } else {
                    Ok(None)
                }
            }
            Kernel::LogCrossRatio(z1, z2) => match t {
                SamplePoint::Infinity => Ok(None),
                SamplePoint::Finite(x) => {
                    let tq = QuadExtNumber::from_padic(PadicNumber::from_prat(x, prec));
                    let num = z2.sub(&tq)?;
                    let den = z1.sub(&tq)?;
                    if num.is_zero() || den.is_zero() {
                        return Err(Error::PrecisionExhausted("kernel pole"));
                    }
                    Ok(Some(num.div(&den)?.log0()?))
                }
            },
            Kernel::LogAngle => match t {
                SamplePoint::Infinity => Err(Error::KernelSingular),
                SamplePoint::Finite(x) => {
                    if x.val() != Some(0) {
                        return Err(Error::KernelSingular);
                    }
                    let tq = QuadExtNumber::from_padic(PadicNumber::from_prat(x, prec));
                    Ok(Some(tq.log0()?))
                }
            },
        }
    }
}

/// Plain zeroth-order Riemann sum of the kernel against the measure over
/// the depth-n covering of the region: a pair of values in K_p, one per
/// lattice coordinate.
pub fn riemann_integrate(
    mu: &HarmonicMeasure<'_>,
    region: Region,
    kernel: &Kernel,
    depth: u32,
    prec: u32,
) -> Result<(QuadExtNumber, QuadExtNumber)> {
    let p = mu.prime();
    let mut acc_p = QuadExtNumber::zero(p);
    let mut acc_m = QuadExtNumber::zero(p);
    let mut err = None;
    walk_covering(mu, region, depth, &mut |node| {
        if err.is_some() {
            return;
        }
        let (mp, mm) = node.measure(mu.symbol);
        if mp == 0 && mm == 0 {
            return;
        }
        match kernel.eval(p, &node.ball.sample(), prec) {
            Err(e) => err = Some(e),
            Ok(None) => {}
            Ok(Some(k)) => {
                let add = (|| -> Result<()> {
                    acc_p = acc_p.add(&k.mul_int(mp))?;
                    acc_m = acc_m.add(&k.mul_int(mm))?;
                    Ok(())
                })();
                if let Err(e) = add {
                    err = Some(e);
                }
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok((acc_p, acc_m)),
    }
}

/// Multiplicative kernels: the integrator accumulates the product of
/// kernel values raised to the measure, keeping the valuation bookkeeping
/// exact. Taking log0 afterwards recovers the additive Riemann sum.
#[derive(Debug, Clone)]
pub enum MultKernel {
    /// (z2 - t)/(z1 - t)
    CrossRatio(QuadExtNumber, QuadExtNumber),
    /// z - t on the Z_p chart; (z - t)/t on the complement and -1 at
    /// infinity. The chart split normalizes the divergent part of the
    /// plain linear kernel into a single multiplicative constant, which is
    /// the ambiguity the construction carries anyway.
    Linear(QuadExtNumber),
    /// <t> on the units
    Angle,
}

impl MultKernel {
    fn eval(&self, ball: &Ball, prec: u32) -> Result<Option<QuadExtNumber>> {
        let t = ball.sample();
        match self {
            MultKernel::CrossRatio(z1, z2) => match t {
                SamplePoint::Infinity => Ok(None),
                SamplePoint::Finite(x) => {
                    let tq = QuadExtNumber::from_padic(PadicNumber::from_prat(&x, prec));
                    let num = z2.sub(&tq)?;
                    let den = z1.sub(&tq)?;
                    if num.is_zero() || den.is_zero() {
                        return Err(Error::PrecisionExhausted("kernel pole"));
                    }
                    Ok(Some(num.div(&den)?))
                }
            },
            MultKernel::Linear(z) => match t {
                SamplePoint::Infinity => {
                    Ok(Some(QuadExtNumber::from_int(ball.p, -1, prec)))
                }
                SamplePoint::Finite(x) => {
                    let far_chart = x.val().map_or(false, |v| v < 0);
                    let tq = QuadExtNumber::from_padic(PadicNumber::from_prat(&x, prec));
                    let d = z.sub(&tq)?;
                    if d.is_zero() {
                        return Err(Error::PrecisionExhausted("sample point too close"));
                    }
                    if far_chart {
                        Ok(Some(d.div(&tq)?))
                    } else {
                        Ok(Some(d))
                    }
                }
            },
            // the raw unit suffices: log0 at the end kills its Teichmueller
            // part, leaving the integral of log<t>
            MultKernel::Angle => match t {
                SamplePoint::Infinity => Err(Error::KernelSingular),
                SamplePoint::Finite(x) => {
                    if x.val() != Some(0) {
                        return Err(Error::KernelSingular);
                    }
                    Ok(Some(QuadExtNumber::from_padic(PadicNumber::from_prat(&x, prec))))
                }
            },
        }
    }
}

/// Product of kernel values weighted by the measure, split by lattice
/// coordinate, with the exact valuation part carried separately.
#[derive(Debug, Clone)]
pub struct MultIntegral {
    pub p: u64,
    /// unit parts of the products, one per lattice coordinate
    pub u: (QuadExtNumber, QuadExtNumber),
    /// exact valuations of the products
    pub ord: (i64, i64),
    pub depth: u32,
}

impl MultIntegral {
    /// log0 of the product (kills the valuation part).
    pub fn log0(&self) -> Result<(QuadExtNumber, QuadExtNumber)> {
        Ok((self.u.0.log0()?, self.u.1.log0()?))
    }

    /// Branch logarithm: log0 plus lambda times the valuation.
    pub fn log_with(&self, branch: &LogBranch) -> Result<(QuadExtNumber, QuadExtNumber)> {
        let (l0p, l0m) = self.log0()?;
        Ok((
            l0p.add(&branch.lambda.mul_int(self.ord.0))?,
            l0m.add(&branch.lambda.mul_int(self.ord.1))?,
        ))
    }
}

/// Accumulate the multiplicative integral over a set of covering nodes
/// expanded `remaining` more levels. Exposed at this granularity so the
/// driver can parallelize over subtrees and fold in a fixed order.
pub fn mult_integral_over(
    symbol: &EigenSymbol,
    nodes: &[CoverNode],
    moves: &WalkMoves,
    kernel: &MultKernel,
    remaining: u32,
    prec: u32,
) -> Result<MultIntegral> {
    let p = symbol.p;
    let mut acc = MultIntegral {
        p,
        u: (QuadExtNumber::one(p, prec), QuadExtNumber::one(p, prec)),
        ord: (0, 0),
        depth: remaining,
    };
    let mut err = None;
    for node in nodes {
        walk(node, moves, remaining, &mut |n| {
            if err.is_some() {
                return;
            }
            let (mp, mm) = n.measure(symbol);
            if mp == 0 && mm == 0 {
                return;
            }
            let step = (|| -> Result<()> {
                if let Some(k) = kernel.eval(&n.ball, prec)? {
                    let v = k.val().ok_or(Error::PrecisionExhausted("zero kernel value"))?;
                    let unit = k.shift(-v);
                    if mp != 0 {
                        acc.u.0 = acc.u.0.mul(&unit.pow(mp)?)?;
                        acc.ord.0 += v * mp;
                    }
                    if mm != 0 {
                        acc.u.1 = acc.u.1.mul(&unit.pow(mm)?)?;
                        acc.ord.1 += v * mm;
                    }
                }
                Ok(())
            })();
            if let Err(e) = step {
                err = Some(e);
            }
        });
    }
    match err {
        Some(e) => Err(e),
        None => Ok(acc),
    }
}

/// Multiplicative double integral over a full-region covering of depth n.
pub fn mult_integral(
    mu: &HarmonicMeasure<'_>,
    region: Region,
    kernel: &MultKernel,
    depth: u32,
    prec: u32,
) -> Result<MultIntegral> {
    assert!(depth >= 1);
    let moves = WalkMoves::new(mu.prime());
    let roots = cover_roots(mu, region);
    let mut out = mult_integral_over(mu.symbol, &roots, &moves, kernel, depth - 1, prec)?;
    out.depth = depth;
    Ok(out)
}

/// Exact ord-part of the multiplicative double integral from z1 to z2:
/// the sum of mu(U) (v(z2 - t) - v(z1 - t)). The integrand is locally
/// constant, so the sum is computed adaptively: each covering ball is
/// tested for constancy by exact valuation analysis and only the balls
/// meeting the reduction loci of z1, z2 are refined. Returns the value and
/// the deepest level visited.
pub fn ord_integral(
    mu: &HarmonicMeasure<'_>,
    z1: &QuadExtNumber,
    z2: &QuadExtNumber,
) -> Result<((i64, i64), u32)> {
    for z in [z1, z2] {
        if z.b.is_zero() || z.b.val().is_none() {
            return Err(Error::RationalPoint);
        }
    }
    let p = mu.prime();
    let mut acc = (0i64, 0i64);
    let mut max_depth = 1u32;
    for e in Vertex::base(p).edges_at() {
        ord_adaptive(mu, z1, z2, &e.ball, 1, &mut acc, &mut max_depth)?;
    }
    Ok((acc, max_depth))
}

fn ord_adaptive(
    mu: &HarmonicMeasure<'_>,
    z1: &QuadExtNumber,
    z2: &QuadExtNumber,
    ball: &Ball,
    depth: u32,
    acc: &mut (i64, i64),
    max_depth: &mut u32,
) -> Result<()> {
    *max_depth = (*max_depth).max(depth);
    if depth > 80 {
        return Err(Error::PrecisionExhausted("ord integral did not localize"));
    }
    match ord_kernel_on_ball(z1, z2, ball)? {
        Some(f) => {
            if f != 0 {
                let (mp, mm) = mu.ball_measure(ball);
                acc.0 += mp * f;
                acc.1 += mm * f;
            }
            Ok(())
        }
        None => {
            for child in ball.refine() {
                ord_adaptive(mu, z1, z2, &child, depth + 1, acc, max_depth)?;
            }
            Ok(())
        }
    }
}

/// The constant value of t -> v(z2 - t) - v(z1 - t) on the ball, or `None`
/// when the kernel is not constant there and the ball must be refined.
fn ord_kernel_on_ball(
    z1: &QuadExtNumber,
    z2: &QuadExtNumber,
    ball: &Ball,
) -> Result<Option<i64>> {
    let prec = (z1.b.val().unwrap_or(0).abs())
        .max(z2.b.val().unwrap_or(0).abs())
        .max(ball.level.abs()) as u32
        + 8;
    if !ball.coaffine {
        let a = QuadExtNumber::from_padic(PadicNumber::from_prat(&ball.center, prec));
        let v2 = linear_val_on_ball(z2, &a, ball.level)?;
        let v1 = linear_val_on_ball(z1, &a, ball.level)?;
        Ok(match (v2, v1) {
            (Some(x), Some(y)) => Some(x - y),
            _ => None,
        })
    } else {
        // on the complement, substitute t = a + 1/tau with tau in the ball
        // B(0, 1 - level): v(z - t) = v(z - a) + v(tau - 1/(z - a)) - v(tau)
        // and the v(tau) terms cancel in the difference
        let a = QuadExtNumber::from_padic(PadicNumber::from_prat(&ball.center, prec));
        let zero = QuadExtNumber::zero(ball.p);
        let part = |z: &QuadExtNumber| -> Result<Option<i64>> {
            let w = z.sub(&a)?;
            let c = w.val().ok_or(Error::PrecisionExhausted("ord kernel"))?;
            let sigma = w.inv()?;
            Ok(linear_val_on_ball(&sigma, &zero, 1 - ball.level)?.map(|v| v + c))
        };
        Ok(match (part(z2)?, part(z1)?) {
            (Some(x), Some(y)) => Some(x - y),
            _ => None,
        })
    }
}

/// Constant value of t -> v(z - t) on the affine ball of the given center
/// and level, if constant. z = x + y s with y nonzero; v(z - t) =
/// min(v(x - t), v(y)).
fn linear_val_on_ball(z: &QuadExtNumber, center: &QuadExtNumber, level: i64) -> Result<Option<i64>> {
    let m = z.b.val().ok_or(Error::RationalPoint)?;
    let x_minus_a = z.a.sub(&center.a)?;
    match x_minus_a.val() {
        Some(delta) if delta < level => Ok(Some(delta.min(m))),
        _ => {
            // the rational shadow of z lies in (or is indistinguishable
            // from) the ball
            if level > m {
                Ok(Some(m))
            } else if x_minus_a.abs_prec().map_or(false, |ap| ap <= level.max(m)) {
                Err(Error::PrecisionExhausted("ord kernel shadow"))
            } else {
                Ok(None)
            }
        }
    }
}

/// The depth-n Riemann value of the double integral from z1 to z2: the
/// branch-free logarithm of the product of cross-ratios weighted by the
/// measure (one log0 of the accumulated unit per coordinate), together
/// with the exact stabilized ord part.
pub fn teitelbaum_log(
    mu: &HarmonicMeasure<'_>,
    z1: &QuadExtNumber,
    z2: &QuadExtNumber,
    depth: u32,
    prec: u32,
) -> Result<DoubleIntegral> {
    let kernel = MultKernel::CrossRatio(z1.clone(), z2.clone());
    let m = mult_integral(mu, Region::Full, &kernel, depth, prec)?;
    let log0 = m.log0()?;
    let (ord, ord_depth) = ord_integral(mu, z1, z2)?;
    if ord_depth <= depth && ord != m.ord {
        return Err(Error::Invariant("ord parts disagree between routes"));
    }
    Ok(DoubleIntegral { ord, ord_depth, log0, depth })
}

/// A double integral split into its exact valuation part and its
/// branch-free logarithm part.
#[derive(Debug, Clone)]
pub struct DoubleIntegral {
    pub ord: (i64, i64),
    pub ord_depth: u32,
    pub log0: (QuadExtNumber, QuadExtNumber),
    pub depth: u32,
}

impl DoubleIntegral {
    pub fn log_with(&self, branch: &LogBranch) -> Result<(QuadExtNumber, QuadExtNumber)> {
        Ok((
            self.log0.0.add(&branch.lambda.mul_int(self.ord.0))?,
            self.log0.1.add(&branch.lambda.mul_int(self.ord.1))?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modsym::CurveData;
    use crate::padic::embed_quadratic;
    use crate::rat::PRat;
    use alloc::vec;

    fn sym11() -> EigenSymbol {
        EigenSymbol::new(CurveData::new([0, -1, 1, -10, -20]).unwrap(), 7).unwrap()
    }

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

    #[test]
    fn total_measure_is_zero() {
        let sym = sym11();
        let mu = HarmonicMeasure::new(&sym, Cusp::from_int(0), Cusp::infinity());
        assert_eq!(mu.total(), (0, 0));
    }

    #[test]
    fn zp_measure_is_the_l_value_coordinates() {
        let sym = sym11();
        let mu = HarmonicMeasure::new(&sym, Cusp::from_int(0), Cusp::infinity());
        let (pl, mn) = mu.ball_measure(&Ball::zp(11));
        // the plus coordinate is (a multiple of) L(E,1) in lattice units:
        // nonzero for this rank-zero curve; the minus coordinate vanishes
        assert_ne!(pl, 0);
        assert_eq!(mn, 0);
    }

    #[test]
    fn measure_is_additive_under_refinement() {
        let sym = sym11();
        let mut rng = Rng(4242);
        let mu = HarmonicMeasure::new(&sym, Cusp::from_int(0), Cusp::infinity());
        for _ in 0..100 {
            let level = rng.below(5) as i64 - 2;
            let c = PRat::new(11, num_bigint::BigInt::from(rng.below(5000) as i64), rng.below(3) as u32);
            let b = if rng.below(2) == 0 {
                Ball::affine(11, c, level)
            } else {
                Ball::coaffine(11, c, level)
            };
            let total = mu.ball_measure(&b);
            let mut sum = (0i64, 0i64);
            for k in b.refine() {
                let m = mu.ball_measure(&k);
                sum.0 += m.0;
                sum.1 += m.1;
            }
            assert_eq!(total, sum, "additivity fails on {b}");
        }
    }

    #[test]
    fn harmonic_at_vertices_near_base() {
        let sym = sym11();
        let mu0 = HarmonicMeasure::new(&sym, Cusp::from_int(0), Cusp::infinity());
        // all vertices within distance 2 of the base
        let mut verts = vec![Vertex::base(11)];
        let mut frontier = vec![Vertex::base(11)];
        for _ in 0..2 {
            let mut next = vec![];
            for v in &frontier {
                for e in v.edges_at() {
                    let t = e.target();
                    if !verts.contains(&t) {
                        verts.push(t.clone());
                        next.push(t);
                    }
                }
            }
            frontier = next;
        }
        for v in &verts {
            assert!(mu0.check_harmonic(v), "harmonicity fails at {v}");
        }
        // a handful of random rational symbols
        let mut rng = Rng(7);
        for _ in 0..5 {
            let r = Cusp::from_frac(rng.below(30) as i64 - 15, rng.below(12) as i64 + 1);
            let s = Cusp::from_frac(rng.below(30) as i64 - 15, rng.below(12) as i64 + 1);
            let mu = HarmonicMeasure::new(&sym, r, s);
            for v in verts.iter().take(13) {
                assert!(mu.check_harmonic(v));
            }
        }
    }

    #[test]
    fn corrupted_memo_breaks_harmonicity() {
        let sym = sym11();
        let mu = HarmonicMeasure::new(&sym, Cusp::from_int(0), Cusp::infinity());
        assert!(mu.check_harmonic(&Vertex::base(11)));
        let einf = Ball::e_infinity(11);
        let good = mu.ball_measure(&einf);
        mu.corrupt_memo(&einf, (good.0 + 1, good.1));
        // the corrupted entry shows up through the parent edge at v0
        assert!(!mu.check_harmonic(&Vertex::base(11)));
    }

    #[test]
    fn cover_nodes_agree_with_direct_reduction() {
        let sym = sym11();
        let mu = HarmonicMeasure::new(&sym, Cusp::from_int(0), Cusp::from_frac(4, 3));
        let moves = WalkMoves::new(11);
        let mut nodes = cover_roots(&mu, Region::Full);
        for _depth in 1..=3 {
            let mut count = 0;
            for n in &nodes {
                assert_eq!(n.measure(&sym), mu.ball_measure(&n.ball), "at {}", n.ball);
                count += 1;
            }
            let expect = 12 * 11u64.pow(_depth as u32 - 1);
            assert_eq!(count, expect);
            nodes = nodes.iter().flat_map(|n| n.children(&moves)).collect();
        }
    }

    #[test]
    fn covering_partitions_and_children_sum() {
        let sym = sym11();
        let mu = HarmonicMeasure::new(&sym, Cusp::from_int(0), Cusp::infinity());
        let moves = WalkMoves::new(11);
        for root in cover_roots(&mu, Region::Full) {
            let total = root.measure(&sym);
            let mut sum = (0i64, 0i64);
            for c in root.children(&moves) {
                let m = c.measure(&sym);
                sum.0 += m.0;
                sum.1 += m.1;
                assert!(root.ball.contains(&c.ball.sample()));
            }
            assert_eq!(sum, total);
        }
    }

    #[test]
    fn units_region_covers_zp_units() {
        let sym = sym11();
        let mu = HarmonicMeasure::new(&sym, Cusp::from_int(0), Cusp::infinity());
        let roots = cover_roots(&mu, Region::Units);
        assert_eq!(roots.len(), 10);
        let mut n2 = 0;
        walk_covering(&mu, Region::Units, 2, &mut |node| {
            assert_eq!(node.ball.level, 2);
            assert_eq!(node.ball.center.val(), Some(0));
            n2 += 1;
        });
        assert_eq!(n2, 110);
    }

    #[test]
    fn constant_kernel_integrates_to_zero() {
        let sym = sym11();
        let mu = HarmonicMeasure::new(&sym, Cusp::from_int(0), Cusp::infinity());
        for depth in 1..=3 {
            let (p, m) = riemann_integrate(&mu, Region::Full, &Kernel::Constant, depth, 10)
                .unwrap();
            assert!(p.is_zero() || p.val().map_or(true, |v| v >= 10));
            assert!(m.is_zero() || m.val().map_or(true, |v| v >= 10));
        }
    }

    #[test]
    fn coset_indicator_reproduces_ball_measure() {
        let sym = sym11();
        let mu = HarmonicMeasure::new(&sym, Cusp::from_int(0), Cusp::infinity());
        let target = Ball::affine(11, PRat::from_int(11, 3), 1);
        let expect = mu.ball_measure(&target);
        for depth in 1..=3 {
            let (p, m) = riemann_integrate(
                &mu,
                Region::Full,
                &Kernel::CosetIndicator(target.clone()),
                depth,
                10,
            )
            .unwrap();
            let pe = QuadExtNumber::from_int(11, expect.0, 10);
            let me = QuadExtNumber::from_int(11, expect.1, 10);
            assert!(p.agrees_with(&pe, 10));
            assert!(m.agrees_with(&me, 10));
        }
    }

    #[test]
    fn log_kernel_self_convergence() {
        // successive depths agree to valuation >= n - 2
        let sym = sym11();
        let mu = HarmonicMeasure::new(&sym, Cusp::from_int(0), Cusp::infinity());
        let s = QuadExtNumber::gen_s(11, 16);
        let one = QuadExtNumber::one(11, 16);
        let z1 = s.clone();
        let z2 = s.add(&one).unwrap();
        let mut prev: Option<(QuadExtNumber, QuadExtNumber)> = None;
        for depth in 2..=5u32 {
            let v = riemann_integrate(
                &mu,
                Region::Full,
                &Kernel::LogCrossRatio(z1.clone(), z2.clone()),
                depth,
                16,
            )
            .unwrap();
            if let Some(p) = &prev {
                let n = depth as i64 - 1;
                assert!(
                    v.0.agrees_with(&p.0, n - 2),
                    "plus self-convergence at depth {depth}"
                );
                assert!(v.1.agrees_with(&p.1, n - 2));
            }
            prev = Some(v);
        }
    }

    #[test]
    fn mult_integral_log_matches_additive_route() {
        // two independent paths: sum of logs vs log of product
        let sym = sym11();
        let mu = HarmonicMeasure::new(&sym, Cusp::from_int(0), Cusp::infinity());
        let s = QuadExtNumber::gen_s(11, 14);
        let z1 = s.clone();
        let z2 = s.add(&QuadExtNumber::one(11, 14)).unwrap();
        let additive = riemann_integrate(
            &mu,
            Region::Full,
            &Kernel::LogCrossRatio(z1.clone(), z2.clone()),
            3,
            14,
        )
        .unwrap();
        let mult = mult_integral(
            &mu,
            Region::Full,
            &MultKernel::CrossRatio(z1.clone(), z2.clone()),
            3,
            14,
        )
        .unwrap();
        let (lp, lm) = mult.log0().unwrap();
        assert!(lp.agrees_with(&additive.0, 12));
        assert!(lm.agrees_with(&additive.1, 12));
    }

    #[test]
    fn ord_integral_basics() {
        let sym = sym11();
        let mu = HarmonicMeasure::new(&sym, Cusp::from_int(0), Cusp::infinity());
        let s = QuadExtNumber::gen_s(11, 16);
        let z1 = s.clone();
        let z2 = s.add(&QuadExtNumber::one(11, 16)).unwrap();
        // z1 = z2 gives zero
        let (zz, _) = ord_integral(&mu, &z1, &z1).unwrap();
        assert_eq!(zz, (0, 0));
        // antisymmetry
        let (a, d1) = ord_integral(&mu, &z1, &z2).unwrap();
        let (b, _) = ord_integral(&mu, &z2, &z1).unwrap();
        assert_eq!(a.0, -b.0);
        assert_eq!(a.1, -b.1);
        // unchanged on a full sampled walk one depth past localization
        let _ = d1;
        let sampled = {
            let prec = 8;
            let mut acc = (0i64, 0i64);
            walk_covering(&mu, Region::Full, d1 + 2, &mut |node| {
                let (mp, mm) = node.measure(&sym);
                if mp == 0 && mm == 0 {
                    return;
                }
                if let SamplePoint::Finite(x) = node.ball.sample() {
                    let tq = QuadExtNumber::from_padic(PadicNumber::from_prat(&x, prec));
                    let v2 = z2.sub(&tq).unwrap().val().unwrap();
                    let v1 = z1.sub(&tq).unwrap().val().unwrap();
                    acc.0 += mp * (v2 - v1);
                    acc.1 += mm * (v2 - v1);
                }
            });
            acc
        };
        assert_eq!(a, sampled, "adaptive ord equals the brute sampled sum");
    }

    #[test]
    fn teitelbaum_path_additivity() {
        let sym = sym11();
        let mu = HarmonicMeasure::new(&sym, Cusp::from_int(0), Cusp::infinity());
        let prec = 14u32;
        let s = QuadExtNumber::gen_s(11, prec);
        let one = QuadExtNumber::one(11, prec);
        let z1 = s.clone();
        let z2 = s.add(&one).unwrap();
        let z3 = s.add(&one).unwrap().add(&one).unwrap();
        let depth = 4;
        let t12 = teitelbaum_log(&mu, &z1, &z2, depth, prec).unwrap();
        let t23 = teitelbaum_log(&mu, &z2, &z3, depth, prec).unwrap();
        let t13 = teitelbaum_log(&mu, &z1, &z3, depth, prec).unwrap();
        assert_eq!(t12.ord.0 + t23.ord.0, t13.ord.0, "ord part telescopes exactly");
        assert_eq!(t12.ord.1 + t23.ord.1, t13.ord.1);
        let lhs = t12.log0.0.add(&t23.log0.0).unwrap();
        assert!(
            lhs.agrees_with(&t13.log0.0, depth as i64 - 2),
            "log part telescopes to depth accuracy"
        );
    }

    #[test]
    fn teitelbaum_gamma_equivariance() {
        // T for (gz1, gz2) against mu[gr, gs] matches T for (z1, z2)
        // against mu[r, s], both computed independently
        let sym = sym11();
        let prec = 14u32;
        let depth = 4u32;
        let r = Cusp::from_int(0);
        let s_cusp = Cusp::infinity();
        let mu = HarmonicMeasure::new(&sym, r.clone(), s_cusp.clone());
        let s = QuadExtNumber::gen_s(11, prec);
        let z1 = s.clone();
        let z2 = s.add(&QuadExtNumber::one(11, prec)).unwrap();
        // g = [[1,1],[0,1]] * [[0,-1],[1,0]] = [[1,-1],[1,0]]
        let g = GammaElement::from_ints(11, 1, -1, 1, 0);
        let gz = |z: &QuadExtNumber| -> QuadExtNumber {
            // (z - 1)/z
            let num = z.sub(&QuadExtNumber::one(11, prec)).unwrap();
            num.div(z).unwrap()
        };
        let mu_g = HarmonicMeasure::new(&sym, g.act_cusp(&r), g.act_cusp(&s_cusp));
        let lhs = teitelbaum_log(&mu_g, &gz(&z1), &gz(&z2), depth, prec).unwrap();
        let rhs = teitelbaum_log(&mu, &z1, &z2, depth, prec).unwrap();
        assert_eq!(lhs.ord, rhs.ord, "ord parts transport exactly");
        assert!(lhs.log0.0.agrees_with(&rhs.log0.0, depth as i64 - 2));
        assert!(lhs.log0.1.agrees_with(&rhs.log0.1, depth as i64 - 2));
    }

    #[test]
    fn log_angle_vanishes_on_teichmuller_samples() {
        // single-ball contributions at depth 1 are zero when the sample is
        // a Teichmueller representative
        let k = Kernel::LogAngle;
        for j in 1..11u64 {
            let w = PadicNumber::from_int(11, j as i64, 12).teichmuller().unwrap();
            let t = crate::ball::truncate_padic(&w, 12).unwrap();
            let v = k.eval(11, &SamplePoint::Finite(t), 12).unwrap().unwrap();
            assert!(v.is_zero() || v.val().map_or(true, |x| x >= 11));
        }
    }

    #[test]
    fn gamma_equivariance_of_measures() {
        let sym = sym11();
        let mut rng = Rng(31337);
        for _ in 0..100 {
            let mut g = GammaElement::identity(11);
            for _ in 0..4 {
                let h = match rng.below(3) {
                    0 => GammaElement::translation(11, &num_bigint::BigInt::from(rng.below(5) as i64 - 2)),
                    1 => GammaElement::s_flip(11),
                    _ => GammaElement::p_scale(11, 1),
                };
                g = g.mul(&h);
            }
            let r = Cusp::from_frac(rng.below(20) as i64 - 10, rng.below(8) as i64 + 1);
            let s = Cusp::from_frac(rng.below(20) as i64 - 10, rng.below(8) as i64 + 1);
            let level = rng.below(4) as i64 - 1;
            let c = PRat::new(11, num_bigint::BigInt::from(rng.below(1000) as i64), rng.below(2) as u32);
            let b = if rng.below(2) == 0 {
                Ball::affine(11, c, level)
            } else {
                Ball::coaffine(11, c, level)
            };
            let mu = HarmonicMeasure::new(&sym, r.clone(), s.clone());
            let mu_g = HarmonicMeasure::new(&sym, g.act_cusp(&r), g.act_cusp(&s));
            assert_eq!(
                mu_g.ball_measure(&g.act(&b)),
                mu.ball_measure(&b),
                "equivariance fails"
            );
        }
    }
}
