//! Exact linear algebra over Q, just enough for the eigen-solves: kernels
//! by Gauss-Jordan elimination and coordinate extraction against a reduced
//! kernel basis. Dimensions here are tiny (2g+1 for X_0(p)).

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rat = BigRational;
pub type Matrix = Vec<Vec<Rat>>;

pub fn rat_int(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

/// Basis of the right kernel of `rows` (a system of linear forms on Q^n),
/// in reduced form: basis vector k has a 1 in its own free column and 0 in
/// the free columns of the others.
pub fn kernel_basis(rows: &Matrix, n: usize) -> (Vec<Vec<Rat>>, Vec<usize>) {
    let mut m: Matrix = rows.iter().filter(|r| !r.iter().all(|x| x.is_zero())).cloned().collect();
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut rank = 0usize;
    for col in 0..n {
        // find a pivot in this column
        let mut pr = None;
        for (i, row) in m.iter().enumerate().skip(rank) {
            if !row[col].is_zero() {
                pr = Some(i);
                break;
            }
        }
        let Some(pr) = pr else { continue };
        m.swap(rank, pr);
        let inv = m[rank][col].recip();
        for x in m[rank].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..m.len() {
            if i != rank && !m[i][col].is_zero() {
                let f = m[i][col].clone();
                for j in 0..n {
                    let t = &m[rank][j] * &f;
                    m[i][j] = &m[i][j] - &t;
                }
            }
        }
        pivot_cols.push(col);
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    let free_cols: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
    let mut basis = Vec::with_capacity(free_cols.len());
    for &f in &free_cols {
        let mut v = vec![Rat::zero(); n];
        v[f] = Rat::one();
        for (r, &pc) in pivot_cols.iter().enumerate() {
            v[pc] = -m[r][f].clone();
        }
        basis.push(v);
    }
    (basis, free_cols)
}

/// Coordinates of `w` against a reduced kernel basis; `None` when `w` is
/// not exactly in the span.
pub fn coordinates(basis: &[Vec<Rat>], free_cols: &[usize], w: &[Rat]) -> Option<Vec<Rat>> {
    let coords: Vec<Rat> = free_cols.iter().map(|&c| w[c].clone()).collect();
    let n = w.len();
    for j in 0..n {
        let mut acc = Rat::zero();
        for (k, b) in basis.iter().enumerate() {
            acc += &coords[k] * &b[j];
        }
        if &acc != &w[j] {
            return None;
        }
    }
    Some(coords)
}


/// Matrix product M * v.
pub fn apply(mat: &Matrix, v: &[Rat]) -> Vec<Rat> {
    mat.iter()
        .map(|row| {
            let mut acc = Rat::zero();
            for (a, b) in row.iter().zip(v.iter()) {
                acc += a * b;
            }
            acc
        })
        .collect()
}

/// Clear denominators and content: the primitive integer vector on the
/// same line, with sign fixed by the first nonzero entry being positive.
pub fn primitive_integer(v: &[Rat]) -> Vec<BigInt> {
    let mut lcm = BigInt::one();
    for x in v {
        lcm = num_integer::lcm(lcm, x.denom().clone());
    }
    let ints: Vec<BigInt> = v.iter().map(|x| x.numer() * (&lcm / x.denom())).collect();
    let mut content = BigInt::zero();
    for x in &ints {
        content = num_integer::gcd(content, x.clone());
    }
    if content.is_zero() {
        return ints;
    }
    let mut out: Vec<BigInt> = ints.iter().map(|x| x / &content).collect();
    if let Some(first) = out.iter().find(|x| !x.is_zero()) {
        if first.is_negative() {
            for x in out.iter_mut() {
                *x = -&*x;
            }
        }
    }
    out
}
