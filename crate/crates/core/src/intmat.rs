//! Exact rank of integer matrices.
//!
//! Two routes: fraction-free (Bareiss) elimination whose entries are exact
//! minors, run in i128 with automatic escalation to arbitrary precision on
//! overflow, and Gaussian elimination over GF(p) for a random large prime,
//! which is fast and used both as a pre-pass and for matrices too large for
//! the exact route.

use num_bigint::{BigInt, Sign};
use rand::Rng;

/// Sparse integer matrix in row-major triplet rows.
#[derive(Clone)]
pub struct SparseIntMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Per row, `(col, value)` with nonzero values, sorted by col.
    pub rows: Vec<Vec<(u32, i64)>>,
}

impl SparseIntMatrix {
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(u32, i64)>>) -> Self {
        Self { n_rows: rows.len(), n_cols, rows }
    }

    pub fn to_dense_i128(&self) -> Vec<Vec<i128>> {
        let mut m = vec![vec![0i128; self.n_cols]; self.n_rows];
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[r][c as usize] = v as i128;
            }
        }
        m
    }
}

/// Fraction-free elimination in i128. Returns `None` if a pivot update
/// would overflow, in which case the caller escalates to big integers.
fn bareiss_rank_i128(mut m: Vec<Vec<i128>>) -> Option<usize> {
    let n_rows = m.len();
    if n_rows == 0 {
        return Some(0);
    }
    let n_cols = m[0].len();
    let mut rank = 0usize;
    let mut prev: i128 = 1;
    let mut pivot_row = 0usize;
    for col in 0..n_cols {
        if pivot_row == n_rows {
            break;
        }
        // smallest nonzero pivot keeps growth down
        let mut best: Option<usize> = None;
        for r in pivot_row..n_rows {
            if m[r][col] != 0
                && best.map_or(true, |b| m[r][col].unsigned_abs() < m[b][col].unsigned_abs())
            {
                best = Some(r);
            }
        }
        let Some(p) = best else { continue };
        m.swap(pivot_row, p);
        let piv = m[pivot_row][col];
        for r in pivot_row + 1..n_rows {
            let head = m[r][col];
            for c in col..n_cols {
                let a = piv.checked_mul(m[r][c])?;
                let b = head.checked_mul(m[pivot_row][c])?;
                let num = a.checked_sub(b)?;
                m[r][c] = num / prev; // exact by the fraction-free identity
            }
        }
        prev = piv;
        pivot_row += 1;
        rank += 1;
    }
    Some(rank)
}

fn bareiss_rank_big(m0: &[Vec<i128>]) -> usize {
    let n_rows = m0.len();
    if n_rows == 0 {
        return 0;
    }
    let n_cols = m0[0].len();
    let mut m: Vec<Vec<BigInt>> = m0
        .iter()
        .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
        .collect();
    let mut rank = 0usize;
    let mut prev = BigInt::from(1);
    let mut pivot_row = 0usize;
    for col in 0..n_cols {
        if pivot_row == n_rows {
            break;
        }
        let mut best: Option<usize> = None;
        for r in pivot_row..n_rows {
            if m[r][col].sign() != Sign::NoSign {
                let better = match best {
                    None => true,
                    Some(b) => m[r][col].magnitude() < m[b][col].magnitude(),
                };
                if better {
                    best = Some(r);
                }
            }
        }
        let Some(p) = best else { continue };
        m.swap(pivot_row, p);
        let piv = m[pivot_row][col].clone();
        for r in pivot_row + 1..n_rows {
            let head = m[r][col].clone();
            for c in col..n_cols {
                let num = &piv * &m[r][c] - &head * &m[pivot_row][c];
                m[r][c] = num / &prev;
            }
        }
        prev = piv;
        pivot_row += 1;
        rank += 1;
    }
    rank
}

/// Exact rank by fraction-free elimination, escalating to big integers if
/// i128 pivots overflow.
pub fn exact_rank(m: &SparseIntMatrix) -> usize {
    let dense = m.to_dense_i128();
    match bareiss_rank_i128(dense.clone()) {
        Some(r) => r,
        None => bareiss_rank_big(&dense),
    }
}

const MULTIPLICATIVE_ORDER_PRIMES: [u64; 8] = [
    2147483647, // 2^31 - 1
    2147483629,
    2147483587,
    2147483579,
    2147483563,
    2147483549,
    2147483543,
    2147483497,
];

/// A prime above 2^30, chosen by the caller's RNG.
pub fn random_prime<R: Rng>(rng: &mut R) -> u64 {
    MULTIPLICATIVE_ORDER_PRIMES[rng.gen_range(0..MULTIPLICATIVE_ORDER_PRIMES.len())]
}

/// Rank over GF(p). Always a lower bound on the rank over the rationals;
/// equality fails only when p divides the gcd of the maximal minors.
/// Row updates run in parallel; the elimination order is deterministic.
pub fn modular_rank(m: &SparseIntMatrix, p: u64) -> usize {
    use rayon::prelude::*;
    let n_cols = m.n_cols;
    let mut rows: Vec<Vec<u64>> = m
        .rows
        .iter()
        .map(|row| {
            let mut dense = vec![0u64; n_cols];
            for &(c, v) in row {
                dense[c as usize] = (v.rem_euclid(p as i64)) as u64;
            }
            dense
        })
        .collect();
    let n_rows = rows.len();
    let mut rank = 0usize;
    let mut pivot_row = 0usize;
    for col in 0..n_cols {
        if pivot_row == n_rows {
            break;
        }
        let Some(pr) = (pivot_row..n_rows).find(|&r| rows[r][col] != 0) else { continue };
        rows.swap(pivot_row, pr);
        let inv = mod_inverse(rows[pivot_row][col], p);
        for c in col..n_cols {
            rows[pivot_row][c] = rows[pivot_row][c] * inv % p;
        }
        let (pivot, rest) = rows.split_at_mut(pivot_row + 1);
        let prow = &pivot[pivot_row];
        rest.par_iter_mut().for_each(|row| {
            let f = row[col];
            if f == 0 {
                return;
            }
            let neg = p - f;
            for c in col..n_cols {
                // p < 2^31: neg * prow[c] + row[c] < 2^62 + 2^31, one
                // reduction suffices
                row[c] = (row[c] + neg * prow[c]) % p;
            }
        });
        pivot_row += 1;
        rank += 1;
    }
    rank
}

fn mod_inverse(a: u64, p: u64) -> u64 {
    // Fermat: a^(p-2) mod p
    let mut base = a % p;
    let mut exp = p - 2;
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}
