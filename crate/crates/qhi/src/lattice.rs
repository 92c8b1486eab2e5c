//! Exact integer linear systems A x = b: echelon reduction by unimodular
//! column operations, kernel lattice, and short-vector selection.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("integer system has no solution (row {row})")]
    Infeasible { row: usize },
    #[error("integer overflow during reduction")]
    Overflow,
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Solution set x0 + span_Z(kernel) of an integer system.
#[derive(Debug, Clone, PartialEq)]
pub struct IntSolution {
    pub particular: Vec<i64>,
    pub kernel: Vec<Vec<i64>>,
}

fn ck(v: Option<i128>) -> Result<i128, LatticeError> {
    v.ok_or(LatticeError::Overflow)
}

fn to_i64(v: i128) -> Result<i64, LatticeError> {
    i64::try_from(v).map_err(|_| LatticeError::Overflow)
}

/// Solves A x = b over the integers.
pub fn solve(a: &[Vec<i64>], b: &[i64]) -> Result<IntSolution, LatticeError> {
    let m = a.len();
    if b.len() != m {
        return Err(LatticeError::Shape(format!("{} rows but {} right-hand sides", m, b.len())));
    }
    let n = a.first().map_or(0, |r| r.len());
    if a.iter().any(|r| r.len() != n) {
        return Err(LatticeError::Shape("ragged matrix".into()));
    }
    // columns stored as vectors: cols[c][r] = M[r][c], ucols[c] = column c of U
    let mut cols: Vec<Vec<i128>> = (0..n).map(|c| (0..m).map(|r| a[r][c] as i128).collect()).collect();
    let mut ucols: Vec<Vec<i128>> = (0..n).map(|c| (0..n).map(|r| (r == c) as i128).collect()).collect();
    let mut pivots: Vec<usize> = Vec::new(); // pivot row of column k
    let mut pc = 0;
    for r in 0..m {
        if pc == n {
            break;
        }
        loop {
            // smallest nonzero entry in row r among columns pc..
            let best = (pc..n).filter(|&c| cols[c][r] != 0).min_by_key(|&c| (cols[c][r].abs(), c));
            let Some(best) = best else { break };
            cols.swap(pc, best);
            ucols.swap(pc, best);
            let piv = cols[pc][r];
            let mut done = true;
            for c in pc + 1..n {
                let v = cols[c][r];
                if v == 0 {
                    continue;
                }
                let q = v.div_euclid(piv);
                if q != 0 {
                    for i in 0..m {
                        cols[c][i] = ck(cols[c][i].checked_sub(ck(q.checked_mul(cols[pc][i]))?))?;
                    }
                    for i in 0..n {
                        ucols[c][i] = ck(ucols[c][i].checked_sub(ck(q.checked_mul(ucols[pc][i]))?))?;
                    }
                }
                if cols[c][r] != 0 {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if cols[pc][r] != 0 {
            if cols[pc][r] < 0 {
                for v in cols[pc].iter_mut() {
                    *v = -*v;
                }
                for v in ucols[pc].iter_mut() {
                    *v = -*v;
                }
            }
            pivots.push(r);
            pc += 1;
        }
    }
    // forward substitution on the pivot rows
    let mut y = vec![0i128; n];
    for (k, &r) in pivots.iter().enumerate() {
        let mut acc = b[r] as i128;
        for j in 0..k {
            acc = ck(acc.checked_sub(ck(cols[j][r].checked_mul(y[j]))?))?;
        }
        let p = cols[k][r];
        if acc % p != 0 {
            return Err(LatticeError::Infeasible { row: r });
        }
        y[k] = acc / p;
    }
    // consistency of all rows
    for r in 0..m {
        let mut acc = 0i128;
        for k in 0..pivots.len() {
            acc = ck(acc.checked_add(ck(cols[k][r].checked_mul(y[k]))?))?;
        }
        if acc != b[r] as i128 {
            return Err(LatticeError::Infeasible { row: r });
        }
    }
    let mut x = vec![0i128; n];
    for k in 0..pivots.len() {
        for i in 0..n {
            x[i] = ck(x[i].checked_add(ck(ucols[k][i].checked_mul(y[k]))?))?;
        }
    }
    let particular = x.into_iter().map(to_i64).collect::<Result<Vec<_>, _>>()?;
    let kernel = (pivots.len()..n)
        .map(|c| ucols[c].iter().map(|&v| to_i64(v)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(IntSolution { particular, kernel })
}

/// A x as exact integers.
pub fn apply(a: &[Vec<i64>], x: &[i64]) -> Vec<i64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(v: &[i64]) -> i128 {
    v.iter().map(|&x| (x as i128) * (x as i128)).sum()
}

fn better(a: &[i64], b: &[i64]) -> bool {
    let (na, nb) = (norm2(a), norm2(b));
    na < nb || (na == nb && a < b)
}

fn gram_schmidt(basis: &[Vec<i64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k = basis.len();
    let mut bstar: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut mu = vec![vec![0.0; k]; k];
    for i in 0..k {
        let mut v: Vec<f64> = basis[i].iter().map(|&x| x as f64).collect();
        for j in 0..i {
            let bj2 = dot(&bstar[j], &bstar[j]);
            mu[i][j] = if bj2 > 0.0 {
                basis[i].iter().zip(&bstar[j]).map(|(&x, y)| x as f64 * y).sum::<f64>() / bj2
            } else {
                0.0
            };
            for (vi, bj) in v.iter_mut().zip(&bstar[j]) {
                *vi -= mu[i][j] * bj;
            }
        }
        bstar.push(v);
    }
    (bstar, mu)
}

/// LLL reduction (delta = 3/4); zero vectors are dropped.
pub fn lll(basis: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut b: Vec<Vec<i64>> = basis.iter().filter(|v| v.iter().any(|&x| x != 0)).cloned().collect();
    let mut k = 1;
    let mut guard = 0;
    while k < b.len() && guard < 100_000 {
        guard += 1;
        for j in (0..k).rev() {
            let (_, mu) = gram_schmidt(&b);
            let q = mu[k][j].round() as i64;
            if q != 0 {
                let bj = b[j].clone();
                for (x, y) in b[k].iter_mut().zip(&bj) {
                    *x -= q * y;
                }
            }
        }
        if b[k].iter().all(|&x| x == 0) {
            b.remove(k);
            k = k.max(1);
            continue;
        }
        let (bstar, mu) = gram_schmidt(&b);
        let lhs = dot(&bstar[k], &bstar[k]);
        let rhs = (0.75 - mu[k][k - 1] * mu[k][k - 1]) * dot(&bstar[k - 1], &bstar[k - 1]);
        if lhs >= rhs {
            k += 1;
        } else {
            b.swap(k, k - 1);
            k = (k - 1).max(1);
        }
    }
    b
}

/// The solution of minimal squared norm (lexicographic tie-break) when the
/// kernel has dimension at most 6; otherwise a locally minimal solution.
pub fn short_solution(sol: &IntSolution) -> Vec<i64> {
    let mut x = sol.particular.clone();
    if sol.kernel.is_empty() {
        return x;
    }
    let basis = lll(&sol.kernel);
    if basis.is_empty() {
        return x;
    }
    // Babai nearest plane
    let (bstar, _) = gram_schmidt(&basis);
    for i in (0..basis.len()).rev() {
        let b2 = dot(&bstar[i], &bstar[i]);
        if b2 == 0.0 {
            continue;
        }
        let c = x.iter().zip(&bstar[i]).map(|(&v, w)| v as f64 * w).sum::<f64>() / b2;
        let q = c.round() as i64;
        if q != 0 {
            for (v, w) in x.iter_mut().zip(&basis[i]) {
                *v -= q * w;
            }
        }
    }
    let k = basis.len();
    let radius: i64 = if k <= 4 { 2 } else if k <= 6 { 1 } else { 0 };
    loop {
        let mut best = x.clone();
        if radius > 0 {
            let side = (2 * radius + 1) as usize;
            let total = side.pow(k as u32);
            for idx in 0..total {
                let mut cand = x.clone();
                let mut t = idx;
                for bvec in &basis {
                    let coef = (t % side) as i64 - radius;
                    t /= side;
                    if coef != 0 {
                        for (v, w) in cand.iter_mut().zip(bvec) {
                            *v += coef * w;
                        }
                    }
                }
                if better(&cand, &best) {
                    best = cand;
                }
            }
        } else {
            for i in 0..k {
                for s in [-1i64, 1] {
                    let cand: Vec<i64> = x.iter().zip(&basis[i]).map(|(v, w)| v + s * w).collect();
                    if better(&cand, &best) {
                        best = cand.clone();
                    }
                    for j in i + 1..k {
                        for s2 in [-1i64, 1] {
                            let c2: Vec<i64> = cand.iter().zip(&basis[j]).map(|(v, w)| v + s2 * w).collect();
                            if better(&c2, &best) {
                                best = c2;
                            }
                        }
                    }
                }
            }
        }
        if best == x {
            return x;
        }
        x = best;
    }
}

/// Rank of an integer matrix (rows as vectors), via exact elimination.
pub fn rank(rows: &[Vec<i64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    // rank(A) = n - dim ker(A) where A has the given rows
    let n = rows[0].len();
    match solve(rows, &vec![0; rows.len()]) {
        Ok(s) => n - s.kernel.len(),
        Err(_) => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = vec![vec![2, 3, 0], vec![0, 1, 1]];
        let b = vec![7, 2];
        let s = solve(&a, &b).unwrap();
        assert_eq!(apply(&a, &s.particular), b);
        assert_eq!(s.kernel.len(), 1);
        assert_eq!(apply(&a, &s.kernel[0]), vec![0, 0]);
    }

    #[test]
    fn detects_infeasible() {
        let a = vec![vec![2, 4]];
        assert!(matches!(solve(&a, &[3]), Err(LatticeError::Infeasible { .. })));
        let a = vec![vec![1, 1], vec![1, 1]];
        assert!(solve(&a, &[1, 2]).is_err());
    }

    #[test]
    fn shortest_in_small_kernel() {
        // x + y + z = 1: shortest solutions are unit vectors; lexicographic tie-break
        let a = vec![vec![1, 1, 1]];
        let s = solve(&a, &[1]).unwrap();
        assert_eq!(short_solution(&s), vec![0, 0, 1]);
    }

    #[test]
    fn rank_counts() {
        assert_eq!(rank(&[vec![1, 2], vec![2, 4]]), 1);
        assert_eq!(rank(&[vec![1, 0], vec![0, 3]]), 2);
    }
}
