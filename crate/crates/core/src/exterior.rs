//! Multi-index combinatorics for the `p`-th exterior power of `R^n` and the
//! matrix of the derivation `v_1 ^ ... ^ v_p -> sum_s v_1 ^ .. ^ A v_s ^ .. ^ v_p`
//! in the canonical wedge basis.
//!
//! Indices are 0-based throughout. Multi-indices are ordered lexicographically.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{HqError, Result};
use crate::symmetric::{binomial, Spectrum};

/// Largest derivation matrix dimension built densely.
pub const MAX_DENSE_DIM: usize = 256;

/// Strictly increasing tuple of coordinate indices `i_1 < ... < i_p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    /// Validates strict increase and `entries < n`.
    pub fn new(entries: Vec<usize>, n: usize) -> Result<Self> {
        if entries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HqError::invalid(format!(
                "multi-index {entries:?} is not strictly increasing"
            )));
        }
        if entries.last().is_some_and(|&e| e >= n) {
            return Err(HqError::invalid(format!(
                "multi-index {entries:?} has an entry >= n = {n}"
            )));
        }
        Ok(MultiIndex(entries))
    }

    /// The empty multi-index (the single element of `J(0, n)`).
    pub fn empty() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Position of `i` inside the tuple, if present.
    pub fn position(&self, i: usize) -> Option<usize> {
        self.0.binary_search(&i).ok()
    }

    /// `I - i`.
    pub fn remove(&self, i: usize) -> Result<MultiIndex> {
        let pos = self
            .position(i)
            .ok_or_else(|| HqError::invalid(format!("{i} is not in {self}")))?;
        let mut e = self.0.clone();
        e.remove(pos);
        Ok(MultiIndex(e))
    }

    /// `I + j`.
    pub fn insert(&self, j: usize) -> Result<MultiIndex> {
        match self.0.binary_search(&j) {
            Ok(_) => Err(HqError::invalid(format!("{j} is already in {self}"))),
            Err(pos) => {
                let mut e = self.0.clone();
                e.insert(pos, j);
                Ok(MultiIndex(e))
            }
        }
    }

    /// Complement in `{0, .., n-1}`, increasing.
    pub fn complement(&self, n: usize) -> MultiIndex {
        MultiIndex((0..n).filter(|&i| !self.contains(i)).collect())
    }

    fn mask(&self) -> u128 {
        self.0.iter().fold(0u128, |m, &i| m | (1u128 << i))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (s, i) in self.0.iter().enumerate() {
            if s > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

/// Sign of the permutation that sorts the concatenation `(I, J)`.
///
/// Counts the inversions between the two (already sorted) halves with a merge
/// walk, so the cost is linear in `|I| + |J|`.
pub fn permutation_sign(i: &MultiIndex, j: &MultiIndex) -> Result<i8> {
    let (a, b) = (i.entries(), j.entries());
    let mut inversions = 0usize;
    let mut bj = 0usize;
    for &x in a {
        while bj < b.len() && b[bj] < x {
            bj += 1;
        }
        if bj < b.len() && b[bj] == x {
            return Err(HqError::invalid(format!("{i} and {j} overlap")));
        }
        inversions += bj;
    }
    Ok(if inversions % 2 == 0 { 1 } else { -1 })
}

/// `sigma(i, I - i)`: the sign that moves `i` to the front of `I`.
pub fn removal_sign(index: &MultiIndex, i: usize) -> Option<i8> {
    index
        .position(i)
        .map(|pos| if pos % 2 == 0 { 1 } else { -1 })
}

/// One off-diagonal coupling: `W[row][col]` carries `sign * a[i][j]`, where
/// `row = i + K` and `col = j + K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coupling {
    pub row: usize,
    pub col: usize,
    pub i: usize,
    pub j: usize,
    pub sign: i8,
}

/// Enumeration of `J(p, n)` with derived maps, immutable after construction.
#[derive(Debug, Clone)]
pub struct IndexTable {
    p: usize,
    n: usize,
    entries: Vec<MultiIndex>,
    lookup: HashMap<u128, usize>,
    /// For each coordinate `i`, the positions of all `I` containing `i`.
    members: Vec<Vec<usize>>,
    couplings: Vec<Coupling>,
}

impl IndexTable {
    pub fn new(p: usize, n: usize) -> Result<Self> {
        if p == 0 || p > n {
            return Err(HqError::invalid(format!(
                "need 1 <= p <= n, got p={p}, n={n}"
            )));
        }
        if n > 64 {
            return Err(HqError::invalid(format!("n = {n} is too large")));
        }
        let entries = combinations(p, n);
        let lookup = entries
            .iter()
            .enumerate()
            .map(|(s, e)| (e.mask(), s))
            .collect::<HashMap<_, _>>();
        let mut members = vec![Vec::new(); n];
        for (s, e) in entries.iter().enumerate() {
            for &i in e.entries() {
                members[i].push(s);
            }
        }
        let mut couplings = Vec::new();
        for (row, big_i) in entries.iter().enumerate() {
            for &i in big_i.entries() {
                let k = big_i.remove(i).expect("i in I");
                let si = removal_sign(big_i, i).expect("i in I");
                for j in (0..n).filter(|&j| !big_i.contains(j)) {
                    let big_j = k.insert(j).expect("j not in K");
                    let col = lookup[&big_j.mask()];
                    let sj = removal_sign(&big_j, j).expect("j in J");
                    couplings.push(Coupling {
                        row,
                        col,
                        i,
                        j,
                        sign: si * sj,
                    });
                }
            }
        }
        Ok(IndexTable {
            p,
            n,
            entries,
            lookup,
            members,
            couplings,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `N = C(n, p)`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[MultiIndex] {
        &self.entries
    }

    pub fn get(&self, pos: usize) -> &MultiIndex {
        &self.entries[pos]
    }

    pub fn position(&self, index: &MultiIndex) -> Option<usize> {
        if index.len() != self.p {
            return None;
        }
        self.lookup.get(&index.mask()).copied()
    }

    /// Positions of the multi-indices containing coordinate `i`.
    pub fn members(&self, i: usize) -> &[usize] {
        &self.members[i]
    }

    pub fn complement(&self, pos: usize) -> MultiIndex {
        self.entries[pos].complement(self.n)
    }

    /// Off-diagonal structure of the derivation matrix.
    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    /// `Lambda_I = sum_{i in I} lambda_i` in table order, into `out`.
    pub fn lambda_into(&self, lam: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.entries) {
            *o = e.entries().iter().map(|&i| lam[i]).sum();
        }
    }
}

fn combinations(p: usize, n: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(binomial(n, p) as usize);
    let mut cur: Vec<usize> = (0..p).collect();
    loop {
        out.push(MultiIndex(cur.clone()));
        // rightmost position that can still advance
        let Some(s) = (0..p).rev().find(|&s| cur[s] < n - p + s) else {
            break;
        };
        cur[s] += 1;
        for t in s + 1..p {
            cur[t] = cur[t - 1] + 1;
        }
    }
    out
}

pub fn build_index_table(p: usize, n: usize) -> Result<IndexTable> {
    IndexTable::new(p, n)
}

/// `Lambda(lambda)`: all `p`-fold sums of `lam` in table order.
pub fn lambda_of(lam: &Spectrum, table: &IndexTable) -> Result<Spectrum> {
    if lam.len() != table.n() {
        return Err(HqError::invalid(format!(
            "spectrum has length {}, table expects {}",
            lam.len(),
            table.n()
        )));
    }
    let mut out = vec![0.0; table.len()];
    table.lambda_into(lam.values(), &mut out);
    Spectrum::new(out)
}

/// Largest entry asymmetry relative to `max(1, max |a_ij|)`.
pub(crate) fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let scale = a.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in i + 1..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

pub(crate) fn check_symmetric(a: &DMatrix<f64>, n: usize) -> Result<()> {
    if a.nrows() != n || a.ncols() != n {
        return Err(HqError::invalid(format!(
            "matrix is {}x{}, expected {n}x{n}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(HqError::invalid("matrix has non-finite entries"));
    }
    let asym = asymmetry(a);
    if asym > 1e-12 {
        return Err(HqError::invalid(format!(
            "matrix is not symmetric (relative asymmetry {asym:e})"
        )));
    }
    Ok(())
}

/// Dense `N x N` matrix of the derivation induced by a symmetric `A`.
#[derive(Debug, Clone)]
pub struct DerivationMatrix {
    entries: DMatrix<f64>,
}

impl DerivationMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }
}

pub fn derivation_matrix(a: &DMatrix<f64>, table: &IndexTable) -> Result<DerivationMatrix> {
    check_symmetric(a, table.n())?;
    let big_n = table.len();
    if big_n > MAX_DENSE_DIM {
        return Err(HqError::invalid(format!(
            "derivation matrix dimension {big_n} exceeds {MAX_DENSE_DIM}"
        )));
    }
    let mut w = DMatrix::zeros(big_n, big_n);
    for (row, big_i) in table.entries().iter().enumerate() {
        w[(row, row)] = big_i.entries().iter().map(|&i| a[(i, i)]).sum();
        for &i in big_i.entries() {
            let k = big_i.remove(i)?;
            let si = permutation_sign(&MultiIndex(vec![i]), &k)?;
            for j in (0..table.n()).filter(|&j| !big_i.contains(j)) {
                let big_j = k.insert(j)?;
                let sj = permutation_sign(&MultiIndex(vec![j]), &k)?;
                let col = table.position(&big_j).expect("J is in the table");
                w[(row, col)] = f64::from(si * sj) * a[(i, j)];
            }
        }
    }
    Ok(DerivationMatrix { entries: w })
}

/// Constant coefficients `dW_{IJ} / da_{ij}`, stored sparsely.
#[derive(Debug, Clone)]
pub struct DerivationJacobian {
    /// `(row, col, i, j, coefficient)`; diagonal terms have `row == col`, `i == j`.
    pub entries: Vec<(usize, usize, usize, usize, i8)>,
    dim: usize,
    n: usize,
}

impl DerivationJacobian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `dW_{row,col} / da_{i,j}`, zero when absent.
    pub fn coefficient(&self, row: usize, col: usize, i: usize, j: usize) -> i8 {
        self.entries
            .iter()
            .find(|e| e.0 == row && e.1 == col && e.2 == i && e.3 == j)
            .map_or(0, |e| e.4)
    }

    /// Contracts a matrix `G = dPhi/dW` with the Jacobian: returns
    /// `dPhi/da_{ij}` as an `n x n` matrix (entries of `A` treated as independent).
    pub fn pullback(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for &(row, col, i, j, c) in &self.entries {
            out[(i, j)] += f64::from(c) * g[(row, col)];
        }
        out
    }
}

pub fn derivation_jacobian(table: &IndexTable) -> DerivationJacobian {
    let mut entries = Vec::new();
    for (s, e) in table.entries().iter().enumerate() {
        for &i in e.entries() {
            entries.push((s, s, i, i, 1));
        }
    }
    entries.extend(
        table
            .couplings()
            .iter()
            .map(|c| (c.row, c.col, c.i, c.j, c.sign)),
    );
    DerivationJacobian {
        entries,
        dim: table.len(),
        n: table.n(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(e: &[usize]) -> MultiIndex {
        MultiIndex(e.to_vec())
    }

    /// Parity by explicit bubble sort.
    fn brute_parity(v: &[usize]) -> i8 {
        let mut v = v.to_vec();
        let mut swaps = 0;
        for a in 0..v.len() {
            for b in 0..v.len() - 1 - a {
                if v[b] > v[b + 1] {
                    v.swap(b, b + 1);
                    swaps += 1;
                }
            }
        }
        if swaps % 2 == 0 {
            1
        } else {
            -1
        }
    }

    #[test]
    fn table_examples() {
        let t = build_index_table(2, 3).unwrap();
        assert_eq!(t.entries(), &[mi(&[0, 1]), mi(&[0, 2]), mi(&[1, 2])]);
        let t = build_index_table(1, 4).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.get(3), &mi(&[3]));
        assert_eq!(build_index_table(3, 6).unwrap().len(), 20);
        assert!(build_index_table(0, 3).is_err());
        assert!(build_index_table(4, 3).is_err());
    }

    #[test]
    fn table_maps_round_trip() {
        for n in 1..=7 {
            for p in 1..=n {
                let t = build_index_table(p, n).unwrap();
                assert_eq!(t.len() as f64, binomial(n, p));
                for (s, e) in t.entries().iter().enumerate() {
                    assert_eq!(t.position(e), Some(s));
                    assert_eq!(e.complement(n).complement(n), *e);
                    for &i in e.entries() {
                        assert_eq!(e.remove(i).unwrap().insert(i).unwrap(), *e);
                        assert!(t.members(i).contains(&s));
                    }
                }
                for w in t.entries().windows(2) {
                    assert!(w[0] < w[1]);
                }
            }
        }
    }

    #[test]
    fn sign_examples() {
        assert_eq!(permutation_sign(&mi(&[0]), &mi(&[1, 2])).unwrap(), 1);
        assert_eq!(permutation_sign(&mi(&[1]), &mi(&[0, 2])).unwrap(), -1);
        assert_eq!(permutation_sign(&mi(&[2]), &mi(&[0, 1])).unwrap(), 1);
        assert_eq!(
            permutation_sign(&MultiIndex::empty(), &mi(&[0, 1])).unwrap(),
            1
        );
        assert_eq!(
            permutation_sign(&mi(&[0, 1, 2]), &MultiIndex::empty()).unwrap(),
            1
        );
        assert!(permutation_sign(&mi(&[1]), &mi(&[1, 2])).is_err());
    }

    #[test]
    fn sign_matches_bubble_sort_parity() {
        let n = 7;
        for p in 0..=4 {
            let left = if p == 0 {
                vec![MultiIndex::empty()]
            } else {
                combinations(p, n)
            };
            for a in &left {
                for q in 1..=(n - p).min(3) {
                    for b in combinations(q, n) {
                        if b.entries().iter().any(|&x| a.contains(x)) {
                            continue;
                        }
                        let cat: Vec<usize> =
                            a.entries().iter().chain(b.entries()).copied().collect();
                        assert_eq!(permutation_sign(a, &b).unwrap(), brute_parity(&cat));
                    }
                }
            }
        }
    }

    #[test]
    fn lambda_examples() {
        let t = build_index_table(2, 3).unwrap();
        let lam = Spectrum::new(vec![1.0, 10.0, 100.0]).unwrap();
        assert_eq!(lambda_of(&lam, &t).unwrap().values(), &[11.0, 101.0, 110.0]);
        let t = build_index_table(3, 3).unwrap();
        assert_eq!(lambda_of(&lam, &t).unwrap().values(), &[111.0]);
        let t4 = build_index_table(2, 4).unwrap();
        assert!(lambda_of(&lam, &t4).is_err());
    }

    #[test]
    fn diagonal_a_gives_diagonal_w() {
        let t = build_index_table(2, 4).unwrap();
        let d = [1.0, -2.0, 0.5, 3.0];
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&d));
        let w = derivation_matrix(&a, &t).unwrap().into_matrix();
        let lam = lambda_of(&Spectrum::from_slice(&d).unwrap(), &t).unwrap();
        for r in 0..t.len() {
            for c in 0..t.len() {
                let expect = if r == c { lam.values()[r] } else { 0.0 };
                assert_eq!(w[(r, c)], expect);
            }
        }
    }

    #[test]
    fn p1_reproduces_a() {
        let t = build_index_table(1, 3).unwrap();
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        assert_eq!(derivation_matrix(&a, &t).unwrap().into_matrix(), a);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let t = build_index_table(1, 2).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.5, 1.0]);
        assert!(derivation_matrix(&a, &t).is_err());
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0 + 1e-15, 1.0]);
        assert!(derivation_matrix(&a, &t).is_ok());
    }

    #[test]
    fn oversize_refused() {
        let t = build_index_table(5, 11).unwrap(); // N = 462
        let a = DMatrix::identity(11, 11);
        assert!(derivation_matrix(&a, &t).is_err());
    }

    #[test]
    fn jacobian_cases() {
        let t = build_index_table(2, 4).unwrap();
        let jac = derivation_jacobian(&t);
        for (s, e) in t.entries().iter().enumerate() {
            for i in 0..4 {
                let expect = i8::from(e.contains(i));
                assert_eq!(jac.coefficient(s, s, i, i), expect);
            }
        }
        // I = (0,1) = 0 + K with K = (1); J = (1,2) = 2 + K
        let row = t.position(&mi(&[0, 1])).unwrap();
        let col = t.position(&mi(&[1, 2])).unwrap();
        let expect =
            removal_sign(&mi(&[0, 1]), 0).unwrap() * removal_sign(&mi(&[1, 2]), 2).unwrap();
        assert_eq!(expect, -1);
        assert_eq!(jac.coefficient(row, col, 0, 2), expect);
        assert_eq!(jac.coefficient(row, col, 1, 2), 0);
    }
}
