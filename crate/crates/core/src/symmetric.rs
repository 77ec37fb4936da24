//! Elementary symmetric polynomials and Gårding cones.
//!
//! Every routine works on plain `f64` slices of arbitrary length so the same
//! code serves eigenvalue vectors in `R^n` and their exterior-power sums in
//! `R^N`. [`Spectrum`] is the validated owner type used at API boundaries.
//!
//! `sigma_m` is evaluated with the prefix recurrence
//! `e_j <- e_j + v_i * e_{j-1}` (one pass, `O(d * m)`), never by subset sums.

use crate::error::{HqError, Result};

/// A finite, non-empty list of real eigenvalues in caller order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(HqError::invalid("spectrum must have at least one entry"));
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(HqError::invalid(format!(
                "spectrum entry {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Spectrum(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Copy of the entries in non-increasing order. The stored order is untouched.
    pub fn sorted_desc(&self) -> Vec<f64> {
        sorted_desc(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Spectrum {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Fills `out[0..=max_m]` with `sigma_0 .. sigma_max_m` of `v`, skipping the
/// positions listed in `skip`.
pub fn sigma_table_into(v: &[f64], skip: &[usize], max_m: usize, out: &mut [f64]) {
    let out = &mut out[..=max_m];
    out.fill(0.0);
    out[0] = 1.0;
    let mut filled = 0usize;
    for (i, &x) in v.iter().enumerate() {
        if skip.contains(&i) {
            continue;
        }
        filled += 1;
        let top = filled.min(max_m);
        for j in (1..=top).rev() {
            out[j] += x * out[j - 1];
        }
    }
}

/// `sigma_0 .. sigma_max_m` of `v` as a fresh vector.
pub fn sigma_table(v: &[f64], max_m: usize) -> Vec<f64> {
    let mut out = vec![0.0; max_m + 1];
    sigma_table_into(v, &[], max_m, &mut out);
    out
}

/// `sigma_m(v)` with the conventions `sigma_0 = 1` and `sigma_m = 0` for
/// `m < 0` or `m > len(v)`.
pub fn sigma(m: i64, v: &[f64]) -> f64 {
    sigma_excluding(m, v, &[])
}

/// `sigma_m(v | excluded)`: the same polynomial on `v` with the listed
/// positions removed. Indices are not validated here.
pub fn sigma_excluding(m: i64, v: &[f64], excluded: &[usize]) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let live = v.len() - excluded.iter().filter(|&&i| i < v.len()).count();
    if m < 0 || m as usize > live {
        return 0.0;
    }
    let m = m as usize;
    let mut table = vec![0.0; m + 1];
    sigma_table_into(v, excluded, m, &mut table);
    table[m]
}

pub fn elementary_symmetric(m: i64, v: &Spectrum) -> f64 {
    sigma(m, v.values())
}

/// `sigma_m` of `v` with one or two entries removed (0-based positions).
pub fn partial_sigma(m: i64, v: &Spectrum, excluded: &[usize]) -> Result<f64> {
    match excluded {
        [i] if *i < v.len() => {}
        [i, j] if *i < v.len() && *j < v.len() && i != j => {}
        [_] | [_, _] => {
            return Err(HqError::invalid(format!(
                "excluded indices {excluded:?} must be distinct and below {}",
                v.len()
            )))
        }
        _ => {
            return Err(HqError::invalid(
                "partial_sigma excludes exactly one or two entries",
            ))
        }
    }
    Ok(sigma_excluding(m, v.values(), excluded))
}

/// Cone level `m` for vectors of length `dim`, `1 <= m <= dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeQuery {
    level: usize,
}

impl ConeQuery {
    pub fn new(level: usize, dim: usize) -> Result<Self> {
        if level == 0 || level > dim {
            return Err(HqError::invalid(format!(
                "cone level {level} outside 1..={dim}"
            )));
        }
        Ok(ConeQuery { level })
    }

    pub fn level(&self) -> usize {
        self.level
    }
}

/// First level `j <= m` with `sigma_j(v) <= 0`, together with that value.
pub fn first_failing_level(m: usize, v: &[f64]) -> Option<(usize, f64)> {
    let table = sigma_table(v, m.min(v.len()));
    (1..=m).find_map(|j| {
        let s = table.get(j).copied().unwrap_or(0.0);
        (s <= 0.0).then_some((j, s))
    })
}

/// Strict membership in the open cone `Gamma_m`.
pub fn in_cone(m: usize, v: &[f64]) -> bool {
    first_failing_level(m, v).is_none()
}

pub fn in_garding_cone(q: ConeQuery, v: &Spectrum) -> bool {
    in_cone(q.level, v.values())
}

/// `min_{1<=j<=m} sigma_j(v)`. Positive exactly on `Gamma_m`; used for
/// diagnostics, never for membership.
pub fn cone_margin(m: usize, v: &[f64]) -> f64 {
    let table = sigma_table(v, m.min(v.len()));
    (1..=m)
        .map(|j| table.get(j).copied().unwrap_or(0.0))
        .fold(f64::INFINITY, f64::min)
}

fn check_levels(k: usize, l: usize, d: usize) -> Result<()> {
    if l >= k || k > d {
        return Err(HqError::invalid(format!(
            "need 0 <= l < k <= {d}, got k={k}, l={l}"
        )));
    }
    Ok(())
}

/// `[sigma_k(v) / sigma_l(v)]^{1/(k-l)}`, defined only on `Gamma_k`.
pub fn quotient_root(k: usize, l: usize, v: &Spectrum) -> Result<f64> {
    check_levels(k, l, v.len())?;
    let v = v.values();
    if let Some((level, value)) = first_failing_level(k, v) {
        return Err(HqError::not_in_cone(level, value));
    }
    let t = sigma_table(v, k);
    Ok((t[k] / t[l]).powf(1.0 / (k - l) as f64))
}

/// Scratch buffers for [`quotient_partials`]; reuse across calls to avoid
/// allocation in sampling loops.
#[derive(Debug, Default, Clone)]
pub struct QuotientScratch {
    full: Vec<f64>,
    reduced: Vec<f64>,
}

/// Value of `q = sigma_k / sigma_l` at `v` and its partials
/// `dq/dv_i = [sigma_{k-1}(v|i) sigma_l(v) - sigma_k(v) sigma_{l-1}(v|i)] / sigma_l(v)^2`
/// written into `grad`. No cone check.
pub fn quotient_partials(
    k: usize,
    l: usize,
    v: &[f64],
    scratch: &mut QuotientScratch,
    grad: &mut [f64],
) -> f64 {
    let d = v.len();
    scratch.full.resize(k + 1, 0.0);
    scratch.reduced.resize(k, 0.0);
    sigma_table_into(v, &[], k.min(d), &mut scratch.full);
    let (sk, sl) = (scratch.full[k], scratch.full[l]);
    let sl2 = sl * sl;
    for i in 0..d {
        // k - 1 <= d - 1 always, so the reduced table has room for level k-1
        sigma_table_into(v, &[i], k - 1, &mut scratch.reduced);
        let dk = scratch.reduced[k - 1];
        let dl = if l == 0 { 0.0 } else { scratch.reduced[l - 1] };
        grad[i] = (dk * sl - sk * dl) / sl2;
    }
    sk / sl
}

/// Gradient of the normalized quotient `[sigma_k/sigma_l]^{1/(k-l)}` on `Gamma_k`.
pub fn quotient_root_gradient(k: usize, l: usize, v: &Spectrum) -> Result<Vec<f64>> {
    check_levels(k, l, v.len())?;
    let v = v.values();
    if let Some((level, value)) = first_failing_level(k, v) {
        return Err(HqError::not_in_cone(level, value));
    }
    let mut grad = vec![0.0; v.len()];
    let q = quotient_partials(k, l, v, &mut QuotientScratch::default(), &mut grad);
    let e = 1.0 / (k - l) as f64;
    let scale = e * q.powf(e - 1.0);
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok(grad)
}

/// Binomial coefficient `C(n, k)` as `f64` (exact for the sizes used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k)
        .fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        .round()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Subset-sum oracle, only for short vectors.
    fn brute_sigma(m: usize, v: &[f64]) -> f64 {
        let d = v.len();
        assert!(d <= 12);
        (0u32..1 << d)
            .filter(|mask| mask.count_ones() as usize == m)
            .map(|mask| {
                (0..d)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| v[i])
                    .product::<f64>()
            })
            .sum()
    }

    #[test]
    fn sigma_conventions() {
        let v = Spectrum::new(vec![5.0, -3.0, 7.0]).unwrap();
        assert_eq!(elementary_symmetric(0, &v), 1.0);
        assert_eq!(elementary_symmetric(-1, &v), 0.0);
        let w = Spectrum::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(elementary_symmetric(4, &w), 0.0);
        assert_eq!(brute_sigma(2, &[1.0, 2.0, 3.0]), 11.0);
        assert_eq!(elementary_symmetric(2, &w), 11.0);
    }

    #[test]
    fn recurrence_matches_subset_sums() {
        let v = [0.3, -1.2, 2.5, 0.7, -0.4, 1.9, -2.2, 0.05, 1.1];
        for m in 0..=v.len() {
            let a = sigma(m as i64, &v);
            let b = brute_sigma(m, &v);
            assert!(
                (a - b).abs() <= 1e-12 * (1.0 + b.abs()),
                "m={m}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Spectrum::new(vec![1.0, f64::NAN]).is_err());
        assert!(Spectrum::new(vec![]).is_err());
    }

    #[test]
    fn sorted_view_is_a_copy() {
        let v = Spectrum::new(vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(v.sorted_desc(), vec![3.0, 2.0, 1.0]);
        assert_eq!(v.values(), &[1.0, 3.0, 2.0]);
    }

    #[test]
    fn partial_sigma_examples() {
        let v = Spectrum::new(vec![1.0, 2.0, 3.0]).unwrap();
        // removes the entry at position 1 (value 2)
        assert_eq!(partial_sigma(1, &v, &[1]).unwrap(), 4.0);
        assert_eq!(partial_sigma(1, &v, &[0, 2]).unwrap(), 2.0);
        assert!(partial_sigma(1, &v, &[1, 1]).is_err());
        assert!(partial_sigma(1, &v, &[3]).is_err());
        assert!(partial_sigma(1, &v, &[]).is_err());
    }

    #[test]
    fn deletion_identity() {
        let v = Spectrum::new(vec![0.9, -0.3, 1.7, 0.2, -1.1]).unwrap();
        for m in 0..=6i64 {
            for i in 0..v.len() {
                let lhs = elementary_symmetric(m, &v);
                let rhs = partial_sigma(m, &v, &[i]).unwrap()
                    + v.values()[i] * partial_sigma(m - 1, &v, &[i]).unwrap();
                assert!((lhs - rhs).abs() < 1e-13, "m={m} i={i}");
            }
        }
    }

    #[test]
    fn cone_membership() {
        let ones = Spectrum::new(vec![1.0; 5]).unwrap();
        assert!(in_garding_cone(ConeQuery::new(5, 5).unwrap(), &ones));
        let neg = Spectrum::new(vec![-1.0, 0.0, 0.0]).unwrap();
        assert!(!in_garding_cone(ConeQuery::new(1, 3).unwrap(), &neg));
        // sigma_1 = 3, sigma_2 = 3 - 3 - 1 = -1 by brute force
        let v = [3.0, 1.0, -1.0];
        assert_eq!(brute_sigma(1, &v), 3.0);
        assert_eq!(brute_sigma(2, &v), -1.0);
        let v = Spectrum::new(v.to_vec()).unwrap();
        assert!(in_garding_cone(ConeQuery::new(1, 3).unwrap(), &v));
        assert!(!in_garding_cone(ConeQuery::new(2, 3).unwrap(), &v));
        assert_eq!(first_failing_level(3, v.values()), Some((2, -1.0)));
        assert!(ConeQuery::new(0, 3).is_err());
        assert!(ConeQuery::new(4, 3).is_err());
    }

    #[test]
    fn cone_boundary_is_excluded() {
        assert!(!in_cone(1, &[1.0, -1.0]));
        assert_eq!(cone_margin(1, &[1.0, -1.0]), 0.0);
    }

    #[test]
    fn quotient_root_on_constant_vector() {
        let a = 1.7;
        let d = 6;
        let v = Spectrum::new(vec![a; d]).unwrap();
        for k in 1..=d {
            for l in 0..k {
                let expect = a * (binomial(d, k) / binomial(d, l)).powf(1.0 / (k - l) as f64);
                let got = quotient_root(k, l, &v).unwrap();
                assert!((got - expect).abs() < 1e-12 * expect, "k={k} l={l}");
            }
        }
    }

    #[test]
    fn quotient_root_k1_is_trace() {
        let v = Spectrum::new(vec![2.0, -0.5, 0.75]).unwrap();
        assert!((quotient_root(1, 0, &v).unwrap() - 2.25).abs() < 1e-15);
    }

    #[test]
    fn quotient_root_refuses_outside_cone() {
        let v = Spectrum::new(vec![3.0, 1.0, -1.0]).unwrap();
        match quotient_root(2, 0, &v) {
            Err(HqError::NotInCone { level, .. }) => assert_eq!(level, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(quotient_root(2, 2, &v).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 3), 20.0);
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert_eq!(binomial(30, 15), 155117520.0);
    }

    #[test]
    fn quotient_gradient_matches_finite_differences() {
        let v = vec![2.0, 1.3, 0.4, -0.2];
        let (k, l) = (3, 1);
        let s = Spectrum::new(v.clone()).unwrap();
        let g = quotient_root_gradient(k, l, &s).unwrap();
        for i in 0..v.len() {
            let h = 1e-6 * (1.0 + v[i].abs());
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[i] += h;
            vm[i] -= h;
            let fd = (quotient_root(k, l, &Spectrum::new(vp).unwrap()).unwrap()
                - quotient_root(k, l, &Spectrum::new(vm).unwrap()).unwrap())
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8 * (1.0 + g[i].abs()));
        }
    }
}
