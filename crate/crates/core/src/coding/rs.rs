use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use super::field::{Field, FieldElement};
use super::CodingError;

/// Message polynomial, lowest degree first. Coefficient 0 is the secret.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Polynomial {
    pub coeffs: Vec<FieldElement>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<FieldElement>) -> Polynomial {
        Polynomial { coeffs }
    }

    pub fn from_values(field: &Field, values: &[u64]) -> Polynomial {
        Polynomial::new(values.iter().map(|&v| field.elem(v)).collect())
    }

    pub fn k(&self) -> usize {
        self.coeffs.len()
    }

    pub fn secret(&self) -> FieldElement {
        self.coeffs.first().copied().unwrap_or_default()
    }

    /// Horner evaluation.
    pub fn eval(&self, field: &Field, x: FieldElement) -> FieldElement {
        self.coeffs
            .iter()
            .rev()
            .fold(field.zero(), |acc, &c| field.add(field.mul(acc, x), c))
    }
}

/// One slot per server, indexed 1..=N. `None` marks an erased or absent share.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ShareVector {
    slots: Vec<Option<FieldElement>>,
}

impl ShareVector {
    pub fn erased(n: usize) -> ShareVector {
        ShareVector { slots: vec![None; n] }
    }

    pub fn from_slots(slots: Vec<Option<FieldElement>>) -> ShareVector {
        ShareVector { slots }
    }

    pub fn n(&self) -> usize {
        self.slots.len()
    }

    /// Share held for server `j` (1-based).
    pub fn get(&self, j: usize) -> Option<FieldElement> {
        self.slots.get(j.wrapping_sub(1)).copied().flatten()
    }

    pub fn set(&mut self, j: usize, v: FieldElement) {
        self.slots[j - 1] = Some(v);
    }

    pub fn erase(&mut self, j: usize) {
        self.slots[j - 1] = None;
    }

    pub fn slots(&self) -> &[Option<FieldElement>] {
        &self.slots
    }

    /// `(server index, value)` for every share that is present.
    pub fn available(&self) -> impl Iterator<Item = (usize, FieldElement)> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i + 1, v)))
    }

    pub fn n_avail(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }
}

impl fmt::Display for ShareVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.slots.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match s {
                Some(v) => write!(f, "{v}")?,
                None => f.write_str("_")?,
            }
        }
        Ok(())
    }
}

/// Evaluates `input` at x_j = j for j = 1..=n.
pub fn rs_encode(field: &Field, input: &Polynomial, n: usize) -> Result<ShareVector, CodingError> {
    if n as u64 >= field.modulus() {
        return Err(CodingError::FieldTooSmall { n, p: field.modulus() });
    }
    if input.k() == 0 || input.k() > n {
        return Err(CodingError::BadParameters { k: input.k(), n });
    }
    let slots = (1..=n)
        .map(|j| Some(input.eval(field, field.elem(j as u64))))
        .collect();
    Ok(ShareVector { slots })
}

/// Shamir sharing: the secret becomes coefficient 0, the other k-1
/// coefficients are drawn uniformly.
pub fn share_secret<R: Rng + ?Sized>(
    field: &Field,
    secret: FieldElement,
    k: usize,
    n: usize,
    rng: &mut R,
) -> Result<(Polynomial, ShareVector), CodingError> {
    if k == 0 || k > n {
        return Err(CodingError::BadParameters { k, n });
    }
    if !field.contains(secret) {
        return Err(CodingError::NotInField(secret.0));
    }
    let mut coeffs = Vec::with_capacity(k);
    coeffs.push(secret);
    for _ in 1..k {
        coeffs.push(FieldElement(rng.gen_range(0..field.modulus())));
    }
    let poly = Polynomial::new(coeffs);
    let shares = rs_encode(field, &poly, n)?;
    Ok((poly, shares))
}

/// Solves `a x = b` by Gauss-Jordan elimination. Free variables are set to 0.
/// Returns `None` when the system is inconsistent.
fn solve(field: &Field, mut a: Vec<Vec<FieldElement>>, mut b: Vec<FieldElement>) -> Option<Vec<FieldElement>> {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(piv) = (r..rows).find(|&i| a[i][c].0 != 0) else {
            continue;
        };
        a.swap(r, piv);
        b.swap(r, piv);
        let inv = field.inv(a[r][c]).expect("pivot is nonzero");
        for x in a[r].iter_mut() {
            *x = field.mul(*x, inv);
        }
        b[r] = field.mul(b[r], inv);
        for i in 0..rows {
            if i != r && a[i][c].0 != 0 {
                let m = a[i][c];
                for j in 0..cols {
                    let d = field.mul(m, a[r][j]);
                    a[i][j] = field.sub(a[i][j], d);
                }
                b[i] = field.sub(b[i], field.mul(m, b[r]));
            }
        }
        pivots.push(c);
        r += 1;
    }
    if b[r..].iter().any(|v| v.0 != 0) {
        return None;
    }
    let mut x = vec![field.zero(); cols];
    for (row, &c) in pivots.iter().enumerate() {
        x[c] = b[row];
    }
    Some(x)
}

/// Divides `num` by a monic `den`. Returns `None` unless the remainder is zero.
fn div_exact(field: &Field, num: &[FieldElement], den: &[FieldElement]) -> Option<Vec<FieldElement>> {
    let dd = den.len() - 1;
    if num.len() <= dd {
        return num.iter().all(|c| c.0 == 0).then(Vec::new);
    }
    let mut rem = num.to_vec();
    let mut quot = vec![field.zero(); num.len() - dd];
    for i in (0..quot.len()).rev() {
        let c = rem[i + dd];
        quot[i] = c;
        if c.0 != 0 {
            for (j, &d) in den.iter().enumerate() {
                rem[i + j] = field.sub(rem[i + j], field.mul(c, d));
            }
        }
    }
    rem.iter().all(|c| c.0 == 0).then_some(quot)
}

/// Berlekamp-Welch decoding. Erased slots are dropped; with `n_avail`
/// remaining shares up to `(n_avail - k) / 2` corrupted values are corrected.
/// `None` is the decoder's failure value.
pub fn rs_decode(field: &Field, received: &ShareVector, k: usize) -> Option<Polynomial> {
    let pts: Vec<(FieldElement, FieldElement)> = received
        .available()
        .map(|(j, y)| (field.elem(j as u64), y))
        .collect();
    let n = pts.len();
    if k == 0 || n < k || pts.iter().any(|(_, y)| !field.contains(*y)) {
        return None;
    }
    let e = (n - k) / 2;
    // Unknowns: q_0..q_{e+k-1}, then the non-leading coefficients of the
    // monic error locator E, e_0..e_{e-1}.
    let qn = e + k;
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for &(x, y) in &pts {
        let mut row = Vec::with_capacity(qn + e);
        let mut xp = field.one();
        for _ in 0..qn {
            row.push(xp);
            xp = field.mul(xp, x);
        }
        let mut xp = field.one();
        for _ in 0..e {
            row.push(field.neg(field.mul(y, xp)));
            xp = field.mul(xp, x);
        }
        a.push(row);
        b.push(field.mul(y, field.pow(x, e as u64)));
    }
    let sol = solve(field, a, b)?;
    let q = &sol[..qn];
    let mut locator = sol[qn..].to_vec();
    locator.push(field.one());
    let mut p = div_exact(field, q, &locator)?;
    if p.len() > k && p[k..].iter().any(|c| c.0 != 0) {
        return None;
    }
    p.resize(k, field.zero());
    let poly = Polynomial::new(p);
    let agree = pts.iter().filter(|&&(x, y)| poly.eval(field, x) == y).count();
    (agree + e >= n).then_some(poly)
}

/// For every secret, the number of degree-<k polynomials consistent with the
/// given shares. Enumerates all p^k polynomials, so only for tiny fields.
pub fn privacy_census(
    field: &Field,
    fixed: &ShareVector,
    k: usize,
) -> Result<BTreeMap<FieldElement, u64>, CodingError> {
    let p = field.modulus();
    let total = (p as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if k == 0 || total > 50_000_000 {
        return Err(CodingError::CensusTooLarge { p, k });
    }
    let fixed: Vec<(FieldElement, FieldElement)> = fixed
        .available()
        .map(|(j, v)| (field.elem(j as u64), v))
        .collect();
    let mut counts: BTreeMap<FieldElement, u64> = (0..p).map(|s| (FieldElement(s), 0)).collect();
    let mut coeffs = vec![field.zero(); k];
    for _ in 0..total as u64 {
        let poly = Polynomial::new(coeffs.clone());
        if fixed.iter().all(|&(x, y)| poly.eval(field, x) == y) {
            *counts.get_mut(&coeffs[0]).expect("all secrets seeded") += 1;
        }
        for c in coeffs.iter_mut() {
            c.0 += 1;
            if c.0 < p {
                break;
            }
            c.0 = 0;
        }
    }
    Ok(counts)
}
