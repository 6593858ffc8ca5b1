use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cas_core::coding::{
    field_inv, privacy_census, rs_decode, rs_encode, share_secret, Field, FieldElement, Polynomial, ShareVector,
};

fn fe(v: u64) -> FieldElement {
    FieldElement(v)
}

fn gf(p: u64) -> Field {
    Field::new(p).unwrap()
}

fn shares(vals: &[Option<u64>]) -> ShareVector {
    ShareVector::from_slots(vals.iter().map(|v| v.map(fe)).collect())
}

/// Brute-force inverse: scan for b with a*b = 1.
fn scan_inverse(p: u64, a: u64) -> Option<u64> {
    (1..p).find(|b| a * b % p == 1)
}

/// Direct evaluation of sum c_i x^i mod p, without Horner.
fn eval_direct(p: u64, coeffs: &[u64], x: u64) -> u64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c * (0..i).fold(1, |acc, _| acc * x % p) % p)
        .sum::<u64>()
        % p
}

/// Lagrange interpolation of the secret and the coefficients from exactly k points.
fn interpolate(p: u64, pts: &[(u64, u64)]) -> Vec<u64> {
    let k = pts.len();
    let inv = |a: u64| scan_inverse(p, a % p).unwrap();
    let mut out = vec![0u64; k];
    for (i, &(xi, yi)) in pts.iter().enumerate() {
        // basis polynomial prod_{j != i} (x - xj) / (xi - xj)
        let mut basis = vec![1u64];
        let mut denom = 1u64;
        for (j, &(xj, _)) in pts.iter().enumerate() {
            if i == j {
                continue;
            }
            let mut next = vec![0u64; basis.len() + 1];
            for (d, &b) in basis.iter().enumerate() {
                next[d + 1] = (next[d + 1] + b) % p;
                next[d] = (next[d] + b * (p - xj % p)) % p;
            }
            basis = next;
            denom = denom * ((xi + p - xj) % p) % p;
        }
        let scale = yi * inv(denom) % p;
        for (d, b) in basis.iter().enumerate() {
            out[d] = (out[d] + b * scale) % p;
        }
    }
    out
}

/// Tries every k-subset of available shares and keeps the polynomial that
/// agrees with at least n_avail - e of them.
fn brute_decode(p: u64, received: &[Option<u64>], k: usize, e: usize) -> Option<Vec<u64>> {
    let avail: Vec<(u64, u64)> = received
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i as u64 + 1, v)))
        .collect();
    if avail.len() < k {
        return None;
    }
    let m = avail.len();
    for mask in 0u32..1 << m {
        if mask.count_ones() as usize != k {
            continue;
        }
        let pts: Vec<_> = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| avail[i]).collect();
        let poly = interpolate(p, &pts);
        let agree = avail.iter().filter(|&&(x, y)| eval_direct(p, &poly, x) == y).count();
        if agree + e >= m {
            return Some(poly);
        }
    }
    None
}

#[test]
fn inverse_small_field() {
    let f = gf(11);
    assert_eq!(field_inv(&f, fe(1)).unwrap(), fe(1));
    assert_eq!(field_inv(&f, fe(10)).unwrap(), fe(10));
    assert_eq!(field_inv(&f, fe(3)).unwrap(), fe(4));
    assert!(field_inv(&f, fe(0)).is_err());
}

#[test]
fn inverse_matches_scan_for_all_elements() {
    for p in [2, 3, 5, 7, 11, 13, 257] {
        let f = gf(p);
        for a in 1..p {
            assert_eq!(field_inv(&f, fe(a)).unwrap().0, scan_inverse(p, a).unwrap(), "p={p} a={a}");
        }
    }
}

#[test]
fn encode_examples() {
    let f = gf(11);
    let enc = |c: &[u64], n| rs_encode(&f, &Polynomial::from_values(&f, c), n).unwrap();
    assert_eq!(enc(&[5], 3), shares(&[Some(5), Some(5), Some(5)]));
    assert_eq!(enc(&[3, 4], 5), shares(&[Some(7), Some(0), Some(4), Some(8), Some(1)]));
    assert_eq!(enc(&[0, 0], 5), shares(&[Some(0); 5]));
}

#[test]
fn encode_rejects_bad_parameters() {
    let f = gf(5);
    assert!(rs_encode(&f, &Polynomial::from_values(&f, &[1, 2]), 5).is_err());
    assert!(rs_encode(&f, &Polynomial::from_values(&f, &[1, 2, 3]), 2).is_err());
    assert!(rs_encode(&f, &Polynomial::new(vec![]), 3).is_err());
}

#[test]
fn share_secret_is_an_encoding() {
    let f = gf(11);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k in 1..=4 {
        let (poly, sv) = share_secret(&f, fe(3), k, 6, &mut rng).unwrap();
        assert_eq!(poly.secret(), fe(3));
        assert_eq!(poly.k(), k);
        assert_eq!(rs_encode(&f, &poly, 6).unwrap(), sv);
    }
    let (_, sv) = share_secret(&f, fe(7), 1, 4, &mut rng).unwrap();
    assert!(sv.slots().iter().all(|s| *s == Some(fe(7))));
}

#[test]
fn decode_examples() {
    let f = gf(11);
    let clean = shares(&[Some(7), Some(0), Some(4), Some(8), Some(1)]);
    assert_eq!(rs_decode(&f, &clean, 2), Some(Polynomial::from_values(&f, &[3, 4])));

    let damaged = shares(&[Some(7), Some(0), Some(9), Some(8), None]);
    assert_eq!(rs_decode(&f, &damaged, 2), Some(Polynomial::from_values(&f, &[3, 4])));
    assert_eq!(brute_decode(11, &[Some(7), Some(0), Some(9), Some(8), None], 2, 1), Some(vec![3, 4]));

    let short = shares(&[Some(7), None, None, None, None]);
    assert_eq!(rs_decode(&f, &short, 2), None);
}

#[test]
fn census_examples() {
    let f = gf(11);
    let one = shares(&[Some(6), None, None, None, None]);
    let c = privacy_census(&f, &one, 2).unwrap();
    assert_eq!(c.len(), 11);
    assert!(c.values().all(|&n| n == 1));

    let none = ShareVector::erased(5);
    let c = privacy_census(&f, &none, 2).unwrap();
    assert!(c.values().all(|&n| n == 11));

    let f5 = gf(5);
    let two = shares(&[None, Some(2), None, Some(4)]);
    let c = privacy_census(&f5, &two, 3).unwrap();
    assert_eq!(c.len(), 5);
    assert!(c.values().all(|&n| n == 1));
}

#[test]
fn census_matches_enumeration() {
    // Independent count over all p^k coefficient vectors.
    let (p, k) = (5u64, 3usize);
    let fixed = [(1u64, 3u64), (3, 0)];
    let mut want: BTreeMap<u64, u64> = BTreeMap::new();
    for code in 0..p.pow(k as u32) {
        let coeffs: Vec<u64> = (0..k).map(|i| code / p.pow(i as u32) % p).collect();
        if fixed.iter().all(|&(x, y)| eval_direct(p, &coeffs, x) == y) {
            *want.entry(coeffs[0]).or_default() += 1;
        }
    }
    let sv = shares(&[Some(3), None, Some(0), None]);
    let got = privacy_census(&gf(p), &sv, k).unwrap();
    let got: BTreeMap<u64, u64> = got.into_iter().map(|(s, n)| (s.0, n)).collect();
    assert_eq!(got, want);
}

#[test]
fn census_leaks_with_k_shares() {
    let f = gf(11);
    let sv = shares(&[Some(7), Some(0), None, None, None]);
    let c = privacy_census(&f, &sv, 2).unwrap();
    let nonzero: Vec<_> = c.iter().filter(|(_, &n)| n > 0).collect();
    assert_eq!(nonzero, vec![(&fe(3), &1)]);
}

fn coded(p: u64, coeffs: &[u64], n: usize) -> Vec<u64> {
    (1..=n as u64).map(|x| eval_direct(p, coeffs, x)).collect()
}

proptest! {
    #[test]
    fn encode_matches_direct_evaluation(coeffs in prop::collection::vec(0u64..257, 1..5), n in 5usize..10) {
        let f = gf(257);
        let sv = rs_encode(&f, &Polynomial::from_values(&f, &coeffs), n).unwrap();
        let want: Vec<_> = coded(257, &coeffs, n).into_iter().map(|v| Some(fe(v))).collect();
        prop_assert_eq!(sv.slots(), &want[..]);
    }

    #[test]
    fn any_k_clean_shares_decode(coeffs in prop::collection::vec(0u64..257, 1..4), keep in any::<u16>()) {
        let n = 7;
        let k = coeffs.len();
        let f = gf(257);
        let full = coded(257, &coeffs, n);
        // Keep at least k positions, chosen by the mask bits plus a fill.
        let mut mask: Vec<bool> = (0..n).map(|i| keep >> i & 1 == 1).collect();
        let mut kept = mask.iter().filter(|&&b| b).count();
        for m in mask.iter_mut() {
            if kept >= k {
                break;
            }
            if !*m {
                *m = true;
                kept += 1;
            }
        }
        let sv = ShareVector::from_slots((0..n).map(|i| mask[i].then(|| fe(full[i]))).collect());
        prop_assert_eq!(rs_decode(&f, &sv, k), Some(Polynomial::from_values(&f, &coeffs)));
    }

    #[test]
    fn robust_decode_within_bound(
        coeffs in prop::collection::vec(0u64..257, 1..4),
        seed in any::<u64>(),
        errs in 0usize..4,
        erasures in 0usize..7,
    ) {
        let n = 7;
        let k = coeffs.len();
        prop_assume!(2 * errs + erasures < n - k + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut received: Vec<Option<u64>> = coded(257, &coeffs, n).into_iter().map(Some).collect();
        let picked = rand::seq::index::sample(&mut rng, n, errs + erasures).into_vec();
        for &i in &picked[..errs] {
            received[i] = received[i].map(|v| (v + 1 + seed % 256) % 257);
        }
        for &i in &picked[errs..] {
            received[i] = None;
        }
        let f = gf(257);
        let got = rs_decode(&f, &shares(&received), k);
        prop_assert_eq!(got.clone(), Some(Polynomial::from_values(&f, &coeffs)));
        let brute = brute_decode(257, &received, k, errs).map(|c| Polynomial::from_values(&f, &c));
        prop_assert_eq!(got, brute);
    }

    #[test]
    fn census_is_uniform(p in prop::sample::select(vec![5u64, 7, 11]), k in 2usize..4, seed in any::<u64>()) {
        prop_assume!(p.pow(k as u32) <= 2000);
        let n = (p - 1) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = gf(p);
        let (_, full) = share_secret(&f, fe(seed % p), k, n, &mut rng).unwrap();
        let mut sv = ShareVector::erased(n);
        for i in rand::seq::index::sample(&mut rng, n, k - 1).into_vec() {
            sv.set(i + 1, full.get(i + 1).unwrap());
        }
        let c = privacy_census(&f, &sv, k).unwrap();
        prop_assert_eq!(c.len() as u64, p);
        prop_assert!(c.values().all(|&v| v == 1));
    }

    #[test]
    fn field_laws(a in 0u64..257, b in 0u64..257, c in 0u64..257) {
        let f = gf(257);
        let (a, b, c) = (fe(a), fe(b), fe(c));
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        prop_assert_eq!(f.add(f.sub(a, b), b), a);
        if b != f.zero() {
            prop_assert_eq!(f.mul(f.div(a, b).unwrap(), b), a);
        }
    }
}
