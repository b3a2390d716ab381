//! Algebraic properties of GF(2)[t] and the route codec, checked against
//! small independent reference implementations.

use std::collections::HashSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polka_te::gf2poly::{crt, Degree, Gf2Poly};
use polka_te::polka::{self, decode_port, encode_port, NodeId, PortId};

mod common;
use common::{irreducible_by_trial_division, ref_deg, ref_divrem, ref_mul};

/// Polynomials of degree 1..=max_deg that are not products of two
/// non-constant factors, by sieving all such products.
fn irreducibles_by_sieve(max_deg: u32) -> HashSet<u128> {
    let limit = 1u128 << (max_deg + 1);
    let mut reducible = HashSet::new();
    for a in 2..limit {
        for b in a..limit {
            if ref_deg(a) + ref_deg(b) > max_deg as i32 {
                break;
            }
            reducible.insert(ref_mul(a, b));
        }
    }
    (2..limit).filter(|p| !reducible.contains(p)).collect()
}

fn poly(max_bits: u32) -> impl Strategy<Value = Gf2Poly> {
    let mask = u128::MAX >> (128 - max_bits);
    any::<u128>().prop_map(move |b| Gf2Poly::from_bits(b & mask))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn divmod_remultiplies(a in poly(100), b in poly(60)) {
        prop_assume!(!b.is_zero());
        let (q, r) = a.div_rem(b).unwrap();
        prop_assert!(r.degree() < b.degree());
        prop_assert_eq!((q.bits(), r.bits()), ref_divrem(a.bits(), b.bits()));
        prop_assert_eq!(b.checked_mul(q).unwrap() + r, a);
    }

    #[test]
    fn addition_is_xor_group(a in poly(128), b in poly(128), c in poly(128)) {
        prop_assert_eq!(a + a, Gf2Poly::ZERO);
        prop_assert_eq!(a + b, b + a);
        prop_assert_eq!((a + b) + c, a + (b + c));
    }

    #[test]
    fn mul_matches_reference_and_distributes(a in poly(60), b in poly(60), c in poly(60)) {
        let ab = a.checked_mul(b).unwrap();
        prop_assert_eq!(ab.bits(), ref_mul(a.bits(), b.bits()));
        prop_assert_eq!(a.checked_mul(b + c).unwrap(), ab + a.checked_mul(c).unwrap());
    }

    #[test]
    fn inverse_when_it_exists(a in poly(40), m in poly(20)) {
        prop_assume!(m.degree() >= Degree::Finite(1));
        if let Ok(inv) = a.inv_mod(m) {
            prop_assert_eq!(inv.mul_mod(a, m).unwrap(), Gf2Poly::ONE);
        } else {
            prop_assert_ne!(a.gcd(m).unwrap(), Gf2Poly::ONE);
        }
    }
}

#[test]
fn mul_overflow_is_detected() {
    let big = Gf2Poly::monomial(100);
    assert!(big.checked_mul(Gf2Poly::monomial(27)).is_ok());
    assert!(big.checked_mul(Gf2Poly::monomial(28)).is_err());
}

#[test]
fn irreducibility_agrees_with_sieve_up_to_degree_10() {
    let irr = irreducibles_by_sieve(10);
    // known counts of irreducible binary polynomials by degree
    let mut by_degree = [0usize; 11];
    for p in 2u128..(1 << 11) {
        let expected = irr.contains(&p);
        assert_eq!(irreducible_by_trial_division(p), expected, "{p:b}");
        assert_eq!(Gf2Poly::from_bits(p).is_irreducible().unwrap(), expected, "{p:b}");
        if expected {
            by_degree[ref_deg(p) as usize] += 1;
        }
    }
    assert_eq!(by_degree, [0, 2, 1, 2, 3, 6, 9, 18, 30, 56, 99]);
}

fn check_crt_bijection(moduli: &[u128]) {
    let total: i32 = moduli.iter().map(|m| ref_deg(*m)).sum();
    assert!(total <= 12);
    let ms: Vec<Gf2Poly> = moduli.iter().map(|&m| Gf2Poly::from_bits(m)).collect();
    let mut seen = HashSet::new();
    for x in 0u128..(1 << total) {
        let xp = Gf2Poly::from_bits(x);
        let residues: Vec<Gf2Poly> = ms.iter().map(|m| xp.rem(*m).unwrap()).collect();
        // residues of distinct x below the product degree never collide
        assert!(seen.insert(residues.clone()), "collision at {x:b} for {moduli:?}");
        let system: Vec<_> = residues.into_iter().zip(ms.iter().copied()).collect();
        assert_eq!(crt(&system).unwrap(), xp, "moduli {moduli:?}");
    }
    assert_eq!(seen.len(), 1 << total);
}

#[test]
fn crt_is_the_unique_low_degree_solution() {
    check_crt_bijection(&[0b11, 0b111, 0b1011]);
    check_crt_bijection(&[0b11, 0b111, 0b1011, 0b10011]);
    check_crt_bijection(&[0b111, 0b1011, 0b1101, 0b10011]);
    // pairwise coprime without all being irreducible: t^2 and (t+1)^2
    check_crt_bijection(&[0b100, 0b101, 0b10011, 0b1011]);
}

#[test]
fn crt_rejects_shared_factors() {
    let m = Gf2Poly::from_bits(0b111);
    assert!(crt(&[(Gf2Poly::ONE, m), (Gf2Poly::ZERO, m)]).is_err());
    assert!(crt(&[]).is_err());
}

fn random_path(rng: &mut ChaCha8Rng) -> Vec<(NodeId, PortId)> {
    let hops = rng.random_range(2..=8);
    let port_bits = rng.random_range(1..=5u32);
    let max_port = (1u64 << port_bits) - 1;
    let mut pool = polka::gen_node_ids(12, max_port).unwrap();
    pool.shuffle(rng);
    pool.into_iter()
        .take(hops)
        .map(|n| {
            let port = rng.random_range(0..=n.max_port());
            (n, PortId::new(port))
        })
        .collect()
}

#[test]
fn thousand_random_paths_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let hops = random_path(&mut rng);
        let route = polka::route_id_for_path(&hops).unwrap();
        let before = route;
        assert!(polka::verify_path(route, &hops), "case {case}");
        // the same label is read at every hop and never rewritten
        for (node, port) in &hops {
            assert_eq!(polka::forward(route, node), *port);
        }
        assert_eq!(route, before);
        let sum: u32 = hops.iter().map(|(n, _)| n.degree()).sum();
        assert!(route.poly().degree() < Degree::Finite(sum), "case {case}");
    }
}

#[test]
fn generated_ids_are_irreducible_and_wide_enough() {
    for max_port in [1, 3, 7, 15, 31] {
        let ids = polka::gen_node_ids(12, max_port).unwrap();
        for (i, a) in ids.iter().enumerate() {
            assert!(a.poly.is_irreducible().unwrap());
            assert!(a.max_port() >= max_port);
            assert_ne!(a.poly, Gf2Poly::T);
            for b in &ids[i + 1..] {
                assert_eq!(a.poly.gcd(b.poly).unwrap(), Gf2Poly::ONE);
            }
        }
        // ascending degree, then ascending value
        assert!(ids.windows(2).all(|w| w[0].poly.bits() < w[1].poly.bits()));
    }
}

proptest! {
    #[test]
    fn port_codec_is_a_bijection(k in 1u32..=16, n in any::<u64>()) {
        let n = n % (1u64 << k);
        let p = encode_port(n);
        prop_assert!(p.degree() < Degree::Finite(k));
        prop_assert_eq!(decode_port(p).unwrap(), n);
    }
}

#[test]
fn binary_text_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let p = Gf2Poly::from_bits(rng.random::<u128>() >> rng.random_range(0..128));
        let s = p.to_binary_string();
        assert_eq!(Gf2Poly::from_binary_str(&s).unwrap(), p);
        assert_eq!(s.parse::<Gf2Poly>().unwrap(), p);
    }
}
