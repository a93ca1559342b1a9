use geofence_core::bilinear::{counters, pair, GroupParams};
use geofence_core::hve::{
    encrypt, gen_token, plain_match, query, setup, Ciphertext, HveError, IndexVector, Message,
    Pattern, PublicKey, SecretKey, Symbol, Token,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn keys(width: usize, bits: u32, seed: u64) -> (GroupParams, PublicKey, SecretKey) {
    let params = GroupParams::generate(bits, seed).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xabc);
    let (pk, sk) = setup(width, &params, &mut rng).unwrap();
    (params, pk, sk)
}

fn all_indices(width: usize) -> Vec<IndexVector> {
    (0..1u32 << width)
        .map(|v| IndexVector::new((0..width).map(|i| v >> (width - 1 - i) & 1 == 1).collect()))
        .collect()
}

fn all_patterns(width: usize) -> Vec<Pattern> {
    let mut out = vec![vec![]];
    for _ in 0..width {
        out = out
            .into_iter()
            .flat_map(|p: Vec<Symbol>| {
                [Symbol::Zero, Symbol::One, Symbol::Star].map(|s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out.into_iter().map(Pattern::new).collect()
}

#[test]
fn three_by_three_baseline_tokens() {
    let (_, pk, sk) = keys(9, 62, 3);
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let token = gen_token(&sk, &"00*0000**".parse().unwrap(), &mut rng).unwrap();
    let m = Message(424242);
    let u1 = encrypt(&pk, &"100000000".parse().unwrap(), m, &mut rng).unwrap();
    let u2 = encrypt(&pk, &"000000010".parse().unwrap(), m, &mut rng).unwrap();
    assert_eq!(query(&token, &u2).unwrap(), Some(m));
    assert_eq!(query(&token, &u1).unwrap(), None);
    assert_eq!(token.pairing_cost(), 13);
}

#[test]
fn all_star_token_always_matches() {
    let (_, pk, sk) = keys(6, 62, 4);
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let token = gen_token(&sk, &Pattern::all_star(6), &mut rng).unwrap();
    assert!(token.parts().is_empty());
    assert_eq!(token.element_count(), 1);
    for i in all_indices(6) {
        let m = Message(rng.random_range(0..1 << 31));
        let c = encrypt(&pk, &i, m, &mut rng).unwrap();
        assert_eq!(query(&token, &c).unwrap(), Some(m));
    }
}

#[test]
fn exhaustive_small_widths() {
    for width in 1..=4 {
        let (_, pk, sk) = keys(width, 62, width as u64);
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let cts: Vec<(IndexVector, Message, Ciphertext)> = all_indices(width)
            .into_iter()
            .map(|i| {
                let m = Message(rng.random());
                let c = encrypt(&pk, &i, m, &mut rng).unwrap();
                (i, m, c)
            })
            .collect();
        for p in all_patterns(width) {
            let t = gen_token(&sk, &p, &mut rng).unwrap();
            for (i, m, c) in &cts {
                let expected = plain_match(i, &p).unwrap().then_some(*m);
                assert_eq!(query(&t, c).unwrap(), expected, "I={i} p={p}");
            }
        }
    }
}

#[test]
fn exhaustive_at_sixteen_bits() {
    // With 16-bit primes the message domain shrinks to 2^15, and a non-match
    // still never lands inside it.
    let (_, pk, sk) = keys(3, 16, 5);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for i in all_indices(3) {
        let c = encrypt(&pk, &i, Message(77), &mut rng).unwrap();
        for p in all_patterns(3) {
            let t = gen_token(&sk, &p, &mut rng).unwrap();
            let expected = plain_match(&i, &p).unwrap().then_some(Message(77));
            assert_eq!(query(&t, &c).unwrap(), expected);
        }
    }
    assert_eq!(
        encrypt(&pk, &"000".parse().unwrap(), Message(1 << 15), &mut rng),
        Err(HveError::MessageOutOfDomain(1 << 15))
    );
}

#[test]
fn fresh_randomness_per_encryption() {
    let (_, pk, _) = keys(4, 62, 6);
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let i: IndexVector = "1010".parse().unwrap();
    let a = encrypt(&pk, &i, Message(5), &mut rng).unwrap();
    let b = encrypt(&pk, &i, Message(5), &mut rng).unwrap();
    assert_ne!(a.to_text(), b.to_text());
}

#[test]
fn width_mismatches_are_errors() {
    let (_, pk, sk) = keys(4, 62, 7);
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    assert!(matches!(
        encrypt(&pk, &"101".parse().unwrap(), Message(1), &mut rng),
        Err(HveError::WidthMismatch { .. })
    ));
    assert!(gen_token(&sk, &"1*".parse().unwrap(), &mut rng).is_err());
    let c = encrypt(&pk, &"1011".parse().unwrap(), Message(1), &mut rng).unwrap();
    let (_, _, sk5) = keys(5, 62, 7);
    let t = gen_token(&sk5, &"1****".parse().unwrap(), &mut rng).unwrap();
    assert!(query(&t, &c).is_err());
    let params = GroupParams::generate(16, 1).unwrap();
    assert_eq!(setup(0, &params, &mut rng).unwrap_err(), HveError::ZeroWidth);
}

#[test]
fn key_arity_and_unblinding() {
    let (params, pk, sk) = keys(4, 16, 8);
    assert_eq!(pk.width(), 4);
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for i in 0..4 {
        let x = params.sample_gp(&mut rng);
        let (u, h, w) = pk.slot(i);
        let (su, sh, sw) = sk.slot(i);
        assert_eq!(pair(&u, &x).unwrap(), pair(&su, &x).unwrap());
        assert_eq!(pair(&h, &x).unwrap(), pair(&sh, &x).unwrap());
        assert_eq!(pair(&w, &x).unwrap(), pair(&sw, &x).unwrap());
        // The blinders are real: the public values differ from the secret ones.
        assert_ne!(u, su);
    }
    let (_, pk2, _) = keys(4, 16, 9);
    assert_ne!(pk.a(), pk2.a());
}

#[test]
fn token_arity() {
    let (_, _, sk) = keys(5, 62, 10);
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let t = gen_token(&sk, &"*1*0*".parse().unwrap(), &mut rng).unwrap();
    assert_eq!(t.parts().len(), 2);
    assert_eq!(t.element_count(), 5);
}

#[test]
fn cross_key_tokens_fail() {
    let (_, pk, _) = keys(6, 62, 11);
    let (_, _, other) = keys(6, 62, 12);
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    // Keys from different seeds live in different groups, so build the
    // second key pair over the same parameters to test a genuine cross-key query.
    let (_, other_same_group) = setup(6, pk.params(), &mut rng).unwrap();
    let c = encrypt(&pk, &"110011".parse().unwrap(), Message(9), &mut rng).unwrap();
    for p in ["******", "11****", "110011", "*1*0*1"] {
        let t = gen_token(&other_same_group, &p.parse().unwrap(), &mut rng).unwrap();
        assert_eq!(query(&t, &c).unwrap(), None, "{p}");
        let t = gen_token(&other, &p.parse().unwrap(), &mut rng).unwrap();
        assert!(query(&t, &c).is_err());
    }
}

#[test]
fn query_pairing_count_equals_cost() {
    let (_, pk, sk) = keys(8, 62, 13);
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    let c = encrypt(&pk, &"10110010".parse().unwrap(), Message(3), &mut rng).unwrap();
    for p in ["********", "1*******", "10110010", "0***1**0"] {
        let p: Pattern = p.parse().unwrap();
        let t = gen_token(&sk, &p, &mut rng).unwrap();
        counters::reset();
        query(&t, &c).unwrap();
        assert_eq!(counters::take().pairings, 1 + 2 * p.non_wildcards() as u64);
    }
}

#[test]
fn precomputed_tables_agree_and_skip_exponentiations() {
    let (_, mut pk, mut sk) = keys(6, 62, 14);
    let i: IndexVector = "011010".parse().unwrap();
    let p: Pattern = "0*1*1*".parse().unwrap();
    let c_plain = encrypt(&pk, &i, Message(8), &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
    let t_plain = gen_token(&sk, &p, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
    pk.precompute().unwrap();
    sk.precompute().unwrap();
    counters::reset();
    let c_pre = encrypt(&pk, &i, Message(8), &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
    let t_pre = gen_token(&sk, &p, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
    let ops = counters::take();
    assert_eq!(c_plain, c_pre);
    assert_eq!(t_plain, t_pre);
    assert_eq!(ops.exponentiations, 0);
    assert!(ops.table_hits > 0);
    assert_eq!(query(&t_pre, &c_pre).unwrap(), Some(Message(8)));
}

#[test]
fn text_formats_round_trip() {
    let (params, pk, sk) = keys(5, 62, 15);
    let mut rng = ChaCha20Rng::seed_from_u64(15);
    let t = gen_token(&sk, &"1**0*".parse().unwrap(), &mut rng).unwrap();
    let text = t.to_text();
    assert!(text.starts_with("HVETOK v1 l=5 J=1,4\npattern=1**0*\nK0="));
    assert!(text.contains("\nK4,2="));
    assert_eq!(Token::from_text(&text, &params).unwrap(), t);

    let c = encrypt(&pk, &"10101".parse().unwrap(), Message(1), &mut rng).unwrap();
    let text = c.to_text();
    assert!(text.starts_with("HVECTX v1 l=5\nC'="));
    assert_eq!(Ciphertext::from_text(&text, &params).unwrap(), c);

    let pk2 = PublicKey::from_text(&pk.to_text()).unwrap();
    assert_eq!(pk2.to_text(), pk.to_text());
    let sk2 = SecretKey::from_text(&sk.to_text()).unwrap();
    assert_eq!(sk2.to_text(), sk.to_text());

    // Tokens from a reloaded key still work against the original ciphertext.
    let t2 = gen_token(&sk2, &"1****".parse().unwrap(), &mut rng).unwrap();
    assert_eq!(query(&t2, &c).unwrap(), Some(Message(1)));

    let two = format!("{}{}", t.to_text(), t2.to_text());
    assert_eq!(Token::many_from_text(&two, &params).unwrap(), vec![t.clone(), t2]);

    assert!(Token::from_text(&text.replace("HVECTX", "HVETOK"), &params).is_err());
    let broken = t.to_text().replace("J=1,4", "J=1,3");
    assert!(Token::from_text(&broken, &params).is_err());
}
