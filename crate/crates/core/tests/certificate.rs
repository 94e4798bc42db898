use certprime::arith::{is_perfect_power, is_prime_u64, Rng};
use certprime::cert::{verify_chain, CertificateChain, Link};
use certprime::cm::{cm_curve, DISCRIMINANTS};
use certprime::ec::{Curve, Point};
use certprime::ecpp::{min_next, EcppLink};
use certprime::good::{good_factor, good_window, valuation, GoodWitness, Ratio};
use certprime::prove::{prove, ProveOptions, ProveOutcome};
use proptest::prelude::*;
use rug::Integer;

fn int(v: u64) -> Integer {
    Integer::from(v)
}

fn big() -> impl Strategy<Value = Integer> {
    prop::collection::vec(any::<u64>(), 1..6).prop_map(|limbs| {
        limbs.iter().fold(Integer::new(), |acc, &l| (acc << 64) + l)
    })
}

#[derive(Clone, Debug)]
enum Terminal {
    Good(u64, u32, Integer),
    Small(Integer),
}

fn chain_strategy() -> impl Strategy<Value = CertificateChain> {
    let ecpp = (prop::sample::select(DISCRIMINANTS.to_vec()), big(), big(), big(), big(), big(), big());
    let terminal = prop_oneof![
        (any::<u64>(), any::<u32>(), big()).prop_map(|(r, al, a)| Terminal::Good(r, al, a)),
        big().prop_map(Terminal::Small),
    ];
    (big(), prop::collection::vec(ecpp, 0..4), terminal).prop_map(|(subject, ecpp, terminal)| {
        let mut links = Vec::new();
        let mut n = subject.clone();
        for (d, a, b, px, py, m, np) in ecpp {
            let curve = Curve { n: n.clone(), a, b };
            links.push(Link::Ecpp(EcppLink {
                n: n.clone(),
                d,
                curve,
                point: Point::affine(px, py),
                order: m,
                next: np.clone(),
            }));
            n = np;
        }
        links.push(match terminal {
            Terminal::Good(r, alpha, a) => Link::Good(GoodWitness { n, r, alpha, a }),
            Terminal::Small(m) => Link::Small(m),
        });
        CertificateChain { subject, links }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn parse_inverts_serialize(chain in chain_strategy()) {
        let text = chain.serialize();
        prop_assert_eq!(CertificateChain::parse(&text).unwrap(), chain.clone());
        prop_assert!(text.ends_with("END\n"));
        prop_assert!(!text.contains(" \n") && !text.contains('\r'));
    }

    #[test]
    fn serialization_is_injective(a in chain_strategy(), b in chain_strategy()) {
        prop_assert_eq!(a == b, a.serialize() == b.serialize());
    }

    #[test]
    fn arbitrary_text_never_panics(text in "[A-Z0-9 =\\-\n]{0,200}") {
        if let Ok(c) = CertificateChain::parse(&text) {
            let _ = verify_chain(&c);
        }
    }
}

fn certificate(n: &Integer, seed: u64) -> CertificateChain {
    match prove(n, &ProveOptions { seed, ..Default::default() }).unwrap() {
        ProveOutcome::Prime(c) => c,
        other => panic!("{n}: {other:?}"),
    }
}

fn random_prime(bits: u32, rng: &mut Rng) -> Integer {
    loop {
        let n = rng.odd_with_bits(bits);
        if n.is_probably_prime(40) != rug::integer::IsPrime::No {
            return n;
        }
    }
}

#[test]
fn generated_chains_round_trip_and_verify() {
    let mut rng = Rng::seeded(5);
    for (i, bits) in [40, 64, 64, 96, 96, 128].into_iter().enumerate() {
        let n = random_prime(bits, &mut rng);
        let c = certificate(&n, i as u64);
        let parsed = CertificateChain::parse(&c.serialize()).unwrap();
        assert_eq!(parsed, c);
        assert_eq!(verify_chain(&parsed), Ok(()), "{}", c.serialize());
        assert_eq!(verify_chain(&parsed), verify_chain(&c));
    }
}

#[test]
fn edited_lines_break_the_certificate() {
    let mut rng = Rng::seeded(9);
    let c = certificate(&random_prime(80, &mut rng), 1);
    let text = c.serialize();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.len() >= 4);
    let rebuild = |ls: &[&str]| ls.iter().map(|l| format!("{l}\n")).collect::<String>();
    let mut variants = Vec::new();
    for i in 0..lines.len() {
        let mut ls = lines.clone();
        ls.remove(i);
        variants.push(rebuild(&ls));
        let mut ls = lines.clone();
        ls.insert(i, lines[i]);
        variants.push(rebuild(&ls));
        for j in i + 1..lines.len() {
            let mut ls = lines.clone();
            ls.swap(i, j);
            variants.push(rebuild(&ls));
        }
    }
    for v in variants {
        if let Ok(parsed) = CertificateChain::parse(&v) {
            assert!(verify_chain(&parsed).is_err(), "accepted edited certificate:\n{v}");
        }
    }
}

fn random_odd_composite(rng: &mut Rng) -> Integer {
    loop {
        let n = rng.range(&int(1 << 17), &int(1 << 32)) | Integer::from(1);
        if !is_prime_u64(n.to_u64().unwrap()) && is_perfect_power(&n).unwrap().is_none() {
            return n;
        }
    }
}

fn forged_good(n: &Integer, rng: &mut Rng) -> Link {
    let n1 = Integer::from(n - 1u32);
    let (r, alpha) = match good_factor(n, Ratio::default()).unwrap() {
        Some(found) => found,
        None => {
            let (lo, hi) = good_window(n, Ratio::default());
            let r = rng.range(&int(lo), &int(hi + 1)).to_u64().unwrap();
            (r, valuation(&n1, r).max(1))
        }
    };
    let a = rng.range(&int(2), n);
    // raise a random base to the cofactor so a^(r^alpha) = 1 has a chance
    let e = &n1 / rug::ops::Pow::pow(int(r), alpha);
    let a = if rng.next_u64().is_multiple_of(2) { a.pow_mod(&e, n).unwrap() } else { a };
    Link::Good(GoodWitness { n: n.clone(), r, alpha, a })
}

fn forged_ecpp(n: &Integer, tail: &CertificateChain, rng: &mut Rng) -> Link {
    let q = tail.subject.clone();
    let d = DISCRIMINANTS[(rng.next_u64() % 9) as usize];
    let curve = match cm_curve(n, d, (rng.next_u64() % 2) as usize) {
        Ok(Some(c)) if rng.next_u64().is_multiple_of(2) => c,
        _ => {
            let a = rng.below(n);
            Curve::new(n.clone(), &a, &Integer::new())
        }
    };
    let (x, y) = (rng.below(n), rng.below(n));
    // move B so that (x, y) lies on the curve
    let rhs = curve.rhs(&x);
    let y2 = Integer::from(y.square_ref()) % n;
    let b = (&curve.b + y2 - rhs) % n;
    let b = if b < 0 { b + n } else { b };
    let curve = Curve::new(n.clone(), &curve.a, &b);
    let k = Integer::from(n + 1u32) / &q + (rng.next_u64() % 3);
    let order = Integer::from(&k * &q);
    Link::Ecpp(EcppLink { n: n.clone(), d, curve, point: Point::affine(x, y), order, next: q })
}

#[test]
fn forged_chains_around_composites_never_verify() {
    let mut rng = Rng::seeded(2024);
    // genuine prime certificates to hang forged top links on
    let tails: Vec<CertificateChain> = (0..8)
        .map(|i| {
            let q = random_prime(30, &mut rng);
            certificate(&q, i)
        })
        .collect();
    let mut attempts = 0;
    while attempts < 10_000 {
        let n = random_odd_composite(&mut rng);
        let chain = match attempts % 3 {
            0 => CertificateChain { subject: n.clone(), links: vec![forged_good(&n, &mut rng)] },
            1 => CertificateChain { subject: n.clone(), links: vec![Link::Small(n.clone())] },
            _ => {
                let tail = &tails[(rng.next_u64() % tails.len() as u64) as usize];
                if tail.subject < min_next(&n) {
                    continue;
                }
                let mut links = vec![forged_ecpp(&n, tail, &mut rng)];
                links.extend(tail.links.iter().cloned());
                CertificateChain { subject: n.clone(), links }
            }
        };
        assert!(verify_chain(&chain).is_err(), "accepted composite {n}:\n{}", chain.serialize());
        let reparsed = CertificateChain::parse(&chain.serialize()).unwrap();
        assert!(verify_chain(&reparsed).is_err());
        attempts += 1;
    }
}
