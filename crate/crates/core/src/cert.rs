//! Primality certificates: data model, the `CERTCHAIN v1` text format and
//! the verifier.
//!
//! ```text
//! CERTCHAIN v1
//! N <subject>
//! ECPP D=<d> A=<a> B=<b> PX=<x> PY=<y> M=<m> NP=<q>
//! GOOD R=<r> ALPHA=<alpha> A=<a>
//! SMALL N=<n>
//! END
//! ```
//!
//! The number each ECPP or GOOD record speaks about is implicit: the subject
//! for the first record, the previous record's `NP` afterwards. A chain is
//! zero or more ECPP records followed by exactly one GOOD or SMALL record.
//!
//! Verification never draws random numbers. Links are checked from the last
//! to the first, so each ECPP link only has to transfer primality from its
//! `NP`, which is already established, to its own `n`. The one expensive step
//! (the polynomial congruence of the GOOD record) is run after every other
//! check in the chain has passed.

use std::fmt;

use rug::Integer;

use crate::arith::{gcd, is_perfect_power, is_prime_by_trial_division, is_prime_u64, SMALL_PRIME_BOUND};
use crate::cm::j_invariant;
use crate::ec::{Curve, EcError, Point};
use crate::ecpp::{min_next, EcppLink};
use crate::good::{min_admissible_r, valuation, GoodWitness};
use crate::poly::{aks_congruence_check, Congruence};

const MAGIC: &str = "CERTCHAIN v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Link {
    Ecpp(EcppLink),
    Good(GoodWitness),
    Small(Integer),
}

impl Link {
    /// The number this link speaks about.
    pub fn n(&self) -> &Integer {
        match self {
            Link::Ecpp(l) => &l.n,
            Link::Good(w) => &w.n,
            Link::Small(n) => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertificateChain {
    pub subject: Integer,
    pub links: Vec<Link>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

impl std::error::Error for ParseError {}

/// Why a link was rejected. `cond` numbers the failed condition; `0` is a
/// structural problem with the chain itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rejection {
    pub cond: u32,
    pub reason: String,
}

impl Rejection {
    fn new(cond: u32, reason: impl Into<String>) -> Self {
        Rejection { cond, reason: reason.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainRejection {
    /// 0-based index into [`CertificateChain::links`].
    pub link: usize,
    pub cond: u32,
    pub reason: String,
}

impl fmt::Display for ChainRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "link {} condition {}: {}", self.link, self.cond, self.reason)
    }
}

impl CertificateChain {
    pub fn serialize(&self) -> String {
        let mut out = format!("{MAGIC}\nN {}\n", self.subject);
        for link in &self.links {
            match link {
                Link::Ecpp(l) => out.push_str(&format!(
                    "ECPP D={} A={} B={} PX={} PY={} M={} NP={}\n",
                    l.d, l.curve.a, l.curve.b, l.point.x, l.point.y, l.order, l.next
                )),
                Link::Good(w) => out.push_str(&format!("GOOD R={} ALPHA={} A={}\n", w.r, w.alpha, w.a)),
                Link::Small(n) => out.push_str(&format!("SMALL N={n}\n")),
            }
        }
        out.push_str("END\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let Some(body) = text.strip_suffix('\n') else {
            return Err(ParseError { line: text.lines().count().max(1), reason: "missing final newline".into() });
        };
        let lines: Vec<&str> = body.split('\n').collect();
        let err = |line: usize, reason: String| ParseError { line: line + 1, reason };
        if lines[0] != MAGIC {
            return Err(err(0, format!("expected {MAGIC:?}")));
        }
        if lines.len() < 4 {
            return Err(err(lines.len(), "truncated certificate".into()));
        }
        let subject = lines[1]
            .strip_prefix("N ")
            .ok_or_else(|| err(1, "expected `N <decimal>`".into()))
            .and_then(|v| parse_natural(v).map_err(|e| err(1, e)))?;
        if *lines.last().expect("nonempty") != "END" {
            return Err(err(lines.len() - 1, "expected END".into()));
        }
        let mut links = Vec::new();
        let mut current = subject.clone();
        for (i, line) in lines.iter().enumerate().take(lines.len() - 1).skip(2) {
            let (kind, rest) = line.split_once(' ').ok_or_else(|| err(i, "record without fields".into()))?;
            let link = match kind {
                "ECPP" => {
                    let f = fields(rest, &["D", "A", "B", "PX", "PY", "M", "NP"]).map_err(|e| err(i, e))?;
                    let d: i32 = parse_signed(f[0]).map_err(|e| err(i, e))?;
                    let nums = f[1..]
                        .iter()
                        .map(|v| parse_natural(v))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| err(i, e))?;
                    let [a, b, px, py, m, np]: [Integer; 6] = nums.try_into().expect("six fields");
                    let link = EcppLink {
                        n: current.clone(),
                        d,
                        curve: Curve { n: current.clone(), a, b },
                        point: Point::affine(px, py),
                        order: m,
                        next: np.clone(),
                    };
                    current = np;
                    Link::Ecpp(link)
                }
                "GOOD" => {
                    let f = fields(rest, &["R", "ALPHA", "A"]).map_err(|e| err(i, e))?;
                    let r = parse_natural(f[0])
                        .map_err(|e| err(i, e))?
                        .to_u64()
                        .ok_or_else(|| err(i, "R out of range".into()))?;
                    let alpha = parse_natural(f[1])
                        .map_err(|e| err(i, e))?
                        .to_u32()
                        .ok_or_else(|| err(i, "ALPHA out of range".into()))?;
                    let a = parse_natural(f[2]).map_err(|e| err(i, e))?;
                    Link::Good(GoodWitness { n: current.clone(), r, alpha, a })
                }
                "SMALL" => {
                    let f = fields(rest, &["N"]).map_err(|e| err(i, e))?;
                    Link::Small(parse_natural(f[0]).map_err(|e| err(i, e))?)
                }
                other => return Err(err(i, format!("unknown record {other:?}"))),
            };
            links.push(link);
        }
        Ok(CertificateChain { subject, links })
    }
}

/// Splits `K1=v1 K2=v2 ...` and checks the keys against `keys` in order.
fn fields<'a>(rest: &'a str, keys: &[&str]) -> Result<Vec<&'a str>, String> {
    let parts: Vec<&str> = rest.split(' ').collect();
    let mut seen: Vec<&str> = Vec::new();
    let mut values = Vec::with_capacity(keys.len());
    for (idx, part) in parts.iter().enumerate() {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("malformed field {part:?}"))?;
        if seen.contains(&k) {
            return Err(format!("duplicate field {k}"));
        }
        seen.push(k);
        match keys.get(idx) {
            Some(&want) if want == k => values.push(v),
            Some(&want) => return Err(format!("expected field {want}, found {k}")),
            None => return Err(format!("unexpected field {k}")),
        }
    }
    if values.len() != keys.len() {
        return Err(format!("missing field {}", keys[values.len()]));
    }
    Ok(values)
}

fn parse_natural(s: &str) -> Result<Integer, String> {
    let canonical = !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) && (s == "0" || !s.starts_with('0'));
    if !canonical {
        return Err(format!("non-canonical integer {s:?}"));
    }
    Integer::from_str_radix(s, 10).map_err(|e| e.to_string())
}

fn parse_signed(s: &str) -> Result<i32, String> {
    let v = match s.strip_prefix('-') {
        Some(rest) if rest != "0" => -parse_natural(rest)?,
        Some(_) => return Err(format!("non-canonical integer {s:?}")),
        None => parse_natural(s)?,
    };
    v.to_i32().ok_or_else(|| format!("integer {s} out of range"))
}

/// Conditions 1 to 7 of a GOOD link; the congruence is separate.
fn check_good_cheap(n: &Integer, w: &GoodWitness) -> Result<(), Rejection> {
    if *n < 3 || n.is_even() {
        return Err(Rejection::new(1, "n must be odd and at least 3"));
    }
    if is_perfect_power(n).expect("n >= 3").is_some() {
        return Err(Rejection::new(2, "n is a perfect power"));
    }
    if !is_prime_u64(w.r) {
        return Err(Rejection::new(3, format!("r = {} is not prime", w.r)));
    }
    let bits = u64::from(n.significant_bits());
    if w.r < min_admissible_r(n) || w.r > 64 * bits * bits {
        return Err(Rejection::new(4, format!("r = {} outside the admissible range", w.r)));
    }
    let n1 = Integer::from(n - 1u32);
    if w.alpha < 1 || valuation(&n1, w.r) != w.alpha {
        return Err(Rejection::new(5, format!("{}^{} does not exactly divide n - 1", w.r, w.alpha)));
    }
    if w.a <= 1 || w.a >= *n {
        return Err(Rejection::new(6, "a out of range"));
    }
    let r = Integer::from(w.r);
    let r_alpha1 = rug::ops::Pow::pow(r.clone(), w.alpha - 1);
    let x = w.a.clone().pow_mod(&r_alpha1, n).expect("nonnegative");
    if x.clone().pow_mod(&r, n).expect("nonnegative") != 1 {
        return Err(Rejection::new(6, "a^(r^alpha) is not 1"));
    }
    if gcd(&Integer::from(&x - 1u32), n) != 1 {
        return Err(Rejection::new(7, "a^(r^(alpha-1)) - 1 is not a unit"));
    }
    Ok(())
}

fn check_congruence(n: &Integer, w: &GoodWitness) -> Result<(), Rejection> {
    let r = usize::try_from(w.r).map_err(|_| Rejection::new(8, "r too large"))?;
    match aks_congruence_check(n, r, &w.a) {
        Ok(Congruence::Holds) => Ok(()),
        Ok(Congruence::Fails) => Err(Rejection::new(8, "(1 + x)^n != 1 + x^n")),
        Err(e) => Err(Rejection::new(8, e.to_string())),
    }
}

/// Checks a single-congruence proof that `n` is prime.
///
/// Conditions: (1) `n` odd, `n >= 3`; (2) `n` not a perfect power;
/// (3) `r` prime; (4) `r >= log2(n)^2`; (5) `r^alpha || n - 1`;
/// (6) `a^(r^alpha) = 1`; (7) `gcd(a^(r^(alpha-1)) - 1, n) = 1`;
/// (8) `(1 + x)^n = 1 + x^n mod (n, x^r - a)`.
pub fn verify_good_link(n: &Integer, w: &GoodWitness) -> Result<(), Rejection> {
    if w.n != *n {
        return Err(Rejection::new(0, "witness is for a different n"));
    }
    check_good_cheap(n, w)?;
    check_congruence(n, w)
}

fn ec_reject(cond: u32, e: EcError) -> Rejection {
    match e {
        EcError::Factor(g) => Rejection::new(cond, format!("factor {g} of n met in curve arithmetic")),
        EcError::NotOnCurve => Rejection::new(cond, "curve arithmetic on points off the curve"),
    }
}

/// Checks that `link` transfers primality of `link.next` to `link.n`.
///
/// Conditions: (1) `gcd(n, 6) = 1`; (2) the curve is nonsingular modulo
/// `n`; (3) `P` is a point of the curve other than `O`; (4) `q = NP`
/// divides `m = M` and `q >= (floor(n^(1/4)) + 2)^2`; (5) `(m/q) P` is
/// computed without meeting a factor of `n` and is not `O`; (6) `m P = O`
/// with no factor met; (7) the curve has j-invariant `j(D)`.
///
/// `next_is_prime` states that primality of `q` is already established;
/// without it the link proves nothing and is rejected.
pub fn verify_ecpp_link(link: &EcppLink, next_is_prime: bool) -> Result<(), Rejection> {
    let n = &link.n;
    let c = &link.curve;
    if c.n != *n {
        return Err(Rejection::new(0, "curve modulus differs from n"));
    }
    if *n <= 1 || !gcd(n, &Integer::from(6)).eq(&1) {
        return Err(Rejection::new(1, "n is not prime to 6"));
    }
    if c.a >= *n || c.b >= *n || gcd(&c.discriminant(), n) != 1 {
        return Err(Rejection::new(2, "singular curve"));
    }
    let p = &link.point;
    if p.is_identity() || p.z != 1 || p.x >= *n || p.y >= *n || !c.contains(p) {
        return Err(Rejection::new(3, "point not on curve"));
    }
    let (m, q) = (&link.order, &link.next);
    if *q <= 1 || !m.is_divisible(q) || *m == 0 {
        return Err(Rejection::new(4, "NP does not divide M"));
    }
    if *q < min_next(n) {
        return Err(Rejection::new(4, "NP too small"));
    }
    if !next_is_prime {
        return Err(Rejection::new(4, "primality of NP not established"));
    }
    let cofactor = Integer::from(m / q);
    let pq = c.mul(&cofactor, p).map_err(|e| ec_reject(5, e))?;
    if pq.is_identity() {
        return Err(Rejection::new(5, "(M/NP) P is the identity"));
    }
    let mp = c.mul(q, &pq).map_err(|e| ec_reject(6, e))?;
    if !mp.is_identity() {
        return Err(Rejection::new(6, "M P is not the identity"));
    }
    let Some(j) = j_invariant(link.d) else {
        return Err(Rejection::new(7, format!("unsupported discriminant {}", link.d)));
    };
    // j(E) = 6912 A^3 / (4 A^3 + 27 B^2)
    let a3 = Integer::from(c.a.square_ref()) * &c.a;
    let lhs = Integer::from(&a3 * 6912u32);
    let rhs = c.discriminant() * j;
    if !(lhs - rhs).is_divisible(n) {
        return Err(Rejection::new(7, "curve does not have CM by D"));
    }
    Ok(())
}

fn reject(link: usize, r: Rejection) -> ChainRejection {
    ChainRejection { link, cond: r.cond, reason: r.reason }
}

/// Verifies a whole chain. Acceptance proves the subject prime.
pub fn verify_chain(chain: &CertificateChain) -> Result<(), ChainRejection> {
    let links = &chain.links;
    let Some(last) = links.len().checked_sub(1) else {
        return Err(ChainRejection { link: 0, cond: 0, reason: "empty chain".into() });
    };
    let mut current = &chain.subject;
    for (i, link) in links.iter().enumerate() {
        if link.n() != current {
            return Err(reject(i, Rejection::new(0, "link does not continue the chain")));
        }
        match link {
            Link::Ecpp(l) if i < last => current = &l.next,
            Link::Ecpp(_) => return Err(reject(i, Rejection::new(0, "chain ends in an ECPP link"))),
            _ if i < last => return Err(reject(i, Rejection::new(0, "terminal link before the end"))),
            _ => {}
        }
    }

    let mut deferred = None;
    for (i, link) in links.iter().enumerate().rev() {
        match link {
            Link::Small(n) => {
                if *n >= SMALL_PRIME_BOUND || !is_prime_by_trial_division(n) {
                    return Err(reject(i, Rejection::new(1, format!("{n} is not a prime below {SMALL_PRIME_BOUND}"))));
                }
            }
            Link::Good(w) => {
                check_good_cheap(&w.n, w).map_err(|r| reject(i, r))?;
                deferred = Some((i, w));
            }
            // primality of `next` comes from the link after this one
            Link::Ecpp(l) => verify_ecpp_link(l, true).map_err(|r| reject(i, r))?,
        }
    }
    if let Some((i, w)) = deferred {
        check_congruence(&w.n, w).map_err(|r| reject(i, r))?;
    }
    Ok(())
}
