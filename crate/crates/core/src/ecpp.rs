//! Elliptic curve reduction of a probable prime to a smaller one.
//!
//! A link `(E, P, m, q)` over `Z/nZ` with `q | m`, `q > (n^(1/4) + 1)^2`,
//! `m P = O` and `(m/q) P != O` shows that `n` is prime once `q` is. The
//! reducer looks for such links on CM curves until it reaches a number that
//! is good (so a single congruence finishes the proof) or small enough for
//! trial division.

use log::debug;
use rug::Integer;

use crate::arith::{isqrt, miller_rabin, small_primes, MrVerdict, Rng, DEFAULT_MR_ROUNDS, SMALL_PRIME_BOUND};
use crate::cm::{candidate_orders, cm_curve, cornacchia_4n, twist_count, DISCRIMINANTS};
use crate::ec::{Curve, EcError, Point};
use crate::error::{arg_err, Error, Result};
use crate::evidence::CompositeEvidence;
use crate::good::{good_factor, Ratio};

/// Random points tried per twist before moving on.
const PROBES_PER_TWIST: usize = 8;

/// Cofactors of curve orders are stripped of primes below this bound.
pub const COFACTOR_BOUND: u32 = 1 << 20;

/// Search nodes allowed per permitted round in chain mode.
const NODES_PER_ROUND: usize = 32;

/// A good terminal this small ends the chain search at once.
const SETTLE_BITS: u32 = 96;

/// Pollard rho iterations spent per curve order when the subject has no
/// candidates after trial division.
const RHO_ITERATIONS: u64 = 1 << 20;

/// One reduction step from `n` to `next`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EcppLink {
    pub n: Integer,
    pub d: i32,
    pub curve: Curve,
    pub point: Point,
    /// Claimed order `m` of the curve.
    pub order: Integer,
    /// The prime divisor `q` of `m` carried to the next link.
    pub next: Integer,
}

impl EcppLink {
    pub fn cofactor(&self) -> Integer {
        Integer::from(&self.order / &self.next)
    }
}

/// Smallest `q` allowed for a link from `n`: `(floor(n^(1/4)) + 2)^2`.
pub fn min_next(n: &Integer) -> Integer {
    let u = isqrt(&isqrt(n)) + 2u32;
    Integer::from(u.square_ref())
}

/// Whether `m` lies in `[n + 1 - 2 sqrt(n), n + 1 + 2 sqrt(n)]`.
pub fn in_hasse_interval(n: &Integer, m: &Integer) -> bool {
    // (m - n - 1)^2 <= 4n
    let dev = Integer::from(m - n) - 1u32;
    Integer::from(dev.square_ref()) <= Integer::from(n << 2)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReduceOutcome {
    Link(EcppLink),
    Composite(CompositeEvidence),
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ChainOutcome {
    Chain { links: Vec<EcppLink>, terminal: Integer },
    Composite(CompositeEvidence),
    Exhausted,
}

/// A possible next step out of the current node.
#[derive(Clone, Debug)]
struct Candidate {
    d: i32,
    order: Integer,
    next: Integer,
    good: bool,
}

/// Failure modes inside the search that end it immediately.
enum Stop {
    Composite(CompositeEvidence),
    Fatal(Error),
}

impl From<Error> for Stop {
    fn from(e: Error) -> Self {
        match e {
            Error::NotPrime(ev) => Stop::Composite(ev),
            other => Stop::Fatal(other),
        }
    }
}

type Step<T> = std::result::Result<T, Stop>;

fn is_probable_prime(n: &Integer, rng: &mut Rng) -> Result<bool> {
    if *n < 2 {
        return Ok(false);
    }
    Ok(miller_rabin(n, DEFAULT_MR_ROUNDS, rng)? == MrVerdict::ProbablePrime)
}

fn is_good(n: &Integer, c: Ratio) -> Result<bool> {
    if *n < 3 || n.is_even() {
        return Ok(false);
    }
    Ok(good_factor(n, c)?.is_some())
}

/// Divides out every prime below [`COFACTOR_BOUND`]. An order that factors
/// completely gives its largest prime factor.
fn strip_small_factors(m: &Integer) -> Integer {
    let mut q = m.clone();
    let mut largest = 1;
    for &p in small_primes() {
        if p >= COFACTOR_BOUND || Integer::from(p) * p > q {
            break;
        }
        while q.is_divisible_u(p) {
            q /= p;
            largest = p;
        }
    }
    if q == 1 {
        Integer::from(largest)
    } else {
        q
    }
}

/// Brent's variant of Pollard rho. Returns a proper divisor of the odd
/// composite `q`, or `None` once `iterations` steps are spent.
fn rho_divisor(q: &Integer, iterations: u64, rng: &mut Rng) -> Option<Integer> {
    const BATCH: u64 = 128;
    let mut spent = 0;
    while spent < iterations {
        let c = rng.range(&Integer::from(1), q);
        let step = |x: &Integer| (Integer::from(x.square_ref()) + &c) % q;
        let (mut x, mut y) = (Integer::new(), rng.below(q));
        let mut acc = Integer::from(1);
        let mut run = 1u64;
        let mut g = Integer::from(1);
        let mut saved = y.clone();
        while g == 1 && spent < iterations {
            x.clone_from(&y);
            for _ in 0..run {
                y = step(&y);
            }
            let mut k = 0;
            while k < run && g == 1 {
                saved.clone_from(&y);
                for _ in 0..BATCH.min(run - k) {
                    y = step(&y);
                    acc = (acc * Integer::from(&x - &y)) % q;
                }
                g = Integer::from(acc.gcd_ref(q));
                k += BATCH;
                spent += BATCH;
            }
            run *= 2;
        }
        if g == *q {
            // the batch overshot; replay one step at a time
            loop {
                saved = step(&saved);
                g = Integer::from(Integer::from(&x - &saved).gcd_ref(q));
                if g != 1 {
                    break;
                }
            }
        }
        if g != 1 && g != *q {
            return Some(g);
        }
    }
    None
}

/// Divides medium factors out of `q` by Pollard rho while the rest stays
/// at or above `floor`. Returns the rest once it is a probable prime.
fn peel(mut q: Integer, floor: &Integer, rng: &mut Rng) -> Result<Option<Integer>> {
    let mut left = RHO_ITERATIONS;
    while q >= *floor {
        if is_probable_prime(&q, rng)? {
            return Ok(Some(q));
        }
        let start = rng.next_u64();
        let mut sub = Rng::seeded(start);
        let Some(g) = rho_divisor(&q, left, &mut sub) else {
            return Ok(None);
        };
        left = left.saturating_sub(left / 4);
        // keep the larger side
        let h = Integer::from(&q / &g);
        q = if g > h { g } else { h };
    }
    Ok(None)
}

/// Curve orders at `n` whose large part is a probable prime, smallest
/// first. With `deep` set, composite large parts are also split by rho.
fn candidates(n: &Integer, c: Ratio, with_cofactor: bool, deep: bool, rng: &mut Rng) -> Step<Vec<Candidate>> {
    let floor = min_next(n);
    let mut out = Vec::new();
    for d in DISCRIMINANTS {
        let Some((t, y)) = cornacchia_4n(d, n)? else {
            continue;
        };
        for order in candidate_orders(n, d, &t, &y) {
            let mut next = if with_cofactor { strip_small_factors(&order) } else { order.clone() };
            if next < floor {
                continue;
            }
            if !is_probable_prime(&next, rng)? {
                if !deep {
                    continue;
                }
                match peel(next, &floor, rng)? {
                    Some(q) => next = q,
                    None => continue,
                }
            }
            let good = is_good(&next, c)?;
            out.push(Candidate { d, order, next, good });
        }
    }
    out.sort_by(|a, b| a.next.cmp(&b.next));
    Ok(out)
}

fn ec_step<T>(r: std::result::Result<T, EcError>) -> Step<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(EcError::Factor(g)) => Err(Stop::Composite(CompositeEvidence::EcArithmeticFactor { factor: g })),
        Err(EcError::NotOnCurve) => Ok(None),
    }
}

/// Finds a twist of order `cand.order` and a point of order `cand.next` on it.
fn build_link(n: &Integer, cand: &Candidate, rng: &mut Rng) -> Step<Option<EcppLink>> {
    let cofactor = Integer::from(&cand.order / &cand.next);
    for twist in 0..twist_count(cand.d) {
        let Some(curve) = cm_curve(n, cand.d, twist)? else {
            continue;
        };
        for _ in 0..PROBES_PER_TWIST {
            let q = curve.random_point(rng)?;
            let Some(p) = ec_step(curve.mul(&cofactor, &q))? else {
                break;
            };
            if p.is_identity() {
                continue;
            }
            let Some(z) = ec_step(curve.mul(&cand.next, &p))? else {
                break;
            };
            if !z.is_identity() {
                // wrong twist
                break;
            }
            return Ok(Some(EcppLink {
                n: n.clone(),
                d: cand.d,
                curve,
                point: p,
                order: cand.order.clone(),
                next: cand.next.clone(),
            }));
        }
    }
    Ok(None)
}

fn check_input(n: &Integer) -> Result<()> {
    if n.is_even() || *n < SMALL_PRIME_BOUND {
        return arg_err(format!("reduction needs an odd n >= {SMALL_PRIME_BOUND}"));
    }
    Ok(())
}

/// One round: a link from `n` to a C-good probable prime equal to the
/// curve order.
pub fn reduce_to_good(n: &Integer, c: Ratio, rng: &mut Rng) -> Result<ReduceOutcome> {
    check_input(n)?;
    let mut run = || -> Step<Option<EcppLink>> {
        for cand in candidates(n, c, false, false, rng)? {
            if !cand.good {
                continue;
            }
            if let Some(link) = build_link(n, &cand, rng)? {
                return Ok(Some(link));
            }
        }
        Ok(None)
    };
    match run() {
        Ok(Some(link)) => Ok(ReduceOutcome::Link(link)),
        Ok(None) => Ok(ReduceOutcome::Exhausted),
        Err(Stop::Composite(e)) => Ok(ReduceOutcome::Composite(e)),
        Err(Stop::Fatal(e)) => Err(e),
    }
}

struct Search<'a> {
    c: Ratio,
    max_rounds: usize,
    budget: usize,
    rng: &'a mut Rng,
    path: Vec<EcppLink>,
    best: Option<(Vec<EcppLink>, Integer)>,
}

impl Search<'_> {
    fn improves(&self, terminal: &Integer) -> bool {
        self.best.as_ref().is_none_or(|(_, t)| terminal.significant_bits() < t.significant_bits())
    }

    /// Keeps `path + link` if it ends lower than the best chain so far.
    /// Returns true once the chain is cheap enough to stop searching.
    fn record(&mut self, link: EcppLink) -> bool {
        let terminal = link.next.clone();
        let mut links = self.path.clone();
        links.push(link);
        debug!("terminal at {} bits after {} links", terminal.significant_bits(), links.len());
        if self.best.is_none() {
            // one more dive after the first hit
            self.budget = self.budget.min(self.max_rounds);
        }
        let settled = terminal < SMALL_PRIME_BOUND || terminal.significant_bits() <= SETTLE_BITS;
        self.best = Some((links, terminal));
        settled
    }

    /// Depth-first search below the non-terminal probable prime `n`.
    /// Returns true when the search is settled.
    fn descend(&mut self, n: &Integer, depth: usize) -> Step<bool> {
        if depth == self.max_rounds || self.budget == 0 {
            return Ok(false);
        }
        self.budget -= 1;
        let mut cands = candidates(n, self.c, true, false, self.rng)?;
        if cands.is_empty() && depth == 0 {
            cands = candidates(n, self.c, true, true, self.rng)?;
        }
        debug!("depth {depth}: {} bits, {} candidates", n.significant_bits(), cands.len());
        let (ends, inner): (Vec<Candidate>, Vec<Candidate>) =
            cands.into_iter().partition(|c| c.good || c.next < SMALL_PRIME_BOUND);
        for cand in ends {
            if !self.improves(&cand.next) {
                continue;
            }
            if let Some(link) = build_link(n, &cand, self.rng)? {
                if self.record(link) {
                    return Ok(true);
                }
            }
        }
        if depth + 1 == self.max_rounds {
            return Ok(false);
        }
        for cand in inner {
            if self.budget == 0 {
                break;
            }
            let Some(link) = build_link(n, &cand, self.rng)? else {
                continue;
            };
            self.path.push(link);
            let settled = self.descend(&cand.next, depth + 1);
            self.path.pop();
            match settled {
                Ok(true) => return Ok(true),
                Ok(false) => {}
                // evidence against the candidate, not against `n`
                Err(Stop::Composite(e)) => debug!("dropping composite {}: {e}", cand.next),
                Err(fatal) => return Err(fatal),
            }
        }
        Ok(false)
    }
}

/// Repeated reduction until a good or small probable prime is reached.
///
/// With `max_rounds = 1` this is exactly [`reduce_to_good`]. Larger values
/// also allow links through non-good primes and through curve orders with
/// a cofactor made of primes below [`COFACTOR_BOUND`]. If `n` itself has no
/// such order, larger cofactors are split off by Pollard rho. Among the
/// chains it meets, the search keeps the one with the smallest terminal.
pub fn reduce_chain(n: &Integer, c: Ratio, max_rounds: usize, rng: &mut Rng) -> Result<ChainOutcome> {
    if max_rounds == 0 {
        return arg_err("max_rounds must be at least 1");
    }
    if n.is_even() || *n < 3 {
        return arg_err("reduction needs an odd n >= 3");
    }
    if *n < SMALL_PRIME_BOUND || is_good(n, c)? {
        return Ok(ChainOutcome::Chain { links: Vec::new(), terminal: n.clone() });
    }
    if max_rounds == 1 {
        return Ok(match reduce_to_good(n, c, rng)? {
            ReduceOutcome::Link(link) => {
                let terminal = link.next.clone();
                ChainOutcome::Chain { links: vec![link], terminal }
            }
            ReduceOutcome::Composite(e) => ChainOutcome::Composite(e),
            ReduceOutcome::Exhausted => ChainOutcome::Exhausted,
        });
    }
    let mut search =
        Search { c, max_rounds, budget: NODES_PER_ROUND * max_rounds, rng, path: Vec::new(), best: None };
    match search.descend(n, 0) {
        Ok(_) => Ok(match search.best {
            Some((links, terminal)) => ChainOutcome::Chain { links, terminal },
            None => ChainOutcome::Exhausted,
        }),
        Err(Stop::Composite(e)) => Ok(ChainOutcome::Composite(e)),
        Err(Stop::Fatal(e)) => Err(e),
    }
}
