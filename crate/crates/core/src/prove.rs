//! The full proving pipeline: screening, reduction and the final proof.

use log::{debug, info};
use rug::Integer;

use crate::arith::{is_perfect_power, miller_rabin_evidence, trial_factor, Rng, DEFAULT_MR_ROUNDS, SMALL_PRIME_BOUND};
use crate::cert::{CertificateChain, Link};
use crate::ecpp::{reduce_chain, ChainOutcome};
use crate::error::{arg_err, Error, Result};
use crate::evidence::CompositeEvidence;
use crate::good::{good_factor, prove_good, GoodOutcome, Ratio};

/// Default bound on the number of reduction links.
pub const DEFAULT_CHAIN: usize = 8;

#[derive(Clone, Debug)]
pub struct ProveOptions {
    pub c: Ratio,
    pub mr_rounds: u32,
    pub max_rounds: usize,
    pub seed: u64,
}

impl Default for ProveOptions {
    fn default() -> Self {
        ProveOptions { c: Ratio::default(), mr_rounds: DEFAULT_MR_ROUNDS, max_rounds: DEFAULT_CHAIN, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProveOutcome {
    Prime(CertificateChain),
    Composite(CompositeEvidence),
}

fn good_or_small(n: &Integer, opts: &ProveOptions, rng: &mut Rng) -> Result<Link> {
    let small = *n < SMALL_PRIME_BOUND;
    if n.is_odd() && *n >= 5 && good_factor(n, opts.c)?.is_some() {
        match prove_good(n, opts.c, rng)? {
            GoodOutcome::Proof(w) => return Ok(Link::Good(w)),
            GoodOutcome::Composite(e) if small => unreachable!("{n} passed trial division but {e}"),
            GoodOutcome::Composite(e) => {
                return Err(Error::Undecided(format!("probable prime {n} is composite: {e}")));
            }
            GoodOutcome::NotGood => {}
        }
    }
    if small {
        return Ok(Link::Small(n.clone()));
    }
    Err(Error::Undecided(format!("{n} is neither good nor small")))
}

/// Decides whether `n` is prime, with a certificate or a compositeness
/// witness.
///
/// `Err(Error::Undecided)` means the randomized searches gave up.
pub fn prove(n: &Integer, opts: &ProveOptions) -> Result<ProveOutcome> {
    if *n < 2 {
        return arg_err("n must be at least 2");
    }
    if opts.max_rounds == 0 {
        return arg_err("chain length must be at least 1");
    }
    let mut rng = Rng::seeded(opts.seed);
    let chain = |links| ProveOutcome::Prime(CertificateChain { subject: n.clone(), links });
    if *n < 4 {
        return Ok(chain(vec![Link::Small(n.clone())]));
    }
    if let Some((base, exp)) = is_perfect_power(n)? {
        return Ok(ProveOutcome::Composite(CompositeEvidence::PerfectPower { base, exp }));
    }
    if let Some(p) = trial_factor(n, SMALL_PRIME_BOUND) {
        return Ok(ProveOutcome::Composite(CompositeEvidence::GcdFactor { factor: Integer::from(p) }));
    }
    if *n < SMALL_PRIME_BOUND {
        return Ok(chain(vec![good_or_small(n, opts, &mut rng)?]));
    }
    if let Some(e) = miller_rabin_evidence(n, opts.mr_rounds, &mut rng)? {
        return Ok(ProveOutcome::Composite(e));
    }
    if good_factor(n, opts.c)?.is_some() {
        return Ok(match prove_good(n, opts.c, &mut rng)? {
            GoodOutcome::Proof(w) => chain(vec![Link::Good(w)]),
            GoodOutcome::Composite(e) => ProveOutcome::Composite(e),
            GoodOutcome::NotGood => unreachable!("goodness checked above"),
        });
    }
    let (ecpp, terminal) = match reduce_chain(n, opts.c, opts.max_rounds, &mut rng)? {
        ChainOutcome::Chain { links, terminal } => (links, terminal),
        ChainOutcome::Composite(e) => return Ok(ProveOutcome::Composite(e)),
        ChainOutcome::Exhausted => {
            return Err(Error::Undecided(format!(
                "no reduction of {n} within {} rounds",
                opts.max_rounds
            )));
        }
    };
    info!("{} bits: {} links down to {} bits", n.significant_bits(), ecpp.len(), terminal.significant_bits());
    let mut links: Vec<Link> = ecpp.into_iter().map(Link::Ecpp).collect();
    debug!("finishing at {terminal}");
    links.push(good_or_small(&terminal, opts, &mut rng)?);
    Ok(chain(links))
}
