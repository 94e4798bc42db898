//! Command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};
use rug::Integer;

use crate::arith::{is_prime_u64, miller_rabin, MrVerdict, Rng, DEFAULT_MR_ROUNDS};
use crate::cert::{verify_chain, CertificateChain};
use crate::error::{Error, Result};
use crate::good::{good_window, Ratio};
use crate::poly::PolyRing;
use crate::prove::{prove, ProveOptions, ProveOutcome, DEFAULT_CHAIN};
use crate::survey::{beta, inverse_log, survey, SurveyOptions, SurveyRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_UNDECIDED: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "certprime", version, about = "Primality certificates from one polynomial congruence")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Prove N prime (writing a certificate) or composite (printing a witness).
    Prove {
        /// Decimal, or `a^b`, `a^b+c`, `a^b-c`.
        n: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Miller-Rabin rounds for probable-prime screening.
        #[arg(long, default_value_t = DEFAULT_MR_ROUNDS)]
        rounds: u32,
        /// Maximum number of elliptic curve links.
        #[arg(long, default_value_t = DEFAULT_CHAIN)]
        chain: usize,
        #[arg(long = "C", visible_alias = "c", default_value = "2")]
        c: Ratio,
        /// Certificate destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a certificate file.
    Verify { path: PathBuf },
    /// Count primes and good primes in [START, START + LENGTH).
    Survey {
        start: String,
        length: u64,
        #[arg(long = "C", visible_alias = "c", default_value = "2")]
        c: Ratio,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        segments: usize,
        #[arg(long, default_value_t = DEFAULT_MR_ROUNDS)]
        rounds: u32,
    },
    /// The product of (1 - 1/p) over the primes in [B1, B2].
    Beta {
        b1: u64,
        b2: u64,
        #[arg(long, default_value_t = 7)]
        places: u32,
    },
    /// Median timings of the congruence and of prove/verify per bit size.
    Bench {
        /// Comma-separated bit sizes.
        #[arg(default_value = "64,128,256")]
        bits: String,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parses a decimal number or `base^exp` with at most one `+c`/`-c` tail.
pub fn parse_number(s: &str) -> Result<Integer> {
    let bad = || Error::Argument(format!("not a number: {s:?}"));
    let decimal = |t: &str| -> Result<Integer> {
        if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        Integer::from_str_radix(t, 10).map_err(|_| bad())
    };
    let s = s.trim();
    let Some((base, rest)) = s.split_once('^') else {
        return decimal(s);
    };
    let (exp, tail) = match rest.find(['+', '-']) {
        Some(i) => (&rest[..i], Some((&rest[i..i + 1], &rest[i + 1..]))),
        None => (rest, None),
    };
    let exp = decimal(exp)?.to_u32().filter(|&e| e <= 1 << 20).ok_or_else(bad)?;
    let mut v = rug::ops::Pow::pow(decimal(base)?, exp);
    match tail {
        Some(("+", c)) => v += decimal(c)?,
        Some((_, c)) => v -= decimal(c)?,
        None => {}
    }
    Ok(v)
}

fn exit_for(e: &Error) -> i32 {
    match e {
        Error::Argument(_) => EXIT_USAGE,
        Error::NotPrime(_) | Error::Undecided(_) => EXIT_UNDECIDED,
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Prove { n, seed, rounds, chain, c, out } => {
            let n = parse_number(&n)?;
            cmd_prove(&n, &ProveOptions { c, mr_rounds: rounds, max_rounds: chain, seed }, out)
        }
        Command::Verify { path } => Ok(cmd_verify(&path)),
        Command::Survey { start, length, c, seed, segments, rounds } => {
            let start = parse_number(&start)?;
            let row = survey(&start, length, &SurveyOptions { c, mr_rounds: rounds, seed, segments })?;
            println!("{}", SurveyRow::CSV_HEADER);
            println!("{}", row.to_csv());
            Ok(EXIT_OK)
        }
        Command::Beta { b1, b2, places } => {
            let b = beta(b1, b2)?;
            println!("{}", b.decimal(places));
            println!("1-beta {}", b.complement_decimal(places));
            println!("1/ln(b1) {:.*}", places as usize, inverse_log(b1));
            Ok(EXIT_OK)
        }
        Command::Bench { bits, trials, seed } => cmd_bench(&bits, trials, seed),
    }
}

fn cmd_prove(n: &Integer, opts: &ProveOptions, out: Option<PathBuf>) -> Result<i32> {
    match prove(n, opts) {
        Ok(ProveOutcome::Prime(chain)) => {
            let text = chain.serialize();
            match out {
                Some(path) => {
                    fs::write(&path, text)
                        .map_err(|e| Error::Argument(format!("cannot write {}: {e}", path.display())))?;
                    println!("PRIME");
                }
                None => {
                    print!("{text}");
                    io::stdout().flush().ok();
                    eprintln!("PRIME");
                }
            }
            Ok(EXIT_OK)
        }
        Ok(ProveOutcome::Composite(e)) => {
            println!("COMPOSITE {} {}", e.kind(), e.detail());
            Ok(EXIT_REJECT)
        }
        Err(Error::Undecided(msg)) => {
            eprintln!("UNDECIDED {msg}");
            Ok(EXIT_UNDECIDED)
        }
        Err(e) => Err(e),
    }
}

fn cmd_verify(path: &PathBuf) -> i32 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return EXIT_USAGE;
        }
    };
    let chain = match CertificateChain::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            println!("MALFORMED {e}");
            return EXIT_USAGE;
        }
    };
    match verify_chain(&chain) {
        Ok(()) => {
            println!("ACCEPT");
            EXIT_OK
        }
        Err(r) => {
            println!("REJECT link={} cond={}", r.link, r.cond);
            eprintln!("{}", r.reason);
            EXIT_REJECT
        }
    }
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn random_prime(bits: u32, rng: &mut Rng) -> Result<Integer> {
    loop {
        let n = rng.odd_with_bits(bits);
        if miller_rabin(&n, DEFAULT_MR_ROUNDS, rng)? == MrVerdict::ProbablePrime {
            return Ok(n);
        }
    }
}

fn cmd_bench(bits: &str, trials: usize, seed: u64) -> Result<i32> {
    let sizes = bits
        .split(',')
        .map(|b| b.trim().parse::<u32>().ok().filter(|&b| b >= 20))
        .collect::<Option<Vec<u32>>>()
        .ok_or_else(|| Error::Argument(format!("bad bit list {bits:?}")))?;
    if trials == 0 {
        return Err(Error::Argument("at least one trial".into()));
    }
    let mut rng = Rng::seeded(seed);
    println!("bits,r,pow_ms,prove_ms,verify_ms");
    for b in sizes {
        let (mut pow_t, mut prove_t, mut verify_t) = (Vec::new(), Vec::new(), Vec::new());
        let mut r_used = 0;
        for trial in 0..trials {
            let n = random_prime(b, &mut rng)?;
            let mut r = good_window(&n, Ratio::default()).0;
            while !is_prime_u64(r) {
                r += 1;
            }
            r_used = r;
            let ring = PolyRing::new(n.clone(), r as usize, Integer::from(2))?;
            let t = Instant::now();
            ring.pow_1_plus_x(&n)?;
            pow_t.push(t.elapsed());

            let opts = ProveOptions { seed: seed.wrapping_add(trial as u64), ..Default::default() };
            let t = Instant::now();
            let outcome = prove(&n, &opts);
            prove_t.push(t.elapsed());
            if let Ok(ProveOutcome::Prime(chain)) = outcome {
                let t = Instant::now();
                let _ = verify_chain(&chain);
                verify_t.push(t.elapsed());
            }
        }
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        let verify_ms = if verify_t.is_empty() { String::new() } else { format!("{:.1}", ms(median(verify_t))) };
        println!("{b},{r_used},{:.1},{:.1},{verify_ms}", ms(median(pow_t)), ms(median(prove_t)));
    }
    Ok(EXIT_OK)
}
