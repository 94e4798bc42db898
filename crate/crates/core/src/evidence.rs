//! Compositeness witnesses.
//!
//! Every way the prover can conclude "composite" leaves behind a value that
//! a third party can re-check without trusting the prover.

use std::fmt;

use rug::Integer;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CompositeEvidence {
    /// `base^(n-1) mod n != 1`.
    FermatFailure { base: Integer },
    /// A proper divisor `1 < factor < n`.
    GcdFactor { factor: Integer },
    /// `n = base^exp` with `exp >= 2`.
    PerfectPower { base: Integer, exp: u32 },
    /// `(1+x)^n != 1 + x^n` in `(Z/nZ)[x]/(x^r - a)`.
    CongruenceFailure { r: u64, a: Integer },
    /// A non-invertible denominator met during elliptic curve arithmetic.
    EcArithmeticFactor { factor: Integer },
}

impl CompositeEvidence {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::FermatFailure { .. } => "fermat_failure",
            Self::GcdFactor { .. } => "gcd_factor",
            Self::PerfectPower { .. } => "perfect_power",
            Self::CongruenceFailure { .. } => "congruence_failure",
            Self::EcArithmeticFactor { .. } => "ec_arithmetic_factor",
        }
    }

    /// The witness value in the form printed by the CLI.
    pub fn detail(&self) -> String {
        match self {
            Self::FermatFailure { base } => base.to_string(),
            Self::GcdFactor { factor } | Self::EcArithmeticFactor { factor } => factor.to_string(),
            Self::PerfectPower { base, exp } => format!("{base}^{exp}"),
            Self::CongruenceFailure { r, a } => format!("r={r},a={a}"),
        }
    }

    /// Re-checks the evidence against `n` from scratch.
    pub fn verify(&self, n: &Integer) -> bool {
        if *n < 4 {
            return false;
        }
        match self {
            Self::FermatFailure { base } => {
                if *base <= 0 || base >= n {
                    return false;
                }
                let e = Integer::from(n - 1u32);
                match base.clone().pow_mod(&e, n) {
                    Ok(v) => v != 1,
                    Err(_) => false,
                }
            }
            Self::GcdFactor { factor } | Self::EcArithmeticFactor { factor } => {
                *factor > 1 && factor < n && n.is_divisible(factor)
            }
            Self::PerfectPower { base, exp } => {
                *exp >= 2 && rug::ops::Pow::pow(base.clone(), *exp) == *n
            }
            Self::CongruenceFailure { r, a } => {
                if *r < 1 || *a <= 1 || a >= n {
                    return false;
                }
                match crate::poly::aks_congruence_check(n, *r as usize, a) {
                    Ok(c) => c == crate::poly::Congruence::Fails,
                    Err(_) => false,
                }
            }
        }
    }
}

impl fmt::Display for CompositeEvidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind(), self.detail())
    }
}
