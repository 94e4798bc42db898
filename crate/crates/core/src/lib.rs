pub mod arith;
pub mod cert;
pub mod cli;
pub mod cm;
pub mod ec;
pub mod ecpp;
pub mod error;
pub mod evidence;
pub mod good;
pub mod poly;
pub mod prove;
pub mod survey;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/good-primes.md")]
    mod good_primes {}
    #[doc = include_str!("../../../book/src/polynomial-ring.md")]
    mod polynomial_ring {}
    #[doc = include_str!("../../../book/src/curve-reductions.md")]
    mod curve_reductions {}
    #[doc = include_str!("../../../book/src/certificates.md")]
    mod certificates {}
    #[doc = include_str!("../../../book/src/density.md")]
    mod density {}
    #[doc = include_str!("../../../book/src/command-line.md")]
    mod command_line {}
}
