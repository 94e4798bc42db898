//! Arithmetic in `(Z/nZ)[x]/(x^r - a)` and the congruence
//! `(1 + x)^n = 1 + x^n`.
//!
//! Elements are dense vectors of exactly `r` fully reduced coefficients.
//! Products above [`KRONECKER_THRESHOLD`] coefficients go through Kronecker
//! substitution: both operands are packed into one big integer with
//! `2*ceil(log2 n) + ceil(log2 r) + 2` bits per slot, multiplied once with
//! GMP, and unpacked. The fold by `x^r = a` happens while the slots are read
//! back, so the unreduced product never exists as a coefficient vector.

use gmp_mpfr_sys::gmp::limb_t;
use rug::integer::Order;
use rug::Integer;

use crate::arith::rem_pos;
use crate::error::{arg_err, Result};

/// Degree from which [`MulStrategy::Auto`] switches to Kronecker substitution.
pub const KRONECKER_THRESHOLD: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MulStrategy {
    /// `O(r^2)` coefficient products.
    Schoolbook,
    /// One big-integer product.
    Kronecker,
    /// Schoolbook up to [`KRONECKER_THRESHOLD`], Kronecker above.
    Auto,
}

impl MulStrategy {
    fn resolve(self, r: usize) -> MulStrategy {
        match self {
            MulStrategy::Auto if r > KRONECKER_THRESHOLD => MulStrategy::Kronecker,
            MulStrategy::Auto => MulStrategy::Schoolbook,
            s => s,
        }
    }
}

/// The ring `(Z/nZ)[x]/(x^r - a)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyRing {
    n: Integer,
    r: usize,
    a: Integer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RingElem<'r> {
    ring: &'r PolyRing,
    coeffs: Vec<Integer>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Congruence {
    Holds,
    Fails,
}

impl PolyRing {
    pub fn new(n: Integer, r: usize, a: Integer) -> Result<Self> {
        if n < 2 {
            return arg_err("ring modulus must be at least 2");
        }
        if r < 1 {
            return arg_err("reduction degree must be at least 1");
        }
        if a <= 1 || a >= n {
            return arg_err("constant a must satisfy 1 < a < n");
        }
        Ok(PolyRing { n, r, a })
    }

    pub fn modulus(&self) -> &Integer {
        &self.n
    }

    pub fn degree(&self) -> usize {
        self.r
    }

    pub fn constant(&self) -> &Integer {
        &self.a
    }

    /// Bits per Kronecker slot; holds any coefficient of an unreduced
    /// product, at most `r * (n-1)^2`.
    pub fn slot_bits(&self) -> usize {
        let log_n = Integer::from(&self.n - 1u32).significant_bits() as usize;
        let log_r = (usize::BITS - (self.r - 1).leading_zeros()) as usize;
        2 * log_n + log_r + 2
    }

    pub fn zero(&self) -> RingElem<'_> {
        RingElem { ring: self, coeffs: vec![Integer::new(); self.r] }
    }

    pub fn one(&self) -> RingElem<'_> {
        let mut e = self.zero();
        e.coeffs[0] = Integer::from(1) % &self.n;
        e
    }

    /// `1 + x`.
    pub fn one_plus_x(&self) -> RingElem<'_> {
        let mut e = self.one();
        e.mul_by_one_plus_x();
        e
    }

    /// Reduces a raw coefficient vector of length at most `2r - 1` modulo
    /// `(n, x^r - a)`. Index `i` holds the coefficient of `x^i`.
    pub fn reduce(&self, raw: &[Integer]) -> Result<RingElem<'_>> {
        if raw.len() > 2 * self.r - 1 {
            return arg_err(format!(
                "raw polynomial has {} coefficients, at most {} allowed",
                raw.len(),
                2 * self.r - 1
            ));
        }
        let mut coeffs: Vec<Integer> =
            raw.iter().take(self.r).map(|c| rem_pos(c, &self.n)).collect();
        coeffs.resize(self.r, Integer::new());
        for (i, c) in raw.iter().enumerate().skip(self.r) {
            let slot = &mut coeffs[i - self.r];
            *slot += Integer::from(c * &self.a);
            *slot = rem_pos(slot, &self.n);
        }
        Ok(RingElem { ring: self, coeffs })
    }

    /// `x^e = a^(e div r) * x^(e mod r)`.
    pub fn x_pow(&self, e: &Integer) -> Result<RingElem<'_>> {
        if *e < 0 {
            return arg_err("exponent must be nonnegative");
        }
        let (q, rem) = e.div_rem_ref(&Integer::from(self.r)).into();
        let (q, rem): (Integer, Integer) = (q, rem);
        let mut out = self.zero();
        let idx = rem.to_usize().expect("remainder below r");
        out.coeffs[idx] = self.a.clone().pow_mod(&q, &self.n).expect("nonnegative");
        Ok(out)
    }

    /// `(1 + x)^e` by left-to-right square-and-multiply.
    pub fn pow_1_plus_x(&self, e: &Integer) -> Result<RingElem<'_>> {
        self.pow_1_plus_x_with(e, MulStrategy::Auto)
    }

    pub fn pow_1_plus_x_with(&self, e: &Integer, strategy: MulStrategy) -> Result<RingElem<'_>> {
        if *e < 0 {
            return arg_err("exponent must be nonnegative");
        }
        if *e == 0 {
            return Ok(self.one());
        }
        let mut acc = self.one_plus_x();
        let top = e.significant_bits() - 1;
        for bit in (0..top).rev() {
            acc.square_in_place(strategy);
            if e.get_bit(bit) {
                acc.mul_by_one_plus_x();
            }
        }
        Ok(acc)
    }
}

impl<'r> RingElem<'r> {
    pub fn ring(&self) -> &'r PolyRing {
        self.ring
    }

    pub fn coeffs(&self) -> &[Integer] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Integer> {
        self.coeffs
    }

    fn check_same_ring(&self, other: &RingElem<'_>) -> Result<()> {
        if self.ring != other.ring {
            return arg_err("operands live in different rings");
        }
        Ok(())
    }

    pub fn add(&self, other: &RingElem<'_>) -> Result<RingElem<'r>> {
        self.check_same_ring(other)?;
        let n = &self.ring.n;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(u, v)| {
                let mut s = Integer::from(u + v);
                if s >= *n {
                    s -= n;
                }
                s
            })
            .collect();
        Ok(RingElem { ring: self.ring, coeffs })
    }

    pub fn mul(&self, other: &RingElem<'_>) -> Result<RingElem<'r>> {
        self.mul_with(other, MulStrategy::Auto)
    }

    pub fn mul_with(&self, other: &RingElem<'_>, strategy: MulStrategy) -> Result<RingElem<'r>> {
        self.check_same_ring(other)?;
        let coeffs = match strategy.resolve(self.ring.r) {
            MulStrategy::Kronecker => kronecker_product(self.ring, &self.coeffs, Some(&other.coeffs)),
            _ => schoolbook_product(self.ring, &self.coeffs, &other.coeffs),
        };
        Ok(RingElem { ring: self.ring, coeffs })
    }

    pub fn square_in_place(&mut self, strategy: MulStrategy) {
        self.coeffs = match strategy.resolve(self.ring.r) {
            MulStrategy::Kronecker => kronecker_product(self.ring, &self.coeffs, None),
            _ => schoolbook_product(self.ring, &self.coeffs, &self.coeffs),
        };
    }

    /// Multiplies by `1 + x`: one shift with wrap-around by `a`, one addition.
    pub fn mul_by_one_plus_x(&mut self) {
        let ring = self.ring;
        let r = ring.r;
        let wrapped = Integer::from(&self.coeffs[r - 1] * &ring.a);
        for i in (1..r).rev() {
            let (lo, hi) = self.coeffs.split_at_mut(i);
            hi[0] += &lo[i - 1];
            if hi[0] >= ring.n {
                hi[0] -= &ring.n;
            }
        }
        self.coeffs[0] += wrapped;
        self.coeffs[0] %= &ring.n;
    }
}

fn schoolbook_product(ring: &PolyRing, u: &[Integer], v: &[Integer]) -> Vec<Integer> {
    let r = ring.r;
    let mut raw = vec![Integer::new(); 2 * r - 1];
    for (i, ui) in u.iter().enumerate() {
        if *ui == 0 {
            continue;
        }
        for (j, vj) in v.iter().enumerate() {
            raw[i + j] += ui * vj;
        }
    }
    fold_reduce(ring, raw)
}

fn fold_reduce(ring: &PolyRing, mut raw: Vec<Integer>) -> Vec<Integer> {
    let r = ring.r;
    let high: Vec<Integer> = raw.drain(r..).collect();
    for (i, mut h) in high.into_iter().enumerate() {
        h %= &ring.n;
        h *= &ring.a;
        raw[i] += h;
    }
    for c in raw.iter_mut() {
        *c %= &ring.n;
    }
    raw
}

const LIMB_BITS: usize = limb_t::BITS as usize;

/// Writes `coeffs[i]` at bit offset `i * w` of a zeroed limb buffer.
fn pack(coeffs: &[Integer], w: usize) -> Integer {
    let total_bits = coeffs.len() * w;
    let mut buf: Vec<limb_t> = vec![0; total_bits / LIMB_BITS + 2];
    for (i, c) in coeffs.iter().enumerate() {
        let off = i * w;
        let (word, shift) = (off / LIMB_BITS, off % LIMB_BITS);
        for (j, &limb) in c.as_limbs().iter().enumerate() {
            buf[word + j] |= limb << shift;
            if shift != 0 {
                buf[word + j + 1] |= limb >> (LIMB_BITS - shift);
            }
        }
    }
    Integer::from_digits(&buf, Order::Lsf)
}

/// Reads the `w`-bit slot at bit offset `off` into `dst`.
fn read_slot(limbs: &[limb_t], off: usize, w: usize, scratch: &mut Vec<limb_t>, dst: &mut Integer) {
    let (word, shift) = (off / LIMB_BITS, off % LIMB_BITS);
    let words = w.div_ceil(LIMB_BITS);
    scratch.clear();
    for j in 0..words {
        let lo = limbs.get(word + j).copied().unwrap_or(0);
        let hi = limbs.get(word + j + 1).copied().unwrap_or(0);
        let v = if shift == 0 { lo } else { (lo >> shift) | (hi << (LIMB_BITS - shift)) };
        scratch.push(v);
    }
    let extra = words * LIMB_BITS - w;
    if extra > 0 {
        if let Some(last) = scratch.last_mut() {
            *last &= limb_t::MAX >> extra;
        }
    }
    dst.assign_digits(&scratch[..], Order::Lsf);
}

/// Product (or square, when `v` is `None`) by Kronecker substitution with
/// the `x^r = a` fold applied while unpacking.
fn kronecker_product(ring: &PolyRing, u: &[Integer], v: Option<&[Integer]>) -> Vec<Integer> {
    let r = ring.r;
    let w = ring.slot_bits();
    let product = {
        let pu = pack(u, w);
        match v {
            None => Integer::from(pu.square_ref()),
            Some(v) => pu * pack(v, w),
        }
    };
    let slots = product.as_limbs();

    let mut out = Vec::with_capacity(r);
    let mut scratch = Vec::with_capacity(w.div_ceil(LIMB_BITS) + 1);
    let mut high = Integer::new();
    for i in 0..r {
        let mut lo = Integer::new();
        read_slot(slots, i * w, w, &mut scratch, &mut lo);
        if i + r < 2 * r - 1 {
            read_slot(slots, (i + r) * w, w, &mut scratch, &mut high);
            if high != 0 {
                high %= &ring.n;
                high *= &ring.a;
                lo += &high;
            }
        }
        lo %= &ring.n;
        out.push(lo);
    }
    out
}

/// Checks `(1 + x)^n = 1 + x^n` in `(Z/nZ)[x]/(x^r - a)`.
///
/// This is only the congruence; on its own it proves nothing about `n`.
pub fn aks_congruence_check(n: &Integer, r: usize, a: &Integer) -> Result<Congruence> {
    let ring = PolyRing::new(n.clone(), r, a.clone())?;
    let lhs = ring.pow_1_plus_x(n)?;
    let mut rhs = ring.x_pow(n)?;
    rhs.coeffs[0] += 1;
    if rhs.coeffs[0] >= *n {
        rhs.coeffs[0] -= n;
    }
    Ok(if lhs.coeffs == rhs.coeffs { Congruence::Holds } else { Congruence::Fails })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<Integer> {
        v.iter().map(|&x| Integer::from(x)).collect()
    }

    fn ring(n: i64, r: usize, a: i64) -> PolyRing {
        PolyRing::new(Integer::from(n), r, Integer::from(a)).unwrap()
    }

    #[test]
    fn ring_validation() {
        assert!(PolyRing::new(Integer::from(1), 3, Integer::from(0)).is_err());
        assert!(PolyRing::new(Integer::from(13), 0, Integer::from(3)).is_err());
        assert!(PolyRing::new(Integer::from(13), 3, Integer::from(1)).is_err());
        assert!(PolyRing::new(Integer::from(13), 3, Integer::from(13)).is_err());
    }

    #[test]
    fn reduce_examples() {
        let rg = ring(13, 3, 3);
        assert_eq!(rg.reduce(&ints(&[0, 0, 0, 1])).unwrap().coeffs(), ints(&[3, 0, 0]));
        assert_eq!(rg.reduce(&ints(&[1, 0, 0, 0, 2])).unwrap().coeffs(), ints(&[1, 6, 0]));
        assert_eq!(rg.reduce(&ints(&[5])).unwrap().coeffs(), ints(&[5, 0, 0]));
        assert_eq!(rg.reduce(&ints(&[-1, 14])).unwrap().coeffs(), ints(&[12, 1, 0]));
        assert!(rg.reduce(&ints(&[0, 0, 0, 0, 0, 1])).is_err());
    }

    #[test]
    fn mul_examples_both_strategies() {
        let rg = ring(13, 3, 3);
        let one_x = rg.reduce(&ints(&[1, 1])).unwrap();
        let x2 = rg.reduce(&ints(&[0, 0, 1])).unwrap();
        for s in [MulStrategy::Schoolbook, MulStrategy::Kronecker] {
            assert_eq!(one_x.mul_with(&one_x, s).unwrap().coeffs(), ints(&[1, 2, 1]));
            assert_eq!(x2.mul_with(&x2, s).unwrap().coeffs(), ints(&[0, 3, 0]));
        }
    }

    #[test]
    fn ring_mismatch_is_rejected() {
        let a = ring(13, 3, 3);
        let b = ring(13, 3, 2);
        assert!(a.one().mul(&b.one()).is_err());
        assert!(a.one().add(&b.one()).is_err());
    }

    #[test]
    fn x_pow_examples() {
        let rg = ring(13, 3, 3);
        assert_eq!(rg.x_pow(&Integer::from(13)).unwrap().coeffs(), ints(&[0, 3, 0]));
        assert_eq!(rg.x_pow(&Integer::from(0)).unwrap().coeffs(), ints(&[1, 0, 0]));
        assert_eq!(rg.x_pow(&Integer::from(2)).unwrap().coeffs(), ints(&[0, 0, 1]));
    }

    #[test]
    fn pow_1_plus_x_examples() {
        let rg = ring(13, 3, 3);
        for s in [MulStrategy::Schoolbook, MulStrategy::Kronecker] {
            let p = |e: i64| rg.pow_1_plus_x_with(&Integer::from(e), s).unwrap().into_coeffs();
            assert_eq!(p(13), ints(&[1, 3, 0]));
            assert_eq!(p(1), ints(&[1, 1, 0]));
            assert_eq!(p(2), ints(&[1, 2, 1]));
            assert_eq!(p(0), ints(&[1, 0, 0]));
        }
    }

    #[test]
    fn degree_one_ring() {
        // x = a, so (1 + x)^e = (1 + a)^e
        let rg = ring(101, 1, 7);
        let got = rg.pow_1_plus_x(&Integer::from(55)).unwrap();
        let want = Integer::from(8).pow_mod(&Integer::from(55), &Integer::from(101)).unwrap();
        assert_eq!(got.coeffs(), &[want]);
    }

    #[test]
    fn congruence_examples() {
        let c = |n: i64, r: usize, a: i64| {
            aks_congruence_check(&Integer::from(n), r, &Integer::from(a)).unwrap()
        };
        assert_eq!(c(227, 113, 4), Congruence::Holds);
        assert_eq!(c(13, 3, 3), Congruence::Holds);
        for a in 2..221 {
            if Integer::from(a).gcd(&Integer::from(221)) == 1 {
                assert_eq!(c(221, 5, a), Congruence::Fails, "a = {a}");
            }
        }
    }

    #[test]
    fn slot_width_formula() {
        // ceil(log2 13) = 4, ceil(log2 3) = 2
        assert_eq!(ring(13, 3, 3).slot_bits(), 2 * 4 + 2 + 2);
        // n = 16: ceil(log2 16) = 4; r = 1: ceil(log2 1) = 0
        assert_eq!(ring(16, 1, 3).slot_bits(), 2 * 4 + 2);
    }
}
