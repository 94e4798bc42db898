//! Curves with complex multiplication by the nine imaginary quadratic orders
//! of class number one.
//!
//! For a prime `n` with `4n = t^2 + |D| y^2`, every curve with CM by `D`
//! has one of a handful of orders determined by `(t, y)`, and the curves
//! themselves come straight from the integer j-invariant.

use rug::Integer;

use crate::arith::{gcd, isqrt, rem_pos, sqrt_mod_prime};
use crate::ec::Curve;
use crate::error::{arg_err, Error, Result};
use crate::evidence::CompositeEvidence;

/// Supported discriminants, by increasing `|D|`.
pub const DISCRIMINANTS: [i32; 9] = [-3, -4, -7, -8, -11, -19, -43, -67, -163];

/// j-invariant of the curves with CM by `d`.
pub fn j_invariant(d: i32) -> Option<i64> {
    Some(match d {
        -3 => 0,
        -4 => 1728,
        -7 => -3375,
        -8 => 8000,
        -11 => -32768,
        -19 => -884_736,
        -43 => -884_736_000,
        -67 => -147_197_952_000,
        -163 => -262_537_412_640_768_000,
        _ => return None,
    })
}

fn check_discriminant(d: i32) -> Result<()> {
    if j_invariant(d).is_none() {
        return arg_err(format!("unsupported discriminant {d}"));
    }
    Ok(())
}

/// Solves `4n = t^2 + |d| y^2` with `t, y >= 0` for an odd probable prime
/// `n`.
pub fn cornacchia_4n(d: i32, n: &Integer) -> Result<Option<(Integer, Integer)>> {
    check_discriminant(d)?;
    if *n < 3 || n.is_even() {
        return arg_err("cornacchia_4n needs an odd n >= 3");
    }
    let dd = Integer::from(d);
    let abs_d = Integer::from(-d);
    if gcd(&abs_d, n) != 1 || dd.jacobi(n) == -1 {
        return Ok(None);
    }
    let Some(mut x0) = sqrt_mod_prime(&dd, n)? else {
        return Ok(None);
    };
    if x0.is_odd() != (d & 1 != 0) {
        x0 = Integer::from(n - &x0);
    }
    let four_n = Integer::from(n << 2);
    let bound = isqrt(&four_n);
    let mut a = Integer::from(n << 1);
    let mut b = x0;
    while b > bound {
        let rem = Integer::from(&a % &b);
        a = std::mem::replace(&mut b, rem);
    }
    let rest = four_n - Integer::from(b.square_ref());
    if !rest.is_divisible(&abs_d) {
        return Ok(None);
    }
    let c = rest / abs_d;
    let y = isqrt(&c);
    if Integer::from(y.square_ref()) != c {
        return Ok(None);
    }
    Ok(Some((b, y)))
}

/// The possible orders of curves with CM by `d` over `Z/nZ`.
pub fn candidate_orders(n: &Integer, d: i32, t: &Integer, y: &Integer) -> Vec<Integer> {
    let base = Integer::from(n + 1u32);
    let mut traces = vec![t.clone()];
    match d {
        -4 => traces.push(Integer::from(y * 2u32)),
        -3 => {
            let y3 = Integer::from(y * 3u32);
            traces.push(Integer::from(t + &y3) >> 1);
            traces.push(Integer::from(t - &y3) >> 1);
        }
        _ => {}
    }
    let mut out = Vec::with_capacity(2 * traces.len());
    for tr in traces {
        out.push(Integer::from(&base + &tr));
        out.push(Integer::from(&base - &tr));
    }
    out
}

/// Number of twists [`cm_curve`] enumerates for `d`.
pub fn twist_count(d: i32) -> usize {
    match d {
        -3 => 6,
        -4 => 4,
        _ => 2,
    }
}

/// Smallest `g >= 2` generating `F_n^* / (F_n^*)^k` for the twist group of
/// `d` (a non-square, and also a non-cube when `d = -3`).
fn twist_generator(n: &Integer, d: i32) -> Result<Integer> {
    let n1 = Integer::from(n - 1u32);
    let third = if d == -3 && n1.is_divisible_u(3) { Some(Integer::from(&n1 / 3u32)) } else { None };
    let mut g = Integer::from(2);
    while g < *n {
        match g.jacobi(n) {
            0 => {
                return Err(Error::NotPrime(CompositeEvidence::GcdFactor { factor: gcd(&g, n) }));
            }
            -1 => {
                let cube = match &third {
                    Some(e) => g.clone().pow_mod(e, n).expect("nonnegative") == 1,
                    None => false,
                };
                if !cube {
                    return Ok(g);
                }
            }
            _ => {}
        }
        g += 1;
    }
    Err(Error::Undecided(format!("no twist generator modulo {n}")))
}

fn gcd_check(v: &Integer, n: &Integer) -> Result<bool> {
    let g = gcd(v, n);
    if g == 1 {
        return Ok(true);
    }
    if g == *n {
        return Ok(false);
    }
    Err(Error::NotPrime(CompositeEvidence::GcdFactor { factor: g }))
}

/// Builds twist number `twist_index` of the curve with CM by `d` over
/// `Z/nZ`.
///
/// `Ok(None)` means the construction degenerates modulo `n` (singular curve
/// or non-invertible `1728 - j`); a proper factor found on the way is
/// reported as [`Error::NotPrime`].
pub fn cm_curve(n: &Integer, d: i32, twist_index: usize) -> Result<Option<Curve>> {
    check_discriminant(d)?;
    if twist_index >= twist_count(d) {
        return arg_err(format!("twist index {twist_index} out of range for D = {d}"));
    }
    if *n < 5 || n.is_even() {
        return arg_err("cm_curve needs an odd n >= 5");
    }
    let g = twist_generator(n, d)?;
    let twist = g.pow_mod(&Integer::from(twist_index), n).expect("nonnegative");
    let (a, b) = match d {
        -3 => (Integer::new(), twist),
        -4 => (twist, Integer::new()),
        _ => {
            let j = rem_pos(&Integer::from(j_invariant(d).expect("checked")), n);
            let den = rem_pos(&Integer::from(1728 - &j), n);
            if !gcd_check(&den, n)? {
                return Ok(None);
            }
            let k = j * den.invert(n).expect("unit") % n;
            let c2 = Integer::from(twist.square_ref());
            let c3 = Integer::from(&c2 * &twist);
            (rem_pos(&(Integer::from(&k * 3u32) * c2), n), rem_pos(&(k * 2u32 * c3), n))
        }
    };
    let curve = Curve::new(n.clone(), &a, &b);
    if !gcd_check(&curve.discriminant(), n)? {
        return Ok(None);
    }
    Ok(Some(curve))
}
