//! Short Weierstrass curves `y^2 = x^3 + Ax + B` over `Z/nZ`.
//!
//! `n` is only assumed to be a probable prime. All arithmetic uses affine
//! formulas with explicit inversions; whenever a denominator shares a
//! factor with `n` the operation stops and hands that factor back.

use rug::Integer;

use crate::arith::{gcd, rem_pos, sqrt_mod_prime, Rng};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Curve {
    pub n: Integer,
    pub a: Integer,
    pub b: Integer,
}

/// A point in projective coordinates. `z = 0` is the point at infinity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Point {
    pub x: Integer,
    pub y: Integer,
    pub z: Integer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EcError {
    /// A divisor `1 < g < n` of the modulus.
    Factor(Integer),
    /// The inputs were not points of the curve.
    NotOnCurve,
}

pub type EcResult<T> = std::result::Result<T, EcError>;

impl Point {
    pub fn identity() -> Self {
        Point { x: Integer::new(), y: Integer::from(1), z: Integer::new() }
    }

    pub fn affine(x: Integer, y: Integer) -> Self {
        Point { x, y, z: Integer::from(1) }
    }

    pub fn is_identity(&self) -> bool {
        self.z == 0
    }
}

/// `1/v mod n`, or the factor that prevents it.
fn invert(v: &Integer, n: &Integer) -> EcResult<Integer> {
    let v = rem_pos(v, n);
    let g = gcd(&v, n);
    if g == 1 {
        return Ok(v.invert(n).expect("unit"));
    }
    if g != *n {
        return Err(EcError::Factor(g));
    }
    Err(EcError::NotOnCurve)
}

impl Curve {
    pub fn new(n: Integer, a: &Integer, b: &Integer) -> Self {
        let a = rem_pos(a, &n);
        let b = rem_pos(b, &n);
        Curve { n, a, b }
    }

    /// `4A^3 + 27B^2 mod n`.
    pub fn discriminant(&self) -> Integer {
        let a3 = Integer::from(self.a.square_ref()) * &self.a * 4u32;
        let b2 = Integer::from(self.b.square_ref()) * 27u32;
        rem_pos(&(a3 + b2), &self.n)
    }

    /// `x^3 + Ax + B mod n`.
    pub fn rhs(&self, x: &Integer) -> Integer {
        let x2 = Integer::from(x.square_ref());
        let v = (x2 + &self.a) * x + &self.b;
        rem_pos(&v, &self.n)
    }

    pub fn contains(&self, p: &Point) -> bool {
        if p.is_identity() {
            return true;
        }
        match self.normalize(p) {
            Ok(q) => {
                let lhs = rem_pos(&Integer::from(q.y.square_ref()), &self.n);
                lhs == self.rhs(&q.x)
            }
            Err(_) => false,
        }
    }

    /// Brings a point to `z in {0, 1}` with reduced coordinates.
    pub fn normalize(&self, p: &Point) -> EcResult<Point> {
        if p.is_identity() {
            return Ok(Point::identity());
        }
        let z = rem_pos(&p.z, &self.n);
        if z == 1 {
            return Ok(Point::affine(rem_pos(&p.x, &self.n), rem_pos(&p.y, &self.n)));
        }
        let zi = invert(&z, &self.n)?;
        let x = rem_pos(&Integer::from(&p.x * &zi), &self.n);
        let y = rem_pos(&Integer::from(&p.y * &zi), &self.n);
        Ok(Point::affine(x, y))
    }

    pub fn neg(&self, p: &Point) -> Point {
        if p.is_identity() {
            return Point::identity();
        }
        Point { x: p.x.clone(), y: rem_pos(&Integer::from(-&p.y), &self.n), z: p.z.clone() }
    }

    fn double_affine(&self, p: &Point) -> EcResult<Point> {
        let n = &self.n;
        if p.y == 0 {
            return Ok(Point::identity());
        }
        let num = Integer::from(p.x.square_ref()) * 3u32 + &self.a;
        let den = Integer::from(&p.y * 2u32);
        let lambda = rem_pos(&(num * invert(&den, n)?), n);
        let x3 = rem_pos(&(Integer::from(lambda.square_ref()) - &p.x - &p.x), n);
        let y3 = rem_pos(&(lambda * Integer::from(&p.x - &x3) - &p.y), n);
        Ok(Point::affine(x3, y3))
    }

    pub fn add(&self, p: &Point, q: &Point) -> EcResult<Point> {
        let p = self.normalize(p)?;
        let q = self.normalize(q)?;
        if p.is_identity() {
            return Ok(q);
        }
        if q.is_identity() {
            return Ok(p);
        }
        let n = &self.n;
        if p.x == q.x {
            let sum = rem_pos(&Integer::from(&p.y + &q.y), n);
            if sum == 0 {
                return Ok(Point::identity());
            }
            if p.y == q.y {
                return self.double_affine(&p);
            }
            let g = gcd(&sum, n);
            return Err(if g > 1 && g < *n { EcError::Factor(g) } else { EcError::NotOnCurve });
        }
        let num = Integer::from(&q.y - &p.y);
        let den = Integer::from(&q.x - &p.x);
        let lambda = rem_pos(&(num * invert(&den, n)?), n);
        let x3 = rem_pos(&(Integer::from(lambda.square_ref()) - &p.x - &q.x), n);
        let y3 = rem_pos(&(lambda * Integer::from(&p.x - &x3) - &p.y), n);
        Ok(Point::affine(x3, y3))
    }

    pub fn double(&self, p: &Point) -> EcResult<Point> {
        let p = self.normalize(p)?;
        if p.is_identity() {
            return Ok(p);
        }
        self.double_affine(&p)
    }

    /// `k * p` by left-to-right double-and-add.
    pub fn mul(&self, k: &Integer, p: &Point) -> EcResult<Point> {
        if *k < 0 {
            return self.mul(&Integer::from(-k), &self.neg(p));
        }
        let base = self.normalize(p)?;
        let mut acc = Point::identity();
        let bits = k.significant_bits();
        for i in (0..bits).rev() {
            acc = self.double(&acc)?;
            if k.get_bit(i) {
                acc = self.add(&acc, &base)?;
            }
        }
        Ok(acc)
    }

    /// A uniformly chosen affine point, assuming `n` is prime.
    ///
    /// Fails with [`Error::NotPrime`] when the square-root extraction
    /// contradicts primality of `n`.
    pub fn random_point(&self, rng: &mut Rng) -> Result<Point> {
        for _ in 0..(64 * self.n.significant_bits() + 64) {
            let x = rng.below(&self.n);
            let v = self.rhs(&x);
            if let Some(y) = sqrt_mod_prime(&v, &self.n)? {
                let y = if rng.next_u64() & 1 == 1 { rem_pos(&Integer::from(-&y), &self.n) } else { y };
                return Ok(Point::affine(x, y));
            }
        }
        Err(Error::Undecided(format!("no point found on curve mod {}", self.n)))
    }
}

/// `p + q` on `c`.
pub fn ec_add(c: &Curve, p: &Point, q: &Point) -> EcResult<Point> {
    c.add(p, q)
}

/// `k * p` on `c`.
pub fn ec_mul(c: &Curve, k: &Integer, p: &Point) -> EcResult<Point> {
    c.mul(k, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(v: i64) -> Integer {
        Integer::from(v)
    }

    fn curve(n: i64, a: i64, b: i64) -> Curve {
        Curve::new(int(n), &int(a), &int(b))
    }

    #[test]
    fn identity_and_inverse() {
        let c = curve(227, 4, 4);
        let p = Point::affine(int(0), int(2));
        assert!(c.contains(&p));
        assert_eq!(ec_add(&c, &p, &Point::identity()).unwrap(), p);
        assert_eq!(ec_add(&c, &Point::identity(), &p).unwrap(), p);
        assert!(ec_add(&c, &p, &c.neg(&p)).unwrap().is_identity());
        assert!(ec_mul(&c, &int(0), &p).unwrap().is_identity());
        assert_eq!(ec_mul(&c, &int(1), &p).unwrap(), p);
    }

    #[test]
    fn projective_inputs_are_normalized() {
        let c = curve(227, 4, 4);
        let p = Point::affine(int(0), int(2));
        let scaled = Point { x: int(0), y: int(10), z: int(5) };
        assert!(c.contains(&scaled));
        assert_eq!(ec_add(&c, &scaled, &Point::identity()).unwrap(), p);
    }

    #[test]
    fn factor_from_composite_modulus() {
        // (0, 1) has order 5 modulo 7 and order 7 modulo 11
        let c = curve(77, 1, 1);
        let p = Point::affine(int(0), int(1));
        assert!(c.contains(&p));
        assert_eq!(ec_mul(&c, &int(5), &p), Err(EcError::Factor(int(7))));
        assert_eq!(ec_mul(&c, &int(7), &p), Err(EcError::Factor(int(11))));
    }

    #[test]
    fn two_torsion_doubles_to_identity() {
        // x^3 + x = x(x^2 + 1): (0, 0) has order 2
        let c = curve(13, 1, 0);
        let p = Point::affine(int(0), int(0));
        assert!(ec_mul(&c, &int(2), &p).unwrap().is_identity());
    }

    #[test]
    fn random_point_is_on_curve() {
        let c = curve(1_000_003, 5, 7);
        let mut rng = Rng::seeded(1);
        for _ in 0..20 {
            let p = c.random_point(&mut rng).unwrap();
            assert!(c.contains(&p));
        }
    }

    #[test]
    fn discriminant_formula() {
        assert_eq!(curve(227, 4, 4).discriminant(), int((4 * 64 + 27 * 16) % 227));
        assert_eq!(curve(13, 0, 0).discriminant(), 0);
    }
}
