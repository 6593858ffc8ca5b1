use std::fmt;

use super::CodingError;

/// An element of a prime field. The modulus lives in the [`Field`] that
/// produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FieldElement(pub u64);

impl FieldElement {
    pub fn value(self) -> u64 {
        self.0
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// GF(p) for a prime p.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Field {
    p: u64,
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl Field {
    /// Moduli are capped at 2^32 so products fit in a u64.
    pub fn new(p: u64) -> Result<Field, CodingError> {
        if p > u32::MAX as u64 || !is_prime(p) {
            return Err(CodingError::NotPrime(p));
        }
        Ok(Field { p })
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn elem(&self, v: u64) -> FieldElement {
        FieldElement(v % self.p)
    }

    pub fn contains(&self, a: FieldElement) -> bool {
        a.0 < self.p
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement(0)
    }

    pub fn one(&self) -> FieldElement {
        FieldElement(1)
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement((a.0 + b.0) % self.p)
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement((a.0 + self.p - b.0) % self.p)
    }

    pub fn neg(&self, a: FieldElement) -> FieldElement {
        FieldElement((self.p - a.0) % self.p)
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(a.0 * b.0 % self.p)
    }

    pub fn pow(&self, a: FieldElement, mut e: u64) -> FieldElement {
        let mut base = a;
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, CodingError> {
        if a.0 % self.p == 0 {
            return Err(CodingError::NoInverse);
        }
        Ok(self.pow(a, self.p - 2))
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, CodingError> {
        Ok(self.mul(a, self.inv(b)?))
    }
}

/// Convenience wrapper matching the free-function form used in docs and tests.
pub fn field_inv(field: &Field, a: FieldElement) -> Result<FieldElement, CodingError> {
    field.inv(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_composites() {
        assert!(Field::new(12).is_err());
        assert!(Field::new(1).is_err());
        assert!(Field::new(257).is_ok());
    }

    #[test]
    fn inverse_of_zero_fails() {
        let f = Field::new(11).unwrap();
        assert_eq!(f.inv(f.zero()), Err(CodingError::NoInverse));
    }

    #[test]
    fn sub_and_neg_agree() {
        let f = Field::new(7).unwrap();
        for a in 0..7 {
            for b in 0..7 {
                let (a, b) = (f.elem(a), f.elem(b));
                assert_eq!(f.sub(a, b), f.add(a, f.neg(b)));
            }
        }
    }
}
