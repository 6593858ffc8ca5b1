//! Prime-field arithmetic and Reed-Solomon codes used as a threshold
//! secret-sharing scheme.

mod field;
mod rs;

pub use field::{field_inv, Field, FieldElement};
pub use rs::{privacy_census, rs_decode, rs_encode, share_secret, Polynomial, ShareVector};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodingError {
    #[error("no inverse")]
    NoInverse,
    #[error("modulus {0} is not a supported prime")]
    NotPrime(u64),
    #[error("field too small: need N < p, got N={n}, p={p}")]
    FieldTooSmall { n: usize, p: u64 },
    #[error("bad parameters: need 1 <= k <= N, got k={k}, N={n}")]
    BadParameters { k: usize, n: usize },
    #[error("value {0} is not a field element")]
    NotInField(u64),
    #[error("census over p={p}, k={k} is too large to enumerate")]
    CensusTooLarge { p: u64, k: usize },
}
