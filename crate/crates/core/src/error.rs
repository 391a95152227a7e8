use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// `t1`/`t2` not positive, or `t2 > 2 t1`.
    InvalidNoise {
        t1: f64,
        t2: f64,
    },
    NegativeDuration(f64),
    NotHermitian(f64),
    BadTrace(f64),
    NotPositive(f64),
    /// A scenario parameter violates its documented range.
    InvalidConfig(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidNoise { t1, t2 } => {
                write!(f, "invalid memory noise T1={t1} ns, T2={t2} ns (need 0 < T2 <= 2*T1)")
            }
            Error::NegativeDuration(dt) => write!(f, "negative storage duration {dt} ns"),
            Error::NotHermitian(d) => write!(f, "density matrix is not Hermitian (defect {d:e})"),
            Error::BadTrace(t) => write!(f, "density matrix trace {t} != 1"),
            Error::NotPositive(e) => write!(f, "density matrix has negative eigenvalue {e:e}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
