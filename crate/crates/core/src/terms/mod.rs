//! Domain values shared by every party: identities, the phone number `P`,
//! nonces, digests, the `//` concatenation and the response-nonce function
//! `f`, plus the wire codec for protocol messages.

mod codec;

pub use codec::{decode_message, encode_message, CodecError, FieldId, MessageTag, ProtocolMessage};

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;
use sha2::{Digest as _, Sha256};

use crate::entropy::{self, EntropyError};

/// Length in bytes of challenge and response nonces.
pub const NONCE_LEN: usize = 16;
/// Length in bytes of a digest.
pub const DIGEST_LEN: usize = 32;
/// Length in bytes of a session identifier.
pub const SESSION_ID_LEN: usize = 16;
/// Largest part accepted by [`concat_with_prefix`] and largest TLV field.
pub const MAX_PART_LEN: usize = u16::MAX as usize;

/// Rejected values for the domain types in this module.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TermError {
    #[error("identity name must be 1-64 bytes, got {0}")]
    IdentityLength(usize),
    #[error("phone number must be 6-15 ASCII digits")]
    PhoneFormat,
    #[error("expected {expected} bytes, got {got}")]
    Length { expected: usize, got: usize },
    #[error("nonce must not be all zero")]
    ZeroNonce,
    #[error("part of {0} bytes exceeds the 65535-byte limit")]
    PartTooLong(usize),
}

/// Which side of the protocol an identity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    User,
    BankServer,
}

/// A named protocol participant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Identity {
    name: Vec<u8>,
    role: Role,
}

impl Identity {
    pub fn new(name: impl Into<Vec<u8>>, role: Role) -> Result<Self, TermError> {
        let name = name.into();
        if name.is_empty() || name.len() > 64 {
            return Err(TermError::IdentityLength(name.len()));
        }
        Ok(Self { name, role })
    }

    pub fn user(name: impl Into<Vec<u8>>) -> Result<Self, TermError> {
        Self::new(name, Role::User)
    }

    pub fn bank(name: impl Into<Vec<u8>>) -> Result<Self, TermError> {
        Self::new(name, Role::BankServer)
    }

    pub fn name(&self) -> &[u8] {
        &self.name
    }

    /// The name as text, lossily.
    pub fn display_name(&self) -> String {
        String::from_utf8_lossy(&self.name).into_owned()
    }

    pub fn role(&self) -> Role {
        self.role
    }
}

/// The user's phone number `P`, 6 to 15 ASCII digits.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PhoneNumber(Vec<u8>);

impl PhoneNumber {
    pub fn new(digits: impl AsRef<[u8]>) -> Result<Self, TermError> {
        let digits = digits.as_ref();
        if !(6..=15).contains(&digits.len()) || !digits.iter().all(u8::is_ascii_digit) {
            return Err(TermError::PhoneFormat);
        }
        Ok(Self(digits.to_vec()))
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn as_str(&self) -> &str {
        // Only ASCII digits are admitted.
        core::str::from_utf8(&self.0).unwrap_or_default()
    }
}

impl fmt::Debug for PhoneNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhoneNumber({})", self.as_str())
    }
}

macro_rules! fixed_bytes {
    ($(#[$meta:meta])* $name:ident, $len:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name([u8; $len]);

        impl $name {
            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn from_slice(bytes: &[u8]) -> Result<Self, TermError> {
                let arr: [u8; $len] = bytes.try_into().map_err(|_| TermError::Length {
                    expected: $len,
                    got: bytes.len(),
                })?;
                Ok(Self(arr))
            }
        }

        impl AsRef<[u8]> for $name {
            fn as_ref(&self) -> &[u8] {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!(stringify!($name), "("))?;
                for b in &self.0 {
                    write!(f, "{:02x}", b)?;
                }
                write!(f, ")")
            }
        }
    };
}

fixed_bytes!(
    /// A 16-byte nonce (`R_c`). Never all zero.
    Nonce,
    NONCE_LEN
);
fixed_bytes!(
    /// A 32-byte hash output (`R_r` is one of these).
    Digest,
    DIGEST_LEN
);
fixed_bytes!(
    /// Random identifier of one login attempt.
    SessionId,
    SESSION_ID_LEN
);

impl Nonce {
    /// Wraps raw bytes, rejecting the all-zero value.
    pub fn new(bytes: [u8; NONCE_LEN]) -> Result<Self, TermError> {
        if bytes.iter().all(|&b| b == 0) {
            return Err(TermError::ZeroNonce);
        }
        Ok(Self(bytes))
    }
}

impl Digest {
    pub const fn new(bytes: [u8; DIGEST_LEN]) -> Self {
        Self(bytes)
    }
}

impl SessionId {
    pub const fn new(bytes: [u8; SESSION_ID_LEN]) -> Self {
        Self(bytes)
    }

    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Result<Self, EntropyError> {
        let mut b = [0u8; SESSION_ID_LEN];
        entropy::fill(rng, &mut b)?;
        Ok(Self(b))
    }
}

/// The `//` operator: each part as a 2-byte big-endian length followed by
/// its bytes. Injective over part lists.
pub fn concat_with_prefix<P: AsRef<[u8]>>(parts: &[P]) -> Result<Vec<u8>, TermError> {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.as_ref().len() + 2).sum());
    for part in parts {
        let part = part.as_ref();
        if part.len() > MAX_PART_LEN {
            return Err(TermError::PartTooLong(part.len()));
        }
        out.extend_from_slice(&(part.len() as u16).to_be_bytes());
        out.extend_from_slice(part);
    }
    Ok(out)
}

/// The fixed 32-byte hash `H` (SHA-256).
pub fn hash(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// `R_r = f(R_c // P)`.
pub fn derive_response_nonce(rc: &Nonce, phone: &PhoneNumber) -> Digest {
    let joined = concat_with_prefix(&[rc.as_bytes().as_slice(), phone.digits()])
        .expect("nonce and phone are far below the part limit");
    hash(&joined)
}

/// Draws a fresh challenge nonce, redrawing on the all-zero value.
pub fn generate_nonce<R: RngCore + ?Sized>(rng: &mut R) -> Result<Nonce, EntropyError> {
    loop {
        let mut b = [0u8; NONCE_LEN];
        entropy::fill(rng, &mut b)?;
        if let Ok(n) = Nonce::new(b) {
            return Ok(n);
        }
    }
}
