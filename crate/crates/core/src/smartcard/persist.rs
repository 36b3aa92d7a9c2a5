//! Card file: `"SMBC"`, version byte, then the persistent fields in
//! declaration order.
//!
//! ```text
//! card_id[8]  holder:u8len+name  sealed_sk:u16len+bytes  pin_verifier[32]
//! salt[16]  retry_counter:u8  locked:u8  bank_pk:u16len+bytes
//! bank_name:u8len+name  group_id:u8  kdf_iterations:u32be
//! ```

use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{CardState, MAX_PIN_RETRIES, MIN_KDF_ITERATIONS};
use crate::signcrypt::{GroupKind, GroupParams, PublicKey};
use crate::terms::Identity;

const MAGIC: &[u8; 4] = b"SMBC";
const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PersistError {
    #[error("not a card file")]
    Magic,
    #[error("unsupported card file version {0}")]
    Version(u8),
    #[error("card file truncated or malformed")]
    Malformed,
    #[error("cards on custom groups cannot be persisted")]
    CustomGroup,
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PersistError> {
        if self.0.len() < n {
            return Err(PersistError::Malformed);
        }
        let (h, t) = self.0.split_at(n);
        self.0 = t;
        Ok(h)
    }
    fn u8(&mut self) -> Result<u8, PersistError> {
        Ok(self.take(1)?[0])
    }
    fn arr<const N: usize>(&mut self) -> Result<[u8; N], PersistError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn short(&mut self) -> Result<&'a [u8], PersistError> {
        let n = self.u8()? as usize;
        self.take(n)
    }
    fn long(&mut self) -> Result<&'a [u8], PersistError> {
        let n = u16::from_be_bytes(self.arr()?) as usize;
        self.take(n)
    }
}

impl CardState {
    pub fn to_bytes(&self) -> Result<Vec<u8>, PersistError> {
        let kind = self.bank_pk.params().kind();
        if kind == GroupKind::Custom {
            return Err(PersistError::CustomGroup);
        }
        let pk = self.bank_pk.to_bytes();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.card_id);
        out.push(self.holder.name().len() as u8);
        out.extend_from_slice(self.holder.name());
        out.extend_from_slice(&(self.sealed_sk.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.sealed_sk);
        out.extend_from_slice(&self.pin_verifier);
        out.extend_from_slice(&self.salt);
        out.push(self.retry_counter);
        out.push(self.locked as u8);
        out.extend_from_slice(&(pk.len() as u16).to_be_bytes());
        out.extend_from_slice(&pk);
        let bank = self.bank_pk.owner().name();
        out.push(bank.len() as u8);
        out.extend_from_slice(bank);
        out.push(kind.id());
        out.extend_from_slice(&self.kdf_iterations.to_be_bytes());
        Ok(out)
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, PersistError> {
        let mut r = Reader(b);
        if r.take(4)? != MAGIC {
            return Err(PersistError::Magic);
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(PersistError::Version(version));
        }
        let card_id = r.arr()?;
        let holder = Identity::user(r.short()?).map_err(|_| PersistError::Malformed)?;
        let sealed_sk = r.long()?.to_vec();
        let pin_verifier = r.arr()?;
        let salt = r.arr()?;
        let retry_counter = r.u8()?;
        let locked = match r.u8()? {
            0 => false,
            1 => true,
            _ => return Err(PersistError::Malformed),
        };
        let pk = r.long()?;
        let bank = Identity::bank(r.short()?).map_err(|_| PersistError::Malformed)?;
        let params = GroupKind::from_id(r.u8()?)
            .and_then(GroupParams::named)
            .ok_or(PersistError::Malformed)?;
        let kdf_iterations = u32::from_be_bytes(r.arr()?);
        if !r.0.is_empty()
            || retry_counter > MAX_PIN_RETRIES
            || locked != (retry_counter == 0)
            || kdf_iterations < MIN_KDF_ITERATIONS
        {
            return Err(PersistError::Malformed);
        }
        let bank_pk = PublicKey::from_bytes(Arc::new(params), pk, bank).map_err(|_| PersistError::Malformed)?;
        Ok(CardState {
            card_id,
            holder,
            sealed_sk,
            pin_verifier,
            salt,
            retry_counter,
            locked,
            bank_pk,
            kdf_iterations,
            session: None,
            pin_successes: 0,
            taps: 0,
        })
    }
}
