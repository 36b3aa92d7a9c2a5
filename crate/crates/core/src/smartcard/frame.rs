//! Command channel framing.
//!
//! Commands: `cmd:u8 len:u16be body`. Replies: `status:u8 len:u16be body`
//! with `0x9X` for the success family and `0x6X` for failures.

use alloc::vec::Vec;

use super::{CardCommand, CardError, CardReply};
use crate::terms::Nonce;

pub mod command {
    pub const VERIFY_PIN: u8 = 0x10;
    pub const TAP: u8 = 0x11;
    pub const STATUS: u8 = 0x12;
}

pub mod status {
    pub const OK: u8 = 0x90;
    pub const PIN_ACCEPTED: u8 = 0x91;
    pub const CHALLENGE: u8 = 0x92;
    pub const STATUS_INFO: u8 = 0x93;
    pub const PIN_REJECTED: u8 = 0x63;
    pub const AUTH_FAIL: u8 = 0x66;
    pub const MALFORMED: u8 = 0x67;
    pub const LOCKED: u8 = 0x69;
    pub const PIN_REQUIRED: u8 = 0x6A;
    pub const PIN_FORMAT: u8 = 0x6B;
    pub const STORAGE: u8 = 0x6F;
}

fn frame(code: u8, body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(3 + body.len());
    out.push(code);
    out.extend_from_slice(&(body.len() as u16).to_be_bytes());
    out.extend_from_slice(body);
    out
}

fn unframe(b: &[u8]) -> Result<(u8, &[u8]), CardError> {
    if b.len() < 3 {
        return Err(CardError::Decode);
    }
    let len = u16::from_be_bytes([b[1], b[2]]) as usize;
    if b.len() != 3 + len {
        return Err(CardError::Decode);
    }
    Ok((b[0], &b[3..]))
}

pub fn encode_command(cmd: &CardCommand) -> Vec<u8> {
    match cmd {
        CardCommand::VerifyPin(pin) => frame(command::VERIFY_PIN, pin),
        CardCommand::TapUnsigncrypt(p) => frame(command::TAP, p),
        CardCommand::Status => frame(command::STATUS, &[]),
    }
}

pub fn decode_command(b: &[u8]) -> Result<CardCommand, CardError> {
    let (code, body) = unframe(b)?;
    match code {
        command::VERIFY_PIN => Ok(CardCommand::VerifyPin(body.to_vec())),
        command::TAP => Ok(CardCommand::TapUnsigncrypt(body.to_vec())),
        command::STATUS if body.is_empty() => Ok(CardCommand::Status),
        _ => Err(CardError::Decode),
    }
}

pub fn encode_reply(reply: &Result<CardReply, CardError>) -> Vec<u8> {
    match reply {
        Ok(CardReply::Ok) => frame(status::OK, &[]),
        Ok(CardReply::PinAccepted(n)) => frame(status::PIN_ACCEPTED, &[*n]),
        Ok(CardReply::PinRejected(n)) => frame(status::PIN_REJECTED, &[*n]),
        Ok(CardReply::Locked) => frame(status::LOCKED, &[]),
        Ok(CardReply::Challenge(rc)) => frame(status::CHALLENGE, rc.as_bytes()),
        Ok(CardReply::AuthFail) => frame(status::AUTH_FAIL, &[]),
        Ok(CardReply::StatusInfo { locked, remaining }) => {
            frame(status::STATUS_INFO, &[*locked as u8, *remaining])
        }
        Err(CardError::PinRequired) => frame(status::PIN_REQUIRED, &[]),
        Err(CardError::PinFormat) => frame(status::PIN_FORMAT, &[]),
        Err(CardError::Storage) | Err(CardError::WeakKdf) | Err(CardError::Entropy(_)) => {
            frame(status::STORAGE, &[])
        }
        Err(CardError::Decode) => frame(status::MALFORMED, &[]),
    }
}

pub fn decode_reply(b: &[u8]) -> Result<Result<CardReply, CardError>, CardError> {
    let (code, body) = unframe(b)?;
    let one = || match body {
        [n] => Ok(*n),
        _ => Err(CardError::Decode),
    };
    let empty = |r| if body.is_empty() { Ok(r) } else { Err(CardError::Decode) };
    Ok(match code {
        status::OK => Ok(empty(CardReply::Ok)?),
        status::PIN_ACCEPTED => Ok(CardReply::PinAccepted(one()?)),
        status::PIN_REJECTED => Ok(CardReply::PinRejected(one()?)),
        status::LOCKED => Ok(empty(CardReply::Locked)?),
        status::CHALLENGE => Ok(CardReply::Challenge(Nonce::from_slice(body).map_err(|_| CardError::Decode)?)),
        status::AUTH_FAIL => Ok(empty(CardReply::AuthFail)?),
        status::STATUS_INFO => match body {
            [l @ (0 | 1), n] => Ok(CardReply::StatusInfo { locked: *l == 1, remaining: *n }),
            _ => return Err(CardError::Decode),
        },
        status::PIN_REQUIRED => Err(CardError::PinRequired),
        status::PIN_FORMAT => Err(CardError::PinFormat),
        status::MALFORMED => Err(CardError::Decode),
        status::STORAGE => Err(CardError::Storage),
        _ => return Err(CardError::Decode),
    })
}

/// A card reached only through its framed byte interface.
pub struct FramedLink<F>(pub F);

impl<F: FnMut(&[u8]) -> Vec<u8>> super::CardLink for FramedLink<F> {
    fn transmit(&mut self, cmd: &CardCommand) -> Result<CardReply, CardError> {
        decode_reply(&(self.0)(&encode_command(cmd)))?
    }
}
