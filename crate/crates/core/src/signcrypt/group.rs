//! Prime-order subgroups of Z_p^* and instrumented exponentiation.

use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand_core::RngCore;

use crate::entropy::{self, EntropyError};

/// Which built-in parameter set a group is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKind {
    /// p = 23, q = 11, g = 2. For oracle tests only.
    Toy,
    /// 2048-bit p with a 256-bit q subgroup.
    Default,
    Custom,
}

impl GroupKind {
    pub fn id(self) -> u8 {
        match self {
            GroupKind::Toy => 0,
            GroupKind::Default => 1,
            GroupKind::Custom => 0xFF,
        }
    }

    /// Built-in parameter sets by persisted id.
    pub fn from_id(id: u8) -> Option<GroupKind> {
        match id {
            0 => Some(GroupKind::Toy),
            1 => Some(GroupKind::Default),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupKind::Toy => "toy",
            GroupKind::Default => "default",
            GroupKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum GroupError {
    #[error("modulus or order is not prime")]
    NotPrime,
    #[error("q does not divide p - 1")]
    OrderMismatch,
    #[error("g does not generate the order-q subgroup")]
    BadGenerator,
    #[error("q must exceed 2")]
    OrderTooSmall,
}

// 2048-bit p = k*q + 1 with a 256-bit prime q; g = 2^((p-1)/q) mod p.
const DEFAULT_P: [&str; 8] = [
    "af0be867c26945018c5b8c3e3ab8751def021719067ba4cf0fc8f0e6d6c8fea3",
    "0a3f738c8daa207d8911c918d2d57c1a65c5679b89f76e7440e7940076b405c1",
    "cd2d0b978c2de3e683fae7d086cff18f066c75eb05c723490af0a8da70c171ef",
    "209addb06ac17e92d2a59f51e10a8937d3436a7c7497f6ef8f51fd9745822007",
    "8081098f91578318957945fd0e71f936e6c85933abbb3ec0c69c83aaf6bc0ab1",
    "ab6b0a457632e910781b152337241e49a9740d7352d9ce095bef225ade6749bc",
    "2a22d33db99791024e6559222cc8a72617c4aa15afc6d60659498ff4f172f807",
    "82aaed986fd2583939e0bcedc45811e23d7c4be6c022d4f130bc712b25532b69",
];
const DEFAULT_Q: &str = "fb8283b55ee4fad6007cf6c79d00b324f119f55d681415de8c9fe0ba451e36fb";
const DEFAULT_G: [&str; 8] = [
    "204e3fd5084677717be3e0bd290c397a5d0a455bab832b15fd0de03698d10a88",
    "f4966617f515d00562557afdd065d8641e760cd59c8ab983db4e9c8fbe99e13f",
    "1f7d7679318d4366daed6485ea20d7a05ae3e6915f2570c78883e0a80db5bbf6",
    "3a96cbeb0fc812a52d9474cba871a93ffcf9b03b1d4cedf9fa1f6d5be2ae8bf3",
    "4cc02f9b31a357b5c0f333686a86d9a694767286031fd3a1744ede2ef1da3828",
    "2ec25098127b455240a0e1b47acf1f6ece25f6e9c499a8783da2f973f0a1a6df",
    "dfc48154866f6a2491095350a1cad056f5686ac0645118e0cb8cdbc7f8fde966",
    "230c5f259055150d96341aceaabcea51aa817d11bf715fef94481002c5306976",
];

fn from_hex_chunks(chunks: &[&str]) -> BigUint {
    let joined: Vec<u8> = chunks.iter().flat_map(|c| c.bytes()).collect();
    BigUint::parse_bytes(&joined, 16).expect("constant is valid hex")
}

/// Counts group exponentiations performed on behalf of one party.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ExpCounter(pub u32);

/// `(p, q, g)` with `g` of prime order `q` modulo prime `p`.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupParams {
    kind: GroupKind,
    p: BigUint,
    q: BigUint,
    g: BigUint,
    p_bytes: usize,
    q_bytes: usize,
}

impl fmt::Debug for GroupParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupParams({}, {} bits)", self.kind.name(), self.p.bits())
    }
}

impl GroupParams {
    /// Validates and builds a custom group.
    pub fn new(p: BigUint, q: BigUint, g: BigUint) -> Result<Self, GroupError> {
        Self::build(GroupKind::Custom, p, q, g)
    }

    fn build(kind: GroupKind, p: BigUint, q: BigUint, g: BigUint) -> Result<Self, GroupError> {
        Self::validate(&p, &q, &g)?;
        Ok(Self::unchecked(kind, p, q, g))
    }

    fn validate(p: &BigUint, q: &BigUint, g: &BigUint) -> Result<(), GroupError> {
        if *q <= BigUint::from(2u8) {
            return Err(GroupError::OrderTooSmall);
        }
        if !is_probable_prime(p) || !is_probable_prime(q) {
            return Err(GroupError::NotPrime);
        }
        if !(p - 1u8).is_multiple_of(q) {
            return Err(GroupError::OrderMismatch);
        }
        if g.is_one() || g >= p || g.is_zero() || !g.modpow(q, p).is_one() {
            return Err(GroupError::BadGenerator);
        }
        Ok(())
    }

    fn unchecked(kind: GroupKind, p: BigUint, q: BigUint, g: BigUint) -> Self {
        let p_bytes = (p.bits() as usize).div_ceil(8);
        let q_bytes = (q.bits() as usize).div_ceil(8);
        Self { kind, p, q, g, p_bytes, q_bytes }
    }

    // The named groups are fixed constants, checked once by the unit tests
    // rather than on every card or key load.
    pub fn toy() -> Self {
        Self::unchecked(GroupKind::Toy, 23u8.into(), 11u8.into(), 2u8.into())
    }

    pub fn default_group() -> Self {
        let p = from_hex_chunks(&DEFAULT_P);
        let q = from_hex_chunks(&[DEFAULT_Q]);
        let g = from_hex_chunks(&DEFAULT_G);
        Self::unchecked(GroupKind::Default, p, q, g)
    }

    pub fn named(kind: GroupKind) -> Option<Self> {
        match kind {
            GroupKind::Toy => Some(Self::toy()),
            GroupKind::Default => Some(Self::default_group()),
            GroupKind::Custom => None,
        }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }
    pub fn p(&self) -> &BigUint {
        &self.p
    }
    pub fn q(&self) -> &BigUint {
        &self.q
    }
    pub fn g(&self) -> &BigUint {
        &self.g
    }
    /// Bytes in an encoded group element.
    pub fn element_len(&self) -> usize {
        self.p_bytes
    }
    /// Bytes in an encoded scalar.
    pub fn scalar_len(&self) -> usize {
        self.q_bytes
    }

    pub fn pow(&self, base: &BigUint, exp: &BigUint, ctr: &mut ExpCounter) -> BigUint {
        ctr.0 += 1;
        base.modpow(exp, &self.p)
    }

    pub fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.p
    }

    /// Whether `y` is a non-identity element of the order-q subgroup.
    pub fn is_subgroup_element(&self, y: &BigUint) -> bool {
        !y.is_zero() && !y.is_one() && y < &self.p && y.modpow(&self.q, &self.p).is_one()
    }

    pub fn encode_element(&self, y: &BigUint) -> Vec<u8> {
        left_pad(y, self.p_bytes)
    }

    pub fn encode_scalar(&self, x: &BigUint) -> Vec<u8> {
        left_pad(x, self.q_bytes)
    }

    /// Uniform scalar in `[1, q-1]` by masked rejection sampling.
    pub fn random_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<BigUint, EntropyError> {
        let bits = self.q.bits() as usize;
        let mut buf = alloc::vec![0u8; self.q_bytes];
        let excess = self.q_bytes * 8 - bits;
        loop {
            entropy::fill(rng, &mut buf)?;
            buf[0] &= 0xFF >> excess;
            let x = BigUint::from_bytes_be(&buf);
            if !x.is_zero() && x < self.q {
                return Ok(x);
            }
        }
    }

    /// Modular inverse mod q (q prime), or `None` for zero.
    pub fn inv_mod_q(&self, a: &BigUint) -> Option<BigUint> {
        let a = a % &self.q;
        if a.is_zero() {
            return None;
        }
        Some(a.modpow(&(&self.q - 2u8), &self.q))
    }
}

pub(crate) fn left_pad(v: &BigUint, width: usize) -> Vec<u8> {
    let raw = v.to_bytes_be();
    let raw: &[u8] = if v.is_zero() { &[] } else { &raw };
    assert!(raw.len() <= width, "value wider than its encoding");
    let mut out = alloc::vec![0u8; width - raw.len()];
    out.extend_from_slice(raw);
    out
}

/// Miller-Rabin with the first twelve prime bases; deterministic below
/// 3.3e24 and a strong probable-prime test beyond.
pub fn is_probable_prime(n: &BigUint) -> bool {
    const BASES: [u8; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let two = BigUint::from(2u8);
    if n < &two {
        return false;
    }
    for b in BASES {
        let b = BigUint::from(b);
        if n == &b {
            return true;
        }
        if (n % &b).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u8;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'witness: for b in BASES {
        let mut x = BigUint::from(b).modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
