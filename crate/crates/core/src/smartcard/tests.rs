use super::*;
use crate::signcrypt::{keygen, signcrypt, GroupParams};
use crate::terms::generate_nonce;
use alloc::vec;
use rand::{rngs::StdRng, Rng, SeedableRng};

struct Fixture {
    card: CardState,
    bank_sk: PrivateKey,
    user_sk: PrivateKey,
    user_pk: PublicKey,
    rng: StdRng,
}

fn fixture(params: GroupParams, seed: u64) -> Fixture {
    let params = Arc::new(params);
    let mut rng = StdRng::seed_from_u64(seed);
    let (bank_sk, bank_pk) = keygen(&params, Identity::bank("bank").unwrap(), &mut rng).unwrap();
    let (user_sk, user_pk) = keygen(&params, Identity::user("alice").unwrap(), &mut rng).unwrap();
    let card = personalize(&user_sk, &bank_pk, b"2468", &mut rng).unwrap();
    Fixture { card, bank_sk, user_sk, user_pk, rng }
}

#[test]
fn fresh_card_status() {
    let mut f = fixture(GroupParams::toy(), 1);
    assert_eq!(
        f.card.execute(&CardCommand::Status).unwrap(),
        CardReply::StatusInfo { locked: false, remaining: 3 }
    );
}

#[test]
fn sealing_hides_key_and_is_salted() {
    let params = Arc::new(GroupParams::default_group());
    let mut rng = StdRng::seed_from_u64(2);
    let (_, bank_pk) = keygen(&params, Identity::bank("bank").unwrap(), &mut rng).unwrap();
    let (user_sk, _) = keygen(&params, Identity::user("alice").unwrap(), &mut rng).unwrap();
    let a = personalize(&user_sk, &bank_pk, b"1357", &mut rng).unwrap();
    let b = personalize(&user_sk, &bank_pk, b"1357", &mut rng).unwrap();
    let raw = user_sk.to_bytes();
    assert!(!a.sealed_key_blob().windows(raw.len()).any(|w| w == raw.as_slice()));
    assert_ne!(a.sealed_key_blob(), b.sealed_key_blob());
    assert_ne!(a.salt, b.salt);
    let file = a.to_bytes().unwrap();
    assert!(!file.windows(raw.len()).any(|w| w == raw.as_slice()));
}

#[test]
fn pin_format_and_kdf_floor() {
    let params = Arc::new(GroupParams::toy());
    let mut rng = StdRng::seed_from_u64(3);
    let (_, bank_pk) = keygen(&params, Identity::bank("bank").unwrap(), &mut rng).unwrap();
    let (user_sk, _) = keygen(&params, Identity::user("alice").unwrap(), &mut rng).unwrap();
    for bad in [&b"123"[..], b"123456789", b"12a4", b""] {
        assert_eq!(personalize(&user_sk, &bank_pk, bad, &mut rng).unwrap_err(), CardError::PinFormat);
    }
    assert_eq!(
        personalize_with_iterations(&user_sk, &bank_pk, b"1234", 9_999, &mut rng).unwrap_err(),
        CardError::WeakKdf
    );
}

#[test]
fn correct_pin_accepted() {
    let mut f = fixture(GroupParams::toy(), 4);
    assert_eq!(f.card.verify_pin(b"2468"), CardReply::PinAccepted(3));
    assert!(f.card.has_pin_session());
}

#[test]
fn three_wrong_pins_lock_permanently() {
    let mut f = fixture(GroupParams::toy(), 5);
    assert_eq!(f.card.verify_pin(b"0000"), CardReply::PinRejected(2));
    assert_eq!(f.card.verify_pin(b"1111"), CardReply::PinRejected(1));
    assert_eq!(f.card.verify_pin(b"2222"), CardReply::Locked);
    assert!(f.card.is_locked());
    assert_eq!(f.card.verify_pin(b"2468"), CardReply::Locked);
    assert_eq!(f.card.execute(&CardCommand::Status).unwrap(), CardReply::Locked);
    assert_eq!(f.card.execute(&CardCommand::TapUnsigncrypt(vec![1, 2])).unwrap(), CardReply::Locked);
    // Lock survives a save/load cycle.
    let mut reloaded = CardState::from_bytes(&f.card.to_bytes().unwrap()).unwrap();
    assert_eq!(reloaded.verify_pin(b"2468"), CardReply::Locked);
}

#[test]
fn correct_pin_resets_counter() {
    let mut f = fixture(GroupParams::toy(), 6);
    assert_eq!(f.card.verify_pin(b"9999"), CardReply::PinRejected(2));
    assert_eq!(f.card.verify_pin(b"2468"), CardReply::PinAccepted(3));
    assert_eq!(f.card.verify_pin(b"9999"), CardReply::PinRejected(2));
    assert_eq!(f.card.verify_pin(b"9999"), CardReply::PinRejected(1));
    assert_eq!(f.card.verify_pin(b"2468"), CardReply::PinAccepted(3));
}

#[test]
fn wrong_pin_ends_session() {
    let mut f = fixture(GroupParams::toy(), 7);
    f.card.verify_pin(b"2468");
    f.card.verify_pin(b"0000");
    assert!(!f.card.has_pin_session());
}

#[test]
fn tap_recovers_bank_nonce_once_per_pin() {
    let mut f = fixture(GroupParams::default_group(), 8);
    let rc = generate_nonce(&mut f.rng).unwrap();
    let payload = signcrypt(&f.bank_sk, &f.user_pk, rc.as_bytes(), &mut f.rng).unwrap().to_bytes();
    assert_eq!(f.card.tap_unsigncrypt(&payload), Err(CardError::PinRequired));
    f.card.verify_pin(b"2468");
    assert_eq!(f.card.tap_unsigncrypt(&payload).unwrap(), CardReply::Challenge(rc));
    assert_eq!(f.card.tap_unsigncrypt(&payload), Err(CardError::PinRequired));
    assert_eq!(f.card.taps(), 1);
    assert_eq!(f.card.pin_successes(), 1);
}

#[test]
fn rogue_bank_payloads_fail() {
    let mut f = fixture(GroupParams::default_group(), 9);
    let params = f.bank_sk.params().clone();
    for _ in 0..20 {
        let (rogue, _) = keygen(&params, Identity::bank("bank").unwrap(), &mut f.rng).unwrap();
        let rc = generate_nonce(&mut f.rng).unwrap();
        let payload = signcrypt(&rogue, &f.user_pk, rc.as_bytes(), &mut f.rng).unwrap().to_bytes();
        f.card.verify_pin(b"2468");
        assert_eq!(f.card.tap_unsigncrypt(&payload).unwrap(), CardReply::AuthFail);
    }
}

#[test]
fn malformed_payload_is_decode_error() {
    let mut f = fixture(GroupParams::toy(), 10);
    f.card.verify_pin(b"2468");
    assert_eq!(f.card.tap_unsigncrypt(&[0, 9, 1]), Err(CardError::Decode));
    assert!(!f.card.has_pin_session());
}

#[test]
fn persistence_roundtrip_and_corruption() {
    let mut f = fixture(GroupParams::default_group(), 11);
    f.card.verify_pin(b"0000");
    let bytes = f.card.to_bytes().unwrap();
    assert_eq!(&bytes[..5], b"SMBC\x01");
    let mut back = CardState::from_bytes(&bytes).unwrap();
    assert_eq!(back.card_id(), f.card.card_id());
    assert_eq!(back.remaining_tries(), 2);
    assert_eq!(back.to_bytes().unwrap(), bytes);
    assert_eq!(back.verify_pin(b"2468"), CardReply::PinAccepted(3));

    assert_eq!(CardState::from_bytes(b"XXXX\x01").unwrap_err(), PersistError::Magic);
    let mut v = bytes.clone();
    v[4] = 9;
    assert_eq!(CardState::from_bytes(&v).unwrap_err(), PersistError::Version(9));
    assert_eq!(CardState::from_bytes(&bytes[..bytes.len() - 1]).unwrap_err(), PersistError::Malformed);
}

#[test]
fn framed_commands() {
    let mut f = fixture(GroupParams::toy(), 12);
    assert_eq!(encode_command(&CardCommand::Status), vec![0x12, 0, 0]);
    assert_eq!(f.card.handle_frame(&[0x12, 0, 0]), vec![0x93, 0, 2, 0, 3]);
    assert_eq!(f.card.handle_frame(&[0x10, 0, 4, b'1', b'1', b'1', b'1']), vec![0x63, 0, 1, 2]);
    assert_eq!(f.card.handle_frame(&[0x11, 0, 0]), vec![0x6A, 0, 0]);
    assert_eq!(f.card.handle_frame(&[0x55, 0, 0]), vec![0x67, 0, 0]);
    assert_eq!(f.card.handle_frame(&[0x10, 0, 9]), vec![0x67, 0, 0]);

    let mut link = FramedLink(|b: &[u8]| f.card.handle_frame(b));
    assert_eq!(link.transmit(&CardCommand::VerifyPin(b"2468".to_vec())).unwrap(), CardReply::PinAccepted(3));
    assert_eq!(link.transmit(&CardCommand::TapUnsigncrypt(vec![])), Err(CardError::Decode));
}

#[test]
fn reply_codec_roundtrip() {
    let replies = [
        Ok(CardReply::Ok),
        Ok(CardReply::PinAccepted(3)),
        Ok(CardReply::PinRejected(1)),
        Ok(CardReply::Locked),
        Ok(CardReply::Challenge(Nonce::new([7; 16]).unwrap())),
        Ok(CardReply::AuthFail),
        Ok(CardReply::StatusInfo { locked: true, remaining: 0 }),
        Err(CardError::PinRequired),
        Err(CardError::Decode),
        Err(CardError::PinFormat),
    ];
    for r in replies {
        assert_eq!(decode_reply(&encode_reply(&r)).unwrap(), r);
    }
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

/// Random command sequences: no reply ever carries key bytes, lockout is
/// absorbing, and taps never outnumber successful PIN entries.
#[test]
fn fuzzed_command_sequences() {
    let mut f = fixture(GroupParams::default_group(), 13);
    let sk = f.user_sk.to_bytes();
    let sealed = f.card.sealed_key_blob().to_vec();
    let rc = generate_nonce(&mut f.rng).unwrap();
    let good = signcrypt(&f.bank_sk, &f.user_pk, rc.as_bytes(), &mut f.rng).unwrap().to_bytes();
    let pristine = f.card.to_bytes().unwrap();
    let mut rng = StdRng::seed_from_u64(1313);
    let sequences = 10_000;
    for seq in 0..sequences {
        let mut card = CardState::from_bytes(&pristine).unwrap();
        let mut seen_locked = false;
        for _ in 0..rng.gen_range(1..6) {
            // PIN checks cost a full key derivation; keep them to roughly one per sequence.
            let cmd = match rng.gen_range(0..10) {
                0 => CardCommand::VerifyPin(b"2468".to_vec()),
                1 => CardCommand::VerifyPin(b"1111".to_vec()),
                2..=4 => CardCommand::TapUnsigncrypt(good.clone()),
                5 | 6 => {
                    let mut p = good.clone();
                    let i = rng.gen_range(0..p.len());
                    p[i] ^= 1 << rng.gen_range(0..8);
                    CardCommand::TapUnsigncrypt(p)
                }
                7 => CardCommand::TapUnsigncrypt((0..rng.gen_range(0..40)).map(|_| rng.gen()).collect()),
                _ => CardCommand::Status,
            };
            let reply = encode_reply(&card.execute(&cmd));
            assert!(!contains(&reply, &sk), "sequence {seq} leaked the key");
            assert!(!contains(&reply, &sealed[..24]), "sequence {seq} leaked the sealed key");
            if seen_locked {
                assert_eq!(reply, encode_reply(&Ok(CardReply::Locked)));
            }
            seen_locked |= card.is_locked();
            assert!(card.taps() <= card.pin_successes());
        }
    }
}
