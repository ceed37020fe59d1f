//! Datagram codec.
//!
//! Every datagram is a packed array of 64-bit IEEE-754 little-endian doubles
//! with no header. The element count selects the meaning:
//!
//! | count              | meaning                          |
//! |--------------------|----------------------------------|
//! | 1                  | command (model reset)            |
//! | d_in + d_out + 1   | sample `[x (d_in), y (d_out), t]` |
//! | anything else      | malformed                        |
//!
//! Replies are `[mu (d_out), t]` in the same number format. The timestamp is
//! opaque: it is copied bit for bit and never interpreted.

use std::fmt;

use crate::error::{Error, Result};

pub const ELEMENT_SIZE: usize = 8;
/// Largest UDP payload over IPv4.
pub const MAX_DATAGRAM: usize = 65_507;
/// Documented command value.
pub const RESET_COMMAND: f64 = -1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Command { value: f64 },
    Sample { x: Vec<f64>, y: Vec<f64>, t: f64 },
    Malformed { reason: MalformedReason, byte_len: usize },
}

impl Message {
    pub fn class(&self) -> &'static str {
        match self {
            Message::Command { .. } => "command",
            Message::Sample { .. } => "sample",
            Message::Malformed { .. } => "malformed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MalformedReason {
    Empty,
    Unaligned,
    TwoElements,
    CountMismatch { expected: usize, got: usize },
    NonFinite { index: usize },
}

impl fmt::Display for MalformedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MalformedReason::Empty => write!(f, "empty datagram"),
            MalformedReason::Unaligned => write!(f, "length is not a multiple of 8 bytes"),
            MalformedReason::TwoElements => write!(f, "2-element datagrams carry no meaning"),
            MalformedReason::CountMismatch { expected, got } => {
                write!(f, "count mismatch: expected {expected} elements, got {got}")
            }
            MalformedReason::NonFinite { index } => write!(f, "non-finite input/output at element {index}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub mu: Vec<f64>,
    pub t: f64,
}

fn read_f64s(bytes: &[u8]) -> impl Iterator<Item = f64> + '_ {
    bytes
        .chunks_exact(ELEMENT_SIZE)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
}

fn write_f64s<'a>(out: &mut Vec<u8>, values: impl IntoIterator<Item = &'a f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Classifies and parses a datagram. Never fails: malformation is a value.
pub fn decode_datagram(bytes: &[u8], d_in: usize, d_out: usize) -> Message {
    let byte_len = bytes.len();
    let malformed = |reason| Message::Malformed { reason, byte_len };
    if byte_len == 0 {
        return malformed(MalformedReason::Empty);
    }
    if !byte_len.is_multiple_of(ELEMENT_SIZE) {
        return malformed(MalformedReason::Unaligned);
    }
    let count = byte_len / ELEMENT_SIZE;
    if count == 1 {
        return Message::Command {
            value: f64::from_le_bytes(bytes.try_into().expect("8 bytes")),
        };
    }
    if count == 2 {
        return malformed(MalformedReason::TwoElements);
    }
    let expected = d_in + d_out + 1;
    if count != expected || expected < 3 {
        return malformed(MalformedReason::CountMismatch { expected, got: count });
    }
    let values: Vec<f64> = read_f64s(bytes).collect();
    if let Some(index) = values[..d_in + d_out].iter().position(|v| !v.is_finite()) {
        return malformed(MalformedReason::NonFinite { index });
    }
    Message::Sample {
        x: values[..d_in].to_vec(),
        y: values[d_in..d_in + d_out].to_vec(),
        t: values[d_in + d_out],
    }
}

/// Client-side encoding of `[x, y, t]`. `t` may be any bit pattern.
pub fn encode_sample(x: &[f64], y: &[f64], t: f64) -> Result<Vec<u8>> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument(
            "sample needs at least one input and one output".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "sample inputs and outputs must be finite".into(),
        ));
    }
    let mut out = Vec::with_capacity((x.len() + y.len() + 1) * ELEMENT_SIZE);
    write_f64s(&mut out, x.iter().chain(y).chain(std::iter::once(&t)));
    Ok(out)
}

pub fn encode_command(value: f64) -> Vec<u8> {
    value.to_le_bytes().to_vec()
}

pub fn encode_reply(mu: &[f64], t: f64) -> Result<Vec<u8>> {
    if mu.is_empty() {
        return Err(Error::InvalidArgument("reply needs at least one output".into()));
    }
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("reply mean must be finite".into()));
    }
    let mut out = Vec::with_capacity((mu.len() + 1) * ELEMENT_SIZE);
    write_f64s(&mut out, mu.iter().chain(std::iter::once(&t)));
    Ok(out)
}

pub fn decode_reply(bytes: &[u8], d_out: usize) -> Result<Reply> {
    let expected = ELEMENT_SIZE * (d_out + 1);
    if d_out == 0 || bytes.len() != expected {
        return Err(Error::MalformedReply(format!(
            "expected {expected} bytes for d_out = {d_out}, got {}",
            bytes.len()
        )));
    }
    let mut values: Vec<f64> = read_f64s(bytes).collect();
    let t = values.pop().expect("d_out + 1 elements");
    Ok(Reply { mu: values, t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pack(values: &[f64]) -> Vec<u8> {
        values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    #[test]
    fn scalar_is_command() {
        assert_eq!(decode_datagram(&pack(&[-1.0]), 2, 1), Message::Command { value: -1.0 });
        assert_eq!(decode_datagram(&pack(&[3.5]), 7, 7), Message::Command { value: 3.5 });
    }

    #[test]
    fn sample_layout() {
        let bytes = pack(&[0.5, 1.5, 2.0, 7.0]);
        assert_eq!(bytes.len(), 32);
        assert_eq!(
            decode_datagram(&bytes, 2, 1),
            Message::Sample {
                x: vec![0.5, 1.5],
                y: vec![2.0],
                t: 7.0
            }
        );
    }

    #[test]
    fn malformed_cases() {
        let m = decode_datagram(&pack(&[1.0, 2.0, 3.0]), 3, 1);
        assert_eq!(
            m,
            Message::Malformed {
                reason: MalformedReason::CountMismatch { expected: 5, got: 3 },
                byte_len: 24
            }
        );
        assert!(matches!(
            decode_datagram(&[], 1, 1),
            Message::Malformed {
                reason: MalformedReason::Empty,
                ..
            }
        ));
        assert!(matches!(
            decode_datagram(&[0; 9], 1, 1),
            Message::Malformed {
                reason: MalformedReason::Unaligned,
                ..
            }
        ));
        assert!(matches!(
            decode_datagram(&pack(&[1.0, 2.0]), 1, 0),
            Message::Malformed {
                reason: MalformedReason::TwoElements,
                ..
            }
        ));
        assert!(matches!(
            decode_datagram(&pack(&[f64::NAN, 2.0, 3.0]), 1, 1),
            Message::Malformed {
                reason: MalformedReason::NonFinite { index: 0 },
                ..
            }
        ));
        assert!(matches!(
            decode_datagram(&pack(&[1.0, f64::INFINITY, 3.0]), 1, 1),
            Message::Malformed {
                reason: MalformedReason::NonFinite { index: 1 },
                ..
            }
        ));
    }

    #[test]
    fn non_finite_timestamp_is_accepted() {
        let t = f64::from_bits(0x7ff8_dead_beef_0001);
        let Message::Sample { t: got, .. } = decode_datagram(&pack(&[1.0, 2.0, t]), 1, 1) else {
            panic!()
        };
        assert_eq!(got.to_bits(), t.to_bits());
    }

    #[test]
    fn encoding_sizes() {
        assert_eq!(encode_sample(&[0.0], &[0.0], 0.0).unwrap(), vec![0u8; 24]);
        assert_eq!(encode_sample(&[1.0, 2.0], &[3.0], 4.0).unwrap().len(), 32);
        assert_eq!(encode_reply(&[1.0, 2.0, 3.0], 0.0).unwrap().len(), 32);
        assert!(encode_sample(&[f64::NAN], &[0.0], 0.0).is_err());
        assert!(encode_reply(&[f64::INFINITY], 0.0).is_err());
    }

    #[test]
    fn reply_round_trip_and_length_rule() {
        let bytes = encode_reply(&[1.5], 7.0).unwrap();
        assert_eq!(bytes.len(), 16);
        assert_eq!(decode_reply(&bytes, 1).unwrap(), Reply { mu: vec![1.5], t: 7.0 });
        assert_eq!(decode_reply(&[0; 8], 1).unwrap_err().code(), "malformed-reply");
    }

    #[test]
    fn worked_hex_example() {
        // documented in PROTOCOL.md
        let bytes = encode_sample(&[0.5, 1.5], &[2.0], 7.0).unwrap();
        let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(hex, "000000000000e03f000000000000f83f00000000000000400000000000001c40");
        assert_eq!(encode_command(RESET_COMMAND), [0, 0, 0, 0, 0, 0, 0xf0, 0xbf]);
        let reply: String = encode_reply(&[1.25], 7.0)
            .unwrap()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(reply, "000000000000f43f0000000000001c40");
        let nan_t = f64::from_bits(0x7ff8_0000_0000_0001);
        let echoed = encode_reply(&[1.25], nan_t).unwrap();
        assert_eq!(echoed[8..], [0x01, 0, 0, 0, 0, 0, 0xf8, 0x7f]);
    }

    proptest! {
        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..512), d_in in 0usize..6, d_out in 0usize..4) {
            let _ = decode_datagram(&bytes, d_in, d_out);
        }

        #[test]
        fn reply_encoding_is_bijective(mu in proptest::collection::vec(-1e300f64..1e300, 1..6), t_bits in any::<u64>()) {
            let t = f64::from_bits(t_bits);
            let bytes = encode_reply(&mu, t).unwrap();
            let r = decode_reply(&bytes, mu.len()).unwrap();
            prop_assert_eq!(r.t.to_bits(), t_bits);
            prop_assert_eq!(&r.mu, &mu);
            prop_assert_eq!(encode_reply(&r.mu, r.t).unwrap(), bytes);
        }
    }
}
