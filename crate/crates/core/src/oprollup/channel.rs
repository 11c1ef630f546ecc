use std::collections::BTreeMap;
use std::io::{Read, Write};

use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::rlp::Rlp;
use super::OpError;
use crate::primitives::B256;

/// Inflated channels larger than this are treated as corrupt.
pub const MAX_CHANNEL_BYTES: u64 = 16 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Batch {
    pub epoch_number: u64,
    pub epoch_hash: B256,
    pub parent_hash: B256,
    pub timestamp: u64,
    /// Encoded L2 transactions.
    pub tx_list: Vec<Vec<u8>>,
}

impl Batch {
    fn to_rlp(&self) -> Rlp {
        Rlp::List(vec![
            Rlp::uint(self.epoch_number as u128),
            Rlp::bytes(self.epoch_hash.0.to_vec()),
            Rlp::bytes(self.parent_hash.0.to_vec()),
            Rlp::uint(self.timestamp as u128),
            Rlp::List(self.tx_list.iter().map(|t| Rlp::bytes(t.clone())).collect()),
        ])
    }

    fn from_rlp(r: &Rlp) -> Result<Self, OpError> {
        let f = r.as_fields(5)?;
        Ok(Self {
            epoch_number: f[0].as_u64()?,
            epoch_hash: f[1].as_b256()?,
            parent_hash: f[2].as_b256()?,
            timestamp: f[3].as_u64()?,
            tx_list: f[4].as_list()?.iter().map(|t| t.as_bytes().map(<[u8]>::to_vec)).collect::<Result<_, _>>()?,
        })
    }
}

/// Published as `random ‖ timestamp` so frames can arrive out of order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelId {
    pub random: [u8; 8],
    pub timestamp: u64,
}

impl ChannelId {
    pub fn to_bytes(&self) -> [u8; 16] {
        let mut out = [0u8; 16];
        out[..8].copy_from_slice(&self.random);
        out[8..].copy_from_slice(&self.timestamp.to_be_bytes());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Channel {
    pub id: ChannelId,
    /// ZLIB over the concatenated RLP batches.
    pub compressed: Vec<u8>,
}

pub fn build_channel(batches: &[Batch], id: ChannelId) -> Channel {
    let raw: Vec<u8> = batches.iter().flat_map(|b| b.to_rlp().encode()).collect();
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::best());
    enc.write_all(&raw).expect("writing to a Vec cannot fail");
    Channel { id, compressed: enc.finish().expect("writing to a Vec cannot fail") }
}

/// Inflates and decodes a channel payload. Anything malformed yields no
/// batches at all.
fn decode_payload(compressed: &[u8]) -> Vec<Batch> {
    let mut raw = Vec::new();
    let mut dec = ZlibDecoder::new(compressed).take(MAX_CHANNEL_BYTES + 1);
    if dec.read_to_end(&mut raw).is_err() || raw.len() as u64 > MAX_CHANNEL_BYTES {
        return Vec::new();
    }
    Rlp::decode_stream(&raw)
        .ok()
        .and_then(|items| items.iter().map(Batch::from_rlp).collect::<Result<Vec<_>, _>>().ok())
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub channel_id: [u8; 16],
    pub random: [u8; 8],
    pub timestamp: u64,
    pub frame_number: u16,
    pub frame_data: Vec<u8>,
    pub is_last: bool,
}

impl Frame {
    const HEADER: usize = 16 + 8 + 8 + 2 + 4;

    pub fn frame_data_length(&self) -> u32 {
        self.frame_data.len() as u32
    }

    pub fn id(&self) -> ChannelId {
        ChannelId { random: self.random, timestamp: self.timestamp }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::HEADER + self.frame_data.len() + 1);
        out.extend_from_slice(&self.channel_id);
        out.extend_from_slice(&self.random);
        out.extend_from_slice(&self.timestamp.to_be_bytes());
        out.extend_from_slice(&self.frame_number.to_be_bytes());
        out.extend_from_slice(&self.frame_data_length().to_be_bytes());
        out.extend_from_slice(&self.frame_data);
        out.push(self.is_last as u8);
        out
    }

    /// Decodes one frame at `pos`, returning it and the next position.
    pub fn decode_at(data: &[u8], pos: usize) -> Result<(Frame, usize), OpError> {
        let bad = |m: &str| OpError::MalformedFrame(format!("{m} at byte {pos}"));
        let header = data.get(pos..pos + Self::HEADER).ok_or_else(|| bad("truncated header"))?;
        let channel_id: [u8; 16] = header[..16].try_into().unwrap();
        let random: [u8; 8] = header[16..24].try_into().unwrap();
        let timestamp = u64::from_be_bytes(header[24..32].try_into().unwrap());
        let frame_number = u16::from_be_bytes(header[32..34].try_into().unwrap());
        let len = u32::from_be_bytes(header[34..38].try_into().unwrap()) as usize;
        let start = pos + Self::HEADER;
        let frame_data = data.get(start..start + len).ok_or_else(|| bad("truncated frame data"))?.to_vec();
        let is_last = match data.get(start + len) {
            Some(0) => false,
            Some(1) => true,
            Some(_) => return Err(bad("invalid is_last byte")),
            None => return Err(bad("missing is_last byte")),
        };
        let frame = Frame { channel_id, random, timestamp, frame_number, frame_data, is_last };
        if frame.id().to_bytes() != channel_id {
            return Err(bad("channel id does not match random and timestamp"));
        }
        Ok((frame, start + len + 1))
    }

    /// Decodes back-to-back frames until the input ends or one is malformed;
    /// the frames before the malformed one are kept.
    pub fn decode_all(data: &[u8]) -> (Vec<Frame>, Option<OpError>) {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < data.len() {
            match Frame::decode_at(data, pos) {
                Ok((f, next)) => {
                    out.push(f);
                    pos = next;
                }
                Err(e) => return (out, Some(e)),
            }
        }
        (out, None)
    }
}

pub fn split_frames(channel: &Channel, max_frame_bytes: usize) -> Result<Vec<Frame>, OpError> {
    if max_frame_bytes == 0 {
        return Err(OpError::MalformedFrame("max_frame_bytes must be at least 1".into()));
    }
    let chunks: Vec<&[u8]> = if channel.compressed.is_empty() {
        vec![&[]]
    } else {
        channel.compressed.chunks(max_frame_bytes).collect()
    };
    if chunks.len() > u16::MAX as usize + 1 {
        return Err(OpError::MalformedFrame("channel needs more than 65536 frames".into()));
    }
    let last = chunks.len() - 1;
    Ok(chunks
        .into_iter()
        .enumerate()
        .map(|(i, c)| Frame {
            channel_id: channel.id.to_bytes(),
            random: channel.id.random,
            timestamp: channel.id.timestamp,
            frame_number: i as u16,
            frame_data: c.to_vec(),
            is_last: i == last,
        })
        .collect())
}

#[derive(Debug, Clone, Default)]
struct PendingChannel {
    frames: BTreeMap<u16, Frame>,
    last: Option<u16>,
}

impl PendingChannel {
    fn insert(&mut self, f: Frame) {
        if f.is_last {
            if self.last.is_some() {
                return;
            }
            self.last = Some(f.frame_number);
        }
        self.frames.entry(f.frame_number).or_insert(f);
    }

    fn complete(&self) -> bool {
        self.last.is_some_and(|last| (0..=last).all(|n| self.frames.contains_key(&n)))
    }

    fn payload(&self) -> Vec<u8> {
        let last = self.last.unwrap();
        self.frames.range(..=last).flat_map(|(_, f)| f.frame_data.iter().copied()).collect()
    }
}

/// Collects frames across L1 blocks and releases each channel once every one
/// of its frames has arrived.
#[derive(Debug, Clone, Default)]
pub struct ChannelBank {
    pending: BTreeMap<ChannelId, PendingChannel>,
}

impl ChannelBank {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the channel's batches when `frame` completes it.
    pub fn add(&mut self, frame: Frame) -> Option<(ChannelId, Vec<Batch>)> {
        let id = frame.id();
        let ch = self.pending.entry(id).or_default();
        ch.insert(frame);
        if !ch.complete() {
            return None;
        }
        let ch = self.pending.remove(&id).unwrap();
        Some((id, decode_payload(&ch.payload())))
    }

    pub fn pending_channels(&self) -> usize {
        self.pending.len()
    }
}

/// Reassembles one channel from frames in any order.
pub fn reassemble(frames: &[Frame]) -> Result<Vec<Batch>, OpError> {
    let mut bank = ChannelBank::new();
    for f in frames {
        if let Some((_, batches)) = bank.add(f.clone()) {
            return Ok(batches);
        }
    }
    Err(OpError::ChannelIncomplete)
}
