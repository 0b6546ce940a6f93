//! Frame-stack container.
//!
//! ```text
//! "QISSTK1\n"            8 bytes
//! header length          u32 little-endian
//! header                 UTF-8 JSON object
//! payload                frames in schedule order, row-major
//! ```
//!
//! Codes take one byte each when `L ≤ 255` and two (little-endian) otherwise.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::sim::{Exposure, ExposureSchedule, FrameStack};
use crate::stats::SensorParams;

pub const STACK_MAGIC: &[u8; 8] = b"QISSTK1\n";
pub const STACK_FORMAT_VERSION: u64 = 1;

const KNOWN_KEYS: [&str; 9] = [
    "format_version",
    "width",
    "height",
    "clip_level",
    "read_noise",
    "dark_current",
    "schedule",
    "frame_period",
    "seed",
];

/// Bytes per stored code for clip level `L`.
pub fn code_width(clip_level: u32) -> usize {
    if clip_level <= 255 {
        1
    } else {
        2
    }
}

fn header_json(stack: &FrameStack) -> Value {
    let mut map = stack.extra.clone();
    for k in KNOWN_KEYS {
        map.remove(k);
    }
    let schedule: Vec<Value> = stack
        .schedule
        .groups
        .iter()
        .map(|g| json!([g.duration, g.frames]))
        .collect();
    map.insert("format_version".into(), json!(STACK_FORMAT_VERSION));
    map.insert("width".into(), json!(stack.width));
    map.insert("height".into(), json!(stack.height));
    map.insert("clip_level".into(), json!(stack.params.clip_level));
    map.insert("read_noise".into(), json!(stack.params.read_noise));
    map.insert("dark_current".into(), json!(stack.params.dark_current));
    map.insert("schedule".into(), Value::Array(schedule));
    map.insert("frame_period".into(), json!(stack.schedule.frame_period));
    map.insert("seed".into(), json!(stack.seed));
    Value::Object(map)
}

/// Serialize a stack. Fails if the stack is inconsistent with its metadata.
pub fn encode_stack(stack: &FrameStack) -> Result<Vec<u8>> {
    stack.validate()?;
    let header = serde_json::to_vec(&header_json(stack)).map_err(|e| Error::Numerical(e.to_string()))?;
    let header_len = u32::try_from(header.len()).map_err(|_| Error::domain("header too large"))?;
    let width = code_width(stack.params.clip_level);
    let payload = stack.pixels() * stack.schedule.total_frames() as usize * width;
    let mut out = Vec::with_capacity(12 + header.len() + payload);
    out.extend_from_slice(STACK_MAGIC);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&header);
    for frame in stack.frames.iter().flatten() {
        if width == 1 {
            out.extend(frame.iter().map(|&c| c as u8));
        } else {
            for &c in frame {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn field<'a>(map: &'a Map<String, Value>, key: &str, at: u64) -> Result<&'a Value> {
    map.get(key)
        .ok_or_else(|| Error::format(at, format!("header lacks `{key}`")))
}

fn as_u64(map: &Map<String, Value>, key: &str, at: u64) -> Result<u64> {
    field(map, key, at)?
        .as_u64()
        .ok_or_else(|| Error::format(at, format!("header `{key}` must be a non-negative integer")))
}

fn as_f64(map: &Map<String, Value>, key: &str, at: u64) -> Result<f64> {
    field(map, key, at)?
        .as_f64()
        .ok_or_else(|| Error::format(at, format!("header `{key}` must be a number")))
}

/// Parse a stack container from memory.
pub fn decode_stack(bytes: &[u8]) -> Result<FrameStack> {
    if bytes.len() < 8 || &bytes[..8] != STACK_MAGIC {
        return Err(Error::format(0, "not a frame stack (bad magic)"));
    }
    if bytes.len() < 12 {
        return Err(Error::format(bytes.len() as u64, "truncated header length"));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let payload_start = 12usize
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| {
            Error::format(
                bytes.len() as u64,
                format!("truncated header: declared {header_len} bytes"),
            )
        })?;
    let at = 12u64;
    let header: Value = serde_json::from_slice(&bytes[12..payload_start])
        .map_err(|e| Error::format(at, format!("header is not valid JSON: {e}")))?;
    let Value::Object(mut map) = header else {
        return Err(Error::format(at, "header must be a JSON object"));
    };

    let version = as_u64(&map, "format_version", at)?;
    if version != STACK_FORMAT_VERSION {
        return Err(Error::Unsupported(format!("stack format version {version}")));
    }
    let width = as_u64(&map, "width", at)? as usize;
    let height = as_u64(&map, "height", at)? as usize;
    let clip = as_u64(&map, "clip_level", at)?;
    let clip_level = u32::try_from(clip)
        .ok()
        .filter(|&l| l >= 1 && l <= u16::MAX as u32)
        .ok_or_else(|| Error::format(at, format!("clip level {clip} outside 1..=65535")))?;
    let read_noise = as_f64(&map, "read_noise", at)?;
    let dark_current = as_f64(&map, "dark_current", at)?;
    let frame_period = as_f64(&map, "frame_period", at)?;
    let seed = as_u64(&map, "seed", at)?;
    let groups = field(&map, "schedule", at)?
        .as_array()
        .ok_or_else(|| Error::format(at, "header `schedule` must be an array"))?
        .iter()
        .map(|g| {
            let pair = g.as_array().filter(|a| a.len() == 2);
            let duration = pair.and_then(|a| a[0].as_f64());
            let frames = pair.and_then(|a| a[1].as_u64()).and_then(|k| u32::try_from(k).ok());
            match (duration, frames) {
                (Some(duration), Some(frames)) => Ok(Exposure { duration, frames }),
                _ => Err(Error::format(at, format!("schedule entry {g} is not [seconds, count]"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let params =
        SensorParams::new(clip_level, read_noise, dark_current).map_err(|e| Error::format(at, e.to_string()))?;
    let schedule = ExposureSchedule::new(groups, frame_period).map_err(|e| Error::format(at, e.to_string()))?;
    if width == 0 || height == 0 {
        return Err(Error::format(at, "width and height must be ≥ 1"));
    }
    for k in KNOWN_KEYS {
        map.remove(k);
    }

    let pixels = width
        .checked_mul(height)
        .ok_or_else(|| Error::format(at, "dimensions overflow"))?;
    let cw = code_width(clip_level);
    let frame_bytes = pixels
        .checked_mul(cw)
        .ok_or_else(|| Error::format(at, "dimensions overflow"))?;
    let expected = (schedule.total_frames() as usize)
        .checked_mul(frame_bytes)
        .and_then(|n| n.checked_add(payload_start))
        .ok_or_else(|| Error::format(at, "payload size overflows"))?;
    if bytes.len() < expected {
        return Err(Error::format(
            bytes.len() as u64,
            format!(
                "truncated payload: expected {expected} bytes in total, found {}",
                bytes.len()
            ),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format(expected as u64, "trailing bytes after payload"));
    }

    let mut offset = payload_start;
    let mut frames = Vec::with_capacity(schedule.len());
    for (m, g) in schedule.groups.iter().enumerate() {
        let mut group = Vec::with_capacity(g.frames as usize);
        for n in 0..g.frames {
            let raw = &bytes[offset..offset + frame_bytes];
            let frame: Vec<u16> = if cw == 1 {
                raw.iter().map(|&b| b as u16).collect()
            } else {
                raw.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect()
            };
            if let Some(i) = frame.iter().position(|&c| c as u32 > clip_level) {
                return Err(Error::format(
                    (offset + i * cw) as u64,
                    format!(
                        "group {m} frame {n} pixel {i}: code {} exceeds L = {clip_level}",
                        frame[i]
                    ),
                ));
            }
            group.push(frame);
            offset += frame_bytes;
        }
        frames.push(group);
    }
    Ok(FrameStack {
        width,
        height,
        params,
        schedule,
        seed,
        frames,
        extra: map,
    })
}

pub fn read_stack(path: impl AsRef<Path>) -> Result<FrameStack> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_stack(&bytes)
}

pub fn write_stack(path: impl AsRef<Path>, stack: &FrameStack) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_stack(stack)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_stack, RadianceMap};

    fn stack(l: u32) -> FrameStack {
        let scene = RadianceMap::log_ramp(5, 3, 10.0, 1e4).unwrap();
        let sched = ExposureSchedule::parse("100us:3,1ms:2", None).unwrap();
        let params = SensorParams::new(l, 0.25, 0.5).unwrap();
        simulate_stack(&scene, &sched, &params, 99).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        for l in [1, 7, 1023] {
            let s = stack(l);
            let bytes = encode_stack(&s).unwrap();
            let back = decode_stack(&bytes).unwrap();
            assert_eq!(back, s);
            assert_eq!(encode_stack(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn payload_size() {
        let s = stack(7);
        let bytes = encode_stack(&s).unwrap();
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        assert_eq!(bytes.len() - 12 - hlen, 15 * 5);
    }

    #[test]
    fn unknown_keys_survive() {
        let mut s = stack(1);
        s.extra.insert("camera".into(), json!({"id": 3}));
        let back = decode_stack(&encode_stack(&s).unwrap()).unwrap();
        assert_eq!(back.extra["camera"]["id"], 3);
    }

    #[test]
    fn one_byte_short() {
        let bytes = encode_stack(&stack(7)).unwrap();
        let cut = &bytes[..bytes.len() - 1];
        match decode_stack(cut).unwrap_err() {
            Error::Format { offset, .. } => assert_eq!(offset, cut.len() as u64),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn code_above_clip_level() {
        let mut bytes = encode_stack(&stack(7)).unwrap();
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let at = 12 + hlen + 16;
        bytes[at] = 9;
        match decode_stack(&bytes).unwrap_err() {
            Error::Format { offset, message } => {
                assert_eq!(offset, at as u64);
                assert!(message.contains("frame 1 pixel 1"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(
            decode_stack(b"QISSTK2\n...."),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(decode_stack(b"").is_err());
    }
}
