//! Time-tag files.
//!
//! CSV: header `detector_id,time_seconds`, one click per row, detector as
//! `signal`/`idler` (or `0`/`1`), time with 12 decimals (exact picoseconds).
//!
//! Binary (`.ptag`): a 16-byte header (magic `PTAG`, format version u32 LE,
//! detector id u32 LE with 0 = signal and 1 = idler, reserved u32), then
//! little-endian i64 picosecond timestamps.

use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

use crate::sim::{Channel, Picos, TimeTagStream};

pub const BINARY_MAGIC: &[u8; 4] = b"PTAG";
pub const BINARY_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "detector_id,time_seconds";

#[derive(Debug, Error)]
pub enum TagError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("binary tag file: {0}")]
    Binary(String),
    #[error("tags for {0} are not sorted")]
    Unsorted(&'static str),
}

fn format_ps(t: Picos) -> String {
    let sign = if t < 0 { "-" } else { "" };
    let a = t.unsigned_abs();
    format!("{sign}{}.{:012}", a / 1_000_000_000_000, a % 1_000_000_000_000)
}

/// Parses a decimal seconds string to integer picoseconds without going
/// through binary floating point when it has at most 12 decimals.
fn parse_seconds_ps(s: &str) -> Option<Picos> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let plain = !int.is_empty()
        && int.bytes().all(|b| b.is_ascii_digit())
        && frac.bytes().all(|b| b.is_ascii_digit())
        && frac.len() <= 12;
    let ps = if plain {
        let i: i64 = int.parse().ok()?;
        let mut f = frac.to_string();
        f.extend(std::iter::repeat_n('0', 12 - frac.len()));
        let f: i64 = f.parse().ok()?;
        i.checked_mul(1_000_000_000_000)?.checked_add(f)?
    } else {
        let x: f64 = body.parse().ok()?;
        if !x.is_finite() {
            return None;
        }
        (x * 1e12).round() as i64
    };
    Some(if neg { -ps } else { ps })
}

pub fn write_csv<W: Write>(streams: &[&TimeTagStream], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for s in streams {
        let id = s.channel.as_str();
        for &t in &s.tags {
            writeln!(w, "{id},{}", format_ps(t))?;
        }
    }
    w.flush()
}

/// Reads a CSV tag file; returns `(signal, idler)` streams, each sorted.
/// Rows of both channels may be interleaved but each channel must already
/// be in non-decreasing time order.
pub fn read_csv<R: BufRead>(r: R) -> Result<(TimeTagStream, TimeTagStream), TagError> {
    let mut sig = Vec::new();
    let mut idl = Vec::new();
    let mut lines = r.lines().enumerate();
    match lines.next() {
        Some((_, line)) => {
            let line = line?;
            if line.trim() != CSV_HEADER {
                return Err(TagError::Csv {
                    line: 1,
                    message: format!("expected header {CSV_HEADER:?}, found {line:?}"),
                });
            }
        }
        None => {
            return Ok((
                TimeTagStream::new(Channel::Signal, sig),
                TimeTagStream::new(Channel::Idler, idl),
            ))
        }
    }
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| TagError::Csv { line: lineno, message };
        let (id, time) = line
            .split_once(',')
            .ok_or_else(|| err(format!("expected two fields, found {line:?}")))?;
        let channel = Channel::parse(id).ok_or_else(|| err(format!("unknown detector id {id:?}")))?;
        let t = parse_seconds_ps(time).ok_or_else(|| err(format!("bad time {time:?}")))?;
        let dest = match channel {
            Channel::Signal => &mut sig,
            Channel::Idler => &mut idl,
        };
        if dest.last().is_some_and(|&prev| t < prev) {
            return Err(err(format!("{} tags out of order", channel.as_str())));
        }
        dest.push(t);
    }
    Ok((
        TimeTagStream::new(Channel::Signal, sig),
        TimeTagStream::new(Channel::Idler, idl),
    ))
}

pub fn write_binary<W: Write>(stream: &TimeTagStream, mut w: W) -> io::Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    w.write_all(&stream.channel.code().to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for &t in &stream.tags {
        w.write_all(&t.to_le_bytes())?;
    }
    w.flush()
}

pub fn read_binary<R: Read>(mut r: R) -> Result<TimeTagStream, TagError> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| TagError::Binary("truncated header".into()))?;
    if &header[0..4] != BINARY_MAGIC {
        return Err(TagError::Binary("bad magic, expected PTAG".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != BINARY_VERSION {
        return Err(TagError::Binary(format!("unsupported version {version}")));
    }
    let channel =
        Channel::from_code(word(8)).ok_or_else(|| TagError::Binary(format!("unknown detector id {}", word(8))))?;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() % 8 != 0 {
        return Err(TagError::Binary(format!("payload of {} bytes is not whole 64-bit tags", body.len())));
    }
    let tags: Vec<Picos> = body
        .chunks_exact(8)
        .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let stream = TimeTagStream::new(channel, tags);
    if !stream.tags.windows(2).all(|w| w[0] <= w[1]) {
        return Err(TagError::Unsorted(channel.as_str()));
    }
    Ok(stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_layout() {
        let s = TimeTagStream::new(Channel::Signal, vec![0, 26_000, 200_000_000_000_000]);
        let mut buf = Vec::new();
        write_csv(&[&s], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "detector_id,time_seconds\nsignal,0.000000000000\nsignal,0.000000026000\nsignal,200.000000000000\n"
        );
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let doc = "detector_id,time_seconds\nsignal,1.0\nidler,abc\n";
        match read_csv(doc.as_bytes()) {
            Err(TagError::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let doc = "detector_id,time_seconds\nsignal,2.0\nsignal,1.0\n";
        assert!(matches!(read_csv(doc.as_bytes()), Err(TagError::Csv { line: 3, .. })));
        assert!(matches!(read_csv("time\n".as_bytes()), Err(TagError::Csv { line: 1, .. })));
    }

    #[test]
    fn empty_csv_is_empty_streams() {
        let (s, i) = read_csv("".as_bytes()).unwrap();
        assert!(s.is_empty() && i.is_empty());
        let (s, i) = read_csv(format!("{CSV_HEADER}\n").as_bytes()).unwrap();
        assert!(s.is_empty() && i.is_empty());
    }

    #[test]
    fn seconds_parsing() {
        assert_eq!(parse_seconds_ps("0.000000026"), Some(26_000));
        assert_eq!(parse_seconds_ps("12"), Some(12_000_000_000_000));
        assert_eq!(parse_seconds_ps("2.6e-8"), Some(26_000));
        assert_eq!(parse_seconds_ps("x"), None);
    }

    #[test]
    fn binary_header_checks() {
        let s = TimeTagStream::new(Channel::Idler, vec![1, 2, 3]);
        let mut buf = Vec::new();
        write_binary(&s, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"PTAG");
        assert_eq!(buf.len(), 16 + 24);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_binary(bad.as_slice()).is_err());
        assert!(read_binary(&buf[..20]).is_err());
        assert!(read_binary(&buf[..10]).is_err());
    }

    proptest! {
        #[test]
        fn round_trips(mut tags in prop::collection::vec(0i64..400_000_000_000_000, 0..200)) {
            tags.sort_unstable();
            let s = TimeTagStream::new(Channel::Signal, tags.clone());
            let i = TimeTagStream::new(Channel::Idler, tags.iter().map(|t| t + 7).collect());
            let mut csv = Vec::new();
            write_csv(&[&s, &i], &mut csv).unwrap();
            let (s2, i2) = read_csv(csv.as_slice()).unwrap();
            prop_assert_eq!(&s2, &s);
            prop_assert_eq!(&i2, &i);
            let mut bin = Vec::new();
            write_binary(&i, &mut bin).unwrap();
            prop_assert_eq!(read_binary(bin.as_slice()).unwrap(), i);
        }
    }
}
