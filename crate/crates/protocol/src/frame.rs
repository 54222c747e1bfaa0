//! `[len: u32 BE][payload: len bytes UTF-8]` framing.

use std::io::{Read, Write};

use thiserror::Error;
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

pub const MIN_PAYLOAD: usize = 2;
pub const MAX_PAYLOAD: usize = 16 * 1024 * 1024;
const HEADER: usize = 4;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame payload of {0} bytes exceeds the {MAX_PAYLOAD}-byte cap")]
    TooLarge(u64),
    #[error("frame payload of {0} bytes is below the {MIN_PAYLOAD}-byte minimum")]
    TooSmall(u64),
    #[error("stream ended mid-frame ({buffered} of {expected} bytes)")]
    Truncated { expected: usize, buffered: usize },
    #[error("frame payload is not valid UTF-8")]
    InvalidUtf8,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn check_len(len: u64) -> Result<usize, FrameError> {
    if len > MAX_PAYLOAD as u64 {
        Err(FrameError::TooLarge(len))
    } else if len < MIN_PAYLOAD as u64 {
        Err(FrameError::TooSmall(len))
    } else {
        Ok(len as usize)
    }
}

pub fn encode_frame(payload: &str) -> Result<Vec<u8>, FrameError> {
    let len = check_len(payload.len() as u64)?;
    let mut out = Vec::with_capacity(HEADER + len);
    out.extend_from_slice(&(len as u32).to_be_bytes());
    out.extend_from_slice(payload.as_bytes());
    Ok(out)
}

fn utf8(bytes: Vec<u8>) -> Result<String, FrameError> {
    String::from_utf8(bytes).map_err(|_| FrameError::InvalidUtf8)
}

/// Incremental decoder for one connection. Feed arbitrary chunks with
/// [`push`](Self::push), drain payloads with [`next_frame`](Self::next_frame).
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    pos: usize,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if self.pos > 0 && self.pos >= self.buf.len() / 2 {
            self.buf.drain(..self.pos);
            self.pos = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len() - self.pos
    }

    /// Next complete payload, `Ok(None)` if more bytes are needed.
    ///
    /// An oversized length is reported as soon as the header is complete;
    /// the connection should be dropped after that.
    pub fn next_frame(&mut self) -> Result<Option<String>, FrameError> {
        let avail = &self.buf[self.pos..];
        if avail.len() < HEADER {
            return Ok(None);
        }
        let len = check_len(u32::from_be_bytes(avail[..HEADER].try_into().unwrap()) as u64)?;
        if avail.len() < HEADER + len {
            return Ok(None);
        }
        let payload = avail[HEADER..HEADER + len].to_vec();
        self.pos += HEADER + len;
        utf8(payload).map(Some)
    }

    /// Call at end of stream: errors if a partial frame is left over.
    pub fn finish(&self) -> Result<(), FrameError> {
        let avail = &self.buf[self.pos..];
        if avail.is_empty() {
            return Ok(());
        }
        let expected = if avail.len() >= HEADER {
            HEADER + u32::from_be_bytes(avail[..HEADER].try_into().unwrap()) as usize
        } else {
            HEADER
        };
        Err(FrameError::Truncated {
            expected,
            buffered: avail.len(),
        })
    }
}

/// Reads exactly `buf.len()` bytes; `Ok(false)` on EOF before the first byte.
fn fill<R: Read>(r: &mut R, buf: &mut [u8], expected: usize) -> Result<bool, FrameError> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) if got == 0 => return Ok(false),
            Ok(0) => return Err(FrameError::Truncated { expected, buffered: got }),
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(true)
}

/// Blocking read of one frame. `Ok(None)` on a clean end of stream.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<String>, FrameError> {
    let mut header = [0u8; HEADER];
    if !fill(r, &mut header, HEADER)? {
        return Ok(None);
    }
    let len = check_len(u32::from_be_bytes(header) as u64)?;
    let mut payload = vec![0u8; len];
    if !fill(r, &mut payload, HEADER + len)? {
        return Err(FrameError::Truncated {
            expected: HEADER + len,
            buffered: HEADER,
        });
    }
    utf8(payload).map(Some)
}

pub fn write_frame<W: Write>(w: &mut W, payload: &str) -> Result<(), FrameError> {
    w.write_all(&encode_frame(payload)?)?;
    w.flush()?;
    Ok(())
}

pub async fn read_frame_async<R: AsyncRead + Unpin>(r: &mut R) -> Result<Option<String>, FrameError> {
    let mut header = [0u8; HEADER];
    let mut got = 0;
    while got < HEADER {
        let n = r.read(&mut header[got..]).await?;
        if n == 0 {
            return if got == 0 {
                Ok(None)
            } else {
                Err(FrameError::Truncated {
                    expected: HEADER,
                    buffered: got,
                })
            };
        }
        got += n;
    }
    let len = check_len(u32::from_be_bytes(header) as u64)?;
    let mut payload = vec![0u8; len];
    if let Err(e) = r.read_exact(&mut payload).await {
        return Err(if e.kind() == std::io::ErrorKind::UnexpectedEof {
            FrameError::Truncated {
                expected: HEADER + len,
                buffered: HEADER,
            }
        } else {
            e.into()
        });
    }
    utf8(payload).map(Some)
}

pub async fn write_frame_async<W: AsyncWrite + Unpin>(w: &mut W, payload: &str) -> Result<(), FrameError> {
    w.write_all(&encode_frame(payload)?).await?;
    w.flush().await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_examples() {
        assert_eq!(encode_frame("hello").unwrap(), [0, 0, 0, 5, 0x68, 0x65, 0x6C, 0x6C, 0x6F]);
        assert_eq!(encode_frame("{}").unwrap(), [0, 0, 0, 2, 0x7B, 0x7D]);
        assert!(matches!(encode_frame("x"), Err(FrameError::TooSmall(1))));
        let big = "a".repeat(MAX_PAYLOAD + 1);
        assert!(matches!(encode_frame(&big), Err(FrameError::TooLarge(_))));
        assert_eq!(encode_frame(&big[1..]).unwrap().len(), MAX_PAYLOAD + 4);
    }

    #[test]
    fn huge_declared_length_fails_before_payload() {
        let mut d = FrameDecoder::new();
        d.push(&[0xFF, 0xFF, 0xFF, 0xFF]);
        assert!(matches!(d.next_frame(), Err(FrameError::TooLarge(0xFFFF_FFFF))));
        let mut r: &[u8] = &[0xFF, 0xFF, 0xFF, 0xFF];
        assert!(matches!(read_frame(&mut r), Err(FrameError::TooLarge(_))));
    }

    #[test]
    fn two_frames_in_order() {
        let mut bytes = encode_frame("first").unwrap();
        bytes.extend(encode_frame("second").unwrap());
        let mut d = FrameDecoder::new();
        d.push(&bytes);
        assert_eq!(d.next_frame().unwrap().as_deref(), Some("first"));
        assert_eq!(d.next_frame().unwrap().as_deref(), Some("second"));
        assert_eq!(d.next_frame().unwrap(), None);
        d.finish().unwrap();

        let mut r = bytes.as_slice();
        assert_eq!(read_frame(&mut r).unwrap().as_deref(), Some("first"));
        assert_eq!(read_frame(&mut r).unwrap().as_deref(), Some("second"));
        assert_eq!(read_frame(&mut r).unwrap(), None);
    }

    #[test]
    fn truncation_and_bad_utf8() {
        let bytes = encode_frame("hello").unwrap();
        let mut d = FrameDecoder::new();
        d.push(&bytes[..6]);
        assert_eq!(d.next_frame().unwrap(), None);
        assert!(matches!(d.finish(), Err(FrameError::Truncated { expected: 9, buffered: 6 })));
        let mut r = &bytes[..6];
        assert!(matches!(read_frame(&mut r), Err(FrameError::Truncated { .. })));
        let mut r = &bytes[..2];
        assert!(matches!(read_frame(&mut r), Err(FrameError::Truncated { .. })));

        let mut d = FrameDecoder::new();
        d.push(&[0, 0, 0, 2, 0xC3, 0x28]);
        assert!(matches!(d.next_frame(), Err(FrameError::InvalidUtf8)));
    }

    #[test]
    fn zero_length_is_too_small() {
        let mut d = FrameDecoder::new();
        d.push(&[0, 0, 0, 0]);
        assert!(matches!(d.next_frame(), Err(FrameError::TooSmall(0))));
    }
}
