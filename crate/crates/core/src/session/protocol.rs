//! Length-delimited socket messages.
//!
//! Every message is `len: u32 LE`, then `len` bytes: one type byte and a
//! payload. Type `0x01` carries a UTF-8 JSON object; type `0x02` carries a
//! frame as `index: u64 LE` followed by PNG bytes.

use std::io::{self, Cursor, Read, Write};

use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use super::{Command, Event, Mode, SourceMode};
use crate::model::FrameSize;

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_MESSAGE_BYTES: u32 = 64 << 20;

const TYPE_JSON: u8 = 0x01;
const TYPE_FRAME: u8 = 0x02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello {
        protocol: u32,
    },
    Command {
        command: Command,
    },
    /// Advance one frame, for clients that drive playback themselves.
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        protocol: u32,
        frame_size: FrameSize,
        mode: Mode,
        source: SourceMode,
    },
    Event {
        event: Event,
    },
    Overlay {
        frame: u64,
        svg: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message<T> {
    Json(T),
    Frame { index: u64, image: RgbImage },
}

pub fn write_json<W: Write, T: Serialize>(w: &mut W, msg: &T) -> io::Result<()> {
    let body = serde_json::to_vec(msg).map_err(io::Error::other)?;
    write_raw(w, TYPE_JSON, &body)
}

pub fn write_frame<W: Write>(w: &mut W, index: u64, image: &RgbImage) -> io::Result<()> {
    let mut cursor = Cursor::new(index.to_le_bytes().to_vec());
    cursor.set_position(8);
    image
        .write_to(&mut cursor, ImageFormat::Png)
        .map_err(io::Error::other)?;
    write_raw(w, TYPE_FRAME, &cursor.into_inner())
}

fn write_raw<W: Write>(w: &mut W, kind: u8, body: &[u8]) -> io::Result<()> {
    let len = u32::try_from(body.len() + 1)
        .ok()
        .filter(|&l| l <= MAX_MESSAGE_BYTES);
    let len =
        len.ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "message too large"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&[kind])?;
    w.write_all(body)?;
    w.flush()
}

/// Errors that leave the stream usable: the bad message was fully consumed.
#[derive(Debug)]
pub enum ReadError {
    Io(io::Error),
    Malformed(String),
}

impl From<io::Error> for ReadError {
    fn from(e: io::Error) -> Self {
        ReadError::Io(e)
    }
}

impl std::fmt::Display for ReadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReadError::Io(e) => write!(f, "{e}"),
            ReadError::Malformed(m) => write!(f, "malformed message: {m}"),
        }
    }
}

/// Reads one message. `Ok(None)` means the peer closed the stream cleanly.
pub fn read_message<R: Read, T: for<'de> Deserialize<'de>>(
    r: &mut R,
) -> Result<Option<Message<T>>, ReadError> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_le_bytes(len);
    if len == 0 || len > MAX_MESSAGE_BYTES {
        return Err(ReadError::Io(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("bad message length {len}"),
        )));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    let (kind, payload) = body.split_first().expect("length is at least 1");
    match *kind {
        TYPE_JSON => serde_json::from_slice(payload)
            .map(|m| Some(Message::Json(m)))
            .map_err(|e| ReadError::Malformed(e.to_string())),
        TYPE_FRAME => {
            if payload.len() < 8 {
                return Err(ReadError::Malformed(
                    "frame message shorter than its index".into(),
                ));
            }
            let index = u64::from_le_bytes(payload[..8].try_into().expect("8 bytes"));
            let image = image::load_from_memory_with_format(&payload[8..], ImageFormat::Png)
                .map_err(|e| ReadError::Malformed(e.to_string()))?
                .to_rgb8();
            Ok(Some(Message::Frame { index, image }))
        }
        other => Err(ReadError::Malformed(format!(
            "unknown message type {other:#04x}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Point2;
    use image::Rgb;

    #[test]
    fn json_roundtrip_and_layout() {
        let msg = ClientMessage::Command {
            command: Command::AppendPoints {
                points: vec![Point2::new(1.0, 2.0)],
            },
        };
        let mut buf = Vec::new();
        write_json(&mut buf, &msg).unwrap();
        let len = u32::from_le_bytes(buf[..4].try_into().unwrap()) as usize;
        assert_eq!(len, buf.len() - 4);
        assert_eq!(buf[4], 0x01);
        let text = std::str::from_utf8(&buf[5..]).unwrap();
        assert_eq!(
            text,
            r#"{"type":"command","command":{"type":"append_points","points":[{"x":1.0,"y":2.0}]}}"#
        );
        let back: Option<Message<ClientMessage>> = read_message(&mut Cursor::new(buf)).unwrap();
        assert_eq!(back, Some(Message::Json(msg)));
    }

    #[test]
    fn frame_roundtrip() {
        let img = RgbImage::from_fn(7, 5, |x, y| Rgb([x as u8 * 30, y as u8 * 40, 9]));
        let mut buf = Vec::new();
        write_frame(&mut buf, 42, &img).unwrap();
        assert_eq!(buf[4], 0x02);
        assert_eq!(u64::from_le_bytes(buf[5..13].try_into().unwrap()), 42);
        let back: Option<Message<ServerMessage>> = read_message(&mut Cursor::new(buf)).unwrap();
        assert_eq!(
            back,
            Some(Message::Frame {
                index: 42,
                image: img
            })
        );
    }

    #[test]
    fn malformed_json_consumes_the_message() {
        let mut buf = Vec::new();
        write_raw(&mut buf, TYPE_JSON, b"{nope").unwrap();
        write_json(&mut buf, &ClientMessage::Step).unwrap();
        let mut r = Cursor::new(buf);
        assert!(matches!(
            read_message::<_, ClientMessage>(&mut r),
            Err(ReadError::Malformed(_))
        ));
        assert!(matches!(
            read_message::<_, ClientMessage>(&mut r),
            Ok(Some(Message::Json(ClientMessage::Step)))
        ));
        assert!(matches!(read_message::<_, ClientMessage>(&mut r), Ok(None)));
    }
}
