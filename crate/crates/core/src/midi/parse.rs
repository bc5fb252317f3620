//! SMF reader: chunk walking, delta-time accumulation, running status.

use super::vlq::decode_vlq;
use super::{parse_err, MidiError, MidiEvent, MidiEventKind, MidiSong};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn u8(&mut self) -> Result<u8, MidiError> {
        let b = *self
            .bytes
            .get(self.pos)
            .ok_or_else(|| parse_err(self.pos, "unexpected end of file"))?;
        self.pos += 1;
        Ok(b)
    }

    fn u16(&mut self) -> Result<u16, MidiError> {
        Ok(((self.u8()? as u16) << 8) | self.u8()? as u16)
    }

    fn u32(&mut self) -> Result<u32, MidiError> {
        Ok(((self.u16()? as u32) << 16) | self.u16()? as u32)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], MidiError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| parse_err(self.pos, format!("truncated: {n} bytes expected")))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn vlq(&mut self) -> Result<u32, MidiError> {
        let (value, used) = decode_vlq(self.bytes, self.pos)?;
        self.pos += used;
        Ok(value)
    }
}

/// Parses Standard MIDI File bytes. Total on arbitrary input: returns a
/// structured error naming the failing byte offset, never panics.
pub fn parse_smf(bytes: &[u8]) -> Result<MidiSong, MidiError> {
    let mut cur = Cursor { bytes, pos: 0 };

    if cur.take(4).map_err(|_| parse_err(0, "missing MThd header"))? != b"MThd" {
        return Err(parse_err(0, "file does not begin with MThd"));
    }
    let header_len = cur.u32()? as usize;
    if header_len < 6 {
        return Err(parse_err(4, format!("header length {header_len} < 6")));
    }
    let header_start = cur.pos;
    let _format = cur.u16()?;
    let declared_tracks = cur.u16()? as usize;
    let division = cur.u16()?;
    if division & 0x8000 != 0 {
        return Err(MidiError::SmpteDivision);
    }
    if division == 0 {
        return Err(parse_err(header_start + 4, "division must be >= 1"));
    }
    // Skip any extra header bytes a future format revision might add.
    cur.take(header_len - 6)?;

    let mut tracks = Vec::with_capacity(declared_tracks.min(64));
    while tracks.len() < declared_tracks {
        let tag_offset = cur.pos;
        let tag = cur.take(4)?;
        let chunk_len = cur.u32()? as usize;
        if tag != b"MTrk" {
            // Alien chunk: skip it, per the SMF spec.
            cur.take(chunk_len)
                .map_err(|_| parse_err(tag_offset, "truncated alien chunk"))?;
            continue;
        }
        let end = cur
            .pos
            .checked_add(chunk_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| parse_err(tag_offset, "truncated track chunk"))?;
        tracks.push(parse_track(&mut cur, end)?);
        cur.pos = end;
    }

    Ok(MidiSong {
        ticks_per_quarter: division,
        tracks,
    })
}

fn parse_track(cur: &mut Cursor<'_>, end: usize) -> Result<Vec<MidiEvent>, MidiError> {
    let mut events = Vec::new();
    let mut tick: u64 = 0;
    let mut running_status: Option<u8> = None;

    while cur.pos < end {
        tick += cur.vlq()? as u64;
        let status_offset = cur.pos;
        let first = cur.u8()?;

        let status = if first & 0x80 != 0 {
            first
        } else {
            // Running status: data byte in status position.
            cur.pos -= 1;
            running_status
                .ok_or_else(|| parse_err(status_offset, "data byte with no running status"))?
        };

        match status {
            0xFF => {
                running_status = None;
                let meta_type = cur.u8()?;
                let len = cur.vlq()? as usize;
                let payload = cur.take(len)?;
                match meta_type {
                    0x2F => return Ok(events), // end of track
                    0x51 => {
                        if payload.len() != 3 {
                            return Err(parse_err(
                                status_offset,
                                format!("tempo meta payload has {} bytes, expected 3", len),
                            ));
                        }
                        let micros = ((payload[0] as u32) << 16)
                            | ((payload[1] as u32) << 8)
                            | payload[2] as u32;
                        events.push(MidiEvent {
                            tick,
                            kind: MidiEventKind::Tempo {
                                micros_per_quarter: micros,
                            },
                        });
                    }
                    _ => {
                        let mut data = Vec::with_capacity(1 + payload.len());
                        data.push(meta_type);
                        data.extend_from_slice(payload);
                        events.push(MidiEvent {
                            tick,
                            kind: MidiEventKind::Other { status, data },
                        });
                    }
                }
            }
            0xF0 | 0xF7 => {
                running_status = None;
                let len = cur.vlq()? as usize;
                let data = cur.take(len)?.to_vec();
                events.push(MidiEvent {
                    tick,
                    kind: MidiEventKind::Other { status, data },
                });
            }
            0x80..=0xEF => {
                running_status = Some(status);
                let channel = status & 0x0F;
                let kind = match status & 0xF0 {
                    0x80 => {
                        let (pitch, velocity) = (data7(cur)?, data7(cur)?);
                        MidiEventKind::NoteOff {
                            channel,
                            pitch,
                            velocity,
                        }
                    }
                    0x90 => {
                        let (pitch, velocity) = (data7(cur)?, data7(cur)?);
                        MidiEventKind::NoteOn {
                            channel,
                            pitch,
                            velocity,
                        }
                    }
                    0xC0 | 0xD0 => MidiEventKind::Other {
                        status,
                        data: vec![data7(cur)?],
                    },
                    _ => MidiEventKind::Other {
                        status,
                        data: vec![data7(cur)?, data7(cur)?],
                    },
                };
                events.push(MidiEvent { tick, kind });
            }
            _ => {
                return Err(parse_err(
                    status_offset,
                    format!("unexpected status byte 0x{status:02X}"),
                ));
            }
        }
    }
    // Track chunk ended without an end-of-track meta; accept what we have.
    Ok(events)
}

fn data7(cur: &mut Cursor<'_>) -> Result<u8, MidiError> {
    let offset = cur.pos;
    let b = cur.u8()?;
    if b & 0x80 != 0 {
        return Err(parse_err(
            offset,
            format!("expected data byte, got 0x{b:02X}"),
        ));
    }
    Ok(b)
}
