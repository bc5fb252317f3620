//! SMF writer: emits format 0 for zero or one track, format 1 otherwise.

use super::vlq::encode_vlq;
use super::{MidiError, MidiEvent, MidiEventKind, MidiSong};

pub fn write_smf(song: &MidiSong) -> Result<Vec<u8>, MidiError> {
    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    let format: u16 = if song.tracks.len() > 1 { 1 } else { 0 };
    out.extend_from_slice(&format.to_be_bytes());
    out.extend_from_slice(&(song.tracks.len() as u16).to_be_bytes());
    out.extend_from_slice(&song.ticks_per_quarter.to_be_bytes());

    for track in &song.tracks {
        let body = write_track(track)?;
        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
    }
    Ok(out)
}

fn write_track(events: &[MidiEvent]) -> Result<Vec<u8>, MidiError> {
    let mut body = Vec::new();
    let mut prev_tick: u64 = 0;
    for event in events {
        let delta = event
            .tick
            .checked_sub(prev_tick)
            .ok_or(MidiError::UnsortedEvents)?;
        encode_vlq(delta, &mut body)?;
        prev_tick = event.tick;
        match &event.kind {
            MidiEventKind::NoteOn {
                channel,
                pitch,
                velocity,
            } => {
                body.push(0x90 | (channel & 0x0F));
                body.push(pitch & 0x7F);
                body.push(velocity & 0x7F);
            }
            MidiEventKind::NoteOff {
                channel,
                pitch,
                velocity,
            } => {
                body.push(0x80 | (channel & 0x0F));
                body.push(pitch & 0x7F);
                body.push(velocity & 0x7F);
            }
            MidiEventKind::Tempo { micros_per_quarter } => {
                body.extend_from_slice(&[0xFF, 0x51, 0x03]);
                body.push((micros_per_quarter >> 16) as u8);
                body.push((micros_per_quarter >> 8) as u8);
                body.push(*micros_per_quarter as u8);
            }
            MidiEventKind::Other { status, data } => match status {
                0xFF => {
                    // data[0] is the meta type.
                    let (meta_type, payload) = data.split_first().map_or((0x01, &[][..]), |(t, p)| (*t, p));
                    body.push(0xFF);
                    body.push(meta_type);
                    encode_vlq(payload.len() as u64, &mut body)?;
                    body.extend_from_slice(payload);
                }
                0xF0 | 0xF7 => {
                    body.push(*status);
                    encode_vlq(data.len() as u64, &mut body)?;
                    body.extend_from_slice(data);
                }
                _ => {
                    body.push(*status);
                    body.extend_from_slice(data);
                }
            },
        }
    }
    // End-of-track meta.
    body.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
    Ok(body)
}
