//! EOSIO account/action name encoding: up to 13 characters from the
//! alphabet `.12345a-z` packed into a u64, five bits per character for the
//! first twelve (from bit 59 downward) and four bits for the thirteenth.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NameError {
    #[error("character {ch:?} at position {pos} is not valid in a name")]
    InvalidNameChar { ch: char, pos: usize },
    #[error("name is {0} characters long; the maximum is 13")]
    NameTooLong(usize),
}

fn symbol(ch: char, pos: usize) -> Result<u64, NameError> {
    match ch {
        '.' => Ok(0),
        '1'..='5' => Ok(ch as u64 - '1' as u64 + 1),
        'a'..='z' => Ok(ch as u64 - 'a' as u64 + 6),
        _ => Err(NameError::InvalidNameChar { ch, pos }),
    }
}

/// Encodes a name string; the empty string is 0.
pub fn encode_name(name: &str) -> Result<u64, NameError> {
    let chars: Vec<char> = name.chars().collect();
    if chars.len() > 13 {
        return Err(NameError::NameTooLong(chars.len()));
    }
    let mut value: u64 = 0;
    for (i, ch) in chars.iter().enumerate() {
        let sym = symbol(*ch, i)?;
        if i < 12 {
            value |= (sym & 0x1F) << (64 - 5 * (i as u64 + 1));
        } else {
            // The 13th character has only four bits available.
            if sym > 0x0F {
                return Err(NameError::InvalidNameChar { ch: *ch, pos: i });
            }
            value |= sym & 0x0F;
        }
    }
    Ok(value)
}

const CHARMAP: &[u8; 32] = b".12345abcdefghijklmnopqrstuvwxyz";

/// Decodes a packed name back to its string, trailing dots trimmed.
pub fn decode_name(value: u64) -> String {
    let mut out = ['.'; 13];
    let mut tmp = value;
    for i in 0..13 {
        let ch = if i == 0 {
            let c = CHARMAP[(tmp & 0x0F) as usize];
            tmp >>= 4;
            c
        } else {
            let c = CHARMAP[(tmp & 0x1F) as usize];
            tmp >>= 5;
            c
        };
        out[12 - i] = ch as char;
    }
    let s: String = out.iter().collect();
    s.trim_end_matches('.').to_string()
}
