use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A respondent's four-digit identification number (1000..=9999).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct RespondentCode(u16);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("respondent code `{0}` is not a 4-digit number")]
pub struct InvalidRespondentCode(pub String);

impl RespondentCode {
    pub const MIN: u16 = 1000;
    pub const MAX: u16 = 9999;
    /// Number of distinct codes available.
    pub const SPACE: usize = (Self::MAX - Self::MIN + 1) as usize;

    pub fn new(code: u16) -> Result<Self, InvalidRespondentCode> {
        if (Self::MIN..=Self::MAX).contains(&code) {
            Ok(Self(code))
        } else {
            Err(InvalidRespondentCode(code.to_string()))
        }
    }

    pub fn get(self) -> u16 {
        self.0
    }
}

impl TryFrom<u16> for RespondentCode {
    type Error = InvalidRespondentCode;

    fn try_from(value: u16) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<RespondentCode> for u16 {
    fn from(code: RespondentCode) -> u16 {
        code.0
    }
}

impl FromStr for RespondentCode {
    type Err = InvalidRespondentCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if trimmed.len() != 4 {
            return Err(InvalidRespondentCode(s.to_string()));
        }
        trimmed
            .parse::<u16>()
            .map_err(|_| InvalidRespondentCode(s.to_string()))
            .and_then(Self::new)
    }
}

impl fmt::Display for RespondentCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}", self.0)
    }
}
