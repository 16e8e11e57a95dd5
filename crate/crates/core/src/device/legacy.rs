// SPDX-License-Identifier: Apache-2.0

//! Legacy microwave radio with a flat parameter store and a proprietary
//! ASCII command set:
//!
//! ```text
//! SET <PARAM> <VALUE>   -> OK | ERR <CODE>
//! GET <PARAM>           -> <VALUE> | ERR <CODE>
//! SHOW ALL              -> PARAM=VALUE lines, sorted by parameter
//! ```
//!
//! There is no candidate store: every accepted SET is live immediately.

use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegacyErrorCode {
    UnknownCommand,
    UnknownParam,
    BadValue,
}

impl LegacyErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            LegacyErrorCode::UnknownCommand => "UNKNOWN_COMMAND",
            LegacyErrorCode::UnknownParam => "UNKNOWN_PARAM",
            LegacyErrorCode::BadValue => "BAD_VALUE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "UNKNOWN_COMMAND" => Some(LegacyErrorCode::UnknownCommand),
            "UNKNOWN_PARAM" => Some(LegacyErrorCode::UnknownParam),
            "BAD_VALUE" => Some(LegacyErrorCode::BadValue),
            _ => None,
        }
    }
}

enum ParamDomain {
    Tokens(&'static [&'static str]),
    Range(i64, i64),
}

struct ParamSpec {
    name: &'static str,
    domain: ParamDomain,
    default: &'static str,
}

const MODULATIONS: &[&str] = &["QPSK", "QAM16", "QAM64", "QAM256", "QAM1024"];

const PARAMS: &[ParamSpec] = &[
    ParamSpec {
        name: "ACM",
        domain: ParamDomain::Tokens(&["ON", "OFF"]),
        default: "OFF",
    },
    ParamSpec {
        name: "MOD-MAX",
        domain: ParamDomain::Tokens(MODULATIONS),
        default: "QPSK",
    },
    ParamSpec {
        name: "MOD-MIN",
        domain: ParamDomain::Tokens(MODULATIONS),
        default: "QPSK",
    },
    ParamSpec {
        name: "RF-BW",
        domain: ParamDomain::Tokens(&["7", "14", "28", "56", "112"]),
        default: "28",
    },
    ParamSpec {
        name: "TX-FREQ",
        domain: ParamDomain::Range(1, i64::MAX),
        default: "18000000",
    },
    ParamSpec {
        name: "TX-PWR",
        domain: ParamDomain::Range(-10, 35),
        default: "10",
    },
];

impl ParamSpec {
    fn accepts(&self, value: &str) -> bool {
        match self.domain {
            ParamDomain::Tokens(tokens) => tokens.contains(&value),
            ParamDomain::Range(lo, hi) => {
                // canonical decimal only: no sign on positives, no leading zeros
                value.parse::<i64>().is_ok_and(|v| (lo..=hi).contains(&v) && v.to_string() == value)
            }
        }
    }
}

/// The parameter store of one legacy radio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegacyStore {
    params: BTreeMap<&'static str, String>,
    /// Accept this many more SETs, then reject the next one with BAD_VALUE.
    reject_after: Option<u32>,
}

impl Default for LegacyStore {
    fn default() -> Self {
        Self {
            params: PARAMS.iter().map(|p| (p.name, p.default.to_string())).collect(),
            reject_after: None,
        }
    }
}

impl LegacyStore {
    pub fn arm_rejection(&mut self, after_sets: u32) {
        self.reject_after = Some(after_sets);
    }

    pub fn execute(&mut self, command: &str) -> String {
        match self.dispatch(command) {
            Ok(reply) => reply,
            Err(code) => format!("ERR {}", code.as_str()),
        }
    }

    fn dispatch(&mut self, command: &str) -> Result<String, LegacyErrorCode> {
        let words: Vec<&str> = command.split(' ').collect();
        match words.as_slice() {
            ["SET", param, value] => {
                let spec = spec(param)?;
                if !spec.accepts(value) {
                    return Err(LegacyErrorCode::BadValue);
                }
                if let Some(n) = self.reject_after {
                    if n == 0 {
                        self.reject_after = None;
                        return Err(LegacyErrorCode::BadValue);
                    }
                    self.reject_after = Some(n - 1);
                }
                self.params.insert(spec.name, value.to_string());
                Ok("OK".into())
            }
            ["GET", param] => {
                let spec = spec(param)?;
                Ok(self.params[spec.name].clone())
            }
            ["SHOW", "ALL"] => Ok(self
                .params
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join("\n")),
            _ => Err(LegacyErrorCode::UnknownCommand),
        }
    }
}

fn spec(name: &str) -> Result<&'static ParamSpec, LegacyErrorCode> {
    PARAMS
        .iter()
        .find(|p| p.name == name)
        .ok_or(LegacyErrorCode::UnknownParam)
}

/// Parses a `SHOW ALL` reply back into parameter pairs.
pub fn parse_show_all(reply: &str) -> Vec<(String, String)> {
    reply
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
