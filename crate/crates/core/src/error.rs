// SPDX-License-Identifier: Apache-2.0

//! One machine-readable code per failure, across every module.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::DeviceError;
use crate::ip::IpError;
use crate::mediation::MediationError;
use crate::model::ModelError;
use crate::mw::MwError;
use crate::optical::OpticalError;
use crate::path::PathError;
use crate::sbi::SbiError;
use crate::scenario::ScenarioError;
use crate::sdtn::SdtnError;
use crate::system::FaultError;
use crate::topofile::LoadError;

macro_rules! codes {
    ($($variant:ident => $s:literal,)+) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum ErrorCode {
            $(#[serde(rename = $s)] $variant,)+
        }

        impl ErrorCode {
            pub const ALL: &'static [ErrorCode] = &[$(ErrorCode::$variant,)+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(ErrorCode::$variant => $s,)+
                }
            }
        }
    };
}

codes! {
    InvalidIdentifier => "INVALID_IDENTIFIER",
    InvalidIntent => "INVALID_INTENT",
    IllegalTransition => "ILLEGAL_TRANSITION",
    InvalidGraph => "INVALID_GRAPH",
    DecodeError => "DECODE_ERROR",
    UnknownDevice => "UNKNOWN_DEVICE",
    Unreachable => "UNREACHABLE",
    LockedByOther => "LOCKED_BY_OTHER",
    SchemaViolation => "SCHEMA_VIOLATION",
    ValidationFailed => "VALIDATION_FAILED",
    SeqOutOfRange => "SEQ_OUT_OF_RANGE",
    NotLegacy => "NOT_LEGACY",
    NotNative => "NOT_NATIVE",
    InjectedFault => "INJECTED_FAULT",
    UnknownInterface => "UNKNOWN_INTERFACE",
    BadDescriptor => "BAD_DESCRIPTOR",
    UnmappedPath => "UNMAPPED_PATH",
    UnmappedParam => "UNMAPPED_PARAM",
    LegacyRejected => "LEGACY_REJECTED",
    CompensationFailed => "COMPENSATION_FAILED",
    InvalidRules => "INVALID_RULES",
    NoPath => "NO_PATH",
    UnknownNode => "UNKNOWN_NODE",
    UnknownLsp => "UNKNOWN_LSP",
    UnknownVpn => "UNKNOWN_VPN",
    BadState => "BAD_STATE",
    CommitFailed => "COMMIT_FAILED",
    TagExhausted => "TAG_EXHAUSTED",
    InvalidRequest => "INVALID_REQUEST",
    Blocked => "BLOCKED",
    UnknownPort => "UNKNOWN_PORT",
    UnknownOch => "UNKNOWN_OCH",
    UnknownOdu => "UNKNOWN_ODU",
    OchInUse => "OCH_IN_USE",
    InvalidConfig => "INVALID_CONFIG",
    UnknownLink => "UNKNOWN_LINK",
    LinkDown => "LINK_DOWN",
    OutOfRangeModulation => "OUT_OF_RANGE_MODULATION",
    UnknownAllocation => "UNKNOWN_ALLOCATION",
    NoDomainPath => "NO_DOMAIN_PATH",
    DomainInfeasible => "DOMAIN_INFEASIBLE",
    ReserveFailed => "RESERVE_FAILED",
    RollbackIncomplete => "ROLLBACK_INCOMPLETE",
    TeardownIncomplete => "TEARDOWN_INCOMPLETE",
    OpticalBlocked => "OPTICAL_BLOCKED",
    StillNoPath => "STILL_NO_PATH",
    NoAttachment => "NO_ATTACHMENT",
    UnknownService => "UNKNOWN_SERVICE",
    ParseError => "PARSE_ERROR",
    StepFailed => "STEP_FAILED",
    UnknownTarget => "UNKNOWN_TARGET",
    BadRequest => "BAD_REQUEST",
    NotFound => "NOT_FOUND",
}

impl std::fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Mediation(#[from] MediationError),
    #[error(transparent)]
    Sbi(#[from] SbiError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Ip(#[from] IpError),
    #[error(transparent)]
    Optical(#[from] OpticalError),
    #[error(transparent)]
    Mw(#[from] MwError),
    #[error(transparent)]
    Sdtn(#[from] SdtnError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("not found: {0}")]
    NotFound(String),
}

fn model_code(e: &ModelError) -> ErrorCode {
    match e {
        ModelError::InvalidIdentifier(_) => ErrorCode::InvalidIdentifier,
        ModelError::IllegalTransition { .. } => ErrorCode::IllegalTransition,
        ModelError::InvalidIntent(_) => ErrorCode::InvalidIntent,
        ModelError::InvalidGraph(_) => ErrorCode::InvalidGraph,
        ModelError::Decode(_) => ErrorCode::DecodeError,
    }
}

fn device_code(e: &DeviceError) -> ErrorCode {
    match e {
        DeviceError::UnknownDevice(_) => ErrorCode::UnknownDevice,
        DeviceError::Unreachable(_) => ErrorCode::Unreachable,
        DeviceError::LockedByOther(_) => ErrorCode::LockedByOther,
        DeviceError::SchemaViolation { .. } => ErrorCode::SchemaViolation,
        DeviceError::ValidationFailed(_) => ErrorCode::ValidationFailed,
        DeviceError::SeqOutOfRange { .. } => ErrorCode::SeqOutOfRange,
        DeviceError::NotLegacy(_) => ErrorCode::NotLegacy,
        DeviceError::NotNative(_) => ErrorCode::NotNative,
        DeviceError::InjectedFault(_) => ErrorCode::InjectedFault,
        DeviceError::UnknownInterface(_) => ErrorCode::UnknownInterface,
        DeviceError::BadDescriptor(_) => ErrorCode::BadDescriptor,
    }
}

fn mediation_code(e: &MediationError) -> ErrorCode {
    match e {
        MediationError::UnmappedPath(_) => ErrorCode::UnmappedPath,
        MediationError::UnmappedParam(_) => ErrorCode::UnmappedParam,
        MediationError::SchemaViolation { .. } => ErrorCode::SchemaViolation,
        MediationError::ValidationFailed(_) => ErrorCode::ValidationFailed,
        MediationError::LegacyRejected { .. } => ErrorCode::LegacyRejected,
        MediationError::CompensationFailed { .. } => ErrorCode::CompensationFailed,
        MediationError::LockedByOther(_) => ErrorCode::LockedByOther,
        MediationError::InvalidRules(_) => ErrorCode::InvalidRules,
        MediationError::Device(d) => device_code(d),
    }
}

fn path_code(e: &PathError) -> ErrorCode {
    match e {
        PathError::NoPath(_) => ErrorCode::NoPath,
        PathError::UnknownNode(_) => ErrorCode::UnknownNode,
    }
}

impl Error {
    pub fn code(&self) -> ErrorCode {
        match self {
            Error::Model(e) => model_code(e),
            Error::Device(e) => device_code(e),
            Error::Mediation(e) => mediation_code(e),
            Error::Sbi(SbiError::Device(e)) => device_code(e),
            Error::Sbi(SbiError::Mediation(e)) => mediation_code(e),
            Error::Path(e) => path_code(e),
            Error::Ip(e) => match e {
                IpError::NoPath(_) => ErrorCode::NoPath,
                IpError::UnknownNode(_) => ErrorCode::UnknownNode,
                IpError::UnknownLsp(_) => ErrorCode::UnknownLsp,
                IpError::UnknownVpn(_) => ErrorCode::UnknownVpn,
                IpError::BadState { .. } => ErrorCode::BadState,
                IpError::CommitFailed(_) => ErrorCode::CommitFailed,
                IpError::TagExhausted => ErrorCode::TagExhausted,
                IpError::InvalidRequest(_) => ErrorCode::InvalidRequest,
            },
            Error::Optical(e) => match e {
                OpticalError::Blocked => ErrorCode::Blocked,
                OpticalError::UnknownPort(_) => ErrorCode::UnknownPort,
                OpticalError::UnknownOch(_) => ErrorCode::UnknownOch,
                OpticalError::UnknownOdu(_) => ErrorCode::UnknownOdu,
                OpticalError::OchInUse(_) => ErrorCode::OchInUse,
                OpticalError::BadState { .. } => ErrorCode::BadState,
                OpticalError::CommitFailed(_) => ErrorCode::CommitFailed,
                OpticalError::InvalidRequest(_) => ErrorCode::InvalidRequest,
            },
            Error::Mw(e) => match e {
                MwError::InvalidConfig(_) => ErrorCode::InvalidConfig,
                MwError::UnknownLink(_) => ErrorCode::UnknownLink,
                MwError::LinkDown(_) => ErrorCode::LinkDown,
                MwError::OutOfRangeModulation { .. } => ErrorCode::OutOfRangeModulation,
                MwError::CommitFailed(_) => ErrorCode::CommitFailed,
                MwError::NoPath(p) => path_code(p),
                MwError::UnknownAllocation(_) => ErrorCode::UnknownAllocation,
                MwError::BadState { .. } => ErrorCode::BadState,
            },
            Error::Sdtn(e) => match e {
                SdtnError::InvalidIntent(_) => ErrorCode::InvalidIntent,
                SdtnError::NoDomainPath => ErrorCode::NoDomainPath,
                SdtnError::DomainInfeasible { .. } => ErrorCode::DomainInfeasible,
                SdtnError::ReserveFailed { .. } => ErrorCode::ReserveFailed,
                SdtnError::CommitFailed { .. } => ErrorCode::CommitFailed,
                SdtnError::RollbackIncomplete { .. } => ErrorCode::RollbackIncomplete,
                SdtnError::TeardownIncomplete { .. } => ErrorCode::TeardownIncomplete,
                SdtnError::OpticalBlocked(_) => ErrorCode::OpticalBlocked,
                SdtnError::StillNoPath(_) => ErrorCode::StillNoPath,
                SdtnError::NoAttachment(_) => ErrorCode::NoAttachment,
                SdtnError::UnknownService(_) => ErrorCode::UnknownService,
                SdtnError::BadState { .. } => ErrorCode::BadState,
            },
            Error::Load(LoadError::Parse { .. }) => ErrorCode::ParseError,
            Error::Load(LoadError::Validation(_)) => ErrorCode::ValidationFailed,
            Error::Fault(FaultError::UnknownTarget(_)) => ErrorCode::UnknownTarget,
            Error::Fault(_) => ErrorCode::BadRequest,
            Error::Scenario(ScenarioError::StepFailed { .. }) => ErrorCode::StepFailed,
            Error::Scenario(_) => ErrorCode::ValidationFailed,
            Error::BadRequest(_) => ErrorCode::BadRequest,
            Error::NotFound(_) => ErrorCode::NotFound,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_unique_and_round_trip() {
        let mut seen = std::collections::BTreeSet::new();
        for c in ErrorCode::ALL {
            assert!(seen.insert(c.as_str()), "{c} listed twice");
            let json = serde_json::to_string(c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.as_str()));
            assert_eq!(serde_json::from_str::<ErrorCode>(&json).unwrap(), *c);
        }
    }

    #[test]
    fn nested_device_errors_keep_their_code() {
        let e = Error::from(SbiError::Mediation(MediationError::Device(DeviceError::Unreachable(crate::model::id("mw/M2")))));
        assert_eq!(e.code(), ErrorCode::Unreachable);
    }
}
