// SPDX-License-Identifier: Apache-2.0

//! Hierarchical transport SDN simulation: device plane, mediation, the IP,
//! optical and microwave domain controllers, and the orchestrator that
//! stitches them.

pub mod device;
pub mod error;
pub mod ip;
pub mod mediation;
pub mod model;
pub mod mw;
pub mod optical;
pub mod path;
pub mod sbi;
pub mod scenario;
pub mod sdtn;
pub mod system;
pub mod topofile;

pub use error::{Error, ErrorCode};
pub use system::System;
