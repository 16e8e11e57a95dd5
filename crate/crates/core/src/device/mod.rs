// SPDX-License-Identifier: Apache-2.0

//! Simulated network elements.
//!
//! Native devices expose a candidate/running datastore with an exclusive lock,
//! schema-checked edits and atomic commit. Legacy devices only understand the
//! proprietary command set in [`legacy`]. Every device keeps a gap-free
//! notification log that subscribers can replay from any sequence number.
//!
//! Each device sits behind its own mutex, so requests to one device are
//! processed one at a time while different devices proceed in parallel.

pub mod config;
pub mod legacy;
pub mod schema;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::model::{Identifier, Mbps, Technology};
use crate::mw::Modulation;
use config::{ConfigTree, Edit};
use legacy::LegacyStore;
use schema::Schema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VendorProfile {
    Native,
    Legacy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceDescriptor {
    pub id: Identifier,
    pub technology: Technology,
    pub vendor_profile: VendorProfile,
    pub model_version: String,
    /// Declared port names (without the node prefix).
    pub ports: Vec<String>,
}

impl DeviceDescriptor {
    pub fn new(id: Identifier, technology: Technology, vendor_profile: VendorProfile, ports: &[&str]) -> Self {
        Self {
            id,
            technology,
            vendor_profile,
            model_version: "1.0".into(),
            ports: ports.iter().map(|p| p.to_string()).collect(),
        }
    }

    pub fn check(&self) -> Result<(), DeviceError> {
        if self.vendor_profile == VendorProfile::Legacy && self.technology == Technology::Optical {
            return Err(DeviceError::BadDescriptor(format!(
                "{}: LEGACY profile is only available for IP and MW devices",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DatastoreKind {
    Running,
    Candidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SessionId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CommitId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NotificationKind {
    ConfigCommitted,
    OperChange,
    ModulationChange,
    LinkDown,
    LinkUp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotificationEvent {
    pub device: Identifier,
    pub seq: u64,
    pub kind: NotificationKind,
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceCounters {
    pub tx_mbps: Mbps,
    pub rx_mbps: Mbps,
    pub oper_up: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateCounters {
    pub interfaces: BTreeMap<String, InterfaceCounters>,
    pub uptime_ticks: u64,
}

/// Faults that can be armed on a device. Commit and edit failures are one-shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum DeviceFault {
    CommitFail,
    EditFail,
    Unreachable,
    Reachable,
    /// Legacy only: accept N more SETs then reject the next with BAD_VALUE.
    LegacyRejectAfter(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeviceError {
    #[error("unknown device {0}")]
    UnknownDevice(Identifier),
    #[error("device {0} unreachable")]
    Unreachable(Identifier),
    #[error("device {0} is locked by another session")]
    LockedByOther(Identifier),
    #[error("schema violation at {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("validation failed: {0:?}")]
    ValidationFailed(Vec<String>),
    #[error("sequence {requested} out of range (current {current})")]
    SeqOutOfRange { requested: u64, current: u64 },
    #[error("device {0} is not a legacy device")]
    NotLegacy(Identifier),
    #[error("device {0} has no datastore (legacy)")]
    NotNative(Identifier),
    #[error("injected fault: {0}")]
    InjectedFault(String),
    #[error("unknown interface {0}")]
    UnknownInterface(String),
    #[error("bad descriptor: {0}")]
    BadDescriptor(String),
}

struct Datastore {
    schema: Arc<Schema>,
    running: ConfigTree,
    candidate: ConfigTree,
    lock_holder: Option<SessionId>,
}

enum Store {
    Native(Datastore),
    Legacy(LegacyStore),
}

#[derive(Default)]
struct EventLog {
    log: Vec<NotificationEvent>,
    subscribers: Vec<Sender<NotificationEvent>>,
}

impl EventLog {
    fn emit(&mut self, device: &Identifier, kind: NotificationKind, payload: serde_json::Value) -> u64 {
        let ev = NotificationEvent {
            device: device.clone(),
            seq: self.log.len() as u64 + 1,
            kind,
            payload,
        };
        self.subscribers.retain(|s| s.send(ev.clone()).is_ok());
        self.log.push(ev);
        self.log.len() as u64
    }
}

struct Device {
    descriptor: DeviceDescriptor,
    store: Store,
    events: EventLog,
    counters: StateCounters,
    modulation: BTreeMap<String, Modulation>,
    last_commit: u64,
    commit_fail: bool,
    edit_fail: bool,
    unreachable: bool,
}

impl Device {
    fn new(descriptor: DeviceDescriptor) -> Self {
        let schema = Schema::for_technology(descriptor.technology);
        let store = match descriptor.vendor_profile {
            VendorProfile::Native => {
                let factory = schema.factory_tree(descriptor.ports.iter().map(String::as_str));
                Store::Native(Datastore {
                    schema,
                    candidate: factory.clone(),
                    running: factory,
                    lock_holder: None,
                })
            }
            VendorProfile::Legacy => Store::Legacy(LegacyStore::default()),
        };
        let counters = StateCounters {
            interfaces: descriptor
                .ports
                .iter()
                .map(|p| {
                    (
                        p.clone(),
                        InterfaceCounters {
                            oper_up: true,
                            ..Default::default()
                        },
                    )
                })
                .collect(),
            uptime_ticks: 0,
        };
        Self {
            descriptor,
            store,
            events: EventLog::default(),
            counters,
            modulation: BTreeMap::new(),
            last_commit: 0,
            commit_fail: false,
            edit_fail: false,
            unreachable: false,
        }
    }

    fn id(&self) -> &Identifier {
        &self.descriptor.id
    }

    fn reachable(&self) -> Result<(), DeviceError> {
        if self.unreachable {
            Err(DeviceError::Unreachable(self.id().clone()))
        } else {
            Ok(())
        }
    }

    fn native(&mut self) -> Result<&mut Datastore, DeviceError> {
        self.reachable()?;
        let id = self.descriptor.id.clone();
        match &mut self.store {
            Store::Native(ds) => Ok(ds),
            Store::Legacy(_) => Err(DeviceError::NotNative(id)),
        }
    }

    fn locked_by(&mut self, session: SessionId) -> Result<&mut Datastore, DeviceError> {
        let id = self.descriptor.id.clone();
        let ds = self.native()?;
        if ds.lock_holder != Some(session) {
            return Err(DeviceError::LockedByOther(id));
        }
        Ok(ds)
    }
}

/// The set of simulated devices.
pub struct DevicePlane {
    devices: BTreeMap<Identifier, Mutex<Device>>,
    next_session: AtomicU64,
}

impl Default for DevicePlane {
    fn default() -> Self {
        Self::new()
    }
}

impl DevicePlane {
    pub fn new() -> Self {
        Self {
            devices: BTreeMap::new(),
            next_session: AtomicU64::new(1),
        }
    }

    pub fn add_device(&mut self, descriptor: DeviceDescriptor) -> Result<(), DeviceError> {
        descriptor.check()?;
        let id = descriptor.id.clone();
        self.devices.insert(id, Mutex::new(Device::new(descriptor)));
        Ok(())
    }

    /// Applies boot-time overrides straight to running (and candidate).
    pub fn apply_factory_overrides(&mut self, dev: &Identifier, edits: &[Edit]) -> Result<(), DeviceError> {
        let mut d = self.device(dev)?.lock();
        let ds = d.native()?;
        for e in edits {
            ds.schema.check_edit(e).map_err(|v| DeviceError::SchemaViolation {
                path: v.path,
                reason: v.reason,
            })?;
        }
        ds.running.apply(edits);
        ds.candidate = ds.running.clone();
        Ok(())
    }

    fn device(&self, dev: &Identifier) -> Result<&Mutex<Device>, DeviceError> {
        self.devices
            .get(dev)
            .ok_or_else(|| DeviceError::UnknownDevice(dev.clone()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &Identifier> {
        self.devices.keys()
    }

    pub fn contains(&self, dev: &Identifier) -> bool {
        self.devices.contains_key(dev)
    }

    pub fn descriptor(&self, dev: &Identifier) -> Result<DeviceDescriptor, DeviceError> {
        Ok(self.device(dev)?.lock().descriptor.clone())
    }

    pub fn descriptors(&self) -> Vec<DeviceDescriptor> {
        self.devices.values().map(|d| d.lock().descriptor.clone()).collect()
    }

    pub fn get_config(&self, dev: &Identifier, which: DatastoreKind) -> Result<ConfigTree, DeviceError> {
        let mut d = self.device(dev)?.lock();
        let ds = d.native()?;
        Ok(match which {
            DatastoreKind::Running => ds.running.clone(),
            DatastoreKind::Candidate => ds.candidate.clone(),
        })
    }

    /// Takes the exclusive lock and resets candidate to a copy of running.
    pub fn open_session(&self, dev: &Identifier) -> Result<SessionId, DeviceError> {
        let mut d = self.device(dev)?.lock();
        let id = d.id().clone();
        let ds = d.native()?;
        if ds.lock_holder.is_some() {
            return Err(DeviceError::LockedByOther(id));
        }
        let session = SessionId(self.next_session.fetch_add(1, Ordering::Relaxed));
        ds.lock_holder = Some(session);
        ds.candidate = ds.running.clone();
        Ok(session)
    }

    /// Applies a batch to candidate; any invalid edit rejects the whole batch.
    pub fn edit_candidate(&self, dev: &Identifier, session: SessionId, edits: &[Edit]) -> Result<(), DeviceError> {
        let mut d = self.device(dev)?.lock();
        d.locked_by(session)?;
        if std::mem::take(&mut d.edit_fail) {
            return Err(DeviceError::InjectedFault("edit rejected".into()));
        }
        let ds = d.locked_by(session)?;
        for e in edits {
            ds.schema.check_edit(e).map_err(|v| DeviceError::SchemaViolation {
                path: v.path,
                reason: v.reason,
            })?;
        }
        ds.candidate.apply(edits);
        Ok(())
    }

    pub fn validate(&self, dev: &Identifier, session: SessionId) -> Result<(), DeviceError> {
        let mut d = self.device(dev)?.lock();
        let ds = d.locked_by(session)?;
        let report = ds.schema.validate_tree(&ds.candidate);
        if report.is_empty() {
            Ok(())
        } else {
            Err(DeviceError::ValidationFailed(report))
        }
    }

    /// running := candidate, atomically, then emits CONFIG_COMMITTED with the diff.
    pub fn commit(&self, dev: &Identifier, session: SessionId) -> Result<CommitId, DeviceError> {
        let mut d = self.device(dev)?.lock();
        d.locked_by(session)?;
        if std::mem::take(&mut d.commit_fail) {
            return Err(DeviceError::ValidationFailed(vec!["injected commit failure".into()]));
        }
        let ds = d.locked_by(session)?;
        let report = ds.schema.validate_tree(&ds.candidate);
        if !report.is_empty() {
            return Err(DeviceError::ValidationFailed(report));
        }
        let diff = ds.running.diff(&ds.candidate);
        ds.running = ds.candidate.clone();
        d.last_commit += 1;
        let commit_id = d.last_commit;
        let id = d.id().clone();
        d.events.emit(
            &id,
            NotificationKind::ConfigCommitted,
            json!({ "commit_id": commit_id, "diff": diff }),
        );
        Ok(CommitId(commit_id))
    }

    pub fn discard_changes(&self, dev: &Identifier, session: SessionId) -> Result<(), DeviceError> {
        let mut d = self.device(dev)?.lock();
        let ds = d.locked_by(session)?;
        ds.candidate = ds.running.clone();
        Ok(())
    }

    /// Releases the lock, dropping uncommitted candidate changes.
    ///
    /// Works on unreachable devices so that controllers can always clean up.
    pub fn close_session(&self, dev: &Identifier, session: SessionId) -> Result<(), DeviceError> {
        let mut d = self.device(dev)?.lock();
        let id = d.id().clone();
        match &mut d.store {
            Store::Native(ds) if ds.lock_holder == Some(session) => {
                ds.lock_holder = None;
                ds.candidate = ds.running.clone();
                Ok(())
            }
            Store::Native(_) => Err(DeviceError::LockedByOther(id)),
            Store::Legacy(_) => Err(DeviceError::NotNative(id)),
        }
    }

    pub fn legacy_execute(&self, dev: &Identifier, command: &str) -> Result<String, DeviceError> {
        let mut d = self.device(dev)?.lock();
        d.reachable()?;
        let id = d.id().clone();
        match &mut d.store {
            Store::Legacy(store) => Ok(store.execute(command)),
            Store::Native(_) => Err(DeviceError::NotLegacy(id)),
        }
    }

    /// Replays events with `seq >= from_seq`, then streams live events.
    pub fn subscribe(&self, dev: &Identifier, from_seq: u64) -> Result<Receiver<NotificationEvent>, DeviceError> {
        let mut d = self.device(dev)?.lock();
        let current = d.events.log.len() as u64;
        if from_seq == 0 || from_seq > current + 1 {
            return Err(DeviceError::SeqOutOfRange {
                requested: from_seq,
                current,
            });
        }
        let (tx, rx) = channel();
        for ev in &d.events.log[(from_seq - 1) as usize..] {
            let _ = tx.send(ev.clone());
        }
        d.events.subscribers.push(tx);
        Ok(rx)
    }

    pub fn event_log(&self, dev: &Identifier) -> Result<Vec<NotificationEvent>, DeviceError> {
        Ok(self.device(dev)?.lock().events.log.clone())
    }

    /// Emits an event on behalf of the device (used by mediation).
    pub fn emit(&self, dev: &Identifier, kind: NotificationKind, payload: serde_json::Value) -> Result<u64, DeviceError> {
        let mut d = self.device(dev)?.lock();
        let id = d.id().clone();
        Ok(d.events.emit(&id, kind, payload))
    }

    pub fn allocate_commit_id(&self, dev: &Identifier) -> Result<CommitId, DeviceError> {
        let mut d = self.device(dev)?.lock();
        d.last_commit += 1;
        Ok(CommitId(d.last_commit))
    }

    /// Consumes an armed commit failure, if any (mediated commits check this).
    pub fn take_commit_fault(&self, dev: &Identifier) -> Result<bool, DeviceError> {
        Ok(std::mem::take(&mut self.device(dev)?.lock().commit_fail))
    }

    pub fn take_edit_fault(&self, dev: &Identifier) -> Result<bool, DeviceError> {
        Ok(std::mem::take(&mut self.device(dev)?.lock().edit_fail))
    }

    pub fn is_reachable(&self, dev: &Identifier) -> Result<bool, DeviceError> {
        Ok(!self.device(dev)?.lock().unreachable)
    }

    pub fn inject(&self, dev: &Identifier, fault: DeviceFault) -> Result<(), DeviceError> {
        let mut d = self.device(dev)?.lock();
        match fault {
            DeviceFault::CommitFail => d.commit_fail = true,
            DeviceFault::EditFail => d.edit_fail = true,
            DeviceFault::Unreachable => d.unreachable = true,
            DeviceFault::Reachable => d.unreachable = false,
            DeviceFault::LegacyRejectAfter(n) => {
                let id = d.id().clone();
                match &mut d.store {
                    Store::Legacy(s) => s.arm_rejection(n),
                    Store::Native(_) => return Err(DeviceError::NotLegacy(id)),
                }
            }
        }
        Ok(())
    }

    pub fn clear_faults(&self, dev: &Identifier) -> Result<(), DeviceError> {
        let mut d = self.device(dev)?.lock();
        d.commit_fail = false;
        d.edit_fail = false;
        Ok(())
    }

    /// Interface counters; IP interfaces absent from running config are omitted.
    pub fn counters(&self, dev: &Identifier) -> Result<StateCounters, DeviceError> {
        let mut d = self.device(dev)?.lock();
        d.reachable()?;
        let mut c = d.counters.clone();
        if let Store::Native(ds) = &mut d.store {
            if ds.schema.technology == Technology::Ip {
                let present = ds.running.children("/interfaces");
                c.interfaces.retain(|k, _| present.contains(k));
            }
        }
        Ok(c)
    }

    pub fn set_traffic(&self, dev: &Identifier, port: &str, tx_mbps: Mbps, rx_mbps: Mbps) -> Result<(), DeviceError> {
        let mut d = self.device(dev)?.lock();
        let c = d
            .counters
            .interfaces
            .get_mut(port)
            .ok_or_else(|| DeviceError::UnknownInterface(port.to_string()))?;
        c.tx_mbps = tx_mbps;
        c.rx_mbps = rx_mbps;
        Ok(())
    }

    /// Changes the operational state of a port, emitting LINK_DOWN / LINK_UP.
    pub fn set_oper(&self, dev: &Identifier, port: &str, up: bool) -> Result<(), DeviceError> {
        let mut d = self.device(dev)?.lock();
        let c = d
            .counters
            .interfaces
            .get_mut(port)
            .ok_or_else(|| DeviceError::UnknownInterface(port.to_string()))?;
        if c.oper_up == up {
            return Ok(());
        }
        c.oper_up = up;
        let id = d.id().clone();
        let kind = if up {
            NotificationKind::LinkUp
        } else {
            NotificationKind::LinkDown
        };
        d.events.emit(&id, kind, json!({ "interface": port }));
        Ok(())
    }

    pub fn oper_up(&self, dev: &Identifier, port: &str) -> Result<bool, DeviceError> {
        let d = self.device(dev)?.lock();
        d.counters
            .interfaces
            .get(port)
            .map(|c| c.oper_up)
            .ok_or_else(|| DeviceError::UnknownInterface(port.to_string()))
    }

    /// The radio reports a new operating modulation (adaptive modulation).
    pub fn report_modulation(&self, dev: &Identifier, port: &str, modulation: Modulation) -> Result<u64, DeviceError> {
        let mut d = self.device(dev)?.lock();
        if !d.counters.interfaces.contains_key(port) {
            return Err(DeviceError::UnknownInterface(port.to_string()));
        }
        d.modulation.insert(port.to_string(), modulation);
        let id = d.id().clone();
        Ok(d.events.emit(
            &id,
            NotificationKind::ModulationChange,
            json!({ "interface": port, "modulation": modulation }),
        ))
    }

    pub fn tick(&self, ticks: u64) {
        for d in self.devices.values() {
            d.lock().counters.uptime_ticks += ticks;
        }
    }
}
