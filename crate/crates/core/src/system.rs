// SPDX-License-Identifier: Apache-2.0

//! A booted simulation: device plane, the three domain controllers and the
//! orchestrator behind one mutation gate.
//!
//! Mutations are serialized and bump a state version; reads run concurrently
//! under the shared side of the gate and therefore always observe a state
//! between two mutations.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::device::config::ConfigTree;
use crate::device::legacy::parse_show_all;
use crate::device::{DatastoreKind, DeviceError, DeviceFault, DevicePlane, VendorProfile};
use crate::error::{Error, ErrorCode};
use crate::ip::{Adjacency, IpController};
use crate::mediation::{Mediator, RuleSet};
use crate::model::{Identifier, ServiceIntent, Technology};
use crate::mw::{Modulation, MwController, MwError, MwLinkDecl};
use crate::optical::{FiberDecl, OpticalController};
use crate::sbi::Southbound;
use crate::sdtn::{AbstractTopology, AbstractionLevel, E2eService, LogAction, Phase, RerouteReport, Sdtn, SdtnConfig};
use crate::topofile::{parse_topology, LoadError, TopologyFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    /// Device: next commit fails. Domain: next commit phase fails.
    CommitFail,
    /// Device: next edit fails. Domain: next reserve phase fails.
    EditFail,
    LinkDown,
    LinkUp,
    Modulation,
    Unreachable,
    Reachable,
    DomainOffline,
    DomainOnline,
    LegacyReject,
}

impl std::str::FromStr for FaultKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(Value::String(s.to_string())).map_err(|_| format!("unknown fault kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaultError {
    #[error("unknown fault target {0:?}")]
    UnknownTarget(String),
    #[error("fault {kind:?} needs a value")]
    MissingValue { kind: FaultKind },
    #[error("bad fault value {0:?}")]
    BadValue(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub requests: u64,
    pub provisioned: u64,
    pub blocked: u64,
    pub failed: u64,
    pub rollbacks: u64,
    pub blocking_ratio: f64,
    /// Wall latency of each provision/teardown request, milliseconds.
    pub latencies_ms: Vec<f64>,
}

impl RunMetrics {
    /// Counts derived from service transaction logs plus blocked requests.
    pub fn from_logs<'a>(services: impl IntoIterator<Item = &'a E2eService>, blocked: u64, latencies_ms: Vec<f64>) -> Self {
        let mut m = RunMetrics {
            blocked,
            latencies_ms,
            ..Default::default()
        };
        let mut attempts = 0u64;
        for s in services {
            attempts += 1;
            for e in &s.transaction_log {
                match e.action {
                    LogAction::Activate => m.provisioned += 1,
                    LogAction::Fail => m.failed += 1,
                    LogAction::Rollback => m.rollbacks += 1,
                    _ => {}
                }
            }
        }
        m.requests = attempts + blocked;
        m.blocking_ratio = if m.requests == 0 {
            0.0
        } else {
            blocked as f64 / m.requests as f64
        };
        m
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemSummary {
    pub devices: usize,
    pub domains: BTreeMap<String, Technology>,
    pub state_version: u64,
}

pub struct System {
    gate: RwLock<()>,
    version: AtomicU64,
    clock: AtomicU64,
    audit_each_mutation: AtomicBool,
    plane: Arc<DevicePlane>,
    sbi: Arc<Southbound>,
    ip: Arc<IpController>,
    optical: Arc<OpticalController>,
    mw: Arc<MwController>,
    sdtn: Arc<Sdtn>,
    file: TopologyFile,
    latencies: Mutex<Vec<f64>>,
    audit_failures: Mutex<Vec<(u64, Vec<String>)>>,
    reroutes: Mutex<Vec<RerouteReport>>,
    event_errors: Mutex<Vec<String>>,
}

impl System {
    pub fn from_json(text: &str) -> Result<Arc<System>, LoadError> {
        System::load(parse_topology(text)?)
    }

    pub fn load(file: TopologyFile) -> Result<Arc<System>, LoadError> {
        let problems = file.validate();
        if !problems.is_empty() {
            return Err(LoadError::Validation(problems));
        }
        let mut plane = DevicePlane::new();
        for d in &file.devices {
            plane
                .add_device(d.descriptor())
                .and_then(|_| match d.overrides.is_empty() {
                    true => Ok(()),
                    false => plane.apply_factory_overrides(&d.id, &d.overrides),
                })
                .map_err(|e| LoadError::Validation(vec![format!("device {}: {e}", d.id)]))?;
        }
        let plane = Arc::new(plane);
        let mediator = Arc::new(Mediator::new(plane.clone(), RuleSet::mw_legacy()));
        let sbi = Arc::new(Southbound::new(plane.clone(), mediator));
        let name = |t: Technology, fallback: &str| file.domain_of(t).map(|d| d.name.clone()).unwrap_or_else(|| fallback.to_string());
        let ip = Arc::new(IpController::new(sbi.clone(), &name(Technology::Ip, "ip")));
        let optical = Arc::new(OpticalController::new(sbi.clone(), &name(Technology::Optical, "optical")));
        let mw = Arc::new(MwController::new(sbi.clone(), &name(Technology::Mw, "mw")));

        let nodes_of = |t: Technology| file.devices.iter().filter(|d| d.technology == t).map(|d| d.node_record()).collect::<Vec<_>>();
        let links_of = |t: Technology| {
            let dom = file.domain_of(t).map(|d| d.name.clone());
            file.links.iter().filter(move |l| Some(&l.domain) == dom.as_ref())
        };
        ip.onboard(
            nodes_of(Technology::Ip),
            links_of(Technology::Ip)
                .map(|l| {
                    let te = l.te.expect("validated");
                    Adjacency {
                        id: l.id.clone(),
                        a: l.a.clone(),
                        z: l.z.clone(),
                        te_metric: te.te_metric,
                        capacity_mbps: te.capacity_mbps,
                    }
                })
                .collect(),
        );
        optical.onboard(
            nodes_of(Technology::Optical),
            links_of(Technology::Optical)
                .map(|l| FiberDecl {
                    id: l.id.clone(),
                    a: l.a.clone(),
                    z: l.z.clone(),
                    wavelengths: l.wavelengths.expect("validated"),
                })
                .collect(),
        );
        mw.onboard(
            nodes_of(Technology::Mw),
            links_of(Technology::Mw)
                .map(|l| MwLinkDecl {
                    id: l.id.clone(),
                    a: l.a.clone(),
                    z: l.z.clone(),
                    config: l.air_interface.expect("validated"),
                })
                .collect(),
        )
        .map_err(|e| LoadError::Validation(vec![format!("configuring radio links: {e}")]))?;

        let domains = file.domains.iter().map(|d| (d.name.clone(), d.technology)).collect();
        let sdtn = Arc::new(Sdtn::new(ip.clone(), optical.clone(), mw.clone(), domains, SdtnConfig::default()));
        sdtn.onboard(file.inter_domain_links.clone(), file.attachment_ports.clone());
        // boot-time configuration is not a capacity event
        sdtn.process_notices();
        // primes the per-domain cache used while a domain is offline
        sdtn.assemble_global_topology(AbstractionLevel::Full, None);

        Ok(Arc::new(System {
            gate: RwLock::new(()),
            version: AtomicU64::new(0),
            clock: AtomicU64::new(0),
            audit_each_mutation: AtomicBool::new(false),
            plane,
            sbi,
            ip,
            optical,
            mw,
            sdtn,
            file,
            latencies: Mutex::new(Vec::new()),
            audit_failures: Mutex::new(Vec::new()),
            reroutes: Mutex::new(Vec::new()),
            event_errors: Mutex::new(Vec::new()),
        }))
    }

    pub fn plane(&self) -> &Arc<DevicePlane> {
        &self.plane
    }

    pub fn southbound(&self) -> &Arc<Southbound> {
        &self.sbi
    }

    pub fn ip(&self) -> &Arc<IpController> {
        &self.ip
    }

    pub fn optical(&self) -> &Arc<OpticalController> {
        &self.optical
    }

    pub fn mw(&self) -> &Arc<MwController> {
        &self.mw
    }

    pub fn sdtn(&self) -> &Arc<Sdtn> {
        &self.sdtn
    }

    pub fn topology_file(&self) -> &TopologyFile {
        &self.file
    }

    pub fn state_version(&self) -> u64 {
        self.version.load(Ordering::SeqCst)
    }

    pub fn clock(&self) -> u64 {
        self.clock.load(Ordering::SeqCst)
    }

    /// Audit after every mutation, keeping any failures for inspection.
    pub fn set_audit_each_mutation(&self, on: bool) {
        self.audit_each_mutation.store(on, Ordering::SeqCst);
    }

    pub fn audit_failures(&self) -> Vec<(u64, Vec<String>)> {
        self.audit_failures.lock().clone()
    }

    pub fn reroute_reports(&self) -> Vec<RerouteReport> {
        self.reroutes.lock().clone()
    }

    pub fn event_errors(&self) -> Vec<String> {
        self.event_errors.lock().clone()
    }

    pub fn summary(&self) -> SystemSummary {
        SystemSummary {
            devices: self.file.devices.len(),
            domains: self.sdtn.domains().clone(),
            state_version: self.state_version(),
        }
    }

    /// Runs `f` against a consistent state. Returns the state version seen.
    pub fn read<R>(&self, f: impl FnOnce(&System) -> R) -> (u64, R) {
        let _g = self.gate.read();
        (self.state_version(), f(self))
    }

    /// Runs one mutation exclusively, then drains device events and capacity
    /// notices before releasing the gate.
    pub fn mutate<R>(&self, f: impl FnOnce(&System) -> R) -> (u64, R) {
        let _g = self.gate.write();
        let r = f(self);
        self.settle();
        let v = self.version.fetch_add(1, Ordering::SeqCst) + 1;
        if self.audit_each_mutation.load(Ordering::SeqCst) {
            let report = self.audit_unlocked();
            if !report.is_clean() {
                self.audit_failures.lock().push((v, report.violations));
            }
        }
        (v, r)
    }

    fn settle(&self) {
        let (_, errors) = self.mw.poll_events();
        self.event_errors.lock().extend(errors.iter().map(MwError::to_string));
        let reports = self.sdtn.process_notices();
        self.reroutes.lock().extend(reports.into_iter().filter(|r| !r.outcomes.is_empty()));
    }

    fn timed<R>(&self, f: impl FnOnce() -> R) -> R {
        let t = Instant::now();
        let r = f();
        self.latencies.lock().push(t.elapsed().as_secs_f64() * 1e3);
        r
    }

    pub fn provision(&self, intent: &ServiceIntent) -> Result<E2eService, Error> {
        self.timed(|| self.mutate(|s| s.sdtn.provision_e2e(intent)).1.map_err(Error::from))
    }

    pub fn teardown(&self, id: &Identifier) -> Result<E2eService, Error> {
        self.timed(|| self.mutate(|s| s.sdtn.teardown_e2e(id)).1.map_err(Error::from))
    }

    pub fn topology(&self, level: AbstractionLevel, domain: Option<&str>) -> (u64, AbstractTopology) {
        self.read(|s| s.sdtn.assemble_global_topology(level, domain))
    }

    pub fn services(&self) -> (u64, Vec<E2eService>) {
        self.read(|s| s.sdtn.services())
    }

    pub fn service(&self, id: &Identifier) -> (u64, Result<E2eService, Error>) {
        self.read(|s| s.sdtn.service(id).map_err(Error::from))
    }

    pub fn tick(&self, ticks: u64) {
        self.mutate(|s| {
            s.plane.tick(ticks);
            s.clock.fetch_add(ticks, Ordering::SeqCst);
        });
    }

    pub fn inject(&self, fault: &FaultSpec) -> Result<(), Error> {
        self.mutate(|s| s.inject_unlocked(fault)).1
    }

    fn inject_unlocked(&self, fault: &FaultSpec) -> Result<(), Error> {
        let target = fault.target.as_str();
        let unknown = || Error::from(FaultError::UnknownTarget(target.to_string()));
        let device = target.parse::<Identifier>().ok().filter(|d| self.plane.contains(d));
        let is_domain = self.sdtn.domains().contains_key(target);
        let value = || {
            fault
                .value
                .clone()
                .ok_or(Error::from(FaultError::MissingValue { kind: fault.kind }))
        };
        match fault.kind {
            FaultKind::CommitFail | FaultKind::EditFail => {
                if let Some(d) = device {
                    let f = if fault.kind == FaultKind::CommitFail {
                        DeviceFault::CommitFail
                    } else {
                        DeviceFault::EditFail
                    };
                    self.plane.inject(&d, f)?;
                } else if is_domain {
                    let phase = if fault.kind == FaultKind::CommitFail {
                        Phase::Commit
                    } else {
                        Phase::Reserve
                    };
                    self.sdtn.arm_fault(phase, target);
                } else {
                    return Err(unknown());
                }
            }
            FaultKind::Unreachable | FaultKind::Reachable => {
                let d = device.ok_or_else(unknown)?;
                let f = if fault.kind == FaultKind::Unreachable {
                    DeviceFault::Unreachable
                } else {
                    DeviceFault::Reachable
                };
                self.plane.inject(&d, f)?;
                self.ip.discover();
            }
            FaultKind::LegacyReject => {
                let d = device.ok_or_else(unknown)?;
                let n: u32 = value()?.parse().map_err(|_| Error::from(FaultError::BadValue(value().unwrap_or_default())))?;
                self.plane.inject(&d, DeviceFault::LegacyRejectAfter(n))?;
            }
            FaultKind::DomainOffline | FaultKind::DomainOnline => {
                if !self.sdtn.set_domain_online(target, fault.kind == FaultKind::DomainOnline) {
                    return Err(unknown());
                }
            }
            FaultKind::LinkDown | FaultKind::LinkUp => {
                let link: Identifier = target.parse().map_err(|_| unknown())?;
                let up = fault.kind == FaultKind::LinkUp;
                let ends = self
                    .ip
                    .adjacencies()
                    .into_iter()
                    .find(|a| a.id == link)
                    .map(|a| (a.a, a.z))
                    .or_else(|| self.mw.link(&link).ok().map(|l| (l.a, l.z)))
                    .ok_or_else(unknown)?;
                for p in [&ends.0, &ends.1] {
                    match self.plane.set_oper(&p.node(), p.port_name().unwrap_or_default(), up) {
                        Ok(()) | Err(DeviceError::UnknownInterface(_)) => {}
                        Err(e) => return Err(e.into()),
                    }
                }
                self.ip.discover();
            }
            FaultKind::Modulation => {
                let link: Identifier = target.parse().map_err(|_| unknown())?;
                let l = self.mw.link(&link).map_err(|_| unknown())?;
                let v = value()?;
                let m: Modulation = v.parse().map_err(|_| Error::from(FaultError::BadValue(v)))?;
                self.plane.report_modulation(&l.a.node(), l.a.port_name().unwrap_or_default(), m)?;
            }
        }
        Ok(())
    }

    pub fn audit(&self) -> AuditReport {
        let _g = self.gate.read();
        self.audit_unlocked()
    }

    fn audit_unlocked(&self) -> AuditReport {
        let mut violations = self.ip.audit();
        violations.extend(self.optical.audit());
        violations.extend(self.mw.audit());
        violations.extend(self.sdtn.audit());
        AuditReport { violations }
    }

    /// Every ledger, keyed by owner.
    pub fn ledgers(&self) -> Value {
        let _g = self.gate.read();
        self.ledgers_unlocked()
    }

    fn ledgers_unlocked(&self) -> Value {
        json!({
            "ip": self.ip.ledger_snapshot(),
            "optical": self.optical.ledger_snapshot(),
            "mw": self.mw.ledger_snapshot(),
            "sdtn": self.sdtn.ledger_snapshot(),
        })
    }

    fn device_state(&self, id: &Identifier) -> Value {
        let Ok(d) = self.plane.descriptor(id) else {
            return Value::Null;
        };
        let read = if d.vendor_profile == VendorProfile::Legacy {
            self.plane.legacy_execute(id, "SHOW ALL").map(|reply| {
                let params: BTreeMap<String, String> = parse_show_all(&reply).into_iter().collect();
                json!(params)
            })
        } else {
            self.plane
                .get_config(id, DatastoreKind::Running)
                .map(|t: ConfigTree| serde_json::to_value(t).expect("config trees serialize"))
        };
        read.unwrap_or_else(|e| json!({ "error": e.to_string() }))
    }

    /// Ledgers plus every device's running configuration (legacy devices by
    /// their raw parameter store). Serialized with sorted keys.
    pub fn snapshot(&self) -> Value {
        let _g = self.gate.read();
        let devices: BTreeMap<String, Value> = self
            .file
            .devices
            .iter()
            .map(|d| (d.id.render(), self.device_state(&d.id)))
            .collect();
        json!({ "ledgers": self.ledgers_unlocked(), "devices": devices })
    }

    pub fn snapshot_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.snapshot()).expect("snapshots serialize")
    }

    pub fn metrics(&self) -> RunMetrics {
        let _g = self.gate.read();
        let services = self.sdtn.services();
        let blocked = self.sdtn.blocked_requests().len() as u64;
        RunMetrics::from_logs(&services, blocked, self.latencies.lock().clone())
    }

    /// Latency samples recorded so far.
    pub fn latency_count(&self) -> usize {
        self.latencies.lock().len()
    }

    pub fn latencies_since(&self, start: usize) -> Vec<f64> {
        self.latencies.lock()[start..].to_vec()
    }

    pub fn error_code(e: &Error) -> ErrorCode {
        e.code()
    }
}
