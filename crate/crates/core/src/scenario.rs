// SPDX-License-Identifier: Apache-2.0

//! Scenario files: an ordered list of steps run against a booted system.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::error::ErrorCode;
use crate::model::{Identifier, Mbps, ServiceIntent, ServiceState};
use crate::sdtn::AbstractionLevel;
use crate::system::{FaultSpec, RunMetrics, System};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "predicate", rename_all = "kebab-case")]
pub enum Predicate {
    /// Audit is clean; with `initial`, every ledger also equals its value
    /// when the run started.
    LedgerConservation {
        #[serde(default)]
        initial: bool,
    },
    StateEquals { service: String, state: ServiceState },
    /// Concrete links of the service, inter-domain links included.
    PathEquals { service: String, path: Vec<Identifier> },
    /// Capacity of a link in the full topology view.
    CapacityEquals { link: Identifier, mbps: Mbps },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Provision {
        from: Identifier,
        to: Identifier,
        mbps: Mbps,
        /// Name later steps use to refer to the service.
        #[serde(default, rename = "as", skip_serializing_if = "Option::is_none")]
        alias: Option<String>,
        #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
        excludes: BTreeSet<Identifier>,
    },
    Teardown {
        service: String,
    },
    InjectFault {
        #[serde(flatten)]
        fault: FaultSpec,
    },
    Assert {
        #[serde(flatten)]
        predicate: Predicate,
    },
    Sleep {
        ticks: u64,
    },
}

impl Action {
    fn mutates(&self) -> bool {
        !matches!(self, Action::Assert { .. })
    }

    fn name(&self) -> &'static str {
        match self {
            Action::Provision { .. } => "provision",
            Action::Teardown { .. } => "teardown",
            Action::InjectFault { .. } => "inject_fault",
            Action::Assert { .. } => "assert",
            Action::Sleep { .. } => "sleep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub id: String,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("scenario parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("step {step} failed: {cause}")]
    StepFailed { step: String, cause: String },
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<ScenarioFile, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        file.validate()?;
        Ok(file)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut ids = BTreeSet::new();
        for s in &self.steps {
            if s.id.is_empty() {
                return Err(ScenarioError::Invalid("empty step id".into()));
            }
            if !ids.insert(s.id.as_str()) {
                return Err(ScenarioError::Invalid(format!("duplicate step id {:?}", s.id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub id: String,
    pub action: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<ErrorCode>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub metrics: RunMetrics,
    pub outcomes: Vec<StepOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_step: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Full state at the point of failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_dump: Option<Value>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.failed_step.is_none()
    }

    pub fn error(&self) -> Option<ScenarioError> {
        Some(ScenarioError::StepFailed {
            step: self.failed_step.clone()?,
            cause: self.failure.clone().unwrap_or_default(),
        })
    }
}

struct Run<'a> {
    system: &'a System,
    initial_ledgers: Value,
    aliases: BTreeMap<String, Identifier>,
}

impl Run<'_> {
    fn resolve(&self, name: &str) -> Result<Identifier, String> {
        if let Some(id) = self.aliases.get(name) {
            return Ok(id.clone());
        }
        name.parse().map_err(|_| format!("unknown service {name:?}"))
    }

    /// Ok(outcome) records and continues; Err stops the run.
    fn execute(&mut self, step: &Step) -> Result<StepOutcome, String> {
        let mut out = StepOutcome {
            id: step.id.clone(),
            action: step.action.name().into(),
            ok: true,
            code: None,
            detail: String::new(),
        };
        match &step.action {
            Action::Provision {
                from,
                to,
                mbps,
                alias,
                excludes,
            } => {
                let mut intent = ServiceIntent::new(from.clone(), to.clone(), *mbps);
                intent.excludes = excludes.clone();
                let before: BTreeSet<Identifier> = self.system.services().1.into_iter().map(|s| s.id).collect();
                match self.system.provision(&intent) {
                    Ok(svc) => out.detail = svc.id.render(),
                    Err(e) => {
                        out.ok = false;
                        out.code = Some(e.code());
                        out.detail = e.to_string();
                    }
                }
                // a failed attempt still leaves a record to assert on
                let created = self.system.services().1.into_iter().map(|s| s.id).find(|id| !before.contains(id));
                if let (Some(alias), Some(id)) = (alias, created) {
                    self.aliases.insert(alias.clone(), id);
                }
            }
            Action::Teardown { service } => {
                let id = self.resolve(service)?;
                if let Err(e) = self.system.teardown(&id) {
                    out.ok = false;
                    out.code = Some(e.code());
                    out.detail = e.to_string();
                }
            }
            Action::InjectFault { fault } => {
                self.system.inject(fault).map_err(|e| format!("{}: {e}", e.code()))?;
            }
            Action::Sleep { ticks } => self.system.tick(*ticks),
            Action::Assert { predicate } => {
                self.check(predicate)?;
            }
        }
        if step.action.mutates() {
            let audit = self.system.audit();
            if !audit.is_clean() {
                return Err(format!("conservation audit: {}", audit.violations.join("; ")));
            }
        }
        Ok(out)
    }

    fn check(&self, p: &Predicate) -> Result<(), String> {
        match p {
            Predicate::LedgerConservation { initial } => {
                let audit = self.system.audit();
                if !audit.is_clean() {
                    return Err(format!("audit: {}", audit.violations.join("; ")));
                }
                if *initial && self.system.ledgers() != self.initial_ledgers {
                    return Err("ledgers differ from their initial values".into());
                }
            }
            Predicate::StateEquals { service, state } => {
                let id = self.resolve(service)?;
                let got = self.system.service(&id).1.map_err(|e| e.to_string())?.state;
                if got != *state {
                    return Err(format!("{id} is {got}, expected {state}"));
                }
            }
            Predicate::PathEquals { service, path } => {
                let id = self.resolve(service)?;
                let got = self
                    .system
                    .read(|s| s.sdtn().service_path(&id))
                    .1
                    .map_err(|e| e.to_string())?;
                if &got != path {
                    let show = |v: &[Identifier]| v.iter().map(Identifier::render).collect::<Vec<_>>().join(",");
                    return Err(format!("path of {id} is [{}], expected [{}]", show(&got), show(path)));
                }
            }
            Predicate::CapacityEquals { link, mbps } => {
                let topo = self.system.topology(AbstractionLevel::Full, None).1;
                let got = topo
                    .graph
                    .link(link)
                    .map(|l| l.te.capacity_mbps)
                    .ok_or_else(|| format!("unknown link {link}"))?;
                if got != *mbps {
                    return Err(format!("capacity of {link} is {got}, expected {mbps}"));
                }
            }
        }
        Ok(())
    }
}

/// Runs every step in order. A failing step stops the run and captures a
/// state dump; provisioning failures are outcomes, not step failures.
pub fn run_scenario(system: &System, scenario: &ScenarioFile) -> Result<ScenarioReport, ScenarioError> {
    scenario.validate()?;
    let known: BTreeSet<Identifier> = system.services().1.into_iter().map(|s| s.id).collect();
    let blocked_before = system.sdtn().blocked_requests().len();
    let latency_mark = system.latency_count();
    let mut run = Run {
        system,
        initial_ledgers: system.ledgers(),
        aliases: BTreeMap::new(),
    };
    let mut outcomes = Vec::new();
    let mut failed = None;
    for step in &scenario.steps {
        match run.execute(step) {
            Ok(o) => outcomes.push(o),
            Err(cause) => {
                outcomes.push(StepOutcome {
                    id: step.id.clone(),
                    action: step.action.name().into(),
                    ok: false,
                    code: Some(ErrorCode::StepFailed),
                    detail: cause.clone(),
                });
                failed = Some((step.id.clone(), cause));
                break;
            }
        }
    }
    let services: Vec<_> = system.services().1.into_iter().filter(|s| !known.contains(&s.id)).collect();
    let blocked = system.sdtn().blocked_requests().len() - blocked_before;
    let metrics = RunMetrics::from_logs(&services, blocked as u64, system.latencies_since(latency_mark));
    let state_dump = failed.as_ref().map(|_| {
        serde_json::json!({
            "state_version": system.state_version(),
            "snapshot": system.snapshot(),
            "services": services,
            "audit": system.audit().violations,
        })
    });
    let (failed_step, failure) = failed.unzip();
    Ok(ScenarioReport {
        metrics,
        outcomes,
        failed_step,
        failure,
        state_dump,
    })
}
