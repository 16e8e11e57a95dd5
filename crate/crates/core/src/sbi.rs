// SPDX-License-Identifier: Apache-2.0

//! Southbound access used by the domain controllers. Native devices are
//! driven through their datastore; legacy devices through the mediator. The
//! controllers cannot tell the two apart.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::config::{ConfigTree, Edit, EditOp};
use crate::device::{CommitId, DatastoreKind, DeviceError, DevicePlane, SessionId, VendorProfile};
use crate::mediation::{MediationError, Mediator};
use crate::model::Identifier;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SbiError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Mediation(#[from] MediationError),
}

impl SbiError {
    /// Whether the failure happened at commit time (vs. while staging).
    pub fn is_commit_failure(&self) -> bool {
        matches!(
            self,
            SbiError::Device(DeviceError::ValidationFailed(_))
                | SbiError::Mediation(
                    MediationError::ValidationFailed(_)
                        | MediationError::LegacyRejected { .. }
                        | MediationError::CompensationFailed { .. }
                )
        )
    }
}

pub struct Southbound {
    plane: Arc<DevicePlane>,
    mediator: Arc<Mediator>,
}

impl Southbound {
    pub fn new(plane: Arc<DevicePlane>, mediator: Arc<Mediator>) -> Self {
        Self { plane, mediator }
    }

    pub fn plane(&self) -> &Arc<DevicePlane> {
        &self.plane
    }

    pub fn mediator(&self) -> &Arc<Mediator> {
        &self.mediator
    }

    fn legacy(&self, dev: &Identifier) -> Result<bool, SbiError> {
        Ok(self.plane.descriptor(dev)?.vendor_profile == VendorProfile::Legacy)
    }

    pub fn open(&self, dev: &Identifier) -> Result<SessionId, SbiError> {
        if self.legacy(dev)? {
            Ok(self.mediator.open(dev)?)
        } else {
            Ok(self.plane.open_session(dev)?)
        }
    }

    pub fn edit(&self, dev: &Identifier, session: SessionId, edits: &[Edit]) -> Result<(), SbiError> {
        if self.legacy(dev)? {
            Ok(self.mediator.mediate_edit(dev, session, edits)?)
        } else {
            Ok(self.plane.edit_candidate(dev, session, edits)?)
        }
    }

    pub fn commit(&self, dev: &Identifier, session: SessionId) -> Result<CommitId, SbiError> {
        if self.legacy(dev)? {
            Ok(self.mediator.mediate_commit(dev, session)?)
        } else {
            Ok(self.plane.commit(dev, session)?)
        }
    }

    pub fn close(&self, dev: &Identifier, session: SessionId) -> Result<(), SbiError> {
        if self.legacy(dev)? {
            Ok(self.mediator.close(dev, session)?)
        } else {
            Ok(self.plane.close_session(dev, session)?)
        }
    }

    pub fn running(&self, dev: &Identifier) -> Result<ConfigTree, SbiError> {
        if self.legacy(dev)? {
            Ok(self.mediator.mediate_read(dev)?)
        } else {
            Ok(self.plane.get_config(dev, DatastoreKind::Running)?)
        }
    }

    pub fn candidate(&self, dev: &Identifier) -> Result<ConfigTree, SbiError> {
        if self.legacy(dev)? {
            Ok(self.mediator.candidate(dev)?)
        } else {
            Ok(self.plane.get_config(dev, DatastoreKind::Candidate)?)
        }
    }

    /// Opens a session, applies `edits`, commits and closes. Returns the undo
    /// edits for the touched paths.
    pub fn apply(&self, dev: &Identifier, edits: &[Edit]) -> Result<Vec<Edit>, SbiError> {
        let mut txn = ConfigTxn::default();
        txn.stage(self, dev, edits)?;
        let applied = txn.commit(self)?;
        Ok(applied.undo.into_values().next().unwrap_or_default())
    }
}

struct Staged {
    session: SessionId,
    undo: Vec<Edit>,
    touched: Vec<String>,
}

/// Multi-device staged change. Sessions (and therefore device locks) are held
/// from the first [`stage`](ConfigTxn::stage) until commit or abort.
#[derive(Default)]
pub struct ConfigTxn {
    staged: BTreeMap<Identifier, Staged>,
    order: Vec<Identifier>,
}

/// Undo information for a committed [`ConfigTxn`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedChanges {
    /// Per device, the edits restoring every touched path to its prior value.
    pub undo: BTreeMap<Identifier, Vec<Edit>>,
}

impl AppliedChanges {
    pub fn is_empty(&self) -> bool {
        self.undo.is_empty()
    }

    pub fn merge(&mut self, other: AppliedChanges) {
        for (dev, mut edits) in other.undo {
            self.undo.entry(dev).or_default().append(&mut edits);
        }
    }
}

impl ConfigTxn {
    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn devices(&self) -> &[Identifier] {
        &self.order
    }

    pub fn stage(&mut self, sbi: &Southbound, dev: &Identifier, edits: &[Edit]) -> Result<(), SbiError> {
        if !self.staged.contains_key(dev) {
            let session = sbi.open(dev)?;
            self.staged.insert(
                dev.clone(),
                Staged {
                    session,
                    undo: Vec::new(),
                    touched: Vec::new(),
                },
            );
            self.order.push(dev.clone());
        }
        let running = sbi.running(dev)?;
        let st = self.staged.get_mut(dev).expect("inserted above");
        sbi.edit(dev, st.session, edits)?;
        for e in edits {
            if st.touched.contains(&e.path) {
                continue;
            }
            st.touched.push(e.path.clone());
            st.undo.push(match running.get(&e.path) {
                Some(v) => Edit::set(e.path.clone(), v.clone()),
                None => Edit::delete(e.path.clone()),
            });
        }
        Ok(())
    }

    /// Commits every device in staging order. If one fails, already committed
    /// devices are reverted and all sessions closed before returning the error.
    pub fn commit(self, sbi: &Southbound) -> Result<AppliedChanges, SbiError> {
        let mut done = AppliedChanges::default();
        let mut result = Ok(());
        for dev in &self.order {
            let st = &self.staged[dev];
            match sbi.commit(dev, st.session) {
                Ok(_) => {
                    done.undo.insert(dev.clone(), st.undo.clone());
                }
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        for dev in &self.order {
            let _ = sbi.close(dev, self.staged[dev].session);
        }
        match result {
            Ok(()) => Ok(done),
            Err(e) => {
                revert(sbi, &done)?;
                Err(e)
            }
        }
    }

    /// Drops staged changes and releases every session.
    pub fn abort(self, sbi: &Southbound) {
        for dev in &self.order {
            let _ = sbi.close(dev, self.staged[dev].session);
        }
    }
}

/// Applies undo edits, device by device in reverse order.
pub fn revert(sbi: &Southbound, applied: &AppliedChanges) -> Result<(), SbiError> {
    let mut first_err = None;
    for (dev, undo) in applied.undo.iter().rev() {
        if undo.is_empty() {
            continue;
        }
        // undo lists are built first-touch, so later deletes never shadow earlier sets
        let mut edits: Vec<Edit> = undo.iter().filter(|e| e.op == EditOp::Delete).cloned().collect();
        edits.extend(undo.iter().filter(|e| e.op == EditOp::Set).cloned());
        if let Err(e) = sbi.apply(dev, &edits) {
            first_err.get_or_insert(e);
        }
    }
    match first_err {
        None => Ok(()),
        Some(e) => Err(e),
    }
}
