//! Height-triggered configuration changes that every node applies at the
//! same block, so adding or removing a stablecoin never forks the chain.

use serde::Serialize;
use thiserror::Error;

use crate::ledger::LedgerState;
use crate::types::{ChainConfig, CurrencyUnit, UpgradeAction};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum UpgradeError {
    #[error("unit {0} still has supply; removal needs force")]
    RemoveNonEmptyUnit(CurrencyUnit),
    #[error("cannot remove the reference unit {0}")]
    RemoveReferenceUnit(CurrencyUnit),
    #[error("unit {0} is already active")]
    AlreadyActive(CurrencyUnit),
    #[error("unit {0} is not active")]
    NotActive(CurrencyUnit),
}

/// Result of one scheduled action at its height.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UpgradeEvent {
    pub height: u64,
    pub action: UpgradeAction,
    pub outcome: Result<(), UpgradeError>,
}

/// Returns the config in force for block `height`. Actions scheduled for that
/// exact height are applied in list order; refused actions leave the config as is.
pub fn apply_scheduled_upgrade(
    config: &ChainConfig,
    height: u64,
    state: &LedgerState,
) -> (ChainConfig, Vec<UpgradeEvent>) {
    let mut next = config.clone();
    let mut events = Vec::new();
    for up in config.scheduled_upgrades.iter().filter(|u| u.height == height) {
        let outcome = apply_action(&mut next, &up.action, state);
        events.push(UpgradeEvent { height, action: up.action.clone(), outcome });
    }
    (next, events)
}

fn apply_action(config: &mut ChainConfig, action: &UpgradeAction, state: &LedgerState) -> Result<(), UpgradeError> {
    match action {
        UpgradeAction::AddUnit { unit, committee } => {
            if config.has_unit(*unit) {
                return Err(UpgradeError::AlreadyActive(*unit));
            }
            config.units.push(*unit);
            config.committees.entry(*unit).or_insert_with(|| committee.clone());
            Ok(())
        }
        UpgradeAction::RemoveUnit { unit, force } => {
            if *unit == config.reference_unit {
                return Err(UpgradeError::RemoveReferenceUnit(*unit));
            }
            if !config.has_unit(*unit) {
                return Err(UpgradeError::NotActive(*unit));
            }
            if !force && !state.total_supply(*unit).is_zero() {
                return Err(UpgradeError::RemoveNonEmptyUnit(*unit));
            }
            config.units.retain(|u| u != unit);
            Ok(())
        }
    }
}
