use thiserror::Error;

use crate::encoding::Decode;
use crate::governance::GovernanceBody;
use crate::ledger::gas_used_for;
use crate::types::{ChainConfig, CurrencyUnit, TaggedTransaction, TxKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatelessError {
    #[error("unknown currency unit {0}")]
    UnknownUnit(CurrencyUnit),
    #[error("malformed signature")]
    MalformedSignature,
    #[error("gas limit {limit} exceeds block gas limit {block}")]
    GasLimitExceeded { limit: u64, block: u64 },
    #[error("gas limit {limit} below intrinsic gas {required}")]
    GasLimitTooLow { limit: u64, required: u64 },
    #[error("malformed body: {0}")]
    MalformedBody(&'static str),
}

/// Checks that need no account state.
pub fn validate_stateless(tx: &TaggedTransaction, config: &ChainConfig) -> Result<(), StatelessError> {
    if !config.has_unit(tx.unit) {
        return Err(StatelessError::UnknownUnit(tx.unit));
    }
    if !tx.signature_well_formed() {
        return Err(StatelessError::MalformedSignature);
    }
    if tx.gas_limit > config.block_gas_limit {
        return Err(StatelessError::GasLimitExceeded { limit: tx.gas_limit, block: config.block_gas_limit });
    }
    let required = gas_used_for(tx);
    if tx.gas_limit < required {
        return Err(StatelessError::GasLimitTooLow { limit: tx.gas_limit, required });
    }
    match tx.kind {
        TxKind::Transfer => {
            if tx.recipient.is_none() {
                return Err(StatelessError::MalformedBody("transfer without recipient"));
            }
            if !tx.payload.is_empty() {
                return Err(StatelessError::MalformedBody("transfer with payload"));
            }
        }
        TxKind::Payload => {}
        TxKind::Proposal | TxKind::Vote => {
            if tx.recipient.is_some() || !tx.transfer_amount.is_zero() {
                return Err(StatelessError::MalformedBody("governance tx carries recipient or value"));
            }
            let body = GovernanceBody::decode(&tx.payload)
                .map_err(|_| StatelessError::MalformedBody("undecodable governance body"))?;
            let matches = matches!(
                (tx.kind, &body),
                (TxKind::Proposal, GovernanceBody::Propose { .. }) | (TxKind::Vote, GovernanceBody::Vote { .. })
            );
            if !matches {
                return Err(StatelessError::MalformedBody("governance body does not match kind"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::SecretKey;
    use crate::encoding::Encode;
    use crate::governance::ProposalAction;
    use crate::types::{Address, Amount, Signature, TxEnvelope};

    fn transfer(unit: &str, gas_limit: u64) -> TaggedTransaction {
        let env = TxEnvelope {
            sender: Address::zero(),
            recipient: Some(Address([7; 20])),
            nonce: 0,
            tip: Amount::ZERO,
            gas_limit,
            transfer_amount: Amount::ZERO,
            payload: vec![],
            kind: TxKind::Transfer,
            signature: Signature([0; 64]),
        }
        .sign(&SecretKey::from_name("alice"));
        TaggedTransaction::from_envelope(env, CurrencyUnit::new(unit).unwrap(), Amount::giga(1))
    }

    #[test]
    fn minimal_transfer_is_ok() {
        assert_eq!(validate_stateless(&transfer("USD", 21_000), &ChainConfig::example(4)), Ok(()));
    }

    #[test]
    fn unknown_unit() {
        let err = validate_stateless(&transfer("JPY", 21_000), &ChainConfig::example(4)).unwrap_err();
        assert_eq!(err, StatelessError::UnknownUnit(CurrencyUnit::new("JPY").unwrap()));
    }

    #[test]
    fn gas_limit_boundary() {
        let config = ChainConfig::example(4);
        let at = transfer("USD", config.block_gas_limit);
        assert!(validate_stateless(&at, &config).is_ok());
        let over = transfer("USD", config.block_gas_limit + 1);
        assert!(matches!(validate_stateless(&over, &config), Err(StatelessError::GasLimitExceeded { .. })));
        let under = transfer("USD", 20_999);
        assert!(matches!(validate_stateless(&under, &config), Err(StatelessError::GasLimitTooLow { .. })));
    }

    #[test]
    fn malformed_signature() {
        let mut tx = transfer("USD", 21_000);
        tx.transfer_amount = Amount::tokens(5);
        assert_eq!(validate_stateless(&tx, &ChainConfig::example(4)), Err(StatelessError::MalformedSignature));
    }

    #[test]
    fn governance_body_must_parse_and_match_kind() {
        let key = SecretKey::from_name("alice");
        let mk = |kind, payload: Vec<u8>| {
            let env = TxEnvelope {
                sender: key.address(),
                recipient: None,
                nonce: 0,
                tip: Amount::ZERO,
                gas_limit: 50_000,
                transfer_amount: Amount::ZERO,
                payload,
                kind,
                signature: Signature([0; 64]),
            }
            .sign(&key);
            TaggedTransaction::from_envelope(env, CurrencyUnit::new("USD").unwrap(), Amount::giga(1))
        };
        let config = ChainConfig::example(4);
        let body = GovernanceBody::Propose {
            action: ProposalAction::SetQuorumSize(2),
            evidence: vec![],
        }
        .encode();
        assert_eq!(validate_stateless(&mk(TxKind::Proposal, body.clone()), &config), Ok(()));
        assert!(matches!(
            validate_stateless(&mk(TxKind::Vote, body), &config),
            Err(StatelessError::MalformedBody(_))
        ));
        assert!(matches!(
            validate_stateless(&mk(TxKind::Proposal, vec![9, 9]), &config),
            Err(StatelessError::MalformedBody(_))
        ));
    }
}
