//! Multi-currency fee accounting, oracle-synchronized exchange rates,
//! per-unit stablecoin governance and a BFT consensus simulator.

pub mod byzantine;
pub mod consensus;
pub mod crypto;
pub mod encoding;
pub mod fees;
pub mod governance;
pub mod harness;
pub mod ledger;
pub mod mempool;
pub mod network;
pub mod node;
pub mod oracle;
pub mod rpc;
pub mod types;
pub mod upgrade;
pub mod validation;
pub mod world;

pub use primitive_types::U256;
