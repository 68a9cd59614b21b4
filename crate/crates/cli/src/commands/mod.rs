pub mod corpus;
pub mod evaluate;
pub mod ingest;
pub mod label;
pub mod model;
pub mod sample;
pub mod serve;

use clap::Args;
use sentqual_core::reverts::RevertConfig;

/// Revert filtering flags shared by `label` and `sample`.
#[derive(Debug, Args)]
pub struct RevertArgs {
    /// Later revisions searched for an identity revert
    #[arg(long, default_value_t = 15)]
    pub revert_window: usize,
    /// Time horizon for a revert, in hours
    #[arg(long, default_value_t = 48)]
    pub revert_horizon_hours: i64,
    /// Keep edits that revert others (reverted edits are always dropped)
    #[arg(long)]
    pub keep_reverting: bool,
}

impl RevertArgs {
    pub fn config(&self) -> RevertConfig {
        RevertConfig {
            window: self.revert_window,
            horizon: chrono::Duration::hours(self.revert_horizon_hours),
            exclude_reverting: !self.keep_reverting,
        }
    }
}
