use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use sentqual_annotate::Config;

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Service config file (key=value lines)
    #[arg(long, value_name = "PATH", env = "SENTQUAL_CONFIG")]
    pub config: PathBuf,
}

pub fn run(args: ServeArgs) -> Result<()> {
    let config = Config::load(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    sentqual_annotate::serve(&config, |addr| eprintln!("serve: listening on http://{addr}"))?;
    Ok(())
}
