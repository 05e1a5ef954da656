use std::path::PathBuf;

use clap::Args;
use histexpr::features::{aggregate, write_slide_features, SlideFeature};

use super::{input, read_patch_sets, Env};
use crate::error::{Context, Result};

pub const OUTPUT: &str = "slide_features.csv";

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Directory of `.h2rf` patch-feature files.
    #[arg(long)]
    pub features: Option<PathBuf>,
}

pub fn run(env: &Env, args: &AggregateArgs) -> Result<()> {
    let dir = input(&args.features, &env.config.paths.features, "features")?;
    let sets = read_patch_sets(env, &dir)?;
    let slides: Vec<SlideFeature> = sets.iter().map(aggregate).collect();
    let mut buf = Vec::new();
    write_slide_features(&slides, &mut buf).context("formatting slide features")?;
    env.create_output_dir()?;
    let path = env.write(OUTPUT, buf)?;
    eprintln!("aggregated {} patients into {}", slides.len(), path.display());
    Ok(())
}
