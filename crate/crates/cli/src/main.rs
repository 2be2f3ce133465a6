use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use omniforge::pipeline::{load_config, parse_cue_list, run_annotation, PipelineConfig, PipelineError};

/// Render multi-view, multi-cue annotations of a triangle mesh.
#[derive(Debug, Parser)]
#[command(name = "annotate", version)]
struct Args {
    /// OBJ or PLY mesh.
    #[arg(long)]
    mesh: PathBuf,
    /// PNG texture; overrides any texture on the mesh.
    #[arg(long)]
    texture: Option<PathBuf>,
    /// Pipeline config (`key: value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated cue names; overrides the config.
    #[arg(long, value_delimiter = ',')]
    cues: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "OMNIFORGE_JOBS")]
    jobs: Option<usize>,
    /// Continue an interrupted run in the same output directory.
    #[arg(long)]
    resume: bool,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

fn effective_config(args: &Args) -> Result<PipelineConfig, PipelineError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| PipelineError::Config(format!("cannot read config {}: {e}", args.config.display())))?;
    let mut config = load_config(&text)?;
    config.mesh = Some(args.mesh.clone());
    config.output_dir = Some(args.out.clone());
    if let Some(t) = &args.texture {
        config.texture = Some(t.clone());
    }
    if let Some(names) = &args.cues {
        config.cues = parse_cue_list(names)?;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(j) = args.jobs {
        config.jobs = j;
    }
    config.resume |= args.resume;
    config.check_values()?;
    Ok(config)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let result = effective_config(&args).and_then(|config| {
        if args.print_config {
            print!("{}", config.to_text());
            return Ok(());
        }
        let manifest = run_annotation(&config)?;
        log::info!(
            "done: {} views, config hash {}",
            manifest.views.len(),
            manifest.config_hash
        );
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
