use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use romlab_cli::config::load;
use romlab_cli::{cmd_eval_ctrl, cmd_eval_pred, cmd_gen_data, cmd_modes, cmd_train, cmd_train_ctrl, Overrides};

#[derive(Parser)]
#[command(name = "romlab", version, about = "Reduced-order modeling and control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed (evaluation: restricts to this seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the training and test datasets.
    GenData(Common),
    /// Fit a DMDc, LAROM or DeepROM model.
    Train(Common),
    /// Train DeepROC or compute the DMDc+LQR baseline.
    TrainCtrl(Common),
    /// Recursive-prediction NMSE on the test set.
    EvalPred(Common),
    /// Closed-loop stabilization runs.
    EvalCtrl(Common),
    /// Export and pair the dynamic modes of two linear models.
    Modes(Common),
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (c, run): (&Common, fn(&Common, &Overrides) -> Result<PathBuf>) = match &cli.command {
        Command::GenData(c) => (c, |c, o| cmd_gen_data(load(c.config.as_deref())?, o)),
        Command::Train(c) => (c, |c, o| cmd_train(load(c.config.as_deref())?, o)),
        Command::TrainCtrl(c) => (c, |c, o| cmd_train_ctrl(load(c.config.as_deref())?, o)),
        Command::EvalPred(c) => (c, |c, o| cmd_eval_pred(load(c.config.as_deref())?, o)),
        Command::EvalCtrl(c) => (c, |c, o| cmd_eval_ctrl(load(c.config.as_deref())?, o)),
        Command::Modes(c) => (c, |c, o| cmd_modes(load(c.config.as_deref())?, o)),
    };
    let ov = Overrides { seed: c.seed, out: c.out.clone() };
    let dir = run(c, &ov)?;
    println!("{}", dir.display());
    Ok(())
}
