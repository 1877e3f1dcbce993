use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use wac::classifiers::Backend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Logreg,
    Mlp,
    Tree,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Logreg => Backend::LogReg,
            BackendArg::Mlp => Backend::Mlp,
            BackendArg::Tree => Backend::Tree,
        }
    }
}

/// Words-as-classifiers: synthetic scenes, per-word classifiers, composition and
/// coefficient embeddings.
#[derive(Debug, Parser)]
#[command(name = "wac", version)]
pub struct Cli {
    /// TOML configuration; command-line flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed for generation, sampling, initialization and t-SNE.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,

    /// logreg-summed, mlp-summed, mlp-adjnoun-extended, mlp-adjnoun-warmstart,
    /// mlp-extended, tree-summed, tree-graft or relational.
    #[arg(long, global = true)]
    pub strategy: Option<String>,

    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory with train/dev/test splits.
    Gen,

    /// Train word classifiers (and relational ones for the relational strategy).
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },

    /// Accuracy report over a split, one row per strategy.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// train, dev or test.
        #[arg(long)]
        split: Option<String>,
    },

    /// Resolve one expression against one scene.
    Resolve {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Scene as one JSON object in the scenes-file format; `-` reads standard input.
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        expression: String,
        /// Dataset directory; its train split is needed by warm-start composition.
        #[arg(long)]
        data: Option<PathBuf>,
    },

    /// Write the hidden-layer embedding of every word of an MLP model.
    Embed {
        #[arg(long)]
        model: Option<PathBuf>,
    },

    /// Spearman correlation between embedding cosines and word-pair judgements.
    Sim {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Pretrained vectors to score alongside (and combined with) the model's.
        #[arg(long)]
        external: Option<PathBuf>,
    },

    /// t-SNE projection of the word embeddings followed by DBSCAN.
    Cluster {
        #[arg(long)]
        model: Option<PathBuf>,
    },

    /// Word probability along a sweep of synthetic color patches.
    Probe {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Words to probe; defaults to every color term of the generator lexicon.
        #[arg(long = "word")]
        words: Vec<String>,
        #[arg(long)]
        samples: Option<usize>,
        /// Dataset directory whose generator settings define the feature layout.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}
