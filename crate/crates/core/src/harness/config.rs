use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::experiment::ExperimentConfig;
use crate::{Error, Result};

/// Every accepted key. `seed` is read by single-run commands;
/// [`ConfigFile::apply`] handles the rest.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "models",
    "regularizers",
    "seeds",
    "test_ratio",
    "k_init",
    "ratio_cutoff",
    "k_decay",
    "k_min",
    "max_iterations",
    "global_graph",
    "n_min",
    "n_max",
    "min_df",
    "nb_alpha",
    "lr_lambda",
    "lr_learning_rate",
    "lr_epochs",
    "anon_k",
    "embedding_dim",
    "hidden_dim",
    "batch_size",
    "epochs",
    "learning_rate",
    "clip_norm",
    "max_len",
    "max_vocab",
    "input_dropout",
    "output_dropout",
    "variational_dropout",
    "adadrop_threshold",
    "adadrop_p_max",
    "schedule_every_step",
];

/// `key = value` lines; `#` starts a comment, dashes in keys read as
/// underscores, list values are comma separated.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    path: PathBuf,
    values: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.into(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(err(format!("unknown key {key:?}")));
            }
            if values.insert(key.clone(), (i + 1, value.trim().to_string())).is_some() {
                return Err(err(format!("duplicate key {key:?}")));
            }
        }
        Ok(ConfigFile {
            path: path.into(),
            values,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e: T::Err| Error::Parse {
                path: self.path.clone(),
                line: *line,
                message: format!("{key}: {e}"),
            }),
        }
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse().map_err(|e: T::Err| Error::Parse {
                        path: self.path.clone(),
                        line: *line,
                        message: format!("{key}: {e}"),
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    /// Overwrite the fields of `cfg` named in the file. Feature settings
    /// apply to the lexicon split and the models alike.
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        macro_rules! set {
            ($key:literal, $($field:tt)+) => {
                if let Some(v) = self.get($key)? {
                    $($field)+ = v;
                }
            };
        }
        if let Some(v) = self.get_list("models")? {
            cfg.models = v;
        }
        if let Some(v) = self.get_list("regularizers")? {
            cfg.regularizers = v;
        }
        if let Some(v) = self.get_list("seeds")? {
            cfg.seeds = v;
        }
        set!("test_ratio", cfg.test_ratio);
        set!("k_init", cfg.lexicon.k_init);
        set!("ratio_cutoff", cfg.lexicon.ratio_cutoff);
        set!("k_decay", cfg.lexicon.k_decay);
        set!("k_min", cfg.lexicon.k_min);
        set!("max_iterations", cfg.lexicon.max_iterations);
        set!("global_graph", cfg.lexicon.global_graph);
        set!("n_min", cfg.settings.features.n_min);
        set!("n_max", cfg.settings.features.n_max);
        set!("min_df", cfg.settings.features.min_df);
        cfg.lexicon.features = cfg.settings.features;
        set!("nb_alpha", cfg.settings.nb_alpha);
        set!("lr_lambda", cfg.settings.lr.lambda);
        set!("lr_learning_rate", cfg.settings.lr.learning_rate);
        set!("lr_epochs", cfg.settings.lr.epochs);
        set!("anon_k", cfg.settings.anon_k);
        let n = &mut cfg.settings.neural;
        set!("embedding_dim", n.embedding_dim);
        set!("hidden_dim", n.hidden_dim);
        set!("batch_size", n.batch_size);
        set!("epochs", n.epochs);
        set!("learning_rate", n.optimizer.learning_rate);
        set!("clip_norm", n.optimizer.clip_norm);
        set!("max_len", n.max_len);
        set!("max_vocab", n.max_vocab);
        set!("input_dropout", n.dropout.input);
        set!("output_dropout", n.dropout.output);
        set!("variational_dropout", n.dropout.variational);
        set!("adadrop_threshold", n.adadrop_threshold);
        set!("adadrop_p_max", n.adadrop_p_max);
        set!("schedule_every_step", n.schedule_every_step);
        Ok(())
    }
}
