//! Adaptive word dropout driven by embedding-gradient norms.
//!
//! For every vocabulary word `w` the trainer adds the L2 norm of its
//! embedding-gradient row to `Ã(w)` after each optimizer step. The running
//! average `A(w) = Ã(w) / steps` then sets a per-word dropout probability
//! `P_d(w) = clamp(1 - sqrt(t / A(w)), 0, p_max)`. Words whose embeddings are
//! pushed hard, typically strong class keywords, are hidden more often.

use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::neural::{GradientBuffer, Mode};
use crate::{Error, Result};

/// Typical thresholds for `t`.
pub const DEFAULT_THRESHOLD: f64 = 1e-3;
pub const LOW_THRESHOLD: f64 = 1e-4;
/// Upper bound on any word's dropout probability.
pub const DEFAULT_P_MAX: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientNormStats {
    /// `Ã(w)` indexed by vocabulary id.
    pub accumulated: Vec<f64>,
    pub optim_steps: u64,
}

impl GradientNormStats {
    pub fn new(vocab_size: usize) -> Self {
        GradientNormStats {
            accumulated: vec![0.0; vocab_size],
            optim_steps: 0,
        }
    }

    /// Record one optimizer step from its (unclipped) gradient.
    pub fn accumulate(&mut self, grads: &GradientBuffer) -> Result<()> {
        let mut norms = Vec::with_capacity(grads.embedding.len());
        for (&id, row) in &grads.embedding {
            let norm = row.dot(row).sqrt();
            if !norm.is_finite() {
                return Err(Error::NonFinite(format!("embedding gradient norm of word {id}")));
            }
            if id as usize >= self.accumulated.len() {
                return Err(Error::invalid(format!(
                    "word id {id} outside statistics of size {}",
                    self.accumulated.len()
                )));
            }
            norms.push((id as usize, norm));
        }
        for (id, norm) in norms {
            self.accumulated[id] += norm;
        }
        self.optim_steps += 1;
        Ok(())
    }

    /// `A(w)`; zero before the first step.
    pub fn average(&self, id: u32) -> f64 {
        if self.optim_steps == 0 {
            return 0.0;
        }
        self.accumulated[id as usize] / self.optim_steps as f64
    }

    pub fn averages(&self) -> Vec<f64> {
        (0..self.accumulated.len() as u32).map(|i| self.average(i)).collect()
    }
}

/// `clamp(1 - sqrt(t / a), 0, p_max)`, with zero for `a = 0`.
pub fn drop_probability(a: f64, t: f64, p_max: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    (1.0 - (t / a).sqrt()).clamp(0.0, p_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropoutSchedule {
    pub threshold: f64,
    pub p_max: f64,
    /// `P_d(w)` indexed by vocabulary id.
    pub probabilities: Vec<f64>,
}

impl DropoutSchedule {
    /// A schedule that never drops anything.
    pub fn inactive(vocab_size: usize, threshold: f64, p_max: f64) -> Self {
        DropoutSchedule {
            threshold,
            p_max,
            probabilities: vec![0.0; vocab_size],
        }
    }

    pub fn probability(&self, id: u32) -> f64 {
        self.probabilities.get(id as usize).copied().unwrap_or(0.0)
    }
}

pub fn dropout_probability(stats: &GradientNormStats, t: f64, p_max: f64) -> Result<DropoutSchedule> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("dropout threshold must be positive, got {t}")));
    }
    if !(0.0..1.0).contains(&p_max) {
        return Err(Error::invalid(format!("p_max must lie in [0, 1), got {p_max}")));
    }
    Ok(DropoutSchedule {
        threshold: t,
        p_max,
        probabilities: stats
            .averages()
            .into_iter()
            .map(|a| drop_probability(a, t, p_max))
            .collect(),
    })
}

/// Replace each token by the drop symbol with its scheduled probability.
pub fn apply_word_dropout<R: Rng + ?Sized>(
    ids: &[u32],
    schedule: &DropoutSchedule,
    mode: Mode,
    rng: &mut R,
) -> Vec<u32> {
    if mode == Mode::Eval {
        return ids.to_vec();
    }
    ids.iter()
        .map(|&id| {
            let p = schedule.probability(id);
            if p > 0.0 && rng.gen::<f64>() < p {
                Vocabulary::DROP
            } else {
                id
            }
        })
        .collect()
}

/// One inverted-dropout mask of length `dim`, to be shared by every
/// timestep of a sequence. `None` when no masking applies.
pub fn variational_mask<R: Rng + ?Sized>(dim: usize, rate: f64, mode: Mode, rng: &mut R) -> Option<Vec<f64>> {
    if mode == Mode::Eval || rate <= 0.0 {
        return None;
    }
    let keep = 1.0 - rate;
    Some(
        (0..dim)
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect(),
    )
}

/// Apply a shared mask to every row of an embedded sequence.
pub fn variational_embedding_dropout<R: Rng + ?Sized>(
    embedded: &[Vec<f64>],
    rate: f64,
    rng: &mut R,
    mode: Mode,
) -> Vec<Vec<f64>> {
    let dim = embedded.first().map_or(0, Vec::len);
    match variational_mask(dim, rate, mode, rng) {
        None => embedded.to_vec(),
        Some(mask) => embedded
            .iter()
            .map(|x| x.iter().zip(&mask).map(|(a, m)| a * m).collect())
            .collect(),
    }
}

/// TSV with one line per word: token, `Ã`, `A`, `P_d`; sorted by `P_d`
/// then `A`, both descending.
pub fn write_stats_tsv(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    stats: &GradientNormStats,
    schedule: &DropoutSchedule,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut order: Vec<u32> = (0..vocab.len() as u32).collect();
    order.sort_by(|&a, &b| {
        schedule
            .probability(b)
            .total_cmp(&schedule.probability(a))
            .then(stats.average(b).total_cmp(&stats.average(a)))
            .then(a.cmp(&b))
    });
    let write = || -> std::io::Result<()> {
        writeln!(out, "word\tacc_norm\tavg_norm\tp_drop")?;
        for id in order {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                vocab.token(id),
                stats.accumulated[id as usize],
                stats.average(id),
                schedule.probability(id)
            )?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Read back `(word, A, P_d)` from a stats TSV, in file order.
pub fn read_stats_tsv(path: impl AsRef<Path>) -> Result<Vec<(String, f64, f64)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split('\t').collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.into(),
                    line: i + 1,
                    message: e.to_string(),
                })
            };
            if cols.len() != 4 {
                return Err(Error::Parse {
                    path: path.into(),
                    line: i + 1,
                    message: format!("expected 4 columns, found {}", cols.len()),
                });
            }
            Ok((cols[0].to_string(), parse(cols[2])?, parse(cols[3])?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn buffer(rows: &[(u32, Vec<f64>)]) -> GradientBuffer {
        let mut g = GradientBuffer::zeros(1, 1, 1);
        g.embedding = rows.iter().map(|(i, r)| (*i, Array1::from(r.clone()))).collect::<BTreeMap<_, _>>();
        g
    }

    #[test]
    fn three_four_five() {
        let mut s = GradientNormStats::new(5);
        s.accumulate(&buffer(&[(3, vec![3.0, 4.0])])).unwrap();
        assert_eq!(s.accumulated[3], 5.0);
        assert_eq!(s.average(3), 5.0);
        s.accumulate(&buffer(&[(4, vec![1.0, 0.0])])).unwrap();
        assert_eq!(s.average(3), 2.5);
        assert_eq!(s.average(0), 0.0);
        assert_eq!(s.optim_steps, 2);
    }

    #[test]
    fn non_finite_rejected() {
        let mut s = GradientNormStats::new(2);
        assert!(s.accumulate(&buffer(&[(0, vec![f64::NAN])])).is_err());
        assert_eq!(s.optim_steps, 0);
    }

    #[test]
    fn formula_points() {
        let t = 1e-3;
        assert_eq!(drop_probability(t, t, 0.9), 0.0);
        assert_eq!(drop_probability(4.0 * t, t, 0.9), 0.5);
        assert!((drop_probability(100.0 * t, t, 0.9) - 0.9).abs() < 1e-12);
        assert_eq!(drop_probability(0.5 * t, t, 0.9), 0.0);
        assert_eq!(drop_probability(0.0, t, 0.9), 0.0);
        assert_eq!(drop_probability(1e9, t, 0.9), 0.9);
    }

    #[test]
    fn eval_is_identity() {
        let sched = DropoutSchedule { threshold: 1e-3, p_max: 0.9, probabilities: vec![0.9; 10] };
        let ids: Vec<u32> = (3..10).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(apply_word_dropout(&ids, &sched, Mode::Eval, &mut rng), ids);
        let none = DropoutSchedule::inactive(10, 1e-3, 0.9);
        assert_eq!(apply_word_dropout(&ids, &none, Mode::Train, &mut rng), ids);
    }

    #[test]
    fn shared_mask_across_timesteps() {
        let seq = vec![vec![1.0; 8]; 5];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = variational_embedding_dropout(&seq, 0.5, &mut rng, Mode::Train);
        for row in &out[1..] {
            assert_eq!(row, &out[0]);
        }
        assert!(out[0].iter().all(|&x| x == 0.0 || x == 2.0));
        assert_eq!(variational_embedding_dropout(&seq, 0.0, &mut rng, Mode::Train), seq);
    }

    #[test]
    fn tsv_round_trip() {
        let vocab = Vocabulary::from(vec!["<unk>".into(), "ANON".into(), "<drop>".into(), "great".into()]);
        let mut s = GradientNormStats::new(4);
        s.accumulate(&buffer(&[(3, vec![0.3, 0.4])])).unwrap();
        let sched = dropout_probability(&s, 1e-3, 0.9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stats.tsv");
        write_stats_tsv(&p, &vocab, &s, &sched).unwrap();
        let rows = read_stats_tsv(&p).unwrap();
        assert_eq!(rows[0].0, "great");
        assert_eq!(rows[0].1, 0.5);
        // A = 0.5 is far above t, so the cap applies
        assert_eq!(rows[0].2, 0.9);
    }
}
