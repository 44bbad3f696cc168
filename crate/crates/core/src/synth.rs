//! Synthetic web-table corpus for demos and end-to-end tests.
//!
//! Tables come in families that share a title stem, a column schema and a
//! cell vocabulary. Each table adds its own entity words to the title and a
//! small private vocabulary to its cells. A pool of filler words common to
//! every family is mixed into cells so raw bag-of-words similarity is noisy.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::seed::{self, Rng};
use crate::table::Table;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_tables: usize,
    pub n_families: usize,
    pub seed: u64,
    pub min_rows: usize,
    pub max_rows: usize,
    /// Share of cells drawn from the table's private vocabulary.
    pub private_rate: f64,
    /// Share of cells drawn from the cross-family filler pool.
    pub filler_rate: f64,
    /// Share of tables with one numeric column.
    pub numeric_rate: f64,
    /// Words per family cell vocabulary.
    pub family_vocab: usize,
    pub filler_vocab: usize,
    pub id_prefix: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_tables: 1000,
            n_families: 40,
            seed: 0,
            min_rows: 4,
            max_rows: 10,
            private_rate: 0.35,
            filler_rate: 0.35,
            numeric_rate: 0.3,
            family_vocab: 60,
            filler_vocab: 30,
            id_prefix: "tbl".into(),
        }
    }
}

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr", "ch"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

/// Pronounceable pseudo-word of two to three syllables.
fn word(rng: &mut Rng) -> String {
    let n = rng.random_range(2..=3);
    (0..n).map(|_| format!("{}{}", ONSETS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap())).collect()
}

fn words(rng: &mut Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| word(rng)).collect()
}

struct Family {
    stem: Vec<String>,
    schema: Vec<String>,
    vocab: Vec<String>,
}

/// Deterministic corpus of `cfg.n_tables` tables with ids
/// `<prefix>00000`, `<prefix>00001`, ...
pub fn synth_corpus(cfg: &SynthConfig) -> Vec<Table> {
    let mut rng = seed::rng(seed::derive(cfg.seed, 0));
    let filler = words(&mut rng, cfg.filler_vocab.max(1));
    let families: Vec<Family> = (0..cfg.n_families.max(1))
        .map(|_| Family { stem: words(&mut rng, 2), schema: words(&mut rng, 8), vocab: words(&mut rng, cfg.family_vocab.max(1)) })
        .collect();
    (0..cfg.n_tables)
        .map(|i| {
            let mut rng = seed::rng(seed::derive(cfg.seed, i as u64 + 1));
            let fam = &families[rng.random_range(0..families.len())];
            let entity = words(&mut rng, 2);
            let private = words(&mut rng, 6);
            let n_cols = rng.random_range(3..=6);
            let mut cols: Vec<usize> = rand::seq::index::sample(&mut rng, fam.schema.len(), n_cols).into_vec();
            cols.sort_unstable();
            let numeric_col = (rng.random_bool(cfg.numeric_rate)).then(|| rng.random_range(0..n_cols));
            let n_rows = rng.random_range(cfg.min_rows..=cfg.max_rows.max(cfg.min_rows));
            let rows = (0..n_rows)
                .map(|_| {
                    (0..n_cols)
                        .map(|j| {
                            if Some(j) == numeric_col {
                                return rng.random_range(1..100_000).to_string();
                            }
                            let u: f64 = rng.random();
                            let pool = if u < cfg.private_rate {
                                &private
                            } else if u < cfg.private_rate + cfg.filler_rate {
                                &filler
                            } else {
                                &fam.vocab
                            };
                            pool.choose(&mut rng).unwrap().clone()
                        })
                        .collect()
                })
                .collect();
            let mut title = fam.stem.clone();
            title.extend(entity);
            title.shuffle(&mut rng);
            let names = cols.iter().map(|&c| fam.schema[c].clone()).collect();
            Table::new(format!("{}{i:05}", cfg.id_prefix), title.join(" "), "", names, rows).expect("synthetic table is well formed")
        })
        .collect()
}
