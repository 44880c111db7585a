//! Seeded synthetic corpora for smoke tests and demos.
//!
//! Each document is random lowercase text in which, at every position, a
//! class-specific motif is inserted with probability `motif_rate` instead of
//! a random character. Documents get a coarse label in `task1` (`NOT` or
//! `HOF`) and a fine label in `task2` (`NONE` for `NOT`, otherwise one of
//! `HATE`, `OFFN`, `PRFN` in rotation).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, Document};

const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz     ";
const NOT_MOTIFS: [&str; 3] = ["qzx", "vvk", "jjw"];
const HOF_MOTIFS: [&str; 3] = ["xqj", "kzv", "wvq"];
const FINE: [&str; 3] = ["HATE", "OFFN", "PRFN"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_docs: usize,
    /// Share of `HOF` documents.
    pub hof_share: f64,
    pub motif_rate: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_docs: 600,
            hof_share: 0.4,
            motif_rate: 0.3,
            min_len: 40,
            max_len: 120,
            seed: 42,
        }
    }
}

pub fn generate(opts: &SynthSpec) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n_hof = (opts.n_docs as f64 * opts.hof_share).round() as usize;
    let mut docs = Vec::with_capacity(opts.n_docs);
    for i in 0..opts.n_docs {
        let hof = i < n_hof;
        let motifs = if hof { &HOF_MOTIFS } else { &NOT_MOTIFS };
        let target = rng.gen_range(opts.min_len..=opts.max_len);
        let mut text = String::with_capacity(target + 4);
        while text.len() < target {
            if rng.gen_bool(opts.motif_rate) {
                text.push_str(motifs[rng.gen_range(0..motifs.len())]);
            } else {
                text.push(ALPHABET[rng.gen_range(0..ALPHABET.len())] as char);
            }
        }
        if rng.gen_bool(0.5) {
            text = text.to_uppercase();
        }
        let (coarse, fine) = if hof {
            ("HOF", FINE[i % FINE.len()])
        } else {
            ("NOT", "NONE")
        };
        let labels = BTreeMap::from([
            ("task1".to_string(), coarse.to_string()),
            ("task2".to_string(), fine.to_string()),
        ]);
        docs.push(Document {
            id: format!("syn{i:05}"),
            text,
            labels,
        });
    }
    Dataset::new(docs, vec!["task1".into(), "task2".into()]).expect("generated corpus is valid")
}
