//! Selective pair sets and metapixel canvases.
//!
//! Pair keys are row permutations of a Sylvester Hadamard matrix. Candidates
//! are sampled from a seeded stream and a greedy pass keeps the set whose worst
//! off-target interaction is smallest. Off-target interactions are scored
//! with whole-grid normalization, i.e. as a fraction of the full-alignment
//! force: under overlap normalization a single overlapping corner pixel
//! already reads as a perfect match, which says nothing about the force.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::{
    agnosticism_peak_with, interaction_map_with, ncc_at, Interaction, Normalization,
};
use crate::pattern::{
    complement, orthogonality_defect, permute_rows, sylvester_hadamard, Permutation, PixelGrid,
};

/// Normalization used for every off-target comparison in a pair set.
pub const PAIR_SCORE_NORMALIZATION: Normalization = Normalization::WholeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// Lock is the complement of the key.
    Attract,
    /// Lock is a copy of the key.
    Repel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub permutation: Permutation,
    pub key: PixelGrid,
    pub lock: PixelGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub pairs: Vec<Pair>,
    pub mode: PairMode,
    pub order: usize,
    pub candidates: usize,
    pub seed: u64,
    /// Worst |ncc| over within-pair misalignments and all cross-pair offsets.
    pub score: f64,
    /// Mean |ncc| over the same comparisons.
    pub mean_off_target: f64,
}

fn factorial_at_least(n: usize, bound: usize) -> bool {
    let mut f = 1usize;
    for i in 2..=n {
        f = f.saturating_mul(i);
        if f >= bound {
            return true;
        }
    }
    f >= bound
}

/// Distinct row permutations drawn in stream order; a shorter request is a prefix of a longer one.
fn sample_permutations(order: usize, count: usize, seed: u64) -> Vec<Permutation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = Permutation::random(order, &mut rng);
        if seen.insert(p.clone()) {
            out.push(p);
        }
    }
    out
}

struct Scores {
    /// Peak |ncc| of a key against its own lock away from alignment.
    within: Vec<f64>,
    /// Peak |ncc| between two different keys over all offsets.
    cross: Vec<Vec<f64>>,
}

impl Scores {
    fn compute(keys: &[PixelGrid]) -> Result<Self> {
        let n = keys.len();
        let within = keys
            .iter()
            .map(|k| agnosticism_peak_with(k, k, true, PAIR_SCORE_NORMALIZATION))
            .collect::<Result<Vec<_>>>()?;
        let mut cross = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = agnosticism_peak_with(&keys[i], &keys[j], false, PAIR_SCORE_NORMALIZATION)?;
                cross[i][j] = v;
                cross[j][i] = v;
            }
        }
        Ok(Self { within, cross })
    }

    fn set_score(&self, chosen: &[usize]) -> f64 {
        let mut worst = chosen.iter().map(|&i| self.within[i]).fold(0.0, f64::max);
        for (a, &i) in chosen.iter().enumerate() {
            for &j in &chosen[a + 1..] {
                worst = worst.max(self.cross[i][j]);
            }
        }
        worst
    }
}

/// Greedy selection of `k` candidates among the first `pool` ones.
fn greedy(scores: &Scores, perms: &[Permutation], pool: usize, k: usize) -> (Vec<usize>, f64) {
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut running = 0.0f64;
    while chosen.len() < k {
        let mut best: Option<(f64, f64, usize)> = None;
        for j in (0..pool).filter(|j| !chosen.contains(j)) {
            let own = chosen
                .iter()
                .map(|&i| scores.cross[i][j])
                .fold(scores.within[j], f64::max);
            let total = running.max(own);
            let better = match best {
                None => true,
                Some((bt, bo, bj)) => match total.total_cmp(&bt).then(own.total_cmp(&bo)) {
                    Ordering::Less => true,
                    Ordering::Equal => perms[j] < perms[bj],
                    Ordering::Greater => false,
                },
            };
            if better {
                best = Some((total, own, j));
            }
        }
        let (total, _, j) = best.expect("pool holds at least k candidates");
        running = total;
        chosen.push(j);
    }
    (chosen, running)
}

/// Samples `candidates` row permutations of the order-`order` Hadamard matrix
/// and keeps `k` of them as key/lock pairs.
///
/// The greedy pass is run on every prefix of the candidate stream and the
/// best result is kept, so the score never gets worse when more candidates
/// are drawn from the same seed.
pub fn generate_pair_set(
    k: usize,
    order: usize,
    candidates: usize,
    mode: PairMode,
    seed: u64,
) -> Result<PairSet> {
    if k == 0 {
        return Err(Error::Config("need at least one pair".into()));
    }
    if order < 4 {
        return Err(Error::Config(format!(
            "order {order} has too few row permutations to tell pairs apart; use at least 4"
        )));
    }
    let base = sylvester_hadamard(order)?;
    if k > candidates {
        return Err(Error::Config(format!(
            "cannot select {k} pairs from {candidates} candidates"
        )));
    }
    if !factorial_at_least(order, candidates) {
        return Err(Error::Config(format!(
            "order {order} has fewer than {candidates} distinct row permutations"
        )));
    }

    let perms = sample_permutations(order, candidates, seed);
    let keys = perms
        .iter()
        .map(|p| permute_rows(&base, p))
        .collect::<Result<Vec<_>>>()?;
    let scores = Scores::compute(&keys)?;

    let mut best: Option<(Vec<usize>, f64)> = None;
    for pool in k..=candidates {
        let (chosen, score) = greedy(&scores, &perms, pool, k);
        if best.as_ref().is_none_or(|(_, s)| score < *s) {
            best = Some((chosen, score));
        }
    }
    let (chosen, score) = best.expect("candidates >= k");
    debug_assert_eq!(score, scores.set_score(&chosen));

    let pairs: Vec<Pair> = chosen
        .iter()
        .map(|&i| {
            let key = keys[i].clone();
            let lock = match mode {
                PairMode::Attract => complement(&key),
                PairMode::Repel => key.clone(),
            };
            Pair {
                permutation: perms[i].clone(),
                key,
                lock,
            }
        })
        .collect();
    let mean_off_target = mean_off_target(&pairs)?;
    Ok(PairSet {
        pairs,
        mode,
        order,
        candidates,
        seed,
        score,
        mean_off_target,
    })
}

fn mean_off_target(pairs: &[Pair]) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, p) in pairs.iter().enumerate() {
        for (dx, dy, v, _) in
            interaction_map_with(&p.key, &p.lock, PAIR_SCORE_NORMALIZATION)?.iter()
        {
            if dx != 0 || dy != 0 {
                sum += v.abs();
                n += 1;
            }
        }
        for q in &pairs[i + 1..] {
            for (_, _, v, _) in
                interaction_map_with(&p.key, &q.key, PAIR_SCORE_NORMALIZATION)?.iter()
            {
                sum += v.abs();
                n += 1;
            }
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// A token-sized block assignment over a larger canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct CanvasLayout {
    pub token: PixelGrid,
    pub meta_rows: usize,
    pub meta_cols: usize,
    /// Row-major, `meta_rows * meta_cols` entries.
    pub assignments: Vec<Interaction>,
    pub canvas: PixelGrid,
}

impl CanvasLayout {
    pub fn assignment(&self, meta_row: usize, meta_col: usize) -> Interaction {
        self.assignments[meta_row * self.meta_cols + meta_col]
    }

    pub fn block(&self, meta_row: usize, meta_col: usize) -> Result<PixelGrid> {
        let t = self.token.rows();
        self.canvas.block(meta_row * t, meta_col * t, t, t)
    }

    /// Aligned ncc of the token over one metapixel.
    pub fn measure_block(&self, meta_row: usize, meta_col: usize) -> Result<f64> {
        ncc_at(&self.token, &self.block(meta_row, meta_col)?, 0, 0)
    }
}

/// Row-permuted token with zero aligned interaction, or zeros if none exists.
fn agnostic_fill(token: &PixelGrid) -> Result<PixelGrid> {
    let n = token.rows();
    for shift in 1..n {
        let candidate = permute_rows(token, &Permutation::rotation(n, shift))?;
        if ncc_at(token, &candidate, 0, 0)? == 0.0 {
            return Ok(candidate);
        }
    }
    PixelGrid::zeros(n, n)
}

/// Tiles a canvas so that `token` attracts, repels or ignores each metapixel.
pub fn canvas_compile<R: AsRef<[Interaction]>>(
    token: &PixelGrid,
    assignments: &[R],
) -> Result<CanvasLayout> {
    if token.rows() != token.cols() {
        return Err(Error::Domain(format!(
            "canvas token must be square, got {}x{}",
            token.rows(),
            token.cols()
        )));
    }
    if !token.is_binary() || orthogonality_defect(token)? != 0.0 {
        return Err(Error::Domain(
            "canvas token must be a Hadamard matrix".into(),
        ));
    }
    let meta_rows = assignments.len();
    let meta_cols = assignments.first().map(|r| r.as_ref().len()).unwrap_or(0);
    if meta_rows == 0 || meta_cols == 0 {
        return Err(Error::Shape("canvas needs at least one metapixel".into()));
    }
    if let Some(i) = assignments
        .iter()
        .position(|r| r.as_ref().len() != meta_cols)
    {
        return Err(Error::Shape(format!("metapixel row {i} is ragged")));
    }

    let t = token.rows();
    let token = token.clone().without_mask();
    let attract = complement(&token);
    let agnostic = agnostic_fill(&token)?;
    let cols = meta_cols * t;
    let mut values = vec![0.0; meta_rows * t * cols];
    let flat: Vec<Interaction> = assignments
        .iter()
        .flat_map(|r| r.as_ref().iter().copied())
        .collect();
    for (idx, &a) in flat.iter().enumerate() {
        let (mr, mc) = (idx / meta_cols, idx % meta_cols);
        let src = match a {
            Interaction::Attract => &attract,
            Interaction::Repel => &token,
            Interaction::Agnostic => &agnostic,
        };
        for r in 0..t {
            let dst = (mr * t + r) * cols + mc * t;
            values[dst..dst + t].copy_from_slice(src.row(r));
        }
    }
    Ok(CanvasLayout {
        canvas: PixelGrid::new(meta_rows * t, cols, values)?,
        token,
        meta_rows,
        meta_cols,
        assignments: flat,
    })
}
