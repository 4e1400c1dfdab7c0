//! Latent alignment search for weak supervision.
//!
//! An alignment `a` places unaligned target slot `j` at aligned slot `a[j]`.
//! Candidates come from noisy minimum-cost matchings on node costs; the one
//! with the best full log-likelihood (nodes and edges) wins.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{LagrError, Result};
use crate::graph::UnalignedTarget;
use crate::heads::LogProbs;
use crate::rng::Rng;

/// Minimum-cost perfect matching on a square row-major `cost` matrix.
/// Returns `a` with row `j` assigned to column `a[j]`. O(m^3).
pub fn hungarian(cost: &[f64], m: usize) -> Result<Vec<usize>> {
    if cost.len() != m * m {
        return Err(LagrError::Shape {
            op: "hungarian",
            lhs: vec![cost.len()],
            rhs: vec![m, m],
        });
    }
    if let Some(i) = cost.iter().position(|c| !c.is_finite()) {
        return Err(LagrError::invalid(format!(
            "non-finite cost at ({}, {})",
            i / m,
            i % m
        )));
    }
    // potentials formulation with 1-based rows/columns; index 0 is a sentinel
    let inf = f64::INFINITY;
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut a = vec![0; m];
    for j in 1..=m {
        a[p[j] - 1] = j - 1;
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentConfig {
    /// Fresh candidates per step.
    pub k: usize,
    /// Standard deviation of the matching noise.
    pub sigma: f64,
    pub cache_enabled: bool,
    /// Make the first candidate noiseless even when `sigma > 0`.
    pub include_noiseless: bool,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            k: 10,
            sigma: 1.0,
            cache_enabled: true,
            include_noiseless: false,
        }
    }
}

impl AlignmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(LagrError::Config("K must be at least 1".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(LagrError::Config(format!("sigma {} must be finite and >= 0", self.sigma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub a: Vec<usize>,
    /// Joint log-likelihood of the target under `a`.
    pub score: f64,
}

fn check_dims(target: &UnalignedTarget, lp: &LogProbs) -> Result<()> {
    if target.m() != lp.m() {
        return Err(LagrError::Shape {
            op: "alignment",
            lhs: vec![target.m()],
            rhs: vec![lp.m()],
        });
    }
    Ok(())
}

/// `k` matchings on `cost[j][i] = -log p(z_i = s_j) + eps_ji`, with fresh
/// Gaussian noise per candidate. Duplicates are kept.
pub fn candidate_alignments(lp: &LogProbs, target: &UnalignedTarget, cfg: &AlignmentConfig, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    check_dims(target, lp)?;
    let m = target.m();
    let base: Vec<f64> = (0..m * m).map(|ji| -lp.node(ji % m, target.nodes[ji / m])).collect();
    let noise = Normal::new(0.0, cfg.sigma).map_err(|e| LagrError::Config(e.to_string()))?;
    let mut out = Vec::with_capacity(cfg.k);
    for kappa in 0..cfg.k {
        let quiet = cfg.sigma == 0.0 || (cfg.include_noiseless && kappa == 0);
        let cost: Vec<f64> = if quiet {
            base.clone()
        } else {
            base.iter().map(|c| c + noise.sample(rng)).collect()
        };
        out.push(hungarian(&cost, m)?);
    }
    Ok(out)
}

/// Exact log-likelihood of the whole target, nulls included, under `a`.
pub fn score_alignment(a: &[usize], target: &UnalignedTarget, lp: &LogProbs) -> f64 {
    let m = target.m();
    let mut j_total = 0.0;
    for j in 0..m {
        j_total += lp.node(a[j], target.nodes[j]);
        for k in 0..m {
            j_total += lp.edge(a[j], a[k], target.edge(j, k));
        }
    }
    j_total
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub alignment: Alignment,
    /// Index into the candidate list, or `None` when the cached one won.
    pub index: Option<usize>,
}

/// Best-scoring alignment among the candidates and the cached one; ties go
/// to the earliest candidate, the cached one counting as last.
pub fn select_map_alignment(
    candidates: &[Vec<usize>],
    cached: Option<&[usize]>,
    target: &UnalignedTarget,
    lp: &LogProbs,
) -> Result<Selection> {
    check_dims(target, lp)?;
    let mut best: Option<Selection> = None;
    let all = candidates
        .iter()
        .map(Vec::as_slice)
        .enumerate()
        .map(|(i, a)| (Some(i), a))
        .chain(cached.map(|a| (None, a)));
    for (index, a) in all {
        if a.len() != target.m() {
            return Err(LagrError::invalid(format!(
                "alignment of length {} for {} slots",
                a.len(),
                target.m()
            )));
        }
        let score = score_alignment(a, target, lp);
        if best.as_ref().is_none_or(|b| score > b.alignment.score) {
            best = Some(Selection {
                alignment: Alignment { a: a.to_vec(), score },
                index,
            });
        }
    }
    best.ok_or_else(|| LagrError::invalid("no alignment candidates"))
}

/// Last selected alignment per example id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlignmentCache {
    entries: HashMap<String, Alignment>,
}

#[derive(Serialize, Deserialize)]
struct DumpLine {
    example_id: String,
    a: Vec<usize>,
    #[serde(rename = "J")]
    score: f64,
}

impl AlignmentCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: &str) -> Option<&Alignment> {
        self.entries.get(id)
    }

    /// Store `alignment`; returns whether it differs from the previous one.
    pub fn insert(&mut self, id: &str, alignment: Alignment) -> bool {
        match self.entries.insert(id.to_string(), alignment) {
            Some(old) => old.a != self.entries[id].a,
            None => true,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Alignment)> {
        self.entries.iter()
    }

    /// JSON lines of `{example_id, a, J}`, sorted by id.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut ids: Vec<&String> = self.entries.keys().collect();
        ids.sort();
        let file = std::fs::File::create(path).map_err(|e| LagrError::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for id in ids {
            let al = &self.entries[id];
            let line = serde_json::to_string(&DumpLine {
                example_id: id.clone(),
                a: al.a.clone(),
                score: al.score,
            })?;
            writeln!(w, "{line}").map_err(|e| LagrError::io(path, e))?;
        }
        w.flush().map_err(|e| LagrError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| LagrError::io(path, e))?;
        let mut cache = Self::new();
        for (no, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| LagrError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let d: DumpLine = serde_json::from_str(&line).map_err(|e| LagrError::Parse {
                position: no + 1,
                message: e.to_string(),
            })?;
            let mut seen = vec![false; d.a.len()];
            if d.a.iter().any(|&x| x >= seen.len() || std::mem::replace(&mut seen[x], true)) {
                return Err(LagrError::Parse {
                    position: no + 1,
                    message: format!("alignment for `{}` is not a permutation", d.example_id),
                });
            }
            cache.entries.insert(d.example_id, Alignment { a: d.a, score: d.score });
        }
        Ok(cache)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng as _;

    fn brute_min(cost: &[f64], m: usize) -> f64 {
        fn rec(cost: &[f64], m: usize, row: usize, used: &mut Vec<bool>) -> f64 {
            if row == m {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for c in 0..m {
                if !used[c] {
                    used[c] = true;
                    best = best.min(cost[row * m + c] + rec(cost, m, row + 1, used));
                    used[c] = false;
                }
            }
            best
        }
        rec(cost, m, 0, &mut vec![false; m])
    }

    fn total(cost: &[f64], m: usize, a: &[usize]) -> f64 {
        (0..m).map(|j| cost[j * m + a[j]]).sum()
    }

    #[test]
    fn diagonal_is_identity() {
        let mut cost = vec![0.0; 16];
        for i in 0..4 {
            cost[i * 4 + i] = -1.0;
        }
        assert_eq!(hungarian(&cost, 4).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn three_by_three_example() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let a = hungarian(&cost, 3).unwrap();
        assert_eq!(total(&cost, 3, &a), brute_min(&cost, 3));
        assert_eq!(total(&cost, 3, &a), 5.0);
    }

    #[test]
    fn random_matrices_match_brute_force() {
        let mut rng = seeded(17);
        for m in 1..=6 {
            for _ in 0..50 {
                let cost: Vec<f64> = (0..m * m).map(|_| rng.random_range(-5.0..5.0)).collect();
                let a = hungarian(&cost, m).unwrap();
                assert!((total(&cost, m, &a) - brute_min(&cost, m)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(hungarian(&[1.0, 2.0, 3.0], 2).is_err());
        assert!(hungarian(&[1.0, f64::NAN, 3.0, 4.0], 2).is_err());
        assert_eq!(hungarian(&[], 0).unwrap(), Vec::<usize>::new());
    }

    fn uniform_lp(n: usize, vn: usize, ve: usize) -> LogProbs {
        LogProbs {
            n,
            layers: 1,
            node_labels: vn,
            edge_labels: ve,
            node: vec![-(vn as f64).ln(); n * vn],
            edge: vec![-(ve as f64).ln(); n * n * ve],
        }
    }

    fn target(nodes: Vec<usize>) -> UnalignedTarget {
        let m = nodes.len();
        UnalignedTarget {
            n: m,
            layers: 1,
            nodes,
            edges: vec![0; m * m],
        }
    }

    #[test]
    fn zero_noise_gives_identical_candidates() {
        let mut lp = uniform_lp(4, 3, 2);
        lp.node[5] = 0.0;
        let t = target(vec![1, 2, 0, 0]);
        let cfg = AlignmentConfig {
            k: 6,
            sigma: 0.0,
            ..Default::default()
        };
        let c = candidate_alignments(&lp, &t, &cfg, &mut seeded(1)).unwrap();
        assert_eq!(c.len(), 6);
        assert!(c.iter().all(|a| a == &c[0]));
    }

    #[test]
    fn sharp_unique_labels_force_the_matching() {
        // model puts label 3 at slot 0, label 1 at slot 2, label 2 at slot 1
        let mut lp = uniform_lp(3, 4, 2);
        for (slot, label) in [(0, 3), (1, 2), (2, 1)] {
            for l in 0..4 {
                lp.node[slot * 4 + l] = if l == label { 0.0 } else { -30.0 };
            }
        }
        let t = target(vec![1, 2, 3]);
        let cfg = AlignmentConfig {
            k: 1,
            sigma: 0.0,
            ..Default::default()
        };
        let c = candidate_alignments(&lp, &t, &cfg, &mut seeded(1)).unwrap();
        assert_eq!(c[0], vec![2, 1, 0]);
    }

    #[test]
    fn uniform_model_scores_every_alignment_alike() {
        let lp = uniform_lp(3, 5, 4);
        let t = target(vec![1, 2, 0]);
        let expect = -3.0 * 5f64.ln() - 9.0 * 4f64.ln();
        for a in [[0, 1, 2], [2, 0, 1], [1, 2, 0]] {
            assert!((score_alignment(&a, &t, &lp) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn cached_alignment_can_win() {
        let mut lp = uniform_lp(2, 3, 2);
        lp.node[0] = 0.0; // label 0 at slot 0
        let t = target(vec![0, 1]);
        let sel = select_map_alignment(&[vec![1, 0]], Some(&[0, 1]), &t, &lp).unwrap();
        assert_eq!(sel.index, None);
        assert_eq!(sel.alignment.a, vec![0, 1]);
        let sel = select_map_alignment(&[vec![1, 0]], None, &t, &lp).unwrap();
        assert_eq!(sel.index, Some(0));
        assert!(select_map_alignment(&[], None, &t, &lp).is_err());
    }

    #[test]
    fn ties_go_to_first_candidate() {
        let lp = uniform_lp(2, 3, 2);
        let t = target(vec![0, 1]);
        let sel = select_map_alignment(&[vec![1, 0], vec![0, 1]], Some(&[0, 1]), &t, &lp).unwrap();
        assert_eq!(sel.index, Some(0));
    }

    #[test]
    fn cache_round_trip() {
        let mut cache = AlignmentCache::new();
        assert!(cache.insert("b", Alignment { a: vec![1, 0], score: -2.5 }));
        assert!(!cache.insert("b", Alignment { a: vec![1, 0], score: -1.0 }));
        cache.insert("a", Alignment { a: vec![0], score: 0.0 });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("align.jsonl");
        cache.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\"example_id\":\"a\""));
        assert_eq!(AlignmentCache::load(&path).unwrap(), cache);
        std::fs::write(&path, "{\"example_id\":\"x\",\"a\":[0,0],\"J\":0.0}\n").unwrap();
        assert!(AlignmentCache::load(&path).is_err());
    }
}
