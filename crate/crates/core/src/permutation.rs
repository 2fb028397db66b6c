//! Permutation codebooks, combination matrices and index-activation tables.

use crate::error::{Error, Result};

/// Exact binomial coefficient; `k > n` yields 0.
pub fn binomial(n: u64, k: u64) -> Result<u64> {
    if n > 62 {
        return Err(Error::Overflow(format!("binomial({n}, {k}) exceeds the 64-bit guard")));
    }
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = acc * (n - i) / (i + 1);
    }
    Ok(acc)
}

/// ⌊log₂ x⌋ for x ≥ 1.
pub fn floor_log2(x: u64) -> u32 {
    63 - x.leading_zeros()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmCodebook {
    pub initial: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub codewords: Vec<Vec<f64>>,
}

impl PmCodebook {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }
}

/// All distinct arrangements of the multiset, lexicographically ordered.
pub fn pm_codebook(levels: &[f64], multiplicities: &[usize]) -> Result<PmCodebook> {
    if levels.len() != multiplicities.len() || levels.is_empty() {
        return Err(Error::Contract("one multiplicity per level required".into()));
    }
    if levels.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Contract("levels must be strictly increasing".into()));
    }
    if multiplicities.contains(&0) {
        return Err(Error::Contract("multiplicities must be positive".into()));
    }
    let m: usize = multiplicities.iter().sum();
    if m > 16 {
        return Err(Error::Size(format!("codeword length {m} exceeds 16")));
    }
    let mut counts = multiplicities.to_vec();
    let mut current = Vec::with_capacity(m);
    let mut codewords = Vec::new();
    fill(levels, &mut counts, &mut current, m, &mut codewords);
    Ok(PmCodebook {
        initial: levels.to_vec(),
        multiplicities: multiplicities.to_vec(),
        codewords,
    })
}

fn fill(levels: &[f64], counts: &mut [usize], cur: &mut Vec<f64>, m: usize, out: &mut Vec<Vec<f64>>) {
    if cur.len() == m {
        out.push(cur.clone());
        return;
    }
    for j in 0..levels.len() {
        if counts[j] == 0 {
            continue;
        }
        counts[j] -= 1;
        cur.push(levels[j]);
        fill(levels, counts, cur, m, out);
        cur.pop();
        counts[j] += 1;
    }
}

/// Binary rows with exactly `p` ones among `m`, leading-one block first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinationMatrix {
    pub m: usize,
    pub p: usize,
    pub rows: Vec<Vec<u8>>,
}

pub fn combination_matrix(m: usize, p: usize) -> Result<CombinationMatrix> {
    if p > m || m > 24 {
        return Err(Error::Size(format!("combination matrix C({m},{p}) out of range")));
    }
    Ok(CombinationMatrix { m, p, rows: comb_rows(m, p) })
}

fn comb_rows(m: usize, p: usize) -> Vec<Vec<u8>> {
    if p == 0 {
        return vec![vec![0; m]];
    }
    if p == m {
        return vec![vec![1; m]];
    }
    let mut rows = Vec::new();
    for tail in comb_rows(m - 1, p - 1) {
        let mut r = vec![1];
        r.extend(tail);
        rows.push(r);
    }
    for tail in comb_rows(m - 1, p) {
        let mut r = vec![0];
        r.extend(tail);
        rows.push(r);
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexMode {
    Nbc,
    Lut,
}

/// The N_a selectable index patterns, stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationTable {
    pub q: usize,
    pub p: usize,
    pub mode: IndexMode,
    pub vectors: Vec<Vec<usize>>,
}

impl ActivationTable {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of index bits ⌊log₂ N_a⌋.
    pub fn index_bits(&self) -> usize {
        floor_log2(self.vectors.len() as u64) as usize
    }

    /// Patterns in the 1-based convention used when writing them by hand.
    pub fn one_based(&self) -> Vec<Vec<usize>> {
        self.vectors
            .iter()
            .map(|v| v.iter().map(|i| i + 1).collect())
            .collect()
    }
}

fn row_to_indices(row: &[u8]) -> Vec<usize> {
    row.iter()
        .enumerate()
        .filter(|(_, &b)| b == 1)
        .map(|(i, _)| i)
        .collect()
}

/// Build an activation table. `lut_rows` are 0-based rows of C(q,p).
pub fn activation_table(q: usize, p: usize, mode: IndexMode, lut_rows: Option<&[usize]>) -> Result<ActivationTable> {
    if p == 0 || p > q {
        return Err(Error::Contract(format!("activation table needs 1 <= p <= q, got ({q},{p})")));
    }
    let cm = combination_matrix(q, p)?;
    let na = 1usize << floor_log2(cm.rows.len() as u64);
    let rows: Vec<usize> = match mode {
        IndexMode::Nbc => (0..na).collect(),
        IndexMode::Lut => match lut_rows {
            Some(sel) => {
                if sel.len() != na {
                    return Err(Error::Contract(format!("LUT needs {na} rows, got {}", sel.len())));
                }
                let mut seen = vec![false; cm.rows.len()];
                for &r in sel {
                    if r >= cm.rows.len() || seen[r] {
                        return Err(Error::Contract(format!("invalid or duplicate LUT row {r}")));
                    }
                    seen[r] = true;
                }
                sel.to_vec()
            }
            None => default_lut(&cm, na),
        },
    };
    Ok(ActivationTable {
        q,
        p,
        mode,
        vectors: rows.iter().map(|&r| row_to_indices(&cm.rows[r])).collect(),
    })
}

fn default_lut(cm: &CombinationMatrix, na: usize) -> Vec<usize> {
    if cm.m == 4 && cm.p == 2 {
        return vec![0, 1, 4, 5];
    }
    // Greedy on the sum of squared per-index counts, then single-row swaps
    // until no swap lowers it. Ties go to the lowest row.
    let sq = |c: &[usize]| c.iter().map(|&x| x * x).sum::<usize>();
    let mut counts = vec![0usize; cm.m];
    let mut taken = vec![false; cm.rows.len()];
    let mut picks = Vec::with_capacity(na);
    let mut trial = vec![0usize; cm.m];
    for _ in 0..na {
        let mut best: Option<(usize, usize)> = None;
        for (r, row) in cm.rows.iter().enumerate() {
            if taken[r] {
                continue;
            }
            for ((t, c), &b) in trial.iter_mut().zip(&counts).zip(row) {
                *t = c + b as usize;
            }
            let key = sq(&trial);
            if best.is_none_or(|(_, k)| key < k) {
                best = Some((r, key));
            }
        }
        let (r, _) = best.expect("enough rows");
        taken[r] = true;
        for (c, &b) in counts.iter_mut().zip(&cm.rows[r]) {
            *c += b as usize;
        }
        picks.push(r);
    }
    'improve: loop {
        let cur = sq(&counts);
        for i in 0..picks.len() {
            let a = picks[i];
            for (b, row) in cm.rows.iter().enumerate() {
                if taken[b] {
                    continue;
                }
                for (((t, c), &x), &y) in trial.iter_mut().zip(&counts).zip(&cm.rows[a]).zip(row) {
                    *t = c + y as usize - x as usize;
                }
                if sq(&trial) < cur {
                    taken[a] = false;
                    taken[b] = true;
                    picks[i] = b;
                    counts.copy_from_slice(&trial);
                    continue 'improve;
                }
            }
        }
        break;
    }
    picks.sort_unstable();
    picks
}

fn factorial(m: usize) -> u64 {
    (1..=m as u64).product()
}

/// Permutation of (1..=m) with Lehmer rank `rank`.
pub fn unrank_permutation(rank: u64, m: usize) -> Result<Vec<usize>> {
    if m > 16 {
        return Err(Error::Size(format!("permutation length {m} exceeds 16")));
    }
    if rank >= factorial(m) {
        return Err(Error::Range(format!("rank {rank} >= {m}!")));
    }
    let mut pool: Vec<usize> = (1..=m).collect();
    let mut r = rank;
    let mut out = Vec::with_capacity(m);
    for i in (0..m).rev() {
        let f = factorial(i);
        let idx = (r / f) as usize;
        r %= f;
        out.push(pool.remove(idx));
    }
    Ok(out)
}

pub fn rank_permutation(perm: &[usize]) -> Result<u64> {
    let m = perm.len();
    if m > 16 {
        return Err(Error::Size(format!("permutation length {m} exceeds 16")));
    }
    let mut sorted = perm.to_vec();
    sorted.sort_unstable();
    if sorted != (1..=m).collect::<Vec<_>>() {
        return Err(Error::Contract("not a permutation of 1..m".into()));
    }
    let mut rank = 0u64;
    for i in 0..m {
        let smaller = perm[i + 1..].iter().filter(|&&x| x < perm[i]).count() as u64;
        rank += smaller * factorial(m - 1 - i);
    }
    Ok(rank)
}
