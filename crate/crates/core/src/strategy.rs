//! Proportional, deterministic and tournament extraction over a
//! [`ScoreTable`]. The same routines pick parents (on selection scores) and
//! removal victims (on survival similarity).

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scores::{Direction, NormalizationState, ScoreTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Proportional,
    Deterministic,
    Tournament,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Proportional, Method::Deterministic, Method::Tournament];

    pub fn letter(self) -> char {
        match self {
            Method::Proportional => 'P',
            Method::Deterministic => 'D',
            Method::Tournament => 'T',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Proportional => "proportional",
            Method::Deterministic => "deterministic",
            Method::Tournament => "tournament",
        }
    }
}

impl core::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p" | "proportional" => Ok(Method::Proportional),
            "d" | "deterministic" => Ok(Method::Deterministic),
            "t" | "tournament" => Ok(Method::Tournament),
            other => Err(Error::InvalidConfig(alloc::format!("unknown strategy {other:?}"))),
        }
    }
}

/// Extraction method plus the score transforms applied before it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategySpec {
    pub method: Method,
    pub use_ranks: bool,
    pub normalization: Option<(f64, f64)>,
    pub significant_digits: Option<u32>,
}

impl StrategySpec {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            use_ranks: false,
            normalization: None,
            significant_digits: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.normalization {
            NormalizationState::new(lo, hi)?;
        }
        if self.significant_digits == Some(0) {
            return Err(Error::InvalidConfig("significant digits must be >= 1".into()));
        }
        Ok(())
    }

    pub fn normalization_state(&self) -> Option<NormalizationState> {
        self.normalization
            .map(|(lo, hi)| NormalizationState::new(lo, hi).expect("validated bounds"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    /// Table positions in extraction order.
    pub indices: Vec<usize>,
    /// Proportional draw had no positive mass and fell back to uniform.
    pub uniform_fallback: bool,
    /// Negative masses were shifted to start at zero.
    pub shifted: bool,
}

impl Extraction {
    fn plain(indices: Vec<usize>) -> Self {
        Self {
            indices,
            uniform_fallback: false,
            shifted: false,
        }
    }
}

fn check_count(table: &ScoreTable, n_sel: usize) -> Result<()> {
    if n_sel == 0 || n_sel > table.len() {
        return Err(Error::InvalidArgument(alloc::format!(
            "cannot extract {n_sel} of {}",
            table.len()
        )));
    }
    Ok(())
}

pub fn extract<R: Rng + ?Sized>(
    method: Method,
    table: &ScoreTable,
    n_sel: usize,
    rng: &mut R,
) -> Result<Extraction> {
    match method {
        Method::Proportional => extract_proportional(table, n_sel, rng),
        Method::Deterministic => extract_deterministic(table, n_sel, rng).map(Extraction::plain),
        Method::Tournament => extract_tournament(table, n_sel, rng).map(Extraction::plain),
    }
}

/// Group masses where larger means more likely, plus whether a shift was
/// needed to make them nonnegative.
pub fn proportional_masses(table: &ScoreTable) -> (Vec<f64>, bool) {
    let (lo, hi) = match (table.distinct.first(), table.distinct.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return (Vec::new(), false),
    };
    let mut masses: Vec<f64> = match table.direction {
        Direction::Max => table.distinct.clone(),
        // order-reversing affine map
        Direction::Min => table.distinct.iter().map(|&v| hi + lo - v).collect(),
    };
    let least = masses.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted = least < 0.0;
    if shifted {
        masses.iter_mut().for_each(|m| *m -= least);
    }
    (masses, shifted)
}

/// Draws without replacement, each draw landing on a distinct-score group
/// with probability `mass·remaining / Σ mass·remaining`, then on a uniform
/// unselected member of that group.
pub fn extract_proportional<R: Rng + ?Sized>(
    table: &ScoreTable,
    n_sel: usize,
    rng: &mut R,
) -> Result<Extraction> {
    check_count(table, n_sel)?;
    let (masses, shifted) = proportional_masses(table);
    let mut remaining: Vec<Vec<usize>> = table.members.clone();
    let mut out = Vec::with_capacity(n_sel);
    let mut fallback = false;
    while out.len() < n_sel {
        let total: f64 = masses
            .iter()
            .zip(&remaining)
            .map(|(m, r)| m * r.len() as f64)
            .sum();
        let group = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut chosen = None;
            for (g, (m, r)) in masses.iter().zip(&remaining).enumerate() {
                if r.is_empty() || *m <= 0.0 {
                    continue;
                }
                cum += m * r.len() as f64;
                chosen = Some(g);
                if target < cum {
                    break;
                }
            }
            chosen.expect("positive total implies a positive group")
        } else {
            fallback = true;
            let left: usize = remaining.iter().map(Vec::len).sum();
            let mut k = rng.random_range(0..left);
            let mut g = 0;
            while k >= remaining[g].len() {
                k -= remaining[g].len();
                g += 1;
            }
            out.push(remaining[g].remove(k));
            continue;
        };
        let pick = rng.random_range(0..remaining[group].len());
        out.push(remaining[group].remove(pick));
    }
    Ok(Extraction {
        indices: out,
        uniform_fallback: fallback,
        shifted,
    })
}

/// Takes whole groups from the best end while they fit, then a uniform
/// random part of the boundary group.
pub fn extract_deterministic<R: Rng + ?Sized>(
    table: &ScoreTable,
    n_sel: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_count(table, n_sel)?;
    let groups: Vec<usize> = match table.direction {
        Direction::Max => (0..table.distinct.len()).rev().collect(),
        Direction::Min => (0..table.distinct.len()).collect(),
    };
    let mut out = Vec::with_capacity(n_sel);
    for g in groups {
        let members = &table.members[g];
        if out.len() + members.len() <= n_sel {
            out.extend_from_slice(members);
        } else {
            let mut pool = members.clone();
            while out.len() < n_sel {
                let k = rng.random_range(0..pool.len());
                out.push(pool.remove(k));
            }
        }
        if out.len() == n_sel {
            break;
        }
    }
    Ok(out)
}

/// Random permutation, one bubble pass over the first `n_sel` positions
/// moving better scores forward, then a random outsider challenges the
/// weakest selected position. Exact ties are settled by a fair coin.
pub fn extract_tournament<R: Rng + ?Sized>(
    table: &ScoreTable,
    n_sel: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_count(table, n_sel)?;
    let fs = &table.fs;
    let dir = table.direction;
    let mut perm: Vec<usize> = (0..table.len()).collect();
    perm.shuffle(rng);

    for i in 1..n_sel {
        let (cur, prev) = (fs[perm[i]], fs[perm[i - 1]]);
        if dir.better(cur, prev) || (cur == prev && rng.random::<bool>()) {
            perm.swap(i, i - 1);
        }
    }
    if n_sel < perm.len() {
        let challenger = rng.random_range(n_sel..perm.len());
        let (c, last) = (fs[perm[challenger]], fs[perm[n_sel - 1]]);
        if dir.better(c, last) || (c == last && rng.random::<bool>()) {
            perm.swap(challenger, n_sel - 1);
        }
    }
    perm.truncate(n_sel);
    Ok(perm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TRIALS: usize = 100_000;

    fn first_pick_freq(method: Method, fs: &[f64], dir: Direction, seed: u64) -> Vec<f64> {
        let table = ScoreTable::new(fs.to_vec(), dir);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hits = vec![0usize; fs.len()];
        for _ in 0..TRIALS {
            hits[extract(method, &table, 1, &mut rng).unwrap().indices[0]] += 1;
        }
        hits.iter().map(|&h| h as f64 / TRIALS as f64).collect()
    }

    #[test]
    fn proportional_first_draw() {
        let f = first_pick_freq(Method::Proportional, &[1.0, 3.0], Direction::Max, 1);
        assert!((f[0] - 0.25).abs() < 0.01 && (f[1] - 0.75).abs() < 0.01, "{f:?}");
    }

    #[test]
    fn proportional_min_direction_reverses_mass() {
        // masses become {3, 1}
        let f = first_pick_freq(Method::Proportional, &[1.0, 3.0], Direction::Min, 2);
        assert!((f[0] - 0.75).abs() < 0.01, "{f:?}");
    }

    #[test]
    fn proportional_exhaustion_and_fallback() {
        let table = ScoreTable::new(vec![0.5, 2.0, 2.0, 7.0], Direction::Max);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut got = extract_proportional(&table, 4, &mut rng).unwrap().indices;
        got.sort_unstable();
        assert_eq!(got, vec![0, 1, 2, 3]);
        let zeros = ScoreTable::new(vec![0.0; 3], Direction::Max);
        let e = extract_proportional(&zeros, 2, &mut rng).unwrap();
        assert!(e.uniform_fallback);
        assert_eq!(e.indices.len(), 2);
    }

    #[test]
    fn proportional_group_mass() {
        // group {2,2} carries 4/(1+4+3) of the mass on the first draw
        let f = first_pick_freq(Method::Proportional, &[1.0, 2.0, 2.0, 3.0], Direction::Max, 4);
        assert!((f[1] + f[2] - 0.5).abs() < 0.01);
        assert!((f[1] - f[2]).abs() < 0.01);
        assert!((f[0] - 0.125).abs() < 0.01);
    }

    #[test]
    fn uniform_when_tied() {
        for (k, method) in Method::ALL.into_iter().enumerate() {
            let f = first_pick_freq(method, &[4.0; 5], Direction::Max, 10 + k as u64);
            for v in f {
                assert!((v - 0.2).abs() < 0.01, "{method:?} {v}");
            }
        }
    }

    #[test]
    fn deterministic_boundary_group() {
        let table = ScoreTable::new(vec![5.0, 3.0, 3.0, 1.0], Direction::Max);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut second = [0usize; 4];
        for _ in 0..TRIALS {
            let got = extract_deterministic(&table, 2, &mut rng).unwrap();
            assert_eq!(got[0], 0);
            second[got[1]] += 1;
        }
        assert_eq!(second[0] + second[3], 0);
        let f = second[1] as f64 / TRIALS as f64;
        assert!((f - 0.5).abs() < 0.01, "{f}");
        let best = extract_deterministic(&table, 1, &mut rng).unwrap();
        assert_eq!(best, vec![0]);
        let min_table = ScoreTable::new(vec![5.0, 3.0, 3.0, 1.0], Direction::Min);
        assert_eq!(extract_deterministic(&min_table, 1, &mut rng).unwrap(), vec![3]);
    }

    #[test]
    fn tournament_prefers_better() {
        let f = first_pick_freq(Method::Tournament, &[1.0, 100.0], Direction::Max, 7);
        assert!(f[1] > 0.6, "{f:?}");
        let table = ScoreTable::new(vec![1.0, 2.0, 3.0], Direction::Max);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut all = extract_tournament(&table, 3, &mut rng).unwrap();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2]);
    }

    #[test]
    fn counts_are_checked() {
        let table = ScoreTable::new(vec![1.0, 2.0], Direction::Max);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for method in Method::ALL {
            assert!(extract(method, &table, 0, &mut rng).is_err());
            assert!(extract(method, &table, 3, &mut rng).is_err());
        }
    }

    #[test]
    fn extraction_is_reproducible() {
        let table = ScoreTable::new(vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0], Direction::Max);
        for method in Method::ALL {
            let a = extract(method, &table, 5, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
            let b = extract(method, &table, 5, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
            assert_eq!(a, b);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn distinct_valid_indices(
                fs in proptest::collection::vec(0u8..6, 1..20),
                frac in 0.0f64..1.0,
                seed in any::<u64>(),
                method in 0usize..3,
                max in any::<bool>(),
            ) {
                let fs: Vec<f64> = fs.into_iter().map(f64::from).collect();
                let dir = if max { Direction::Max } else { Direction::Min };
                let table = ScoreTable::new(fs.clone(), dir);
                let n_sel = 1 + ((fs.len() - 1) as f64 * frac) as usize;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let got = extract(Method::ALL[method], &table, n_sel, &mut rng).unwrap().indices;
                prop_assert_eq!(got.len(), n_sel);
                let mut sorted = got.clone();
                sorted.sort_unstable();
                sorted.dedup();
                prop_assert_eq!(sorted.len(), n_sel);
                prop_assert!(got.iter().all(|&i| i < fs.len()));
            }

            #[test]
            fn deterministic_dominance(
                fs in proptest::collection::vec(-5i8..5, 2..25),
                frac in 0.0f64..1.0,
                seed in any::<u64>(),
            ) {
                let fs: Vec<f64> = fs.into_iter().map(f64::from).collect();
                let table = ScoreTable::new(fs.clone(), Direction::Max);
                let n_sel = 1 + ((fs.len() - 1) as f64 * frac) as usize;
                let got = extract_deterministic(&table, n_sel, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                let worst_in = got.iter().map(|&i| fs[i]).fold(f64::INFINITY, f64::min);
                let best_out = (0..fs.len()).filter(|i| !got.contains(i)).map(|i| fs[i]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(worst_in >= best_out);
            }
        }
    }
}
