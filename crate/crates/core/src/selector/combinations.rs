use crate::error::{Error, Result};

/// k-combinations of `0..n` in lexicographic order.
#[derive(Debug, Clone)]
pub struct Combinations {
    n: usize,
    current: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k > n {
            return Err(Error::InfeasibleK { k, n });
        }
        Ok(Self {
            n,
            current: (0..k).collect(),
            done: false,
        })
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let k = self.current.len();
        // Rightmost position that can still be incremented.
        match (0..k).rev().find(|&i| self.current[i] < self.n - k + i) {
            Some(i) => {
                self.current[i] += 1;
                for j in i + 1..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
            }
            None => self.done = true,
        }
        Some(out)
    }
}

/// Index combinations of `n` candidates taken `k` at a time.
pub fn enumerate_sets(n: usize, k: usize) -> Result<Combinations> {
    Combinations::new(n, k)
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Total number of sets over every size in `k_values`.
pub fn count_sets(n: usize, k_values: &[usize]) -> u64 {
    k_values.iter().map(|&k| binomial(n, k)).sum()
}
