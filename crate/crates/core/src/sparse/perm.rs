use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PermutationError {
    #[error("index {index} out of range for permutation of length {len}")]
    OutOfRange { index: usize, len: usize },
    #[error("index {0} appears more than once")]
    Repeated(usize),
}

/// A reordering of `0..n`.
///
/// `forward[new] = old`: position `new` of the reordered system holds the
/// unknown that was at `old`. `inverse` is the map back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        let forward: Vec<usize> = (0..n).collect();
        Self {
            inverse: forward.clone(),
            forward,
        }
    }

    pub fn new(forward: Vec<usize>) -> Result<Self, PermutationError> {
        let n = forward.len();
        let mut inverse = vec![usize::MAX; n];
        for (new, &old) in forward.iter().enumerate() {
            if old >= n {
                return Err(PermutationError::OutOfRange { index: old, len: n });
            }
            if inverse[old] != usize::MAX {
                return Err(PermutationError::Repeated(old));
            }
            inverse[old] = new;
        }
        Ok(Self { forward, inverse })
    }

    pub fn random(n: usize, seed: u64) -> Self {
        let mut forward: Vec<usize> = (0..n).collect();
        forward.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self::new(forward).expect("shuffle is a bijection")
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    pub fn old_of(&self, new: usize) -> usize {
        self.forward[new]
    }

    pub fn new_of(&self, old: usize) -> usize {
        self.inverse[old]
    }

    pub fn is_identity(&self) -> bool {
        self.forward.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// `y[new] = x[old]`.
    pub fn permute_vec(&self, x: &[f64]) -> Vec<f64> {
        self.forward.iter().map(|&old| x[old]).collect()
    }

    /// Inverse of [`Permutation::permute_vec`].
    pub fn unpermute_vec(&self, y: &[f64]) -> Vec<f64> {
        self.inverse.iter().map(|&new| y[new]).collect()
    }

    /// The permutation obtained by reordering with `self` first and then
    /// reordering the result with `then`.
    pub fn then(&self, then: &Permutation) -> Permutation {
        assert_eq!(self.len(), then.len());
        let forward = then.forward.iter().map(|&k| self.forward[k]).collect();
        Permutation::new(forward).expect("composition of bijections")
    }

    pub fn inverted(&self) -> Permutation {
        Permutation {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }
}
