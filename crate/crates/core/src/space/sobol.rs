use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sobol_table::DIRECTIONS;
use super::{SpaceError, SOBOL_MAX_DIM};

const BITS: usize = 32;

/// Gray-code Sobol sequence on `[0, 1)^d`, optionally scrambled with a
/// seed-keyed random digital shift.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    shift: Vec<u32>,
    index: u64,
}

impl SobolSequence {
    pub fn new(dim: usize, scramble_seed: Option<u64>) -> Result<Self, SpaceError> {
        if dim == 0 || dim > SOBOL_MAX_DIM {
            return Err(SpaceError::SobolDim(dim));
        }
        let directions = (0..dim).map(direction_numbers).collect();
        let shift = match scramble_seed {
            Some(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..dim).map(|_| rng.random::<u32>()).collect()
            }
            None => vec![0; dim],
        };
        Ok(SobolSequence {
            directions,
            state: vec![0; dim],
            shift,
            index: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    /// Returns the next point of the sequence; the first point of the
    /// unscrambled sequence is the origin.
    pub fn next_point(&mut self) -> Vec<f64> {
        if self.index > 0 {
            // position of the lowest zero bit of index - 1
            let c = (!(self.index - 1)).trailing_zeros() as usize;
            for (x, v) in self.state.iter_mut().zip(&self.directions) {
                *x ^= v[c.min(BITS - 1)];
            }
        }
        self.index += 1;
        const SCALE: f64 = 1.0 / (1u64 << BITS) as f64;
        self.state
            .iter()
            .zip(&self.shift)
            .map(|(x, s)| f64::from(x ^ s) * SCALE)
            .collect()
    }
}

fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = 1 << (BITS - 1 - k);
        }
        return v;
    }
    let (s, a, m) = DIRECTIONS[dim - 1];
    let s = s as usize;
    for k in 0..s.min(BITS) {
        v[k] = m[k] << (BITS - 1 - k);
    }
    for k in s..BITS {
        let mut x = v[k - s] ^ (v[k - s] >> s);
        for l in 1..s {
            if (a >> (s - 1 - l)) & 1 == 1 {
                x ^= v[k - l];
            }
        }
        v[k] = x;
    }
    v
}
