//! Unscrambled Sobol sequence, Gray-code order, 32-bit resolution.

/// Primitive polynomial data `(degree, coefficients, initial m values)` from
/// the Joe-Kuo `new-joe-kuo-6.21201` table, dimensions 2 onward.
/// Dimension 1 is the van der Corput sequence.
const DIRECTION_TABLE: [(u32, u32, &[u32]); 7] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
];

pub const MAX_DIMENSION: usize = DIRECTION_TABLE.len() + 1;

const BITS: usize = 32;

#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u32,
}

impl Sobol {
    /// Generator positioned just after the all-zeros point, so the first
    /// call to `next` yields `(0.5, ..., 0.5)`.
    pub fn new(dimension: usize) -> Option<Self> {
        if dimension == 0 || dimension > MAX_DIMENSION {
            return None;
        }
        let mut directions = Vec::with_capacity(dimension);
        directions.push(std::array::from_fn(|k| 1u32 << (31 - k)));
        for &(degree, coeffs, m) in DIRECTION_TABLE.iter().take(dimension - 1) {
            directions.push(direction_numbers(degree as usize, coeffs, m));
        }
        Some(Sobol {
            state: vec![0; dimension],
            directions,
            index: 0,
        })
    }

    pub fn dimension(&self) -> usize {
        self.directions.len()
    }
}

fn direction_numbers(degree: usize, coeffs: u32, m: &[u32]) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    for k in 0..degree {
        v[k] = m[k] << (31 - k);
    }
    for k in degree..BITS {
        let base = v[k - degree];
        let mut value = base ^ (base >> degree);
        for j in 0..degree - 1 {
            if (coeffs >> j) & 1 == 1 {
                value ^= v[k - degree + 1 + j];
            }
        }
        v[k] = value;
    }
    v
}

impl Iterator for Sobol {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.index == u32::MAX {
            return None;
        }
        self.index += 1;
        let bit = self.index.trailing_zeros() as usize;
        const SCALE: f64 = 1.0 / 4_294_967_296.0;
        Some(
            self.state
                .iter_mut()
                .zip(&self.directions)
                .map(|(x, v)| {
                    *x ^= v[bit];
                    f64::from(*x) * SCALE
                })
                .collect(),
        )
    }
}
