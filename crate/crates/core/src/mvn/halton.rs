//! Plain (unscrambled) Halton point sets.

use crate::error::{Error, Result};

/// Prime bases for the first 20 dimensions.
const PRIMES: [u64; 20] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
];

pub const MAX_DIMENSION: usize = PRIMES.len();

/// Leading points discarded by default.
pub const DEFAULT_SKIP: usize = 100;

/// A `count x dimension` block of Halton points, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HaltonDraws {
    dimension: usize,
    count: usize,
    skip: usize,
    values: Vec<f64>,
}

impl HaltonDraws {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn skip(&self) -> usize {
        self.skip
    }

    /// The `i`-th point.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dimension.max(1)).take(self.count)
    }
}

/// Radical inverse of `index` in `base`.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut factor = inv_base;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * factor;
        index /= base;
        factor *= inv_base;
    }
    value
}

/// Generates `count` Halton points in `dimension` dimensions after discarding
/// the first `skip` points. Point `n` (1-based, before skipping) in dimension
/// `j` is the radical inverse of `n` in the `j`-th prime.
pub fn halton_sequence(dimension: usize, count: usize, skip: usize) -> Result<HaltonDraws> {
    if dimension > MAX_DIMENSION {
        return Err(Error::UnsupportedDimension {
            got: dimension,
            max: MAX_DIMENSION,
        });
    }
    if count == 0 {
        return Err(Error::Domain("Halton count must be at least 1".into()));
    }
    let mut values = Vec::with_capacity(dimension * count);
    for n in 0..count {
        let index = (skip + n + 1) as u64;
        for &base in &PRIMES[..dimension] {
            values.push(radical_inverse(index, base));
        }
    }
    Ok(HaltonDraws {
        dimension,
        count,
        skip,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn base_two_prefix() {
        let h = halton_sequence(1, 4, 0).unwrap();
        let got: Vec<f64> = h.points().map(|p| p[0]).collect();
        assert_eq!(got, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn first_point_in_two_dimensions() {
        let h = halton_sequence(2, 1, 0).unwrap();
        assert_eq!(h.point(0)[0], 0.5);
        assert!((h.point(0)[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_large_dimension() {
        assert!(matches!(
            halton_sequence(21, 10, 0),
            Err(Error::UnsupportedDimension { got: 21, .. })
        ));
        assert!(halton_sequence(20, 10, 0).is_ok());
    }

    #[test]
    fn values_strictly_inside_unit_interval() {
        let h = halton_sequence(20, 500, DEFAULT_SKIP).unwrap();
        assert!(h.points().flatten().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            halton_sequence(5, 300, 100).unwrap(),
            halton_sequence(5, 300, 100).unwrap()
        );
    }

    /// Squared L2-star discrepancy via Warnock's closed form.
    fn l2_star_discrepancy_sq(points: &[Vec<f64>]) -> f64 {
        let n = points.len() as f64;
        let d = points[0].len() as i32;
        let term1 = 3f64.powi(-d);
        let term2: f64 = points
            .iter()
            .map(|p| p.iter().map(|&x| (1.0 - x * x) / 2.0).product::<f64>())
            .sum::<f64>()
            * 2.0
            / n;
        let mut term3 = 0.0;
        for a in points {
            for b in points {
                term3 += a
                    .iter()
                    .zip(b)
                    .map(|(&x, &y)| 1.0 - x.max(y))
                    .product::<f64>();
            }
        }
        term1 - term2 + term3 / (n * n)
    }

    #[test]
    fn lower_discrepancy_than_pseudo_random() {
        let h = halton_sequence(3, 1000, 10).unwrap();
        let halton: Vec<Vec<f64>> = h.points().map(|p| p.to_vec()).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let random: Vec<Vec<f64>> = (0..1000)
            .map(|_| (0..3).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let dh = l2_star_discrepancy_sq(&halton);
        let dr = l2_star_discrepancy_sq(&random);
        assert!(dh < dr, "halton {dh} vs random {dr}");
    }
}
