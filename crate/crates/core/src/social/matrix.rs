use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

/// Sparse row-stochastic tie matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    k: usize,
}

impl WeightMatrix {
    /// Validates and wraps per-row tie lists.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let q = rows.len();
        let mut k = 0;
        for (i, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::Domain(format!("row {i} has no ties")));
            }
            let mut sum = 0.0;
            for &(j, w) in row {
                if j >= q {
                    return Err(Error::Domain(format!("row {i} references individual {j} of {q}")));
                }
                if j == i {
                    return Err(Error::Domain(format!("row {i} has a self tie")));
                }
                if !(w >= 0.0) {
                    return Err(Error::Domain(format!("row {i} has negative weight {w}")));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Domain(format!("row {i} sums to {sum}")));
            }
            let mut cols: Vec<usize> = row.iter().map(|&(j, _)| j).collect();
            cols.sort_unstable();
            cols.dedup();
            if cols.len() != row.len() {
                return Err(Error::Domain(format!("row {i} repeats a neighbour")));
            }
            k = k.max(row.len());
        }
        Ok(Self { rows, k })
    }

    pub fn q(&self) -> usize {
        self.rows.len()
    }

    /// Maximum number of ties in any row.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, q: usize) -> &[(usize, f64)] {
        &self.rows[q]
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `W x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * x[j]).sum())
            .collect()
    }

    /// `W' x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.q()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                out[j] += w * x[i];
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let q = self.q();
        let mut m = DMatrix::zeros(q, q);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                m[(i, j)] = w;
            }
        }
        m
    }

    /// Unweighted share of each individual's ties flagged in `flags`.
    pub fn tie_share(&self, flags: &[bool]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().filter(|&&(j, _)| flags[j]).count() as f64 / row.len() as f64)
            .collect()
    }

    /// Writes `row,col,weight` lines (0-based indices) preceded by a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["row", "col", "weight"])?;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                wtr.write_record([i.to_string(), j.to_string(), format!("{w:.17e}")])?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<weights>", e))?;
        Ok(())
    }

    /// Solves `(I - delta W) x = b` by Gauss-Seidel sweeps. Converges for any
    /// `0 <= delta < 1` because `W` is row-stochastic.
    pub fn solve_spatial(&self, delta: f64, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_spatial_pinned(delta, b, &[])
    }

    /// As [`solve_spatial`](Self::solve_spatial) but with some coordinates held
    /// at fixed values: `pinned[i] = Some(v)` forces `x_i = v`.
    pub fn solve_spatial_pinned(
        &self,
        delta: f64,
        b: &[f64],
        pinned: &[Option<f64>],
    ) -> Result<Vec<f64>> {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::Conditioning(format!(
                "spatial parameter {delta} outside [0, 1)"
            )));
        }
        let q = self.q();
        let pin = |i: usize| pinned.get(i).copied().flatten();
        let mut x: Vec<f64> = (0..q).map(|i| pin(i).unwrap_or(b[i])).collect();
        if delta == 0.0 {
            return Ok(x);
        }
        let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for _ in 0..100_000 {
            let mut change = 0.0f64;
            for i in 0..q {
                if pin(i).is_some() {
                    continue;
                }
                let s: f64 = self.rows[i].iter().map(|&(j, w)| w * x[j]).sum();
                let v = b[i] + delta * s;
                change = change.max((v - x[i]).abs());
                x[i] = v;
            }
            if change <= 1e-15 * scale {
                return Ok(x);
            }
        }
        Err(Error::Conditioning("spatial solve did not converge".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn ring(q: usize) -> WeightMatrix {
        WeightMatrix::from_rows(
            (0..q)
                .map(|i| vec![((i + 1) % q, 0.5), ((i + q - 1) % q, 0.5)])
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_invalid_rows() {
        assert!(WeightMatrix::from_rows(vec![vec![(0, 1.0)], vec![(0, 1.0)]]).is_err());
        assert!(WeightMatrix::from_rows(vec![vec![(1, 0.9)], vec![(0, 1.0)]]).is_err());
        assert!(WeightMatrix::from_rows(vec![vec![(1, 1.0)], vec![(2, 1.0)]]).is_err());
    }

    #[test]
    fn spatial_solve_matches_dense() {
        let w = ring(7);
        let b: Vec<f64> = (0..7).map(|i| (i as f64).sin()).collect();
        let x = w.solve_spatial(0.8, &b).unwrap();
        let a = DMatrix::identity(7, 7) - w.to_dense() * 0.8;
        let exact = a.lu().solve(&DVector::from_vec(b)).unwrap();
        for i in 0..7 {
            assert!((x[i] - exact[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn pinned_solve_holds_values() {
        let w = ring(5);
        let b = vec![1.0; 5];
        let pins = vec![None, Some(3.0), None, None, None];
        let x = w.solve_spatial_pinned(0.5, &b, &pins).unwrap();
        assert_eq!(x[1], 3.0);
        for i in [0, 2, 3, 4] {
            let s: f64 = w.row(i).iter().map(|&(j, v)| v * x[j]).sum();
            assert!((x[i] - (1.0 + 0.5 * s)).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_lists_every_tie() {
        let w = ring(4);
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + w.nnz());
        assert!(text.starts_with("row,col,weight\n0,1,"));
    }
}
