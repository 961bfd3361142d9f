use serde::Serialize;

use crate::error::{invalid, Result};

/// A point of the ordered probability simplex: descending, non-negative,
/// summing to one. Holds both shape eigenvalues and SSCM eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    /// Builds a spectrum from descending non-negative values, normalizing the sum to one.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_entries(&values)?;
        if values.windows(2).any(|w| w[0] < w[1]) {
            return invalid("spectrum values must be sorted in descending order");
        }
        Ok(Self(normalize(values)))
    }

    /// Sorts descending before normalizing. The flag reports whether the input order changed.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<(Self, bool)> {
        check_entries(&values)?;
        let reordered = values.windows(2).any(|w| w[0] < w[1]);
        values.sort_by(|a, b| b.total_cmp(a));
        Ok((Self(normalize(values)), reordered))
    }

    /// The centre of the simplex, `(1/p, ..., 1/p)`.
    pub fn uniform(p: usize) -> Result<Self> {
        if p == 0 {
            return invalid("spectrum dimension must be at least 1");
        }
        Ok(Self(vec![1.0 / p as f64; p]))
    }

    /// Wraps values that are already known to lie in the ordered simplex.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.windows(2).all(|w| w[0] >= w[1]));
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Distinct nonzero values with their multiplicities, in descending order.
    pub(crate) fn groups(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &v in self.0.iter().filter(|&&v| v > 0.0) {
            match out.last_mut() {
                Some((last, m)) if *last == v => *m += 1,
                _ => out.push((v, 1)),
            }
        }
        out
    }

    /// Index of the group each coordinate belongs to, `None` for zeros.
    pub(crate) fn group_index(&self) -> Vec<Option<usize>> {
        let mut idx = Vec::with_capacity(self.0.len());
        let mut current: Option<(f64, usize)> = None;
        for &v in &self.0 {
            if v > 0.0 {
                let g = match current {
                    Some((last, g)) if last == v => g,
                    Some((_, g)) => g + 1,
                    None => 0,
                };
                current = Some((v, g));
                idx.push(Some(g));
            } else {
                idx.push(None);
            }
        }
        idx
    }
}

impl AsRef<[f64]> for Spectrum {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_entries(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return invalid("spectrum must have at least one value");
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return invalid(format!("spectrum values must be finite and non-negative, got {v}"));
    }
    if values.iter().sum::<f64>() <= 0.0 {
        return invalid("spectrum must have a positive sum");
    }
    Ok(())
}

fn normalize(mut values: Vec<f64>) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    if total != 1.0 {
        values.iter_mut().for_each(|v| *v /= total);
    }
    values
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_and_groups() {
        let s = Spectrum::new(vec![4.0, 2.0, 2.0, 0.0]).unwrap();
        assert_eq!(s.values(), &[0.5, 0.25, 0.25, 0.0]);
        assert_eq!(s.groups(), vec![(0.5, 1), (0.25, 2)]);
        assert_eq!(s.group_index(), vec![Some(0), Some(1), Some(1), None]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Spectrum::new(vec![]).is_err());
        assert!(Spectrum::new(vec![0.2, 0.8]).is_err());
        assert!(Spectrum::new(vec![1.0, -0.1]).is_err());
        assert!(Spectrum::new(vec![0.0, 0.0]).is_err());
        assert!(Spectrum::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn unsorted_input_reports_reordering() {
        let (s, moved) = Spectrum::from_unsorted(vec![1.0, 3.0]).unwrap();
        assert!(moved);
        assert_eq!(s.values(), &[0.75, 0.25]);
        let (_, moved) = Spectrum::from_unsorted(vec![3.0, 1.0]).unwrap();
        assert!(!moved);
    }
}
