use crate::error::{Error, Result};

/// Per-query SRC dictionary: `len()` unit-norm atoms of dimension `dim`,
/// stored atom-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub dim: usize,
    pub atoms: Vec<f64>,
    /// Person index of every atom.
    pub labels: Vec<usize>,
    /// Gallery column of every atom.
    pub sources: Vec<usize>,
}

impl Dictionary {
    /// Builds a dictionary from raw columns, unit-normalizing each one.
    /// All-zero columns are kept as zeros and never enter a solution.
    pub fn from_columns(dim: usize, columns: &[Vec<f64>], labels: Vec<usize>) -> Result<Self> {
        if columns.len() != labels.len() {
            return Err(Error::shape(format!("{} columns but {} labels", columns.len(), labels.len())));
        }
        let mut atoms = Vec::with_capacity(dim * columns.len());
        for c in columns {
            if c.len() != dim {
                return Err(Error::shape(format!("column of length {} in a {dim}-d dictionary", c.len())));
            }
            let start = atoms.len();
            atoms.extend_from_slice(c);
            normalize_in_place(&mut atoms[start..]);
        }
        let sources = (0..labels.len()).collect();
        Ok(Dictionary { dim, atoms, labels, sources })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j * self.dim..(j + 1) * self.dim]
    }

    /// `D x`.
    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, &c) in x.iter().enumerate() {
            if c != 0.0 {
                axpy(&mut out, c, self.atom(j));
            }
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scales to unit L2 norm; the zero vector is left alone.
pub fn normalize_in_place(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

pub fn unit(v: &[f32]) -> Vec<f64> {
    let mut out: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
    normalize_in_place(&mut out);
    out
}

/// Indices of the `count` columns of `atoms` (atom-major, already unit
/// norm) closest to the unit-normalized `query`, nearest first. Equal
/// distances go to the lower index.
pub fn nearest_atoms(query: &[f64], atoms: &[f64], dim: usize, count: usize) -> Result<Vec<usize>> {
    if dim == 0 || atoms.is_empty() {
        return Err(Error::invalid("empty gallery"));
    }
    if query.len() != dim || atoms.len() % dim != 0 {
        return Err(Error::shape(format!("query of length {} against {dim}-d atoms", query.len())));
    }
    if count == 0 {
        return Err(Error::invalid("dictionary size must be at least 1"));
    }
    let mut scored: Vec<(f64, usize)> = atoms
        .chunks_exact(dim)
        .enumerate()
        .map(|(i, a)| (a.iter().zip(query).map(|(x, y)| (x - y) * (x - y)).sum(), i))
        .collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let keep = count.min(scored.len());
    if keep < scored.len() {
        scored.select_nth_unstable_by(keep - 1, order);
        scored.truncate(keep);
    }
    scored.sort_unstable_by(order);
    Ok(scored.into_iter().map(|(_, i)| i).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_atoms(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<f64> {
        let mut atoms = Vec::new();
        for _ in 0..n {
            let mut a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            normalize_in_place(&mut a);
            atoms.extend(a);
        }
        atoms
    }

    #[test]
    fn nearest_matches_full_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let atoms = random_atoms(&mut rng, 500, 16);
        let mut q: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        normalize_in_place(&mut q);
        let got = nearest_atoms(&q, &atoms, 16, 50).unwrap();
        let mut all: Vec<(f64, usize)> = (0..500)
            .map(|i| {
                let d: f64 = (0..16).map(|k| (atoms[i * 16 + k] - q[k]).powi(2)).sum();
                (d, i)
            })
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected: Vec<usize> = all[..50].iter().map(|p| p.1).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn whole_gallery_when_count_exceeds_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let atoms = random_atoms(&mut rng, 7, 5);
        let q = atoms[3 * 5..4 * 5].to_vec();
        let got = nearest_atoms(&q, &atoms, 5, 200).unwrap();
        assert_eq!(got.len(), 7);
        assert_eq!(got[0], 3);
        let mut sorted = got.clone();
        sorted.sort();
        assert_eq!(sorted, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn ties_prefer_lower_index() {
        let atoms = vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        assert_eq!(nearest_atoms(&[1.0, 0.0], &atoms, 2, 4).unwrap(), vec![0, 2, 1, 3]);
    }

    #[test]
    fn empty_gallery_is_an_error() {
        assert!(nearest_atoms(&[1.0], &[], 1, 3).is_err());
    }

    #[test]
    fn columns_are_unit_norm() {
        let d = Dictionary::from_columns(3, &[vec![3.0, 4.0, 0.0], vec![0.0, 0.0, 0.0]], vec![0, 1]).unwrap();
        assert!((norm(d.atom(0)) - 1.0).abs() < 1e-12);
        assert_eq!(d.atom(1), &[0.0, 0.0, 0.0]);
        assert_eq!(d.reconstruct(&[5.0, 2.0]), vec![3.0, 4.0, 0.0]);
    }
}
