//! Dense row-major tensors indexed by multi-dimensional coordinates.

use crate::game::GameError;

/// Dense tensor with a fixed shape. The last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Table<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Copy> Table<T> {
    pub fn from_flat(shape: Vec<usize>, data: Vec<T>) -> Result<Self, GameError> {
        let expected: usize = shape.iter().product();
        if shape.iter().any(|&s| s == 0) {
            return Err(GameError::ShapeMismatch(format!(
                "table shape {shape:?} has an empty axis"
            )));
        }
        if data.len() != expected {
            return Err(GameError::ShapeMismatch(format!(
                "table of shape {shape:?} needs {expected} entries, got {}",
                data.len()
            )));
        }
        Ok(Table { shape, data })
    }

    pub fn filled(shape: Vec<usize>, value: T) -> Self {
        let len: usize = shape.iter().product();
        Table { shape, data: vec![value; len] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len(), "index rank mismatch");
        let mut flat = 0;
        for (d, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.shape[d], "index {i} out of bounds on axis {d}");
            flat = flat * self.shape[d] + i;
        }
        flat
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.data[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: T) {
        let flat = self.flat_index(idx);
        self.data[flat] = value;
    }

    pub fn get_flat(&self, flat: usize) -> T {
        self.data[flat]
    }
}

/// Iterates every multi-index of a shape in row-major order.
pub fn each_index(shape: &[usize], mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; shape.len()];
    if shape.iter().any(|&s| s == 0) {
        return;
    }
    loop {
        f(&idx);
        // odometer increment, last axis fastest
        let mut axis = shape.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < shape[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// Row-major flat index of `idx` within `shape`.
pub fn flat_index_of(shape: &[usize], idx: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), idx.len());
    let mut flat = 0;
    for (d, &i) in idx.iter().enumerate() {
        debug_assert!(i < shape[d]);
        flat = flat * shape[d] + i;
    }
    flat
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_layout_matches_row_major() {
        let t = Table::from_flat(vec![2, 3], (0..6).collect::<Vec<i64>>()).unwrap();
        assert_eq!(t.get(&[0, 0]), 0);
        assert_eq!(t.get(&[0, 2]), 2);
        assert_eq!(t.get(&[1, 0]), 3);
        assert_eq!(t.get(&[1, 2]), 5);
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(Table::from_flat(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Table::<f64>::from_flat(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn each_index_visits_all_cells_in_order() {
        let mut seen = Vec::new();
        each_index(&[2, 2], |ix| seen.push(ix.to_vec()));
        assert_eq!(
            seen,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
    }
}
