use serde::{Deserialize, Serialize};

/// Dense category × borough matrix, stored category-major.
///
/// Row `k` is a category, column `b` a borough; this order is the canonical
/// iteration order used everywhere in the crate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    categories: usize,
    boroughs: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(categories: usize, boroughs: usize, value: T) -> Self {
        Self {
            categories,
            boroughs,
            data: vec![value; categories * boroughs],
        }
    }
}

impl<T> Grid<T> {
    /// Builds a grid from rows (one row per category). Returns `None` for ragged input.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Option<Self> {
        let categories = rows.len();
        let boroughs = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != boroughs) {
            return None;
        }
        Some(Self {
            categories,
            boroughs,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Builds a grid from a category-major flat vector.
    pub fn from_vec(categories: usize, boroughs: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == categories * boroughs).then_some(Self {
            categories,
            boroughs,
            data,
        })
    }

    pub fn from_fn(categories: usize, boroughs: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(categories * boroughs);
        for k in 0..categories {
            for b in 0..boroughs {
                data.push(f(k, b));
            }
        }
        Self {
            categories,
            boroughs,
            data,
        }
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn boroughs(&self) -> usize {
        self.boroughs
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.categories, self.boroughs)
    }

    pub fn get(&self, k: usize, b: usize) -> &T {
        &self.data[k * self.boroughs + b]
    }

    pub fn get_mut(&mut self, k: usize, b: usize) -> &mut T {
        &mut self.data[k * self.boroughs + b]
    }

    pub fn set(&mut self, k: usize, b: usize, value: T) {
        self.data[k * self.boroughs + b] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Iterates `((k, b), value)` in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &T)> {
        let boroughs = self.boroughs.max(1);
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| ((i / boroughs, i % boroughs), v))
    }

    /// Column view for one borough.
    pub fn column(&self, b: usize) -> impl Iterator<Item = &T> {
        (0..self.categories).map(move |k| self.get(k, b))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            categories: self.categories,
            boroughs: self.boroughs,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Copy> Grid<T> {
    pub fn at(&self, k: usize, b: usize) -> T {
        self.data[k * self.boroughs + b]
    }
}
