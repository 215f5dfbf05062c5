//! Location Markov chain over a rectangular grid.
//!
//! Cells are indexed row-major: cell `(row, col)` is `row * width + col`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adjacency {
    /// Up, down, left, right.
    #[default]
    VonNeumann,
    /// The eight surrounding cells.
    Moore,
}

/// Row-stochastic transition matrix; `matrix[l][next]` is the probability of
/// moving from `l` to `next` in one slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobilityModel<T> {
    width: usize,
    height: usize,
    matrix: Vec<Vec<T>>,
}

impl<T: Scalar> MobilityModel<T> {
    pub fn from_matrix(width: usize, height: usize, matrix: Vec<Vec<T>>) -> Result<Self> {
        let n = width * height;
        if n == 0 {
            return Err(Error::Config("mobility grid must have at least one cell".into()));
        }
        if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
            return Err(Error::Config(format!(
                "transition matrix must be {n}x{n} for a {width}x{height} grid"
            )));
        }
        for (l, row) in matrix.iter().enumerate() {
            if row.iter().any(|&p| p < T::zero()) {
                return Err(Error::Config(format!("row {l} has a negative probability")));
            }
            let total = T::sum_of(row.iter().copied());
            if total.abs_diff(T::one()) > T::tolerance() {
                return Err(Error::Config(format!(
                    "row {l} sums to {:?}, not 1",
                    total
                )));
            }
        }
        Ok(Self {
            width,
            height,
            matrix,
        })
    }

    /// A model that never moves.
    pub fn stationary(width: usize, height: usize) -> Result<Self> {
        build_grid_mobility(width, height, T::one(), Adjacency::VonNeumann)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    pub fn row(&self, location: usize) -> &[T] {
        &self.matrix[location]
    }

    pub fn probability(&self, from: usize, to: usize) -> T {
        self.matrix[from][to]
    }

    /// Same chain with every probability passed through `f`. Row sums are
    /// not re-validated.
    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> MobilityModel<U> {
        MobilityModel {
            width: self.width,
            height: self.height,
            matrix: self
                .matrix
                .iter()
                .map(|row| row.iter().map(|&p| f(p)).collect())
                .collect(),
        }
    }

    /// Nonzero `(next, probability)` pairs out of `location`.
    pub fn transitions(&self, location: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        self.matrix[location]
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, p)| *p > T::zero())
    }
}

/// Grid neighbours of `cell` in row-major order.
pub fn neighbours(width: usize, height: usize, cell: usize, adjacency: Adjacency) -> Vec<usize> {
    let (row, col) = ((cell / width) as isize, (cell % width) as isize);
    let offsets: &[(isize, isize)] = match adjacency {
        Adjacency::VonNeumann => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
        Adjacency::Moore => &[
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ],
    };
    offsets
        .iter()
        .map(|(dr, dc)| (row + dr, col + dc))
        .filter(|&(r, c)| r >= 0 && c >= 0 && (r as usize) < height && (c as usize) < width)
        .map(|(r, c)| r as usize * width + c as usize)
        .collect()
}

/// The user stays put with `stay_prob` and otherwise moves to one of the
/// grid neighbours with equal probability.
pub fn build_grid_mobility<T: Scalar>(
    width: usize,
    height: usize,
    stay_prob: T,
    adjacency: Adjacency,
) -> Result<MobilityModel<T>> {
    let n = width * height;
    if n == 0 {
        return Err(Error::Config("mobility grid must have at least one cell".into()));
    }
    if stay_prob < T::zero() || stay_prob > T::one() {
        return Err(Error::Config(format!(
            "stay probability {:?} outside [0, 1]",
            stay_prob
        )));
    }
    let mut matrix = vec![vec![T::zero(); n]; n];
    for (cell, row) in matrix.iter_mut().enumerate() {
        row[cell] = stay_prob;
        let around = neighbours(width, height, cell, adjacency);
        let move_mass = T::one() - stay_prob;
        if around.is_empty() {
            if move_mass > T::zero() {
                return Err(Error::Config(format!(
                    "cell {cell} has no neighbour to receive probability {:?}",
                    move_mass
                )));
            }
            continue;
        }
        let share = move_mass / T::from_units(around.len() as u64);
        for next in around {
            row[next] = share;
        }
    }
    MobilityModel::from_matrix(width, height, matrix)
}

pub fn next_location<T: Scalar, R: Rng + ?Sized>(
    model: &MobilityModel<T>,
    current: usize,
    rng: &mut R,
) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = current;
    for (next, p) in model.transitions(current) {
        acc += p.as_f64();
        last = next;
        if u < acc {
            return next;
        }
    }
    // rounding left a sliver of mass past the final cumulative value
    last
}

/// Realized path of `horizon` locations starting at `start`.
pub fn sample_trace<T: Scalar, R: Rng + ?Sized>(
    model: &MobilityModel<T>,
    start: usize,
    horizon: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut trace = Vec::with_capacity(horizon);
    let mut at = start;
    for t in 0..horizon {
        if t > 0 {
            at = next_location(model, at, rng);
        }
        trace.push(at);
    }
    trace
}
