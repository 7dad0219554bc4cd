//! Fixtures shared by the benchmarks.

use ndarray::Array2;
use relnet::{generate, GeneratorSpec, Graph};

/// Deterministic input batch with values in `[-1, 1)`.
pub fn input_batch(rows: usize, cols: usize) -> Array2<f32> {
    Array2::from_shape_fn((rows, cols), |(i, j)| {
        let h = (i * 7919 + j * 104_729) % 2000;
        h as f32 / 1000.0 - 1.0
    })
}

pub fn labels(rows: usize, classes: usize) -> Vec<usize> {
    (0..rows).map(|i| i % classes).collect()
}

/// ER graph at the experiment size.
pub fn er_graph(n: usize, p: f64) -> Graph {
    generate(&GeneratorSpec::er(n, p, 0)).expect("ER parameters are valid").graph
}
