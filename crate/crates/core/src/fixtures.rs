//! The eight-good reference economy: two raw resources feeding six companies.
//!
//! The technology levels were recovered from the first-order conditions of
//! the published optimal plan; prices are the published vector.

use crate::economy::Economy;

/// Nonzero production coefficients, 1-based `(supplier, consumer, beta)`.
pub const E8_BETA: [(usize, usize, f64); 12] = [
    (1, 3, 0.4),
    (1, 4, 0.4),
    (2, 3, 0.4),
    (2, 5, 0.1),
    (3, 4, 0.4),
    (3, 6, 0.1),
    (4, 5, 0.3),
    (4, 6, 0.6),
    (4, 7, 0.2),
    (5, 7, 0.2),
    (6, 8, 0.6),
    (7, 8, 0.2),
];

pub const E8_ALPHA: [f64; 8] = [1.0, 1.0, 4.0, 10.0, 10.0, 2.0, 8.0, 6.0];

pub const E8_PRICES: [f64; 8] = [1.21, 1.1, 1.33, 1.46, 1.61, 1.77, 1.95, 2.14];

/// Published optimal flows, 1-based `(supplier, consumer, flow)`.
pub const E8_OPTIMAL_FLOWS: [(usize, usize, f64); 12] = [
    (1, 3, 298.4),
    (1, 4, 740.6),
    (2, 3, 328.3),
    (2, 5, 2.8),
    (3, 4, 393.8),
    (3, 6, 2.9),
    (4, 5, 6.4),
    (4, 6, 27.5),
    (4, 7, 3.4),
    (5, 7, 3.1),
    (6, 8, 16.3),
    (7, 8, 11.4),
];

pub fn e8() -> Economy {
    Economy::from_triplets(2, 8, &E8_BETA, E8_ALPHA.to_vec(), E8_PRICES.to_vec())
        .expect("fixture is well-formed")
}
