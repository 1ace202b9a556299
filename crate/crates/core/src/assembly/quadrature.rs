//! Symmetric quadrature rules on the reference triangle.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Barycentric point and weight; weights sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint<T> {
    pub bary: [T; 3],
    pub weight: T,
}

/// Orders with a rule available.
pub const SUPPORTED_ORDERS: [usize; 5] = [1, 2, 3, 4, 6];

fn orbit3(out: &mut Vec<([f64; 3], f64)>, a: f64, b: f64, w: f64) {
    for bary in [[a, b, b], [b, a, b], [b, b, a]] {
        out.push((bary, w));
    }
}

/// Rule exact for polynomials of total degree `order`.
pub fn triangle_quadrature<T: Real>(order: usize) -> Result<Vec<QuadPoint<T>>> {
    let third = 1.0 / 3.0;
    let mut pts = Vec::new();
    match order {
        1 => pts.push(([third; 3], 1.0)),
        2 => orbit3(&mut pts, 0.0, 0.5, third),
        3 => {
            pts.push(([third; 3], -27.0 / 48.0));
            orbit3(&mut pts, 0.6, 0.2, 25.0 / 48.0);
        }
        4 => {
            orbit3(&mut pts, 0.108103018168070, 0.445948490915965, 0.223381589678011);
            orbit3(&mut pts, 0.816847572980459, 0.091576213509771, 0.109951743655322);
        }
        6 => {
            orbit3(&mut pts, 0.501426509658179, 0.249286745170910, 0.116786275726379);
            orbit3(&mut pts, 0.873821971016996, 0.063089014491502, 0.050844906370207);
            let (a, b, c) = (0.053145049844817, 0.310352451033784, 0.636502499121399);
            for bary in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                pts.push((bary, 0.082851075618374));
            }
        }
        _ => return Err(Error::UnsupportedQuadrature(order)),
    }
    Ok(pts
        .into_iter()
        .map(|(b, w)| QuadPoint {
            bary: [T::lit(b[0]), T::lit(b[1]), T::lit(b[2])],
            weight: T::lit(w),
        })
        .collect())
}
