use crate::error::{Error, Result};

/// `{v}_H = 2 v+ v- / (v+ + v-)`.
pub fn harmonic_average(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// One side of an internal face as seen by the penalty.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltySide {
    /// Element diameter h, mm.
    pub diameter: f64,
    /// Spectral norm of the element's diffusion tensor, mm^2/year.
    pub diffusivity: f64,
}

/// Interior penalty `eta = ell^2 / {h}_H * eta0 * max({d^K}_H, alpha)`.
///
/// The diffusivity and the reaction rate enter `max` with their raw
/// magnitudes, whatever their units.
pub fn face_penalty(
    degree: usize,
    eta0: f64,
    alpha: f64,
    plus: PenaltySide,
    minus: PenaltySide,
) -> Result<f64> {
    if !(plus.diameter > 0.0) || !(minus.diameter > 0.0) {
        return Err(Error::Geometry(format!(
            "degenerate element diameter ({}, {}) at a face",
            plus.diameter, minus.diameter
        )));
    }
    let h = harmonic_average(plus.diameter, minus.diameter);
    let d = if plus.diffusivity + minus.diffusivity > 0.0 {
        harmonic_average(plus.diffusivity, minus.diffusivity)
    } else {
        0.0
    };
    let l2 = (degree * degree) as f64;
    Ok(l2 / h * eta0 * d.max(alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn side(h: f64, d: f64) -> PenaltySide {
        PenaltySide {
            diameter: h,
            diffusivity: d,
        }
    }

    #[test]
    fn harmonic_average_values() {
        assert_eq!(harmonic_average(1.7, 1.7), 1.7);
        assert!((harmonic_average(2.0, 4.0) - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn reference_penalty_is_3520() {
        let eta = face_penalty(2, 10.0, 0.61, side(1.0, 88.0), side(1.0, 88.0)).unwrap();
        assert_eq!(eta, 3520.0);
    }

    #[test]
    fn penalty_is_symmetric_in_neighbours() {
        let a = face_penalty(3, 10.0, 0.5, side(0.3, 8.0), side(0.7, 50.0)).unwrap();
        let b = face_penalty(3, 10.0, 0.5, side(0.7, 50.0), side(0.3, 8.0)).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
    }

    #[test]
    fn alpha_dominates_when_diffusion_is_small() {
        let eta = face_penalty(1, 2.0, 3.0, side(1.0, 0.5), side(1.0, 0.5)).unwrap();
        assert_eq!(eta, 6.0);
    }

    #[test]
    fn zero_diameter_is_an_error() {
        assert!(face_penalty(2, 10.0, 0.61, side(0.0, 88.0), side(1.0, 88.0)).is_err());
    }
}
