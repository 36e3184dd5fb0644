//! Cascaded response `R_c = H_r · Q_c` and ripple measurement.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::adc_model::AdcModel;
use crate::design_grid::{linspace, Band, DesignSpec, ErrorReference};
use crate::minimax_design::{desired_response, FirFilter};

/// Frequency response `Σ h[n] e^{−jxn}` of an FIR filter.
pub fn filter_response(filter: &FirFilter, x: f64) -> Complex64 {
    let z = Complex64::cis(-x);
    filter
        .coeffs()
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &h| acc * z + h)
}

/// Response of the converter followed by the filter.
pub fn equalized_response(filter: &FirFilter, model: &AdcModel, x: f64) -> Complex64 {
    filter_response(filter, x) * model.response_at(x)
}

/// Unweighted approximation error in the given band: `|R_c − D|` at the output, or
/// `|H_r − D/Q_c|` referred to the equalizer.
pub fn approximation_error(filter: &FirFilter, model: &AdcModel, x: f64, band: Band, reference: ErrorReference) -> f64 {
    let d = desired_response(filter.order(), x, band);
    match reference {
        ErrorReference::Output => (equalized_response(filter, model, x) - d).norm(),
        ErrorReference::Equalizer => (filter_response(filter, x) - d / model.response_at(x)).norm(),
    }
}

/// Achieved passband and stopband ripples (linear).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ripples {
    pub passband: f64,
    pub stopband: f64,
}

impl Ripples {
    pub fn passband_db(&self) -> f64 {
        to_db(self.passband)
    }
    pub fn stopband_db(&self) -> f64 {
        to_db(self.stopband)
    }
    pub fn product(&self) -> f64 {
        self.passband * self.stopband
    }
}

/// `20·log10(v)`, relative to unity passband gain.
pub fn to_db(v: f64) -> f64 {
    20.0 * v.log10()
}

/// `10^(−db/20)` for an attenuation given as a positive number of dB.
pub fn from_attenuation_db(db: f64) -> f64 {
    10f64.powf(-db / 20.0)
}

/// Measures ripples on uniform `n_verify`-point grids over `[0, x_e]` and `[x_e + Δ, π]`,
/// in the error reference of `spec`.
pub fn measure_ripples(filter: &FirFilter, model: &AdcModel, spec: &DesignSpec, n_verify: usize) -> Ripples {
    let band_max = |lo: f64, hi: f64, band: Band| {
        linspace(lo, hi, n_verify)
            .map(|x| approximation_error(filter, model, x, band, spec.reference))
            .fold(0.0, f64::max)
    };
    Ripples {
        passband: band_max(0.0, spec.passband_edge, Band::Passband),
        stopband: band_max(spec.stopband_edge(), PI, Band::Stopband),
    }
}

/// Frequencies of the verification grid, tagged by band, in ascending order.
pub fn verification_grid(spec: &DesignSpec, n_verify: usize) -> Vec<(f64, Band)> {
    linspace(0.0, spec.passband_edge, n_verify)
        .map(|x| (x, Band::Passband))
        .chain(linspace(spec.stopband_edge(), PI, n_verify).map(|x| (x, Band::Stopband)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fir(h: &[f64]) -> FirFilter {
        FirFilter::new(h.to_vec()).unwrap()
    }

    #[test]
    fn impulse_delay_and_dc() {
        let one = filter_response(&fir(&[1.0]), 1.234);
        assert_relative_eq!(one.re, 1.0);
        assert_eq!(one.im, 0.0);
        let d = filter_response(&fir(&[0.0, 1.0]), PI);
        assert_relative_eq!(d.re, -1.0, epsilon = 1e-15);
        assert!(d.im.abs() < 1e-15);
        let avg = filter_response(&fir(&[0.5, 0.5]), 0.0);
        assert_relative_eq!(avg.re, 1.0);
        assert_eq!(avg.im, 0.0);
    }

    #[test]
    fn cascade_with_unit_filter() {
        let rc = AdcModel::first_order_rc(0.7 * PI).unwrap();
        let r = equalized_response(&fir(&[1.0]), &rc, 0.7 * PI);
        assert_relative_eq!(r.norm(), 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        for x in [0.0, 0.3, 2.0, PI] {
            assert_eq!(equalized_response(&fir(&[1.0]), &AdcModel::Ideal, x), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn unit_filter_ripples() {
        let spec = DesignSpec::from_pi_units(0.8, 0.1, 0.1, 0.1).unwrap();
        let r = measure_ripples(&fir(&[1.0]), &AdcModel::Ideal, &spec, 1024);
        assert_eq!(r.passband, 0.0);
        assert_eq!(r.stopband, 1.0);
    }

    #[test]
    fn references_differ_by_converter_gain() {
        let rc = AdcModel::first_order_rc(0.7 * PI).unwrap();
        let f = fir(&[0.1, 0.8, 0.1]);
        for (x, band) in [(0.3, Band::Passband), (0.95 * PI, Band::Stopband)] {
            let out = approximation_error(&f, &rc, x, band, ErrorReference::Output);
            let eq = approximation_error(&f, &rc, x, band, ErrorReference::Equalizer);
            assert_relative_eq!(out, eq * rc.response(x).unwrap().norm(), max_relative = 1e-12);
        }
    }

    #[test]
    fn db_conversions() {
        assert_relative_eq!(from_attenuation_db(20.0), 0.1, max_relative = 1e-15);
        assert_relative_eq!(to_db(1e-4), -80.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn horner_matches_direct_sum(h in proptest::collection::vec(-1.0f64..1.0, 1..40), x in 0.0f64..PI) {
            let direct: Complex64 = h.iter().enumerate()
                .map(|(n, &c)| c * Complex64::cis(-x * n as f64)).sum();
            let fast = filter_response(&fir(&h), x);
            prop_assert!((direct - fast).norm() < 1e-12);
        }

        #[test]
        fn real_coefficients_give_conjugate_symmetry(h in proptest::collection::vec(-1.0f64..1.0, 1..40), x in 0.0f64..PI) {
            let f = fir(&h);
            prop_assert!((filter_response(&f, -x) - filter_response(&f, x).conj()).norm() < 1e-12);
        }
    }
}
