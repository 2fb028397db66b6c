//! Millimetre-wave subarray geometry: spacing, line-of-sight rank and array factor.

use pmsim::channels::{array_factor_gain, mwc_channel, optimal_subarray_spacing, MwcGeometry};
use pmsim::numerics::{hermitian_eig, SimRng, C64};

fn main() -> pmsim::Result<()> {
    let g = MwcGeometry::example();
    let d = optimal_subarray_spacing(&g)?;
    println!("optimal subarray spacing: {:.2} cm", d * 100.0);

    for spacing in [0.02, d] {
        let geo = MwcGeometry { tx_spacing: Some(spacing), rx_spacing: Some(spacing), ..g.clone() };
        let h = geo.effective(&geo.los_matrix()?)?;
        let eig = hermitian_eig(&(&h.adjoint() * &h))?;
        let mut sv: Vec<f64> = eig.eigenvalues.iter().map(|e| e.max(0.0).sqrt()).collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        println!("spacing {:.2} cm: singular values {sv:.3?}", spacing * 100.0);
    }

    let mut rng = SimRng::new(1);
    let rician = MwcGeometry { rician_k: 10.0, ..g.clone() };
    let h = mwc_channel(&rician, &mut rng)?.h;
    println!("K = 10 effective channel, |h11| = {:.3}", h[(0, 0)].norm());

    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    for deg in [0.0f64, 10.0, 20.0, 30.0] {
        let a = deg.to_radians();
        let full = array_factor_gain(&[one; 4], d, g.wavelength, a)?;
        let half = array_factor_gain(&[one, one, zero, zero], d, g.wavelength, a)?;
        println!("{deg:>4} deg: all four subarrays {full:7.2} dB, two of four {half:7.2} dB");
    }
    Ok(())
}
