use bandedge::cheby::{
    erdos_turan_gap_bound, hutchinson_trace, measure_cheb_coeff, nb_moment_traces, wigner_sup_distance, SpectralMeasure,
};
use bandedge::edge::{edge_eigenvector, eigenvalues, ipr, median, EigenOptions, Side};
use bandedge::sampler::{sample_band_matrix, BandParams, SeedSpec, Symmetry};

#[test]
fn hutchinson_is_unbiased() {
    let p = BandParams::new(60, 3, Symmetry::Signs).unwrap();
    let h = sample_band_matrix(&p, &SeedSpec::new(17, 0));
    let n = 4;
    let exact = nb_moment_traces(&h, n).unwrap()[n];
    let runs: Vec<f64> = (0..200)
        .map(|r| hutchinson_trace(&h, n, 8, &SeedSpec::new(1000, r)).unwrap().estimate)
        .collect();
    let m = runs.len() as f64;
    let mean = runs.iter().sum::<f64>() / m;
    let sem = (runs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt();
    assert!(
        (mean - exact).abs() <= 4.0 * sem,
        "mean {mean}, exact {exact}, sem {sem}"
    );
}

#[test]
fn ipr_contrast_between_regimes() {
    let n = 2048;
    let medians: Vec<f64> = [n / 2, 16]
        .iter()
        .map(|&w| {
            let p = BandParams::new(n, w, Symmetry::Signs).unwrap();
            let iprs: Vec<f64> = (0..3)
                .map(|r| {
                    let h = sample_band_matrix(&p, &SeedSpec::new(2048, r));
                    ipr(&edge_eigenvector(&h, Side::Right, &EigenOptions::default()).unwrap()).unwrap()
                })
                .collect();
            median(&iprs).unwrap()
        })
        .collect();
    eprintln!("median edge IPR: W = N/2 {:.3e}, W = 16 {:.3e}", medians[0], medians[1]);
    assert!(medians[1] >= 4.0 * medians[0]);
}

// Reported, not asserted: the bound uses C = 1 and the true constant is unknown.
#[test]
fn erdos_turan_diagnostic() {
    let p = BandParams::new(2000, 64, Symmetry::Signs).unwrap();
    let h = sample_band_matrix(&p, &SeedSpec::new(6, 0));
    let ev = eigenvalues(&h).unwrap();
    let mu = SpectralMeasure::empirical(&ev).unwrap();
    let s = 20;
    let coeffs: Vec<f64> = (1..=s).map(|k| measure_cheb_coeff(&mu, k).abs()).collect();
    let gap = wigner_sup_distance(&ev).unwrap();
    let bound = erdos_turan_gap_bound(&coeffs, 0.0, s).unwrap();
    eprintln!("sup gap {gap:.4e}, bound at 0 {bound:.4e}, ratio {:.3}", gap / bound);
    assert!(gap.is_finite() && bound > 0.0);
}
