use erasure_core::measurement::{draw_pairs, gaussian_channel_mi, mi_monte_carlo, mi_quadrature, MixtureModel, SensorModel};
use erasure_core::rng::stream_id;

#[test]
fn monte_carlo_is_centred_on_quadrature() {
    let mix = MixtureModel { p_left: 0.5, half_separation: 550.0, sigma_thermal: 43.0 };
    let sensor = SensorModel::new(300.0).unwrap();
    let quad = mi_quadrature(&mix, &sensor).unwrap();
    let zs: Vec<f64> = (0..40)
        .map(|k| {
            let pairs = draw_pairs(&mix, &sensor, 20_000, 7, stream_id(1, k));
            let mc = mi_monte_carlo(&pairs, &mix, &sensor).unwrap();
            (mc.value - quad) / mc.std_error
        })
        .collect();
    let mean = zs.iter().sum::<f64>() / zs.len() as f64;
    let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (zs.len() - 1) as f64;
    // 40 standard normals: mean within ~4/√40, variance near 1
    assert!(mean.abs() < 0.6, "mean z {mean}");
    assert!((0.5..1.6).contains(&var), "var z {var}");
}

#[test]
fn asymmetric_prior_lowers_information() {
    let sensor = SensorModel::new(300.0).unwrap();
    let sym = MixtureModel { p_left: 0.5, half_separation: 550.0, sigma_thermal: 43.0 };
    let skew = MixtureModel { p_left: 0.9, ..sym };
    assert!(mi_quadrature(&skew, &sensor).unwrap() < mi_quadrature(&sym, &sensor).unwrap());
    // a sharp sensor resolves the well (binary entropy) plus the thermal position
    let sharp = SensorModel::new(10.0).unwrap();
    let h_prior = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
    let expected = h_prior + gaussian_channel_mi(43.0, 10.0);
    let got = mi_quadrature(&skew, &sharp).unwrap();
    assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
}
