use polydepth::commands::benchmark::{run_benchmark, BINS};
use polydepth::config::{RunConfig, Settings};

fn sweep(extra: Settings) -> polydepth::commands::benchmark::BenchmarkOutput {
    let s = Settings {
        frames: Some(60),
        seed: Some(21),
        jobs: Some(2),
        sigma_px_list: Some(vec![0.0, 0.5, 1.0, 2.0, 4.0]),
        sigma_height_list: Some(vec![0.0]),
        no_depth: Some(true),
        ..extra
    };
    run_benchmark(&RunConfig::resolve(s, None).unwrap()).unwrap()
}

#[test]
fn noiseless_cell_is_exact() {
    let out = sweep(Settings::default());
    let c = &out.cells[0];
    assert_eq!(c.sigma_px, 0.0);
    assert!(c.objects > 0);
    assert!(c.mean_abs_dx < 1e-9 && c.mean_abs_dz < 1e-9);
    assert_eq!(c.hist_dz[0], c.objects);
    assert_eq!(c.ap_moderate, [Some(1.0); 4]);
}

#[test]
fn errors_grow_with_pixel_noise() {
    let out = sweep(Settings { ensemble: Some(3), ..Settings::default() });
    for w in out.cells.windows(2) {
        assert!(w[1].mean_abs_dz >= w[0].mean_abs_dz, "{} -> {}", w[0].mean_abs_dz, w[1].mean_abs_dz);
        assert!(w[1].mean_abs_dx >= w[0].mean_abs_dx);
    }
    let ap07 = |i: usize| out.cells[i].ap_moderate[3].unwrap();
    assert!(ap07(2) < ap07(0));
}

#[test]
fn histograms_account_for_every_object() {
    let out = sweep(Settings { sigma_height: None, ensemble: Some(2), ..Settings::default() });
    for c in &out.cells {
        assert_eq!(c.hist_dx.iter().sum::<usize>(), c.objects);
        assert_eq!(c.hist_dz.iter().sum::<usize>(), c.objects);
        assert_eq!(c.hist_dx.len(), BINS + 1);
    }
    let rows = out.histogram_csv.lines().count();
    assert_eq!(rows, 1 + out.cells.len() * 2 * (BINS + 1));
    assert_eq!(out.sweep_csv.lines().count(), 1 + out.cells.len());
}
