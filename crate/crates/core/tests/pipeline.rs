use optomech::coherent::{coherent_response, response_at, CoherentTrace};
use optomech::fitting::{self, FitOptions, SharedParam};
use optomech::grid;
use optomech::io;
use optomech::params::{hz, presets, SystemParams, TWO_PI};
use optomech::response::LinearModel;
use optomech::spectra::{self, CalibrationTone, Spectrum};
use optomech::Error;

/// Adds a single-bin tone line of the given area (per 2π) at grid index `k`.
fn add_tone(s: &Spectrum, k: usize, area: f64) -> Spectrum {
    let dx = s.grid[k + 1] - s.grid[k];
    let mut v = s.values.clone();
    v[k] += TWO_PI * area / dx;
    Spectrum::new(s.grid.clone(), v, s.unit_label.clone()).unwrap()
}

#[test]
fn calibration_transfers_hidden_gain_between_runs() {
    // Thermalized reference: weak probe, warm bath, bright local oscillator.
    let reference = SystemParams {
        abar0: 300.0,
        nbar_bath: 1.0e4,
        s_lo_amp: 1e6,
        ..presets::cooling_run()
    };
    let g = grid::uniform(reference.omega_m - hz(2e6), reference.omega_m + hz(2e6), 801).unwrap();
    let ref_gain = 3.7;
    let (hh_ref, _) = spectra::output_spectra(&reference, &g).unwrap();
    let tone_k = 600;
    let tone = CalibrationTone {
        omega: g[tone_k],
        depth: 1e-3,
    };
    let h_ref = response_at(&LinearModel::new(&reference).unwrap(), tone.omega).unwrap().norm();
    let raw_ref = add_tone(
        &hh_ref.scaled(ref_gain, "raw"),
        tone_k,
        ref_gain * tone.depth * tone.depth * h_ref * h_ref / 4.0,
    );
    let cal = spectra::calibrate(&raw_ref, &reference, Some(&tone)).unwrap();
    assert!((cal.gain / ref_gain - 1.0).abs() < 1e-3, "gain {}", cal.gain);

    // Cold run with a different, unknown detection gain.
    let run = presets::cooling_run();
    let run_gain: f64 = 0.42;
    let h_run = response_at(&LinearModel::new(&run).unwrap(), tone.omega).unwrap().norm();
    let measured_tone = run_gain.sqrt() * h_run;
    let transferred = cal.transfer(measured_tone, h_run).unwrap();
    assert!((transferred.gain / run_gain - 1.0).abs() < 2e-3);

    let gn = grid::uniform(run.omega_m - hz(10e6), run.omega_m + hz(10e6), 201).unwrap();
    let (hh_run, _) = spectra::output_spectra(&run, &gn).unwrap();
    let fit = fitting::fit_noise_amplitude(&hh_run.scaled(run_gain, "raw"), &run, &transferred).unwrap();
    assert!((fit.gamma / (run.gamma_m * run.nbar_bath) - 1.0).abs() < 3e-3);
}

#[test]
fn calibration_rejects_missing_tone() {
    let reference = SystemParams {
        abar0: 300.0,
        nbar_bath: 1.0e4,
        ..presets::cooling_run()
    };
    let g = grid::uniform(reference.omega_m - hz(2e6), reference.omega_m + hz(2e6), 801).unwrap();
    let (hh, _) = spectra::output_spectra(&reference, &g).unwrap();
    let tone = CalibrationTone {
        omega: g[600],
        depth: 1e-3,
    };
    assert!(matches!(
        spectra::calibrate(&hh, &reference, Some(&tone)),
        Err(Error::Calibration(_))
    ));
}

fn series(truth: &SystemParams, ratios: &[f64], n: usize, drift_ptr: Option<f64>) -> Vec<CoherentTrace> {
    let g = grid::uniform(truth.omega_m - hz(14e6), truth.omega_m + hz(14e6), n).unwrap();
    ratios
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut q = truth.with_detuning(r * truth.omega_m);
            if let Some(step) = drift_ptr {
                q.g_ptr = truth.g_ptr * (1.0 + step * (i as f64 - 2.0));
            }
            coherent_response(&q, &g).unwrap()
        })
        .collect()
}

#[test]
fn per_parameter_scatter_vanishes_on_noiseless_data() {
    let truth = presets::cooling_run();
    let traces = series(&truth, &[-1.1, -1.05, -1.0, -0.95, -0.9], 300, None);
    let opts = FitOptions {
        free: vec![SharedParam::OmegaM, SharedParam::Kappa, SharedParam::Abar0],
        ..FitOptions::default()
    };
    let sc = fitting::per_parameter_scatter_with(&traces, &truth, &opts).unwrap();
    assert_eq!(sc.len(), 3);
    for (which, d) in sc {
        assert!(d / which.get(&truth).abs() < 1e-6, "{}: {d}", which.name());
    }
}

#[test]
fn per_parameter_scatter_isolates_a_drifting_parameter() {
    let truth = presets::cooling_run();
    let traces = series(&truth, &[-1.1, -1.05, -1.0, -0.95, -0.9], 300, Some(0.2));
    let opts = FitOptions {
        free: vec![SharedParam::OmegaM, SharedParam::Kappa, SharedParam::GPtr],
        ..FitOptions::default()
    };
    let sc = fitting::per_parameter_scatter_with(&traces, &truth, &opts).unwrap();
    let rel = |w: SharedParam| sc[&w] / w.get(&truth).abs();
    assert!(rel(SharedParam::GPtr) > 0.1, "g_ptr {}", rel(SharedParam::GPtr));
    assert!(rel(SharedParam::OmegaM) < 1e-4, "omega_m {}", rel(SharedParam::OmegaM));
}

#[test]
fn photothermal_parameters_need_several_detunings() {
    let truth = presets::cooling_run();
    let traces = series(&truth, &[-1.0], 200, None);
    assert!(matches!(
        fitting::fit_coherent_series(&traces, &truth),
        Err(Error::Degenerate(_))
    ));
}

#[test]
fn regenerated_traces_match_fitted_series() {
    let truth = presets::cooling_run();
    let traces = series(&truth, &[-1.1, -1.0, -0.9], 400, None);
    let init = SystemParams {
        omega_m: truth.omega_m + hz(5e3),
        ..truth.with_kappa(truth.kappa() * 1.02)
    };
    let opts = FitOptions {
        free: vec![SharedParam::OmegaM, SharedParam::Kappa, SharedParam::Abar0],
        ..FitOptions::default()
    };
    let fit = fitting::fit_coherent_series_with(&traces, &init, &opts).unwrap();
    assert!(fit.converged);
    for (i, t) in traces.iter().enumerate() {
        let again = coherent_response(&fit.trace_params(i), &t.grid).unwrap();
        let num: f64 = again.response.iter().zip(&t.response).map(|(a, b)| (a.norm() - b.norm()).powi(2)).sum();
        let den: f64 = t.response.iter().map(|b| b.norm_sqr()).sum();
        assert!((num / den).sqrt() < 1e-6);
    }
}

#[test]
fn csv_files_round_trip() {
    let p = presets::cooling_run();
    let g = grid::uniform(p.omega_m - hz(1e6), p.omega_m + hz(1e6), 11).unwrap();
    let (hh, _) = spectra::output_spectra(&p, &g).unwrap();
    let text = io::write_spectrum_csv(&hh, &["note".to_string()]);
    let back = io::read_spectrum_csv(&text).unwrap();
    for (a, b) in back.values.iter().zip(&hh.values) {
        assert!((a / b - 1.0).abs() < 1e-14);
    }
    let tr = coherent_response(&p, &g).unwrap();
    let back = io::read_coherent_csv(&io::write_coherent_csv(&tr, &[])).unwrap();
    for (a, b) in back.response.iter().zip(&tr.response) {
        assert!((a - b).norm() < 1e-14 * b.norm());
    }
}

#[test]
fn config_round_trip_through_text() {
    let cfg = io::Config {
        params: presets::cooling_run(),
        pulse: None,
        extra: Default::default(),
    };
    let text = io::format_config(&cfg);
    let back = io::parse_config(&text).unwrap();
    let a = io::param_entries(&cfg.params);
    let b = io::param_entries(&back.params);
    for ((ka, va), (kb, vb)) in a.iter().zip(&b) {
        assert_eq!(ka, kb);
        assert!((va - vb).abs() <= 1e-12 * va.abs().max(1e-300), "{ka}");
    }
}
